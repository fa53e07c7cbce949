#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "entrobar/network_simplex.hpp"

using namespace entrobar;

namespace {

PointCloud cloud(const std::vector<std::vector<double>>& pts, std::vector<double> w) {
    PointCloud c;
    c.points.resize(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(pts.front().size()));
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t k = 0; k < pts[i].size(); ++k) c.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = pts[i][k];
    c.weights = std::move(w);
    return c;
}

PointCloud random_cloud(std::mt19937_64& g, std::size_t n, std::size_t d, bool uniform_weights) {
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> u(0.1, 1.0);
    PointCloud c;
    c.points.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < c.points.rows(); ++i)
        for (Eigen::Index k = 0; k < c.points.cols(); ++k) c.points(i, k) = n01(g);
    c.weights.resize(n);
    for (auto& w : c.weights) w = uniform_weights ? 1.0 : u(g);
    const double s = std::accumulate(c.weights.begin(), c.weights.end(), 0.0);
    for (auto& w : c.weights) w /= s;
    return c;
}

double cost(const PointCloud& a, std::size_t i, const PointCloud& b, std::size_t j) {
    return 0.5 * (a.points.row(static_cast<Eigen::Index>(i)) - b.points.row(static_cast<Eigen::Index>(j))).squaredNorm();
}

// Uniform equal-size clouds: an optimal plan is a permutation.
double brute_force(const PointCloud& a, const PointCloud& b) {
    std::vector<std::size_t> perm(a.size());
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < perm.size(); ++i) c += a.weights[i] * cost(a, i, b, perm[i]);
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

void check_certificate(const PointCloud& a, const PointCloud& b, const DiscreteOTResult& r) {
    std::vector<double> row(a.size(), 0.0), col(b.size(), 0.0);
    for (const auto& e : r.plan) {
        EXPECT_GT(e.mass, 0.0);
        row[e.i] += e.mass;
        col[e.j] += e.mass;
        EXPECT_NEAR(r.u[e.i] + r.v[e.j], cost(a, e.i, b, e.j), 1e-10);
    }
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(row[i], a.weights[i], 1e-12);
    for (std::size_t j = 0; j < b.size(); ++j) EXPECT_NEAR(col[j], b.weights[j], 1e-12);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) EXPECT_LE(r.u[i] + r.v[j], cost(a, i, b, j) + 1e-10);
    EXPECT_NEAR(r.primal, r.dual, 1e-10);
}

}  // namespace

TEST(NetworkSimplex, IdenticalClouds) {
    const auto a = cloud({{0.0}, {1.0}, {2.5}}, {0.2, 0.5, 0.3});
    const auto r = ot_discrete(a, a);
    EXPECT_NEAR(r.w2, 0.0, 1e-12);
    for (const auto& e : r.plan) EXPECT_EQ(e.i, e.j);
    check_certificate(a, a, r);
}

TEST(NetworkSimplex, TwoPointMonotoneMatching) {
    const auto a = cloud({{0.0}, {1.0}}, {0.5, 0.5});
    const auto b = cloud({{2.0}, {3.0}}, {0.5, 0.5});
    const auto r = ot_discrete(a, b);
    EXPECT_NEAR(r.w2 * r.w2, 4.0, 1e-12);
    // Crossing matching costs 0.5 * 9 + 0.5 * 1 = 5.
    EXPECT_NEAR(2.0 * brute_force(a, b), 4.0, 1e-12);
    ASSERT_EQ(r.plan.size(), 2u);
    for (const auto& e : r.plan) EXPECT_EQ(e.i, e.j);
}

TEST(NetworkSimplex, MatchesBruteForce) {
    std::mt19937_64 g(2024);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 3 + trial % 5;
        const auto a = random_cloud(g, n, 2, true);
        const auto b = random_cloud(g, n, 2, true);
        const auto r = ot_discrete(a, b);
        EXPECT_NEAR(r.primal, brute_force(a, b), 1e-12) << trial;
        check_certificate(a, b, r);
    }
}

TEST(NetworkSimplex, OptimalityCertificateOnUnevenClouds) {
    std::mt19937_64 g(99);
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = random_cloud(g, 20 + trial, 2, false);
        const auto b = random_cloud(g, 35 - trial, 2, false);
        check_certificate(a, b, ot_discrete(a, b));
    }
}

TEST(NetworkSimplex, ZeroWeightPointsGetPotentials) {
    const auto a = cloud({{0.0}, {1.0}, {5.0}}, {0.5, 0.5, 0.0});
    const auto b = cloud({{0.5}, {1.5}}, {0.5, 0.5});
    const auto r = ot_discrete(a, b);
    check_certificate(a, b, r);
    for (const auto& e : r.plan) EXPECT_NE(e.i, 2u);
}

TEST(NetworkSimplex, DegenerateTiesAreDeterministic) {
    // Square corners to square corners: many optimal plans.
    const auto a = cloud({{0, 0}, {1, 0}, {0, 1}, {1, 1}}, {0.25, 0.25, 0.25, 0.25});
    const auto r1 = ot_discrete(a, a);
    const auto r2 = ot_discrete(a, a);
    ASSERT_EQ(r1.plan.size(), r2.plan.size());
    for (std::size_t k = 0; k < r1.plan.size(); ++k) {
        EXPECT_EQ(r1.plan[k].i, r2.plan[k].i);
        EXPECT_EQ(r1.plan[k].j, r2.plan[k].j);
        EXPECT_EQ(r1.plan[k].mass, r2.plan[k].mass);
    }
    EXPECT_EQ(r1.u, r2.u);
    EXPECT_EQ(r1.v, r2.v);
}

TEST(NetworkSimplex, SymmetricCost) {
    std::mt19937_64 g(5);
    const auto a = random_cloud(g, 15, 2, false);
    const auto b = random_cloud(g, 12, 2, false);
    EXPECT_NEAR(ot_discrete(a, b).w2, ot_discrete(b, a).w2, 1e-12);
}

TEST(NetworkSimplex, Errors) {
    const auto a = cloud({{0.0}, {1.0}}, {0.5, 0.5});
    EXPECT_THROW(ot_discrete(a, cloud({{0.0}}, {0.7})), InfeasibleTransportError);
    EXPECT_THROW(ot_discrete(a, cloud({{0.0, 1.0}}, {1.0})), ValidationError);
    EXPECT_THROW(ot_discrete(a, cloud({{0.0}, {1.0}}, {1.5, -0.5})), ValidationError);
    PointCloud big;
    big.points = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(kMaxDiscretePoints + 1), 1);
    big.weights.assign(kMaxDiscretePoints + 1, 1.0 / static_cast<double>(kMaxDiscretePoints + 1));
    EXPECT_THROW(ot_discrete(big, a), InfeasibleTransportError);
}
