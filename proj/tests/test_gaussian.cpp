#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "entrobar/gaussian.hpp"

using namespace entrobar;

namespace {

Eigen::MatrixXd random_spd(std::mt19937_64& g, int d, double floor = 0.1) {
    std::normal_distribution<double> n01;
    Eigen::MatrixXd A(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) A(i, j) = n01(g);
    return A * A.transpose() / d + floor * Eigen::MatrixXd::Identity(d, d);
}

Eigen::MatrixXd random_rotation(std::mt19937_64& g, int d) {
    std::normal_distribution<double> n01;
    Eigen::MatrixXd A(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) A(i, j) = n01(g);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    return qr.householderQ();
}

Population<GaussianMeasure> population(double lambda, const std::vector<Eigen::MatrixXd>& covs,
                                       const std::vector<Eigen::VectorXd>& means, const std::vector<double>& w) {
    std::vector<Atom<GaussianMeasure>> atoms;
    for (std::size_t i = 0; i < covs.size(); ++i) atoms.push_back({w[i], GaussianMeasure(means[i], covs[i])});
    return Population<GaussianMeasure>(lambda, atoms);
}

Eigen::MatrixXd diag(std::initializer_list<double> v) {
    Eigen::VectorXd d(static_cast<Eigen::Index>(v.size()));
    Eigen::Index k = 0;
    for (double x : v) d[k++] = x;
    return d.asDiagonal();
}

}  // namespace

TEST(SqrtSpd, Examples) {
    EXPECT_NEAR((sqrt_spd(Eigen::MatrixXd::Identity(3, 3)) - Eigen::MatrixXd::Identity(3, 3)).norm(), 0.0, 1e-15);
    EXPECT_NEAR((sqrt_spd(diag({4.0, 9.0})) - diag({2.0, 3.0})).norm(), 0.0, 1e-14);
    std::mt19937_64 g(3);
    const Eigen::MatrixXd S = random_spd(g, 4);
    const Eigen::MatrixXd R = sqrt_spd(S);
    EXPECT_NEAR((R * R - S).norm(), 0.0, 1e-12);
    EXPECT_NEAR((R - R.transpose()).norm(), 0.0, 1e-15);
}

TEST(SqrtSpd, RejectsIndefinite) {
    EXPECT_THROW(sqrt_spd(diag({1.0, -0.5})), ValidationError);
    Eigen::MatrixXd A(2, 2);
    A << 1.0, 0.5, 0.0, 1.0;
    EXPECT_THROW(sqrt_spd(A), ValidationError);
}

TEST(BuresMap, Examples) {
    const Eigen::MatrixXd S = diag({1.5, 0.4});
    EXPECT_NEAR((bures_map(S, S) - Eigen::MatrixXd::Identity(2, 2)).norm(), 0.0, 1e-12);
    EXPECT_NEAR(bures_map(diag({1.0}), diag({4.0}))(0, 0), 2.0, 1e-14);
    const Eigen::MatrixXd T = bures_map(diag({1.0, 4.0, 0.5}), diag({9.0, 1.0, 2.0}));
    EXPECT_NEAR((T - diag({3.0, 0.5, 2.0})).norm(), 0.0, 1e-12);
}

TEST(BuresMap, PushesForwardCovariance) {
    std::mt19937_64 g(11);
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::MatrixXd S = random_spd(g, 3), Sn = random_spd(g, 3);
        const Eigen::MatrixXd T = bures_map(S, Sn);
        EXPECT_NEAR((T * S * T - Sn).norm(), 0.0, 1e-9 * Sn.norm());
        EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(T).eigenvalues().minCoeff(), 0.0);
    }
}

TEST(W2Gaussian, Examples) {
    const auto a = GaussianMeasure::isotropic(1, 1.0);
    EXPECT_NEAR(w2_gaussian(a, a), 0.0, 1e-12);
    EXPECT_NEAR(w2_gaussian(a, GaussianMeasure::isotropic(1, 1.0, 3.0)), 3.0, 1e-12);
    EXPECT_NEAR(w2_gaussian(a, GaussianMeasure::isotropic(1, 4.0)), 1.0, 1e-12);
}

TEST(W2Gaussian, SymmetricAndAgreesWithMapCost) {
    std::mt19937_64 g(5);
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::MatrixXd S = random_spd(g, 2), Sn = random_spd(g, 2);
        Eigen::VectorXd m = Eigen::VectorXd::Random(2), mn = Eigen::VectorXd::Random(2);
        const GaussianMeasure a(m, S), b(mn, Sn);
        EXPECT_NEAR(w2_gaussian(a, b), w2_gaussian(b, a), 1e-10);
        // Cost of the Bures map: E|x - T x|^2 for centred parts.
        const Eigen::MatrixXd T = bures_map(S, Sn);
        const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
        const double cost = ((I - T) * S * (I - T).transpose()).trace() + (m - mn).squaredNorm();
        EXPECT_NEAR(w2_gaussian(a, b) * w2_gaussian(a, b), cost, 1e-10);
    }
}

TEST(GaussianBarycenter, DiracAtomGivesLambdaIdentity) {
    for (int d : {1, 2, 3}) {
        const auto pop = population(0.7, {Eigen::MatrixXd::Zero(d, d)}, {Eigen::VectorXd::Zero(d)}, {1.0});
        const auto r = gaussian_barycenter(pop);
        EXPECT_NEAR((r.barycenter.covariance() - 0.7 * Eigen::MatrixXd::Identity(d, d)).norm(), 0.0, 1e-12) << d;
    }
}

TEST(GaussianBarycenter, ScalarFixedPoint) {
    const auto pop = population(0.5, {diag({1.0})}, {Eigen::VectorXd::Zero(1)}, {1.0});
    const auto r = gaussian_barycenter(pop);
    const double expected = std::pow((1.0 + std::sqrt(3.0)) / 2.0, 2);
    EXPECT_NEAR(r.barycenter.covariance()(0, 0), expected, 1e-9);
    EXPECT_NEAR(expected, 1.8660254, 1e-7);
    EXPECT_NEAR(scalar_barycenter_variance(0.5, {1.0}, {1.0}), expected, 1e-14);
}

TEST(GaussianBarycenter, ResidualAndBracketContract) {
    std::mt19937_64 g(21);
    for (int trial = 0; trial < 4; ++trial) {
        const int d = 2 + trial % 2;
        std::vector<Eigen::MatrixXd> covs;
        std::vector<Eigen::VectorXd> means;
        std::vector<double> w;
        for (int i = 0; i < 4; ++i) {
            covs.push_back(random_spd(g, d));
            means.push_back(Eigen::VectorXd::Random(d));
            w.push_back(0.25);
        }
        const double lambda = 0.2 + 0.3 * trial;
        const auto pop = population(lambda, covs, means, w);
        const auto r = gaussian_barycenter(pop);
        const Eigen::MatrixXd& S = r.barycenter.covariance();
        EXPECT_LE((S - detail::gaussian_phi(pop, S)).norm(), 1e-10 * S.norm());
        EXPECT_EQ(r.bracket_violations, 0u);
        Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(d, d);
        Eigen::VectorXd m = Eigen::VectorXd::Zero(d);
        for (int i = 0; i < 4; ++i) {
            avg += w[i] * covs[i];
            m += w[i] * means[i];
        }
        const double sigma2 = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(avg).eigenvalues().maxCoeff();
        const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S).eigenvalues();
        EXPECT_GE(ev.minCoeff(), lambda - 1e-12);
        EXPECT_LE(ev.maxCoeff(), 2.0 * lambda + d * sigma2 + 1e-12);
        EXPECT_NEAR((r.barycenter.mean() - m).norm(), 0.0, 1e-14);
        EXPECT_FALSE(r.restart_covariance.has_value());
    }
}

TEST(GaussianBarycenter, CommutingClosedForm) {
    const std::vector<Eigen::MatrixXd> covs{diag({1.0, 0.2, 3.0}), diag({0.5, 2.0, 0.1}), diag({4.0, 1.0, 1.0})};
    const std::vector<double> w{0.2, 0.5, 0.3};
    const std::vector<Eigen::VectorXd> means(3, Eigen::VectorXd::Zero(3));
    const double lambda = 0.4;
    // The 1e-10 residual stop leaves a few 1e-10 of error after contraction; tighten it here.
    GaussianBaryOptions opt;
    opt.tol = 1e-13;
    const auto r = gaussian_barycenter(population(lambda, covs, means, w), opt);
    for (int k = 0; k < 3; ++k) {
        std::vector<double> s;
        for (const auto& c : covs) s.push_back(c(k, k));
        EXPECT_NEAR(r.barycenter.covariance()(k, k), scalar_barycenter_variance(lambda, w, s), 1e-10) << k;
    }
    EXPECT_NEAR(r.barycenter.covariance()(0, 1), 0.0, 1e-12);
}

TEST(GaussianBarycenter, RotationEquivariance) {
    std::mt19937_64 g(9);
    std::vector<Eigen::MatrixXd> covs;
    for (int i = 0; i < 3; ++i) covs.push_back(random_spd(g, 3));
    const std::vector<Eigen::VectorXd> means(3, Eigen::VectorXd::Zero(3));
    const std::vector<double> w{0.3, 0.3, 0.4};
    const auto base = gaussian_barycenter(population(0.6, covs, means, w));
    const Eigen::MatrixXd Q = random_rotation(g, 3);
    std::vector<Eigen::MatrixXd> rotated;
    for (const auto& c : covs) rotated.push_back(Q * c * Q.transpose());
    const auto rot = gaussian_barycenter(population(0.6, rotated, means, w));
    EXPECT_NEAR((rot.barycenter.covariance() - Q * base.barycenter.covariance() * Q.transpose()).norm(), 0.0, 1e-9);
}

TEST(GaussianBarycenter, ShiftEquivariance) {
    std::mt19937_64 g(13);
    std::vector<Eigen::MatrixXd> covs{random_spd(g, 2), random_spd(g, 2)};
    std::vector<Eigen::VectorXd> means{Eigen::VectorXd::Random(2), Eigen::VectorXd::Random(2)};
    const std::vector<double> w{0.4, 0.6};
    const auto base = gaussian_barycenter(population(0.3, covs, means, w));
    Eigen::VectorXd s(2);
    s << 1.5, -2.0;
    for (auto& m : means) m += s;
    const auto moved = gaussian_barycenter(population(0.3, covs, means, w));
    EXPECT_NEAR((moved.barycenter.mean() - base.barycenter.mean() - s).norm(), 0.0, 1e-14);
    EXPECT_NEAR((moved.barycenter.covariance() - base.barycenter.covariance()).norm(), 0.0, 1e-14);
}

TEST(GaussianBarycenter, WeightPermutationInvariance) {
    std::mt19937_64 g(17);
    std::vector<Eigen::MatrixXd> covs{random_spd(g, 2), random_spd(g, 2), random_spd(g, 2)};
    std::vector<Eigen::VectorXd> means{Eigen::VectorXd::Random(2), Eigen::VectorXd::Random(2), Eigen::VectorXd::Random(2)};
    std::vector<double> w{0.2, 0.3, 0.5};
    const auto a = gaussian_barycenter(population(0.5, covs, means, w));
    std::swap(covs[0], covs[2]);
    std::swap(means[0], means[2]);
    std::swap(w[0], w[2]);
    const auto b = gaussian_barycenter(population(0.5, covs, means, w));
    EXPECT_NEAR((a.barycenter.covariance() - b.barycenter.covariance()).norm(), 0.0, 1e-10);
    EXPECT_NEAR((a.barycenter.mean() - b.barycenter.mean()).norm(), 0.0, 1e-14);
}

TEST(GaussianBarycenter, Deterministic) {
    std::mt19937_64 g(1);
    std::vector<Eigen::MatrixXd> covs{random_spd(g, 3), random_spd(g, 3)};
    const std::vector<Eigen::VectorXd> means(2, Eigen::VectorXd::Zero(3));
    const auto pop = population(0.5, covs, means, {0.5, 0.5});
    const auto a = gaussian_barycenter(pop), b = gaussian_barycenter(pop);
    EXPECT_EQ(a.iterations, b.iterations);
    EXPECT_TRUE(a.barycenter.covariance() == b.barycenter.covariance());
}
