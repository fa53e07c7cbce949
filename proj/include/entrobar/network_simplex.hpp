#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <string>
#include <vector>

#include "entrobar/error.hpp"

namespace entrobar {

/// Weighted point cloud: one point per row.
struct PointCloud {
    Eigen::MatrixXd points;
    std::vector<double> weights;

    std::size_t size() const { return weights.size(); }
    std::size_t dim() const { return static_cast<std::size_t>(points.cols()); }
};

struct PlanEntry {
    std::size_t i;
    std::size_t j;
    double mass;
};

/// Optimal coupling for the cost |x - y|^2 / 2 with Kantorovich potentials
/// u_i + v_j <= |x_i - y_j|^2 / 2, equality on the plan support. u has zero
/// mean under the source weights.
struct DiscreteOTResult {
    std::vector<PlanEntry> plan;
    std::vector<double> u;
    std::vector<double> v;
    double primal = 0.0;  ///< sum of plan mass times cost
    double dual = 0.0;    ///< sum a_i u_i + sum b_j v_j
    double w2 = 0.0;      ///< sqrt(2 * primal)
    std::size_t pivots = 0;
};

inline constexpr std::size_t kMaxDiscretePoints = 4096;

namespace detail {

// Primal network simplex for the balanced transportation problem, with a
// strongly feasible spanning tree rooted at an artificial node. Potentials
// carry the big-M part separately (sign * M + local) so that the final
// duals are free of big-M rounding.
class TransportSimplex {
public:
    TransportSimplex(std::vector<double> supply, std::vector<double> demand, Eigen::MatrixXd cost)
        : m_(supply.size()), n_(demand.size()), cost_(std::move(cost)) {
        nodes_ = m_ + n_ + 1;
        root_ = m_ + n_;
        real_arcs_ = m_ * n_;
        flow_.assign(real_arcs_ + root_, 0.0);
        double cmax = 0.0;
        for (Eigen::Index r = 0; r < cost_.rows(); ++r)
            for (Eigen::Index c = 0; c < cost_.cols(); ++c) cmax = std::max(cmax, std::abs(cost_(r, c)));
        big_ = (cmax + 1.0) * static_cast<double>(nodes_);
        adj_.assign(nodes_, {});
        for (std::size_t v = 0; v < root_; ++v) {
            const std::size_t a = real_arcs_ + v;
            flow_[a] = v < m_ ? supply[v] : demand[v - m_];
            adj_[v].push_back(a);
            adj_[root_].push_back(a);
        }
        parent_.assign(nodes_, 0);
        pred_.assign(nodes_, 0);
        up_.assign(nodes_, 0);
        depth_.assign(nodes_, 0);
        sign_.assign(nodes_, 0);
        local_.assign(nodes_, 0.0);
        rebuild();
    }

    std::size_t solve() {
        const std::size_t block = std::max<std::size_t>(
            std::min<std::size_t>(real_arcs_, 10),
            static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(real_arcs_)))));
        std::size_t next = 0, pivots = 0;
        const double eps = 1e-12 * (1.0 + big_ / static_cast<double>(nodes_));
        while (true) {
            // Block search pricing: scan one block, keep the most negative arc.
            std::size_t best = real_arcs_;
            double best_rc = -eps;
            std::size_t scanned = 0, cnt = 0;
            for (; scanned < real_arcs_; ++scanned) {
                const std::size_t e = next;
                next = next + 1 == real_arcs_ ? 0 : next + 1;
                if (!in_tree(e)) {
                    const double rc = reduced_cost(e);
                    if (rc < best_rc) {
                        best_rc = rc;
                        best = e;
                    }
                }
                if (++cnt == block) {
                    if (best != real_arcs_) break;
                    cnt = 0;
                }
            }
            if (best == real_arcs_) return pivots;
            pivot(best);
            ++pivots;
        }
    }

    std::size_t src(std::size_t e) const { return e < real_arcs_ ? e / n_ : (e - real_arcs_ < m_ ? e - real_arcs_ : root_); }
    std::size_t tgt(std::size_t e) const {
        if (e < real_arcs_) return m_ + e % n_;
        const std::size_t v = e - real_arcs_;
        return v < m_ ? root_ : v;
    }
    double arc_cost(std::size_t e) const {
        if (e < real_arcs_) return cost_(static_cast<Eigen::Index>(e / n_), static_cast<Eigen::Index>(e % n_));
        return big_;
    }
    double flow(std::size_t e) const { return flow_[e]; }
    std::size_t real_arcs() const { return real_arcs_; }
    int sign(std::size_t v) const { return sign_[v]; }
    double local(std::size_t v) const { return local_[v]; }
    std::size_t root() const { return root_; }

private:
    bool in_tree(std::size_t e) const {
        const std::size_t s = src(e), t = tgt(e);
        return (parent_[s] == t && pred_[s] == e) || (parent_[t] == s && pred_[t] == e);
    }

    double reduced_cost(std::size_t e) const {
        const std::size_t s = src(e), t = tgt(e);
        const double base = arc_cost(e) + local_[s] - local_[t];
        return base + big_ * static_cast<double>(sign_[s] - sign_[t]);
    }

    // Tree structure and potentials from the adjacency lists, by BFS.
    void rebuild() {
        std::deque<std::size_t> queue{root_};
        std::vector<std::uint8_t> seen(nodes_, 0);
        seen[root_] = 1;
        parent_[root_] = root_;
        depth_[root_] = 0;
        sign_[root_] = 0;
        local_[root_] = 0.0;
        while (!queue.empty()) {
            const std::size_t u = queue.front();
            queue.pop_front();
            for (std::size_t e : adj_[u]) {
                const std::size_t s = src(e), t = tgt(e);
                const std::size_t w = s == u ? t : s;
                if (seen[w]) continue;
                seen[w] = 1;
                parent_[w] = u;
                pred_[w] = e;
                up_[w] = s == w ? 1 : 0;  // arc directed from w to its parent
                depth_[w] = depth_[u] + 1;
                const bool artificial = e >= real_arcs_;
                const double c = artificial ? 0.0 : arc_cost(e);
                // Zero reduced cost on tree arcs: c + pi_s - pi_t = 0.
                if (artificial) {
                    sign_[w] = up_[w] ? -1 : 1;
                    local_[w] = 0.0;
                } else {
                    sign_[w] = sign_[u];
                    local_[w] = up_[w] ? local_[u] - c : local_[u] + c;
                }
                queue.push_back(w);
            }
        }
    }

    void pivot(std::size_t in) {
        const std::size_t first = src(in), second = tgt(in);
        std::size_t a = first, b = second;
        while (a != b) {
            if (depth_[a] > depth_[b])
                a = parent_[a];
            else if (depth_[b] > depth_[a])
                b = parent_[b];
            else {
                a = parent_[a];
                b = parent_[b];
            }
        }
        const std::size_t join = a;
        const double inf = std::numeric_limits<double>::infinity();
        double delta = inf;
        std::size_t u_out = root_;
        // Flow is pushed along in: join -> first (tree), first -> second, second -> join.
        for (std::size_t u = first; u != join; u = parent_[u]) {
            const double d = up_[u] ? flow_[pred_[u]] : inf;
            if (d < delta) {
                delta = d;
                u_out = u;
            }
        }
        for (std::size_t u = second; u != join; u = parent_[u]) {
            const double d = up_[u] ? inf : flow_[pred_[u]];
            if (d <= delta) {
                delta = d;
                u_out = u;
            }
        }
        if (delta == inf) throw InfeasibleTransportError("ot_discrete: unbounded pivot");
        if (delta > 0.0) {
            flow_[in] += delta;
            for (std::size_t u = first; u != join; u = parent_[u]) flow_[pred_[u]] += up_[u] ? -delta : delta;
            for (std::size_t u = second; u != join; u = parent_[u]) flow_[pred_[u]] += up_[u] ? delta : -delta;
        }
        const std::size_t out = pred_[u_out];
        if (out >= real_arcs_) flow_[out] = 0.0;
        remove_adj(src(out), out);
        remove_adj(tgt(out), out);
        adj_[first].push_back(in);
        adj_[second].push_back(in);
        rebuild();
    }

    void remove_adj(std::size_t v, std::size_t e) {
        auto& list = adj_[v];
        list.erase(std::find(list.begin(), list.end(), e));
    }

    std::size_t m_, n_, nodes_, root_, real_arcs_;
    Eigen::MatrixXd cost_;
    double big_ = 0.0;
    std::vector<double> flow_;
    std::vector<std::vector<std::size_t>> adj_;
    std::vector<std::size_t> parent_, pred_, depth_;
    std::vector<std::uint8_t> up_;
    std::vector<int> sign_;
    std::vector<double> local_;
};

inline double half_sq_dist(const Eigen::MatrixXd& X, Eigen::Index i, const Eigen::MatrixXd& Y, Eigen::Index j) {
    return 0.5 * (X.row(i) - Y.row(j)).squaredNorm();
}

}  // namespace detail

/// Exact discrete optimal transport for the cost |x - y|^2 / 2 by the
/// network simplex method.
inline DiscreteOTResult ot_discrete(const PointCloud& mu, const PointCloud& nu) {
    if (mu.size() == 0 || nu.size() == 0) throw ValidationError("ot_discrete: empty cloud");
    if (mu.dim() != nu.dim()) throw ValidationError("ot_discrete: dimension mismatch");
    if (static_cast<std::size_t>(mu.points.rows()) != mu.size() || static_cast<std::size_t>(nu.points.rows()) != nu.size())
        throw ValidationError("ot_discrete: point and weight counts differ");
    if (mu.size() > kMaxDiscretePoints || nu.size() > kMaxDiscretePoints)
        throw InfeasibleTransportError("ot_discrete: size overflow, at most " + std::to_string(kMaxDiscretePoints) +
                                       " points per side");
    double ta = 0.0, tb = 0.0;
    for (double w : mu.weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("ot_discrete: weights must be finite and nonnegative");
        ta += w;
    }
    for (double w : nu.weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("ot_discrete: weights must be finite and nonnegative");
        tb += w;
    }
    if (!(ta > 0.0) || std::abs(ta - tb) > 1e-12 * std::max(1.0, ta))
        throw InfeasibleTransportError("ot_discrete: total masses differ (" + std::to_string(ta) + " vs " +
                                       std::to_string(tb) + ")");

    // Zero-weight points are left out of the LP and get their potential by
    // c-transform afterwards.
    std::vector<std::size_t> ia, jb;
    for (std::size_t i = 0; i < mu.size(); ++i)
        if (mu.weights[i] > 0.0) ia.push_back(i);
    for (std::size_t j = 0; j < nu.size(); ++j)
        if (nu.weights[j] > 0.0) jb.push_back(j);
    const std::size_t m = ia.size(), n = jb.size();
    std::vector<double> a(m), b(n);
    for (std::size_t k = 0; k < m; ++k) a[k] = mu.weights[ia[k]];
    for (std::size_t k = 0; k < n; ++k) b[k] = nu.weights[jb[k]] * (ta / tb);
    Eigen::MatrixXd C(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c)
            C(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                detail::half_sq_dist(mu.points, static_cast<Eigen::Index>(ia[r]), nu.points, static_cast<Eigen::Index>(jb[c]));

    detail::TransportSimplex ns(a, b, C);
    DiscreteOTResult out;
    out.pivots = ns.solve();

    out.u.assign(mu.size(), 0.0);
    out.v.assign(nu.size(), 0.0);
    for (std::size_t k = 0; k < m; ++k) out.u[ia[k]] = -ns.local(k);
    for (std::size_t k = 0; k < n; ++k) out.v[jb[k]] = ns.local(m + k);
    for (std::size_t e = 0; e < ns.real_arcs(); ++e) {
        const double f = ns.flow(e);
        if (f > 0.0) {
            out.plan.push_back({ia[e / n], jb[e % n], f});
            out.primal += f * C(static_cast<Eigen::Index>(e / n), static_cast<Eigen::Index>(e % n));
        }
    }
    // c-transforms for the points that carried no mass.
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (mu.weights[i] > 0.0) continue;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j : jb)
            best = std::min(best, detail::half_sq_dist(mu.points, static_cast<Eigen::Index>(i), nu.points,
                                                       static_cast<Eigen::Index>(j)) - out.v[j]);
        out.u[i] = best;
    }
    for (std::size_t j = 0; j < nu.size(); ++j) {
        if (nu.weights[j] > 0.0) continue;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < mu.size(); ++i)
            best = std::min(best, detail::half_sq_dist(mu.points, static_cast<Eigen::Index>(i), nu.points,
                                                       static_cast<Eigen::Index>(j)) - out.u[i]);
        out.v[j] = best;
    }
    // Shift so that u has zero mean under mu.
    double mean_u = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) mean_u += mu.weights[i] * out.u[i];
    mean_u /= ta;
    for (double& x : out.u) x -= mean_u;
    for (double& x : out.v) x += mean_u;
    for (std::size_t i = 0; i < mu.size(); ++i) out.dual += mu.weights[i] * out.u[i];
    for (std::size_t j = 0; j < nu.size(); ++j) out.dual += nu.weights[j] * (ta / tb) * out.v[j];
    out.w2 = std::sqrt(std::max(0.0, 2.0 * out.primal));
    return out;
}

}  // namespace entrobar
