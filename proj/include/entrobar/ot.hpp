#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "entrobar/domain.hpp"
#include "entrobar/error.hpp"
#include "entrobar/measures.hpp"
#include "entrobar/network_simplex.hpp"

namespace entrobar {

/// Convex Brenier potential on a grid together with its gradient (the
/// transport map). grad is stored node-major: grad[node * dim + k].
struct Potential {
    DomainPtr domain;
    std::vector<double> phi;
    std::vector<double> grad;
    bool convexified = false;

    double map(std::size_t node, std::size_t k = 0) const { return grad[node * domain->dim() + k]; }
};

/// Subtracts the quadrature mean over the active domain.
inline void center_zero_mean(const Domain& dom, std::vector<double>& f) {
    const auto& w = dom.weights();
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += w[i] * f[i];
    s /= dom.volume();
    for (double& x : f) x -= s;
}

inline double quadrature(const Domain& dom, const std::vector<double>& f) {
    const auto& w = dom.weights();
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += w[i] * f[i];
    return s;
}

/// A 1D grid density viewed as piecewise constant on cells. Cumulative
/// masses are kept from both ends so that quantiles near either tail are
/// resolved with relative precision.
class CellMeasure1D {
public:
    explicit CellMeasure1D(const DensityGrid& m) {
        const Domain& dom = m.domain();
        if (dom.dim() != 1) throw ValidationError("ot_1d: densities must be one-dimensional");
        const Axis& ax = dom.axis(0);
        h_ = ax.spacing();
        const std::size_t cells = ax.points - 1;
        mass_.assign(cells, 0.0);
        left_.resize(cells);
        for (std::size_t c = 0; c < cells; ++c) {
            left_[c] = ax.node(c);
            if (dom.cell_active(c)) mass_[c] = 0.5 * h_ * (m[c] + m[c + 1]);
        }
        below_.assign(cells + 1, 0.0);
        above_.assign(cells + 1, 0.0);
        for (std::size_t c = 0; c < cells; ++c) below_[c + 1] = below_[c] + mass_[c];
        for (std::size_t c = cells; c-- > 0;) above_[c] = above_[c + 1] + mass_[c];
        for (std::size_t c = 0; c < cells; ++c)
            if (mass_[c] > 0.0) support_.push_back(c);
        if (support_.empty()) throw DegenerateDensityError("ot_1d: density has no mass");
        for (std::size_t c : support_) {
            lo_cum_.push_back(below_[c]);
            hi_cum_.push_back(above_[c + 1]);
        }
    }

    std::size_t cells() const { return mass_.size(); }
    double mass(std::size_t c) const { return mass_[c]; }
    double spacing() const { return h_; }
    /// Mass strictly left of node i and mass right of node i.
    double below(std::size_t node) const { return below_[node]; }
    double above(std::size_t node) const { return above_[node]; }

    /// Lower and upper cumulative mass at an arbitrary point x.
    std::pair<double, double> cdf_pair(double x) const {
        const double t = (x - left_.front()) / h_;
        if (t <= 0.0) return {0.0, above_[0]};
        if (t >= static_cast<double>(cells())) return {below_[cells()], 0.0};
        const auto c = std::min(static_cast<std::size_t>(t), cells() - 1);
        const double f = std::clamp(t - static_cast<double>(c), 0.0, 1.0);
        return {below_[c] + f * mass_[c], above_[c + 1] + (1.0 - f) * mass_[c]};
    }

    /// Smallest y with F(y) >= u, for u measured from the left.
    double quantile_lower(double u) const {
        auto it = std::upper_bound(lo_cum_.begin(), lo_cum_.end(), u);
        std::size_t k = it == lo_cum_.begin() ? 0 : static_cast<std::size_t>(it - lo_cum_.begin()) - 1;
        const std::size_t c = support_[k];
        const double f = std::clamp((u - lo_cum_[k]) / mass_[c], 0.0, 1.0);
        return left_[c] + h_ * f;
    }

    /// Point with survival mass s to its right.
    double quantile_upper(double s) const {
        // hi_cum_ is nonincreasing along the support.
        auto it = std::upper_bound(hi_cum_.rbegin(), hi_cum_.rend(), s);
        std::size_t k = it == hi_cum_.rbegin() ? support_.size() - 1
                                               : support_.size() - static_cast<std::size_t>(it - hi_cum_.rbegin());
        const std::size_t c = support_[k];
        const double f = std::clamp((s - hi_cum_[k]) / mass_[c], 0.0, 1.0);
        return left_[c] + h_ * (1.0 - f);
    }

    /// Breakpoints of the quantile functions within [0, 1/2], from each end.
    const std::vector<double>& lower_breaks() const { return lo_cum_; }
    const std::vector<double>& upper_breaks() const { return hi_cum_; }

private:
    double h_ = 0.0;
    std::vector<double> mass_, left_, below_, above_;
    std::vector<std::size_t> support_;
    std::vector<double> lo_cum_, hi_cum_;
};

/// Monotone rearrangement T = Q_nu o F_rho between two 1D grid densities.
class MonotoneMap1D {
public:
    MonotoneMap1D(const DensityGrid& rho, const DensityGrid& nu) : rho_(rho), nu_(nu) {
        const Domain& dom = rho.domain();
        for (std::size_t c = 0; c + 1 < dom.size(); ++c)
            if (dom.cell_active(c) && !(rho_.mass(c) > 0.0))
                throw DegenerateDensityError("ot_1d: source density vanishes on an active cell, its CDF is not invertible");
    }

    double operator()(double x) const {
        const auto [lo, hi] = rho_.cdf_pair(x);
        return at_levels(lo, hi);
    }

    /// Map at a source grid node, using exact nodal cumulative masses.
    double at_node(std::size_t i) const { return at_levels(rho_.below(i), rho_.above(i)); }

private:
    double at_levels(double lo, double hi) const {
        return lo <= hi ? nu_.quantile_lower(lo) : nu_.quantile_upper(hi);
    }

    CellMeasure1D rho_, nu_;
};

struct OT1DResult {
    Potential potential;
    double w2 = 0.0;
};

namespace detail {

// Integral of (Qa - Qb)^2 over half of the unit interval. Both quantiles
// are linear between merged breakpoints, so a two-point rule is exact.
template <class QA, class QB>
double half_quantile_w2(const std::vector<double>& ba, const std::vector<double>& bb, QA qa, QB qb) {
    std::vector<double> br{0.0, 0.5};
    for (double x : ba)
        if (x > 0.0 && x < 0.5) br.push_back(x);
    for (double x : bb)
        if (x > 0.0 && x < 0.5) br.push_back(x);
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < br.size(); ++k) {
        const double a = br[k], b = br[k + 1], len = b - a;
        if (!(len > 0.0)) continue;
        const double d1 = qa(a + 0.25 * len) - qb(a + 0.25 * len);
        const double d3 = qa(a + 0.75 * len) - qb(a + 0.75 * len);
        const double mid = 0.5 * (d1 + d3), slope = 2.0 * (d3 - d1);
        total += len * (mid * mid + slope * slope / 12.0);
    }
    return total;
}

}  // namespace detail

/// Exact W2 between two 1D grid densities read as piecewise constant on cells.
inline double w2_1d(const DensityGrid& a, const DensityGrid& b) {
    const CellMeasure1D A(a), B(b);
    const double lower = detail::half_quantile_w2(
        A.lower_breaks(), B.lower_breaks(), [&](double u) { return A.quantile_lower(u); },
        [&](double u) { return B.quantile_lower(u); });
    const double upper = detail::half_quantile_w2(
        A.upper_breaks(), B.upper_breaks(), [&](double s) { return A.quantile_upper(s); },
        [&](double s) { return B.quantile_upper(s); });
    return std::sqrt(std::max(0.0, lower + upper));
}

/// 1D optimal transport from rho to nu: map, zero-mean Brenier potential and
/// W2 distance.
inline OT1DResult ot_1d(const DensityGrid& rho, const DensityGrid& nu) {
    const Domain& dom = rho.domain();
    if (dom.dim() != 1 || nu.domain().dim() != 1) throw ValidationError("ot_1d: densities must be one-dimensional");
    const MonotoneMap1D T(rho, nu);
    OT1DResult out;
    Potential& p = out.potential;
    p.domain = rho.domain_ptr();
    p.grad.resize(dom.size());
    for (std::size_t i = 0; i < dom.size(); ++i) p.grad[i] = T.at_node(i);
    // phi' = T; trapezoidal antiderivative across every node, gaps included.
    const double h = dom.axis(0).spacing();
    p.phi.assign(dom.size(), 0.0);
    for (std::size_t i = 1; i < dom.size(); ++i) p.phi[i] = p.phi[i - 1] + 0.5 * h * (p.grad[i - 1] + p.grad[i]);
    center_zero_mean(dom, p.phi);
    out.w2 = w2_1d(rho, nu);
    return out;
}

/// Active grid nodes as a point cloud with trapezoidal masses. node_of[k]
/// gives the grid node of cloud point k.
struct GridCloud {
    DomainPtr domain;
    PointCloud cloud;
    std::vector<std::size_t> node_of;
};

inline GridCloud grid_cloud(const DensityGrid& m) {
    const Domain& dom = m.domain();
    GridCloud gc;
    gc.domain = m.domain_ptr();
    for (std::size_t i = 0; i < dom.size(); ++i)
        if (dom.weights()[i] > 0.0) gc.node_of.push_back(i);
    gc.cloud.points.resize(static_cast<Eigen::Index>(gc.node_of.size()), static_cast<Eigen::Index>(dom.dim()));
    gc.cloud.weights.resize(gc.node_of.size());
    for (std::size_t k = 0; k < gc.node_of.size(); ++k) {
        const std::size_t i = gc.node_of[k];
        for (std::size_t d = 0; d < dom.dim(); ++d)
            gc.cloud.points(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d)) = dom.coord(i, d);
        gc.cloud.weights[k] = dom.weights()[i] * m[i];
    }
    return gc;
}

namespace detail {

// Largest violation of midpoint convexity along grid lines.
inline double midpoint_convexity_violation(const Domain& dom, const std::vector<double>& phi) {
    double worst = 0.0;
    auto check = [&](std::size_t a, std::size_t b, std::size_t c) {
        if (!dom.active(a) || !dom.active(b) || !dom.active(c)) return;
        worst = std::max(worst, phi[b] - 0.5 * (phi[a] + phi[c]));
    };
    if (dom.dim() == 1) {
        for (std::size_t i = 1; i + 1 < dom.size(); ++i) check(i - 1, i, i + 1);
    } else {
        const std::size_t n0 = dom.axis(0).points, n1 = dom.axis(1).points;
        for (std::size_t i = 0; i < n0; ++i)
            for (std::size_t j = 0; j < n1; ++j) {
                if (i > 0 && i + 1 < n0) check(dom.index(i - 1, j), dom.index(i, j), dom.index(i + 1, j));
                if (j > 0 && j + 1 < n1) check(dom.index(i, j - 1), dom.index(i, j), dom.index(i, j + 1));
            }
    }
    return worst;
}

inline double dot_row(const Domain& dom, std::size_t node, const Eigen::MatrixXd& Y, Eigen::Index j) {
    double s = 0.0;
    for (std::size_t k = 0; k < dom.dim(); ++k) s += dom.coord(node, k) * Y(j, static_cast<Eigen::Index>(k));
    return s;
}

}  // namespace detail

/// Brenier potential phi = |x|^2/2 - u on the grid from discrete duals.
/// `source` is the grid cloud the duals were computed on and `target` the
/// cloud it was transported to. Nodes without mass take u by c-transform.
/// If phi violates midpoint convexity by more than 1e-8 it is replaced by
/// its convex envelope over the target slopes. The gradient is the
/// barycentric projection of the plan, or the maximizing slope on nodes
/// without mass.
inline Potential potential_from_duals(const DiscreteOTResult& ot, const GridCloud& source, const PointCloud& target) {
    const Domain& dom = *source.domain;
    const std::size_t N = dom.size(), d = dom.dim();
    if (target.dim() != d) throw ValidationError("potential_from_duals: dimension mismatch");
    std::vector<Eigen::Index> slopes;
    for (std::size_t j = 0; j < target.size(); ++j)
        if (target.weights[j] > 0.0) slopes.push_back(static_cast<Eigen::Index>(j));
    // psi_j = |y_j|^2/2 - v_j, so that |x|^2/2 - u^c(x) = max_j (x.y_j - psi_j).
    std::vector<double> psi(target.size());
    for (Eigen::Index j : slopes)
        psi[static_cast<std::size_t>(j)] = 0.5 * target.points.row(j).squaredNorm() - ot.v[static_cast<std::size_t>(j)];

    Potential p;
    p.domain = source.domain;
    p.phi.assign(N, 0.0);
    p.grad.assign(N * d, 0.0);
    std::vector<double> mass(N, 0.0);
    std::vector<std::uint8_t> massive(N, 0);
    for (std::size_t k = 0; k < source.node_of.size(); ++k) {
        const std::size_t node = source.node_of[k];
        if (source.cloud.weights[k] > 0.0) {
            massive[node] = 1;
            p.phi[node] = 0.5 * dom.squared_norm(node) - ot.u[k];
        }
    }
    auto legendre = [&](std::size_t node, const std::vector<double>& offsets, Eigen::Index* arg) {
        double best = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j : slopes) {
            const double val = detail::dot_row(dom, node, target.points, j) - offsets[static_cast<std::size_t>(j)];
            if (val > best) {
                best = val;
                if (arg) *arg = j;
            }
        }
        return best;
    };
    for (std::size_t node = 0; node < N; ++node)
        if (!massive[node]) p.phi[node] = legendre(node, psi, nullptr);

    if (detail::midpoint_convexity_violation(dom, p.phi) > 1e-8) {
        // Double Legendre transform over the target slopes.
        std::vector<double> conj(target.size(), 0.0);
        for (Eigen::Index j : slopes) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t node = 0; node < N; ++node)
                if (massive[node]) best = std::max(best, detail::dot_row(dom, node, target.points, j) - p.phi[node]);
            conj[static_cast<std::size_t>(j)] = best;
        }
        for (std::size_t node = 0; node < N; ++node) p.phi[node] = legendre(node, conj, nullptr);
        psi = conj;
        p.convexified = true;
    }

    for (const auto& e : ot.plan) {
        const std::size_t node = source.node_of[e.i];
        mass[node] += e.mass;
        for (std::size_t k = 0; k < d; ++k)
            p.grad[node * d + k] += e.mass * target.points(static_cast<Eigen::Index>(e.j), static_cast<Eigen::Index>(k));
    }
    for (std::size_t node = 0; node < N; ++node) {
        if (mass[node] > 0.0) {
            for (std::size_t k = 0; k < d; ++k) p.grad[node * d + k] /= mass[node];
        } else {
            Eigen::Index arg = slopes.front();
            legendre(node, psi, &arg);
            for (std::size_t k = 0; k < d; ++k) p.grad[node * d + k] = target.points(arg, static_cast<Eigen::Index>(k));
        }
    }
    center_zero_mean(dom, p.phi);
    return p;
}

/// Discrete transport between two grid densities through their grid clouds.
struct GridOTResult {
    Potential potential;
    DiscreteOTResult discrete;
};

inline GridOTResult ot_grid_discrete(const DensityGrid& rho, const DensityGrid& nu) {
    const GridCloud src = grid_cloud(rho);
    const GridCloud dst = grid_cloud(nu);
    GridOTResult out;
    out.discrete = ot_discrete(src.cloud, dst.cloud);
    out.potential = potential_from_duals(out.discrete, src, dst.cloud);
    return out;
}

/// W2 between grid densities: exact quantile formula in 1D, discrete LP
/// between grid clouds in 2D.
inline double w2_grid(const DensityGrid& a, const DensityGrid& b) {
    if (a.domain().dim() == 1 && b.domain().dim() == 1) return w2_1d(a, b);
    return ot_discrete(grid_cloud(a).cloud, grid_cloud(b).cloud).w2;
}

}  // namespace entrobar
