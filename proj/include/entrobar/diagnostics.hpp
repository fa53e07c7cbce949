#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "entrobar/domain.hpp"
#include "entrobar/error.hpp"
#include "entrobar/measures.hpp"
#include "entrobar/solver.hpp"

namespace entrobar {

/// One inequality lhs <= rhs checked with an explicit discretization slack.
struct BoundCheck {
    std::string name;
    bool applicable = false;
    std::string note;  ///< why the check does not apply, or what was measured
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;
    bool passed = true;  ///< vacuously true when not applicable
};

struct DiagnosticsReport {
    std::vector<BoundCheck> checks;
    bool all_passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.passed; });
    }
    const BoundCheck* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

struct DiagnosticsOptions {
    /// A > 0 when every atom is e^{-V} with D^2 V >= A; enables the Hessian band.
    double log_concavity = 0.0;
    /// Hessian band: nodes with rho_bar below this fraction of its max are skipped.
    double band_density_fraction = 1e-3;
};

namespace detail {

inline double max_spacing(const Domain& dom) {
    double h = 0.0;
    for (std::size_t k = 0; k < dom.dim(); ++k) h = std::max(h, dom.axis(k).spacing());
    return h;
}

/// Corner indices of the active cells of a 1D or 2D grid.
inline std::vector<std::vector<std::size_t>> active_cells(const Domain& dom) {
    std::vector<std::vector<std::size_t>> cells;
    if (dom.dim() == 1) {
        for (std::size_t i = 0; i + 1 < dom.size(); ++i)
            if (dom.cell_active(i)) cells.push_back({i, i + 1});
        return cells;
    }
    const std::size_t n0 = dom.axis(0).points, n1 = dom.axis(1).points;
    for (std::size_t i = 0; i + 1 < n0; ++i)
        for (std::size_t j = 0; j + 1 < n1; ++j) {
            std::vector<std::size_t> c{dom.index(i, j), dom.index(i + 1, j), dom.index(i, j + 1), dom.index(i + 1, j + 1)};
            if (std::all_of(c.begin(), c.end(), [&](std::size_t x) { return dom.active(x); })) cells.push_back(c);
        }
    return cells;
}

/// Cell-centre rule for int |x|^p rho: rho averaged over corners, |x|^p at the centre.
inline double midpoint_moment(const DensityGrid& m, double p) {
    const Domain& dom = m.domain();
    double s = 0.0;
    for (const auto& c : active_cells(dom)) {
        double r = 0.0, r2 = 0.0;
        for (auto x : c) r += m[x];
        r /= static_cast<double>(c.size());
        for (std::size_t k = 0; k < dom.dim(); ++k) {
            double ck = 0.0;
            for (auto x : c) ck += dom.coord(x, k);
            ck /= static_cast<double>(c.size());
            r2 += ck * ck;
        }
        s += dom.cell_volume() * r * std::pow(r2, 0.5 * p);
    }
    return s / m.mass();
}

/// int |grad log rho|^2 rho with one-sided differences averaged over each cell.
inline double fisher_cell(const DensityGrid& m, const std::vector<double>& ell) {
    const Domain& dom = m.domain();
    double s = 0.0;
    for (const auto& c : active_cells(dom)) {
        double r = 0.0;
        for (auto x : c) r += m[x];
        r /= static_cast<double>(c.size());
        double g2 = 0.0;
        if (dom.dim() == 1) {
            const double g = (ell[c[1]] - ell[c[0]]) / dom.axis(0).spacing();
            g2 = g * g;
        } else {
            const double gx = 0.5 * ((ell[c[1]] - ell[c[0]]) + (ell[c[3]] - ell[c[2]])) / dom.axis(0).spacing();
            const double gy = 0.5 * ((ell[c[2]] - ell[c[0]]) + (ell[c[3]] - ell[c[1]])) / dom.axis(1).spacing();
            g2 = gx * gx + gy * gy;
        }
        s += dom.cell_volume() * r * g2;
    }
    return s;
}

/// Same integral with central differences at interior nodes.
inline double fisher_central(const DensityGrid& m, const std::vector<double>& ell) {
    const Domain& dom = m.domain();
    double s = 0.0;
    std::size_t nb[2][2];
    for (std::size_t x = 0; x < dom.size(); ++x) {
        if (!interior(dom, x, nb)) continue;
        double g2 = 0.0;
        for (std::size_t k = 0; k < dom.dim(); ++k) {
            const double g = (ell[nb[k][1]] - ell[nb[k][0]]) / (2.0 * dom.axis(k).spacing());
            g2 += g * g;
        }
        s += dom.weights()[x] * m[x] * g2;
    }
    return s;
}

inline bool contains_origin(const Domain& dom) {
    if (dom.kind() == DomainKind::ball) return true;
    for (std::size_t k = 0; k < dom.dim(); ++k)
        if (dom.axis(k).lower > 0.0 || dom.axis(k).upper < 0.0) return false;
    if (dom.dim() == 1) {
        // Nearest node to 0 must be active.
        const Axis& ax = dom.axis(0);
        const auto i = static_cast<std::size_t>(std::lround((0.0 - ax.lower) / ax.spacing()));
        return dom.active(std::min(i, dom.size() - 1));
    }
    return true;
}

/// Largest jump of a nodal density between neighbouring active nodes.
inline double max_neighbour_jump(const DensityGrid& m) {
    const Domain& dom = m.domain();
    double j = 0.0;
    for (const auto& c : active_cells(dom))
        for (auto a : c)
            for (auto b : c) j = std::max(j, std::abs(m[a] - m[b]));
    return j;
}

}  // namespace detail

inline BoundCheck fisher_check(const BarycenterResult& r, const Population<DensityGrid>& pop) {
    BoundCheck c{"fisher", true, "", 0.0, 0.0, 0.0, true};
    const double cell = detail::fisher_cell(r.density, r.log_density);
    const double central = detail::fisher_central(r.density, r.log_density);
    c.lhs = cell;
    for (std::size_t i = 0; i < pop.size(); ++i) c.rhs += pop.atoms()[i].weight * r.w2[i] * r.w2[i];
    c.rhs /= pop.lambda() * pop.lambda();
    c.slack = std::abs(cell - central);
    c.passed = c.lhs <= c.rhs + c.slack;
    return c;
}

inline BoundCheck second_moment_check(const BarycenterResult& r, const Population<DensityGrid>& pop) {
    BoundCheck c{"m2", false, "", 0.0, 0.0, 0.0, true};
    const Domain& dom = pop.domain();
    const bool full = dom.kind() == DomainKind::full_space_truncation;
    if (!full && !(dom.convex() && detail::contains_origin(dom))) {
        c.note = "requires a convex domain containing the origin";
        return c;
    }
    c.applicable = true;
    c.lhs = second_moment(r.density);
    c.slack = std::abs(c.lhs - detail::midpoint_moment(r.density, 2.0));
    c.rhs = 2.0 * pop.lambda() * static_cast<double>(dom.dim());
    for (const auto& a : pop.atoms()) {
        const double m2 = second_moment(a.measure);
        c.rhs += a.weight * m2;
        c.slack += a.weight * std::abs(m2 - detail::midpoint_moment(a.measure, 2.0));
    }
    c.passed = c.lhs <= c.rhs + c.slack;
    return c;
}

/// Full-space moment bound m_p <= 6^p/2 E m_p + (3456 lambda)^{p/2} Gamma((d+p)/2).
inline BoundCheck moment_bound_check(const BarycenterResult& r, const Population<DensityGrid>& pop, double p) {
    BoundCheck c{"moment_p" + std::to_string(static_cast<int>(p)), false, "", 0.0, 0.0, 0.0, true};
    const Domain& dom = pop.domain();
    if (dom.kind() != DomainKind::full_space_truncation) {
        c.note = "stated for the full space only";
        return c;
    }
    c.applicable = true;
    c.lhs = p_moment(r.density, p);
    c.slack = std::abs(c.lhs - detail::midpoint_moment(r.density, p));
    double em = 0.0, es = 0.0;
    for (const auto& a : pop.atoms()) {
        const double mp = p_moment(a.measure, p);
        em += a.weight * mp;
        es += a.weight * std::abs(mp - detail::midpoint_moment(a.measure, p));
    }
    const double d = static_cast<double>(dom.dim());
    c.rhs = std::pow(6.0, p) / 2.0 * em + std::pow(3456.0 * pop.lambda(), 0.5 * p) * std::tgamma(0.5 * (d + p));
    c.slack += std::pow(6.0, p) / 2.0 * es;
    c.passed = c.lhs <= c.rhs + c.slack;
    return c;
}

inline BoundCheck max_principle_check(const BarycenterResult& r, const Population<DensityGrid>& pop) {
    BoundCheck c{"max_principle", false, "", 0.0, 0.0, 0.0, true};
    if (!pop.domain().convex()) {
        c.note = "requires a convex domain";
        return c;
    }
    c.applicable = true;
    c.lhs = r.density.max_value();
    for (const auto& a : pop.atoms()) {
        c.rhs = std::max(c.rhs, a.measure.max_value());
        c.slack = std::max(c.slack, detail::max_neighbour_jump(a.measure));
    }
    c.passed = c.lhs <= c.rhs + c.slack;
    return c;
}

/// -1 <= lambda D^2 log rho_bar <= 1/sqrt(lambda A) - 1 at nodes away from the
/// grid edge where rho_bar is not negligible. lhs is the most negative
/// eigenvalue, rhs the bound on the largest; both are reported as margins.
inline BoundCheck hessian_band_check(const BarycenterResult& r, const Population<DensityGrid>& pop, double A,
                                     double density_fraction = 1e-3) {
    BoundCheck c{"hessian_band", false, "", 0.0, 0.0, 0.0, true};
    const Domain& dom = pop.domain();
    if (!(A > 0.0)) {
        c.note = "requires uniformly log-concave atoms";
        return c;
    }
    if (dom.kind() != DomainKind::full_space_truncation) {
        c.note = "stated for the full space only";
        return c;
    }
    c.applicable = true;
    const double lambda = pop.lambda();
    const double upper = 1.0 / std::sqrt(lambda * A) - 1.0;
    const auto& ell = r.log_density;
    const double floor = density_fraction * r.density.max_value();
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, slack = 0.0;
    std::size_t used = 0;
    auto second = [&](std::size_t a, std::size_t x, std::size_t b, double h) { return (ell[a] - 2.0 * ell[x] + ell[b]) / (h * h); };
    if (dom.dim() == 1) {
        const double h = dom.axis(0).spacing();
        for (std::size_t x = 2; x + 2 < dom.size(); ++x) {
            if (r.density[x] < floor) continue;
            const double v = lambda * second(x - 1, x, x + 1, h);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            const double d4 = ell[x - 2] - 4.0 * ell[x - 1] + 6.0 * ell[x] - 4.0 * ell[x + 1] + ell[x + 2];
            slack = std::max(slack, lambda * std::abs(d4) / (12.0 * h * h));
            ++used;
        }
    } else {
        const std::size_t n0 = dom.axis(0).points, n1 = dom.axis(1).points;
        const double hx = dom.axis(0).spacing(), hy = dom.axis(1).spacing();
        for (std::size_t i = 2; i + 2 < n0; ++i)
            for (std::size_t j = 2; j + 2 < n1; ++j) {
                const std::size_t x = dom.index(i, j);
                if (r.density[x] < floor) continue;
                Eigen::Matrix2d H;
                H(0, 0) = second(dom.index(i - 1, j), x, dom.index(i + 1, j), hx);
                H(1, 1) = second(dom.index(i, j - 1), x, dom.index(i, j + 1), hy);
                H(0, 1) = H(1, 0) = (ell[dom.index(i + 1, j + 1)] - ell[dom.index(i + 1, j - 1)] - ell[dom.index(i - 1, j + 1)] +
                                     ell[dom.index(i - 1, j - 1)]) / (4.0 * hx * hy);
                const Eigen::Vector2d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(lambda * H).eigenvalues();
                lo = std::min(lo, ev[0]);
                hi = std::max(hi, ev[1]);
                const double d4x = ell[dom.index(i - 2, j)] - 4.0 * ell[dom.index(i - 1, j)] + 6.0 * ell[x] -
                                   4.0 * ell[dom.index(i + 1, j)] + ell[dom.index(i + 2, j)];
                const double d4y = ell[dom.index(i, j - 2)] - 4.0 * ell[dom.index(i, j - 1)] + 6.0 * ell[x] -
                                   4.0 * ell[dom.index(i, j + 1)] + ell[dom.index(i, j + 2)];
                slack = std::max(slack, lambda * (std::abs(d4x) / (12.0 * hx * hx) + std::abs(d4y) / (12.0 * hy * hy)));
                ++used;
            }
    }
    if (used == 0) {
        c.note = "no node above the density floor";
        return c;
    }
    // Encoded as lhs <= rhs: the larger of (-1 - min) and (max - upper) must be <= 0.
    c.lhs = std::max(-1.0 - lo, hi - upper);
    c.rhs = 0.0;
    c.slack = slack;
    c.note = "min eigenvalue " + std::to_string(lo) + ", max eigenvalue " + std::to_string(hi) + ", upper bound " +
             std::to_string(upper) + ", nodes " + std::to_string(used);
    c.passed = c.lhs <= c.rhs + c.slack;
    return c;
}

inline DiagnosticsReport diagnostics(const BarycenterResult& r, const Population<DensityGrid>& pop,
                                     const DiagnosticsOptions& opt = {}) {
    DiagnosticsReport rep;
    rep.checks.push_back(fisher_check(r, pop));
    rep.checks.push_back(second_moment_check(r, pop));
    rep.checks.push_back(moment_bound_check(r, pop, 2.0));
    rep.checks.push_back(moment_bound_check(r, pop, 4.0));
    rep.checks.push_back(max_principle_check(r, pop));
    rep.checks.push_back(hessian_band_check(r, pop, opt.log_concavity, opt.band_density_fraction));
    return rep;
}

// ---------------------------------------------------------------------------
// Maximum principle failure on a non-convex domain.

struct CounterexampleRow {
    double lambda;
    double max_density;
    bool exceeds;  ///< max_density > atom bound
    bool converged;
    std::size_t iterations;
    double residual;
};

struct CounterexampleReport {
    double atom_bound = 0.25;
    std::vector<CounterexampleRow> rows;
    /// Largest swept lambda whose barycenter exceeds the atom bound, if any.
    std::optional<double> crossing_lambda;
    /// Smallest swept lambda that respects the bound, if any.
    std::optional<double> first_respecting_lambda;
    /// Bisection estimate (in log lambda) of where max rho_bar meets the bound.
    std::optional<double> threshold_lambda;
};

/// Omega = (-8,-4) u (-1,1) u (4,8), nu_- and nu_+ uniform (density 1/4) on
/// the outer pieces, weights 1/2. points must put +-1 and +-4 on nodes.
inline Domain counterexample_domain(std::size_t points = 1601) {
    if (points < 17 || (points - 1) % 16 != 0) throw ValidationError("counterexample.points must be 16 k + 1");
    return Domain::union_of_intervals(Axis{-8.0, 8.0, points}, {{-8.0, -4.0}, {-1.0, 1.0}, {4.0, 8.0}});
}

inline Population<DensityGrid> counterexample_population(const DomainPtr& dom, double lambda) {
    const auto left = DensityGrid::from_function(dom, [](double x) { return x <= -4.0 + 1e-12 ? 1.0 : 0.0; });
    const auto right = DensityGrid::from_function(dom, [](double x) { return x >= 4.0 - 1e-12 ? 1.0 : 0.0; });
    return Population<DensityGrid>(lambda, {{0.5, left}, {0.5, right}}, dom);
}

inline CounterexampleReport counterexample_sweep(const std::vector<double>& lambdas, const SolverConfig& cfg,
                                                 std::size_t points = 1601, std::size_t bisection_steps = 12) {
    const DomainPtr dom = make_domain(counterexample_domain(points));
    CounterexampleReport rep;
    for (double lambda : lambdas) {
        const auto pop = counterexample_population(dom, lambda);
        const auto res = solve_barycenter(pop, cfg);
        const double m = res.density.max_value();
        rep.rows.push_back({lambda, m, m > rep.atom_bound, res.converged, res.iterations, res.final_residual});
    }
    for (const auto& row : rep.rows) {
        if (row.exceeds && (!rep.crossing_lambda || row.lambda > *rep.crossing_lambda)) rep.crossing_lambda = row.lambda;
        if (!row.exceeds && (!rep.first_respecting_lambda || row.lambda < *rep.first_respecting_lambda))
            rep.first_respecting_lambda = row.lambda;
    }
    if (rep.crossing_lambda && rep.first_respecting_lambda && *rep.crossing_lambda < *rep.first_respecting_lambda) {
        double lo = std::log(*rep.crossing_lambda), hi = std::log(*rep.first_respecting_lambda);
        for (std::size_t k = 0; k < bisection_steps; ++k) {
            const double mid = 0.5 * (lo + hi);
            const auto res = solve_barycenter(counterexample_population(dom, std::exp(mid)), cfg);
            (res.density.max_value() > rep.atom_bound ? lo : hi) = mid;
        }
        rep.threshold_lambda = std::exp(0.5 * (lo + hi));
    }
    return rep;
}

}  // namespace entrobar
