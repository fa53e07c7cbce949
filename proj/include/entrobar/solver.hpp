#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "entrobar/error.hpp"
#include "entrobar/measures.hpp"
#include "entrobar/objective.hpp"
#include "entrobar/ot.hpp"
#include "entrobar/parallel.hpp"

namespace entrobar {

enum class PotentialBackend { exact_1d, discrete_lp };

inline std::string to_string(PotentialBackend b) { return b == PotentialBackend::exact_1d ? "exact-1d" : "discrete-lp"; }

inline PotentialBackend backend_from_string(const std::string& s) {
    if (s == "exact-1d") return PotentialBackend::exact_1d;
    if (s == "discrete-lp") return PotentialBackend::discrete_lp;
    throw ValidationError("solver.potential_backend: unknown backend '" + s + "'");
}

struct SolverConfig {
    std::size_t max_iters = 20000;
    double tol_l1 = 1e-9;
    double damping = 0.7;
    PotentialBackend potential_backend = PotentialBackend::exact_1d;
    bool adaptive_damping = true;  ///< halve the damping whenever the residual grows
    std::size_t threads = 0;       ///< 0: ENTROBAR_THREADS or 1

    void validate() const {
        if (!(tol_l1 > 0.0)) throw ValidationError("solver.tol_l1 must be positive");
        if (!(damping > 0.0 && damping <= 1.0)) throw ValidationError("solver.damping must lie in (0, 1]");
        if (max_iters == 0) throw ValidationError("solver.max_iters must be positive");
    }
};

struct BarycenterResult {
    DensityGrid density;
    /// Unclamped log-density, normalized like `density`; finite where the
    /// density itself may underflow.
    std::vector<double> log_density;
    std::vector<Potential> potentials;
    std::vector<double> w2;  ///< W2(density, nu_i) per atom
    std::size_t iterations = 0;
    double final_residual = 0.0;  ///< int |P(rho) - rho| at the returned iterate
    double objective_value = 0.0;
    bool converged = false;
    double final_damping = 0.0;
    std::vector<double> residual_history;
};

namespace detail {

struct AtomTransport {
    std::vector<Potential> potentials;
    std::vector<double> w2;
};

inline AtomTransport transport_to_atoms(const Population<DensityGrid>& pop, const DensityGrid& rho,
                                        PotentialBackend backend, std::size_t threads) {
    AtomTransport out;
    out.potentials.resize(pop.size());
    out.w2.resize(pop.size());
    parallel_for(pop.size(), threads, [&](std::size_t i) {
        const DensityGrid& nu = pop.atoms()[i].measure;
        if (backend == PotentialBackend::exact_1d) {
            auto r = ot_1d(rho, nu);
            out.potentials[i] = std::move(r.potential);
            out.w2[i] = r.w2;
        } else {
            auto r = ot_grid_discrete(rho, nu);
            out.potentials[i] = std::move(r.potential);
            out.w2[i] = r.discrete.w2;
        }
    });
    return out;
}

// Log of the density exp((sum p_i phi_i - |x|^2/2) / lambda), normalized by
// quadrature. Inactive nodes get -inf.
inline std::vector<double> gibbs_log_density(const Population<DensityGrid>& pop, const std::vector<Potential>& pots) {
    const Domain& dom = pop.domain();
    const double lambda = pop.lambda();
    std::vector<double> ell(dom.size(), -std::numeric_limits<double>::infinity());
    for (std::size_t x = 0; x < dom.size(); ++x) {
        if (!dom.active(x)) continue;
        double Phi = 0.0;
        for (std::size_t i = 0; i < pop.size(); ++i) Phi += pop.atoms()[i].weight * pots[i].phi[x];
        ell[x] = (Phi - 0.5 * dom.squared_norm(x)) / lambda;
    }
    return ell;
}

// Shifts ell so that exp(ell) has unit trapezoidal mass.
inline void normalize_log(const Domain& dom, std::vector<double>& ell) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t x = 0; x < dom.size(); ++x)
        if (dom.active(x)) top = std::max(top, ell[x]);
    double z = 0.0;
    for (std::size_t x = 0; x < dom.size(); ++x)
        if (dom.weights()[x] > 0.0) z += dom.weights()[x] * std::exp(ell[x] - top);
    const double shift = top + std::log(z);
    for (std::size_t x = 0; x < dom.size(); ++x)
        if (dom.active(x)) ell[x] -= shift;
}

inline std::vector<double> exp_density(const Domain& dom, const std::vector<double>& ell) {
    std::vector<double> v(dom.size(), 0.0);
    for (std::size_t x = 0; x < dom.size(); ++x)
        if (dom.active(x)) v[x] = std::max(std::exp(ell[x]), kDensityFloor);
    return v;
}

inline double l1_distance(const Domain& dom, const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t x = 0; x < dom.size(); ++x) s += dom.weights()[x] * std::abs(a[x] - b[x]);
    return s;
}

}  // namespace detail

/// Entropic barycenter of a grid population by damped Picard iteration in
/// log space on rho = exp((sum p_i phi_i - |x|^2/2) / lambda) / Z.
inline BarycenterResult solve_barycenter(const Population<DensityGrid>& pop, const SolverConfig& cfg = {}) {
    cfg.validate();
    const Domain& dom = pop.domain();
    if (cfg.potential_backend == PotentialBackend::exact_1d && dom.dim() != 1)
        throw ValidationError("solver.potential_backend: exact-1d requires a one-dimensional domain");
    const std::size_t threads = resolve_threads(cfg.threads);

    // Start from the mixture, floored so every active node has positive mass.
    std::vector<double> ell(dom.size(), -std::numeric_limits<double>::infinity());
    {
        const DensityGrid mix = mixture(pop);
        const double floor = 1e-6 * mix.max_value();
        for (std::size_t x = 0; x < dom.size(); ++x)
            if (dom.active(x)) ell[x] = std::log(std::max(mix[x], floor));
        detail::normalize_log(dom, ell);
    }

    double theta = cfg.damping;
    double prev = std::numeric_limits<double>::infinity();
    struct Best {
        std::vector<double> ell;
        detail::AtomTransport transport;
        double residual = std::numeric_limits<double>::infinity();
        std::size_t iter = 0;
    } best;
    std::vector<double> history;
    bool converged = false;
    std::size_t it = 0;
    for (; it < cfg.max_iters; ++it) {
        const std::vector<double> rho = detail::exp_density(dom, ell);
        auto transport = detail::transport_to_atoms(pop, DensityGrid(pop.domain_ptr(), rho), cfg.potential_backend, threads);
        std::vector<double> ell_new = detail::gibbs_log_density(pop, transport.potentials);
        detail::normalize_log(dom, ell_new);
        const double res = detail::l1_distance(dom, rho, detail::exp_density(dom, ell_new));
        history.push_back(res);
        if (res < best.residual) best = {ell, transport, res, it};
        if (res <= cfg.tol_l1) {
            converged = true;
            break;
        }
        if (cfg.adaptive_damping && res > prev) theta = std::max(theta * 0.5, cfg.damping / 1024.0);
        prev = res;
        for (std::size_t x = 0; x < dom.size(); ++x)
            if (dom.active(x)) ell[x] = (1.0 - theta) * ell[x] + theta * ell_new[x];
        detail::normalize_log(dom, ell);
    }

    BarycenterResult out{DensityGrid(pop.domain_ptr(), detail::exp_density(dom, best.ell)),
                         best.ell,
                         std::move(best.transport.potentials),
                         std::move(best.transport.w2),
                         converged ? it + 1 : cfg.max_iters,
                         best.residual,
                         0.0,
                         converged,
                         theta,
                         std::move(history)};
    double transport_cost = 0.0;
    for (std::size_t i = 0; i < pop.size(); ++i) transport_cost += pop.atoms()[i].weight * 0.5 * out.w2[i] * out.w2[i];
    out.objective_value = transport_cost + pop.lambda() * entropy(out.density);
    return out;
}

/// Sum of p_i T_i at every node and coordinate.
inline std::vector<double> averaged_map(const Population<DensityGrid>& pop, const std::vector<Potential>& pots) {
    const Domain& dom = pop.domain();
    std::vector<double> avg(dom.size() * dom.dim(), 0.0);
    for (std::size_t i = 0; i < pop.size(); ++i)
        for (std::size_t k = 0; k < avg.size(); ++k) avg[k] += pop.atoms()[i].weight * pots[i].grad[k];
    return avg;
}

struct GradientResidual {
    double value = 0.0;     ///< sup |x + lambda D log rho - sum p_i T_i| over interior nodes
    double constant = 0.0;  ///< C in the contract value <= C h + 2 tol / lambda
    double h = 0.0;         ///< largest grid spacing
    double bound(double tol_l1, double lambda) const { return constant * h + 2.0 * tol_l1 / lambda; }
};

namespace detail {

// Interior node: active with both neighbours active along every axis.
inline bool interior(const Domain& dom, std::size_t x, std::size_t (&nb)[2][2]) {
    if (!dom.active(x)) return false;
    if (dom.dim() == 1) {
        if (x == 0 || x + 1 >= dom.size()) return false;
        nb[0][0] = x - 1;
        nb[0][1] = x + 1;
        return dom.active(x - 1) && dom.active(x + 1);
    }
    const std::size_t n1 = dom.axis(1).points, i = x / n1, j = x % n1;
    if (i == 0 || j == 0 || i + 1 >= dom.axis(0).points || j + 1 >= n1) return false;
    nb[0][0] = dom.index(i - 1, j);
    nb[0][1] = dom.index(i + 1, j);
    nb[1][0] = dom.index(i, j - 1);
    nb[1][1] = dom.index(i, j + 1);
    for (auto& p : nb)
        if (!dom.active(p[0]) || !dom.active(p[1])) return false;
    return true;
}

}  // namespace detail

/// First-order optimality residual of the returned barycenter, with central
/// differences of the log-density. C is the discrete Lipschitz constant of
/// the averaged map, computed from the result itself.
inline GradientResidual gradient_residual(const BarycenterResult& r, const Population<DensityGrid>& pop) {
    const Domain& dom = pop.domain();
    const std::size_t d = dom.dim();
    const std::vector<double> avg = averaged_map(pop, r.potentials);
    GradientResidual g;
    for (std::size_t k = 0; k < d; ++k) g.h = std::max(g.h, dom.axis(k).spacing());
    std::size_t nb[2][2];
    for (std::size_t x = 0; x < dom.size(); ++x) {
        if (!detail::interior(dom, x, nb)) continue;
        double sq = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double h = dom.axis(k).spacing();
            const double dlog = (r.log_density[nb[k][1]] - r.log_density[nb[k][0]]) / (2.0 * h);
            const double e = dom.coord(x, k) + pop.lambda() * dlog - avg[x * d + k];
            sq += e * e;
            for (int side = 0; side < 2; ++side) {
                const std::size_t y = nb[k][side];
                for (std::size_t c = 0; c < d; ++c)
                    g.constant = std::max(g.constant, std::abs(avg[y * d + c] - avg[x * d + c]) / h);
            }
        }
        g.value = std::max(g.value, std::sqrt(sq));
    }
    return g;
}

/// Mean of the barycenter and the weighted mean of the atom means.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> mean_identity_check(const BarycenterResult& r,
                                                                      const Population<DensityGrid>& pop) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pop.domain().dim()));
    for (const auto& a : pop.atoms()) rhs += a.weight * mean(a.measure);
    return {mean(r.density), rhs};
}

/// int |P(rho) - rho| where P is the self-consistency map, for any density.
inline double fixed_point_residual(const Population<DensityGrid>& pop, const DensityGrid& rho,
                                   PotentialBackend backend = PotentialBackend::exact_1d, std::size_t threads = 1) {
    const Domain& dom = pop.domain();
    auto t = detail::transport_to_atoms(pop, rho, backend, threads);
    std::vector<double> ell = detail::gibbs_log_density(pop, t.potentials);
    detail::normalize_log(dom, ell);
    return detail::l1_distance(dom, {rho.values().begin(), rho.values().end()}, detail::exp_density(dom, ell));
}

}  // namespace entrobar
