#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "entrobar/error.hpp"
#include "entrobar/measures.hpp"
#include "entrobar/ot.hpp"

namespace entrobar {

enum class OperatorKind { f_prime, phi_prime, g, sigma, covariance };

inline std::string to_string(OperatorKind k) {
    switch (k) {
        case OperatorKind::f_prime: return "F-prime";
        case OperatorKind::phi_prime: return "Phi-prime";
        case OperatorKind::g: return "G";
        case OperatorKind::sigma: return "Sigma";
        case OperatorKind::covariance: return "Var-phi";
    }
    return "unknown";
}

/// Dense N x N matrix acting on nodal values of a 1D grid function. Every
/// operator here is self-adjoint for the trapezoidal inner product
/// <f, g> = sum_i w_i f_i g_i and annihilates constants.
struct LinearizedOperator {
    OperatorKind kind;
    DomainPtr domain;
    Eigen::MatrixXd matrix;
    double condition_number = 0.0;  ///< on zero-mean functions; filled for G

    Eigen::VectorXd weights() const { return Eigen::Map<const Eigen::VectorXd>(domain->weights().data(), static_cast<Eigen::Index>(domain->size())); }
    Eigen::VectorXd apply(const Eigen::VectorXd& f) const { return matrix * f; }

    /// W^{1/2} M W^{-1/2}: an ordinary symmetric matrix with the same spectrum.
    Eigen::MatrixXd symmetric_form() const {
        const Eigen::VectorXd s = weights().cwiseSqrt();
        return s.asDiagonal() * matrix * s.cwiseInverse().asDiagonal();
    }

    /// Eigenvalues on the zero-mean subspace, ascending.
    Eigen::VectorXd restricted_eigenvalues() const;
};

inline double inner(const Domain& dom, const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < dom.size(); ++i) s += dom.weights()[i] * f[static_cast<Eigen::Index>(i)] * g[static_cast<Eigen::Index>(i)];
    return s;
}

namespace detail {

inline void require_plain_interval(const Domain& dom, const char* what) {
    if (dom.dim() != 1) throw ValidationError(std::string(what) + ": the linearization is one-dimensional");
    for (std::size_t i = 0; i < dom.size(); ++i)
        if (!dom.active(i)) throw ValidationError(std::string(what) + ": domain must be a plain interval");
}

/// Orthonormal basis (columns) of the complement of W^{1/2} 1.
inline Eigen::MatrixXd zero_mean_basis(const Eigen::VectorXd& w) {
    const Eigen::VectorXd q = w.cwiseSqrt().normalized();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(q);
    const Eigen::MatrixXd Q = qr.householderQ();
    return Q.rightCols(q.size() - 1);
}

/// Mean-removal projector P = I - 1 w^T / sum(w).
inline Eigen::MatrixXd mean_projector(const Eigen::VectorXd& w) {
    const auto n = w.size();
    return Eigen::MatrixXd::Identity(n, n) - Eigen::VectorXd::Ones(n) * (w.transpose() / w.sum());
}

}  // namespace detail

inline Eigen::VectorXd LinearizedOperator::restricted_eigenvalues() const {
    const Eigen::MatrixXd B = detail::zero_mean_basis(weights());
    Eigen::MatrixXd E = B.transpose() * symmetric_form() * B;
    E = 0.5 * (E + E.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(E, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

/// Removes the quadrature mean of a grid function.
inline Eigen::VectorXd zero_mean(const Domain& dom, Eigen::VectorXd f) {
    double s = 0.0;
    for (std::size_t i = 0; i < dom.size(); ++i) s += dom.weights()[i] * f[static_cast<Eigen::Index>(i)];
    f.array() -= s / dom.volume();
    return f;
}

/// u -> lambda u / rho - lambda mean(u / rho), composed with mean removal
/// on the input so that constants are annihilated.
inline LinearizedOperator f_prime(const DensityGrid& rho_bar, double lambda) {
    const Domain& dom = rho_bar.domain();
    detail::require_plain_interval(dom, "f_prime");
    if (!(lambda > 0.0)) throw ValidationError("lambda must be positive");
    const auto n = static_cast<Eigen::Index>(dom.size());
    Eigen::VectorXd inv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double r = rho_bar[static_cast<std::size_t>(i)];
        if (!(r >= 1e-12)) throw IllConditionedError("f_prime: density below 1e-12 at node " + std::to_string(i));
        inv[i] = 1.0 / r;
    }
    LinearizedOperator op{OperatorKind::f_prime, rho_bar.domain_ptr(), {}, 0.0};
    const Eigen::MatrixXd P = detail::mean_projector(op.weights());
    op.matrix = lambda * P * inv.asDiagonal() * P;
    return op;
}

/// Coefficient a(x) = nu(T(x)) of the linearized Monge-Ampere operator, with
/// nu linearly interpolated between its nodes.
inline Eigen::VectorXd monge_ampere_coefficient(const Potential& potential, const DensityGrid& nu) {
    const Domain& dom = *potential.domain;
    const Domain& nd = nu.domain();
    if (nd.dim() != 1) throw ValidationError("phi_prime: target density must be one-dimensional");
    Eigen::VectorXd a(static_cast<Eigen::Index>(dom.size()));
    const Axis& ax = nd.axis(0);
    for (std::size_t i = 0; i < dom.size(); ++i) {
        const double t = std::clamp((potential.grad[i] - ax.lower) / ax.spacing(), 0.0, static_cast<double>(ax.points - 1));
        const std::size_t c = std::min(static_cast<std::size_t>(t), ax.points - 2);
        const double f = t - static_cast<double>(c);
        a[static_cast<Eigen::Index>(i)] = (1.0 - f) * nu[c] + f * nu[c + 1];
    }
    return a;
}

/// Flux-form stiffness matrix S with (S h)_i = -sum_faces a_f (h_nb - h_i) / h,
/// faces weighted by the harmonic mean of the nodal coefficients. No-flux
/// at both ends. S is symmetric positive semi-definite and S 1 = 0.
inline Eigen::MatrixXd flux_stiffness(const Domain& dom, const Eigen::VectorXd& a) {
    const auto n = static_cast<Eigen::Index>(dom.size());
    const double h = dom.axis(0).spacing();
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        const double af = 2.0 * a[i] * a[i + 1] / (a[i] + a[i + 1]) / h;
        S(i, i) += af;
        S(i + 1, i + 1) += af;
        S(i, i + 1) -= af;
        S(i + 1, i) -= af;
    }
    return S;
}

/// Derivative of the measure-to-potential map: f -> h solving
/// (a h')' = f - mean(f) with a = nu(phi_0'), h'(ends) = 0 and zero mean.
/// Solved through the bordered symmetric system [S w; w^T 0].
inline LinearizedOperator phi_prime(const DensityGrid& rho_bar, const Potential& potential, const DensityGrid& nu) {
    const Domain& dom = rho_bar.domain();
    detail::require_plain_interval(dom, "phi_prime");
    if (!(*potential.domain == dom)) throw ValidationError("phi_prime: potential lives on another grid");
    const auto n = static_cast<Eigen::Index>(dom.size());
    double min_second = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 1; i + 1 < n; ++i)
        min_second = std::min(min_second, potential.phi[static_cast<std::size_t>(i + 1)] - 2.0 * potential.phi[static_cast<std::size_t>(i)] +
                                              potential.phi[static_cast<std::size_t>(i - 1)]);
    if (!(min_second > 0.0)) throw NotConvexError("phi_prime: potential is not strongly convex on the grid");
    const Eigen::VectorXd a = monge_ampere_coefficient(potential, nu);
    if (!(a.minCoeff() > 0.0)) throw IllConditionedError("phi_prime: coefficient nu(T) vanishes somewhere");

    LinearizedOperator op{OperatorKind::phi_prime, rho_bar.domain_ptr(), {}, 0.0};
    const Eigen::VectorXd w = op.weights();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + 1, n + 1);
    K.topLeftCorner(n, n) = flux_stiffness(dom, a);
    K.block(0, n, n, 1) = w;
    K.block(n, 0, 1, n) = w.transpose();
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 1, n);
    rhs.topRows(n) = -(w.asDiagonal() * detail::mean_projector(w));
    const Eigen::MatrixXd sol = K.partialPivLu().solve(rhs);
    op.matrix = sol.topRows(n);
    return op;
}

/// G = F' - sum_i p_i Phi'_i, with its condition number on zero-mean functions.
inline LinearizedOperator build_G(const DensityGrid& rho_bar, const std::vector<Potential>& potentials,
                                  const Population<DensityGrid>& pop) {
    if (potentials.size() != pop.size()) throw ValidationError("build_G: one potential per atom required");
    LinearizedOperator G = f_prime(rho_bar, pop.lambda());
    G.kind = OperatorKind::g;
    for (std::size_t i = 0; i < pop.size(); ++i)
        G.matrix -= pop.atoms()[i].weight * phi_prime(rho_bar, potentials[i], pop.atoms()[i].measure).matrix;
    const Eigen::VectorXd ev = G.restricted_eigenvalues();
    if (!(ev.minCoeff() > 0.0)) throw IllConditionedError("build_G: operator is not positive definite on zero-mean functions");
    G.condition_number = ev.maxCoeff() / ev.minCoeff();
    return G;
}

/// Inverse of G on zero-mean functions: (G + Pi)^{-1} - Pi with Pi = 1 w^T / sum(w).
inline Eigen::MatrixXd g_inverse(const LinearizedOperator& G) {
    const Eigen::VectorXd w = G.weights();
    const auto n = w.size();
    const Eigen::MatrixXd Pi = Eigen::VectorXd::Ones(n) * (w.transpose() / w.sum());
    return (G.matrix + Pi).partialPivLu().inverse() - Pi;
}

/// Covariance operator of a random grid function: C = sum_k q_k d_k d_k^T W
/// with d_k the centred samples.
inline LinearizedOperator covariance_operator(const DomainPtr& domain, const std::vector<Eigen::VectorXd>& samples,
                                              const std::vector<double>& weights) {
    LinearizedOperator C{OperatorKind::covariance, domain, {}, 0.0};
    const auto n = static_cast<Eigen::Index>(domain->size());
    Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < samples.size(); ++k) m += weights[k] * samples[k];
    Eigen::MatrixXd nodal = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const Eigen::VectorXd d = samples[k] - m;
        nodal.noalias() += weights[k] * d * d.transpose();
    }
    C.matrix = nodal * C.weights().asDiagonal();
    return C;
}

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Exact Var(phi) for a finite population: potentials of every atom against
/// rho_bar weighted by p_i.
inline LinearizedOperator population_covariance(const Population<DensityGrid>& pop, const std::vector<Potential>& potentials) {
    std::vector<Eigen::VectorXd> s;
    std::vector<double> q;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        s.push_back(to_vector(potentials[i].phi));
        q.push_back(pop.atoms()[i].weight);
    }
    return covariance_operator(potentials.front().domain, s, q);
}

/// Sigma from a known covariance operator.
inline LinearizedOperator sigma_from(const LinearizedOperator& G, const LinearizedOperator& C) {
    const Eigen::MatrixXd Gi = g_inverse(G);
    return {OperatorKind::sigma, G.domain, Gi * C.matrix * Gi, 0.0};
}

/// Sigma = G^{-1} Var(phi) G^{-1}, with Var(phi) the empirical covariance
/// (divisor n - 1) of the sampled potentials.
inline LinearizedOperator clt_covariance(const DensityGrid& rho_bar, const Population<DensityGrid>& pop,
                                         const std::vector<Potential>& bary_potentials,
                                         const std::vector<Potential>& potential_samples) {
    if (potential_samples.size() < 2) throw ValidationError("clt_covariance: at least two potential samples required");
    std::vector<Eigen::VectorXd> s;
    for (const auto& p : potential_samples) s.push_back(to_vector(p.phi));
    const double n = static_cast<double>(s.size());
    LinearizedOperator C = covariance_operator(rho_bar.domain_ptr(), s, std::vector<double>(s.size(), 1.0 / n));
    C.matrix *= n / (n - 1.0);
    const LinearizedOperator G = build_G(rho_bar, bary_potentials, pop);
    LinearizedOperator Sigma = sigma_from(G, C);
    return Sigma;
}

/// Covariance of the coordinates <xi, b_k> when xi has covariance operator
/// Sigma: B^T W Sigma B.
inline Eigen::MatrixXd project_covariance(const LinearizedOperator& Sigma, const Eigen::MatrixXd& B) {
    Eigen::MatrixXd M = B.transpose() * Sigma.weights().asDiagonal() * Sigma.matrix * B;
    return 0.5 * (M + M.transpose());
}

}  // namespace entrobar
