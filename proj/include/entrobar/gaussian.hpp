#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "entrobar/error.hpp"
#include "entrobar/measures.hpp"

namespace entrobar {

namespace detail {

inline void require_symmetric(const Eigen::MatrixXd& S, const char* what) {
    if (S.rows() != S.cols()) throw ValidationError(std::string(what) + ": matrix is not square");
    const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
    if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw ValidationError(std::string(what) + ": matrix is not symmetric");
}

// Eigenvalues within 1e-12 (relative) of zero are set to exactly zero.
inline Eigen::VectorXd cleaned_eigenvalues(const Eigen::VectorXd& ev, const char* what) {
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    Eigen::VectorXd out = ev;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] < -1e-12 * scale) throw ValidationError(std::string(what) + ": matrix is not positive semi-definite");
        if (std::abs(ev[i]) <= 1e-12 * scale) out[i] = 0.0;
    }
    return out;
}

}  // namespace detail

/// Principal square root of a symmetric positive semi-definite matrix.
inline Eigen::MatrixXd sqrt_spd(const Eigen::MatrixXd& S) {
    detail::require_symmetric(S, "sqrt_spd");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
    const Eigen::VectorXd ev = detail::cleaned_eigenvalues(es.eigenvalues(), "sqrt_spd");
    Eigen::MatrixXd R = es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (R + R.transpose());
}

/// Inverse principal square root; requires S positive definite.
inline Eigen::MatrixXd inv_sqrt_spd(const Eigen::MatrixXd& S) {
    detail::require_symmetric(S, "inv_sqrt_spd");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
    const Eigen::VectorXd ev = detail::cleaned_eigenvalues(es.eigenvalues(), "inv_sqrt_spd");
    if (ev.minCoeff() <= 0.0) throw ValidationError("inv_sqrt_spd: matrix is singular");
    Eigen::MatrixXd R = es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (R + R.transpose());
}

/// Linear optimal map between centred Gaussians with covariances S and S_nu:
/// T = S^{-1/2} (S^{1/2} S_nu S^{1/2})^{1/2} S^{-1/2}.
inline Eigen::MatrixXd bures_map(const Eigen::MatrixXd& S, const Eigen::MatrixXd& S_nu) {
    detail::require_symmetric(S_nu, "bures_map");
    const Eigen::MatrixXd Sh = sqrt_spd(S);
    const Eigen::MatrixXd Sih = inv_sqrt_spd(S);
    const Eigen::MatrixXd M = sqrt_spd(0.5 * ((Sh * S_nu * Sh) + (Sh * S_nu * Sh).transpose()));
    Eigen::MatrixXd T = Sih * M * Sih;
    return 0.5 * (T + T.transpose());
}

inline double w2_gaussian(const GaussianMeasure& a, const GaussianMeasure& b) {
    if (a.dim() != b.dim()) throw ValidationError("w2_gaussian: dimension mismatch");
    const Eigen::MatrixXd Ah = sqrt_spd(a.covariance());
    const Eigen::MatrixXd C = Ah * b.covariance() * Ah;
    const Eigen::MatrixXd cross = sqrt_spd(0.5 * (C + C.transpose()));
    const double bures = a.covariance().trace() + b.covariance().trace() - 2.0 * cross.trace();
    return std::sqrt(std::max(0.0, (a.mean() - b.mean()).squaredNorm() + bures));
}

/// Positive root of s = lambda + sqrt(s) * sum_i p_i sqrt(s_i).
inline double scalar_barycenter_variance(double lambda, const std::vector<double>& weights,
                                         const std::vector<double>& variances) {
    double a = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) a += weights[i] * std::sqrt(variances[i]);
    const double t = 0.5 * (a + std::sqrt(a * a + 4.0 * lambda));
    return t * t;
}

struct GaussianBaryOptions {
    double damping = 0.5;
    double tol = 1e-10;            ///< relative Frobenius residual
    std::size_t stall_limit = 10000;  ///< iterations without residual decrease before giving up
    std::size_t max_iters = 1000000;
    bool probe_uniqueness = true;  ///< rerun from alpha I and compare
};

struct GaussianBaryResult {
    GaussianMeasure barycenter;
    std::size_t iterations = 0;
    double residual = 0.0;        ///< ||S - Phi(S)||_F
    double alpha = 0.0;           ///< upper bracket 2 lambda + d sigma^2
    std::size_t bracket_violations = 0;
    /// Fixed point reached from alpha I, present when it differs from the
    /// main result by more than 1e-8 in Frobenius norm.
    std::optional<Eigen::MatrixXd> restart_covariance;
    double restart_gap = 0.0;
};

namespace detail {

inline Eigen::MatrixXd gaussian_phi(const Population<GaussianMeasure>& pop, const Eigen::MatrixXd& S) {
    const auto d = S.rows();
    const Eigen::MatrixXd Sh = sqrt_spd(S);
    Eigen::MatrixXd out = pop.lambda() * Eigen::MatrixXd::Identity(d, d);
    // Fixed summation order (atom index) keeps the result bitwise reproducible.
    for (const auto& atom : pop.atoms()) {
        Eigen::MatrixXd C = Sh * atom.measure.covariance() * Sh;
        out += atom.weight * sqrt_spd(0.5 * (C + C.transpose()));
    }
    return 0.5 * (out + out.transpose());
}

struct PicardRun {
    Eigen::MatrixXd S;
    std::size_t iterations;
    double residual;
    std::size_t bracket_violations;
};

inline PicardRun gaussian_picard(const Population<GaussianMeasure>& pop, Eigen::MatrixXd S, double alpha,
                                 const GaussianBaryOptions& opt) {
    const double lambda = pop.lambda();
    const double theta = opt.damping;
    double best = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0, violations = 0;
    for (std::size_t it = 0; it < opt.max_iters; ++it) {
        const Eigen::MatrixXd F = gaussian_phi(pop, S);
        const double res = (S - F).norm();
        if (res <= opt.tol * S.norm()) return {S, it, res, violations};
        if (res < best) {
            best = res;
            since_best = 0;
        } else if (++since_best >= opt.stall_limit) {
            throw NonConvergenceError("gaussian_barycenter: residual did not decrease over " +
                                      std::to_string(opt.stall_limit) + " iterations");
        }
        S = (1.0 - theta) * S + theta * F;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
        const double slack = 1e-10 * alpha;
        if (es.eigenvalues().minCoeff() < lambda - slack || es.eigenvalues().maxCoeff() > alpha + slack) ++violations;
    }
    throw NonConvergenceError("gaussian_barycenter: iteration limit reached");
}

}  // namespace detail

/// Entropic barycenter of a Gaussian population: N(sum p_i m_i, S) with S the
/// fixed point of S = lambda I + sum p_i (S^{1/2} S_i S^{1/2})^{1/2}, found
/// by damped Picard iteration from lambda I.
inline GaussianBaryResult gaussian_barycenter(const Population<GaussianMeasure>& pop,
                                              const GaussianBaryOptions& opt = {}) {
    if (!(opt.damping > 0.0 && opt.damping <= 1.0)) throw ValidationError("damping must lie in (0, 1]");
    const std::size_t dim = pop.atoms().front().measure.dim();
    const auto d = static_cast<Eigen::Index>(dim);
    Eigen::VectorXd m = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(d, d);
    for (const auto& atom : pop.atoms()) {
        if (atom.measure.dim() != dim) throw ValidationError("gaussian_barycenter: atoms of mixed dimension");
        m += atom.weight * atom.measure.mean();
        avg += atom.weight * atom.measure.covariance();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(avg, Eigen::EigenvaluesOnly);
    const double sigma2 = std::max(0.0, es.eigenvalues().maxCoeff());
    const double alpha = 2.0 * pop.lambda() + static_cast<double>(dim) * sigma2;
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);

    auto run = detail::gaussian_picard(pop, pop.lambda() * I, alpha, opt);
    GaussianBaryResult out{GaussianMeasure(m, run.S), run.iterations, run.residual, alpha, run.bracket_violations, {}, 0.0};
    if (opt.probe_uniqueness) {
        auto other = detail::gaussian_picard(pop, alpha * I, alpha, opt);
        out.restart_gap = (other.S - run.S).norm();
        if (out.restart_gap > 1e-8) out.restart_covariance = other.S;
    }
    return out;
}

}  // namespace entrobar
