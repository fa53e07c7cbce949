#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "entrobar/domain.hpp"
#include "entrobar/error.hpp"

namespace entrobar {

/// Logarithms of densities are taken after clamping at this floor.
inline constexpr double kDensityFloor = 1e-300;

/// Probability density sampled at the nodes of a Domain. Values are zero on
/// inactive nodes and normalized so that the trapezoidal mass is one.
class DensityGrid {
public:
    DensityGrid(DomainPtr domain, std::vector<double> values)
        : domain_(std::move(domain)), values_(std::move(values)) {
        if (!domain_) throw ValidationError("density: null domain");
        if (values_.size() != domain_->size())
            throw ValidationError("density: value count does not match grid size");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) throw ValidationError("density: non-finite value");
            if (values_[i] < 0.0) throw ValidationError("density: negative value");
            if (!domain_->active(i)) values_[i] = 0.0;
        }
        normalize();
    }

    template <class F>
    static DensityGrid from_function(DomainPtr domain, F&& f) {
        std::vector<double> v(domain->size(), 0.0);
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!domain->active(i)) continue;
            if constexpr (std::is_invocable_v<F, double>) {
                if (domain->dim() != 1) throw ValidationError("density: one-argument function on a 2D grid");
                v[i] = f(domain->coord(i, 0));
            } else {
                v[i] = f(domain->coord(i, 0), domain->coord(i, 1));
            }
        }
        return DensityGrid(std::move(domain), std::move(v));
    }

    const Domain& domain() const { return *domain_; }
    const DomainPtr& domain_ptr() const { return domain_; }
    std::span<const double> values() const { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    std::size_t size() const { return values_.size(); }

    double mass() const { return integrate([](std::size_t) { return 1.0; }); }

    /// Trapezoidal quadrature of g(node) * density.
    template <class G>
    double integrate(G&& g) const {
        const auto& w = domain_->weights();
        double s = 0.0;
        for (std::size_t i = 0; i < values_.size(); ++i)
            if (w[i] > 0.0 && values_[i] > 0.0) s += w[i] * values_[i] * g(i);
        return s;
    }

    double max_value() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, v);
        return m;
    }

private:
    void normalize() {
        const auto& w = domain_->weights();
        double m = 0.0;
        for (std::size_t i = 0; i < values_.size(); ++i) m += w[i] * values_[i];
        if (!(m > 0.0) || !std::isfinite(m)) throw ValidationError("density: zero or invalid total mass");
        for (double& v : values_) v /= m;
    }

    DomainPtr domain_;
    std::vector<double> values_;
};

/// Gaussian N(mean, covariance) with a symmetric positive semi-definite
/// covariance. Eigenvalues in [-1e-12, 0) are clamped to zero.
class GaussianMeasure {
public:
    GaussianMeasure(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
        : mean_(std::move(mean)), cov_(std::move(covariance)) {
        const auto d = mean_.size();
        if (d == 0) throw ValidationError("gaussian: empty mean");
        if (cov_.rows() != d || cov_.cols() != d)
            throw ValidationError("gaussian: covariance shape does not match mean");
        if (!mean_.allFinite() || !cov_.allFinite()) throw ValidationError("gaussian: non-finite entries");
        const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
        if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw ValidationError("gaussian: covariance is not symmetric");
        cov_ = 0.5 * (cov_ + cov_.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov_);
        const Eigen::VectorXd ev = es.eigenvalues();
        if (ev.minCoeff() < -1e-12 * scale)
            throw ValidationError("gaussian: covariance is not positive semi-definite");
        if (ev.minCoeff() < 0.0) {
            const Eigen::VectorXd clamped = ev.cwiseMax(0.0);
            cov_ = es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
        }
    }

    static GaussianMeasure isotropic(std::size_t dim, double variance, double center = 0.0) {
        return GaussianMeasure(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), center),
                               variance * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim),
                                                                    static_cast<Eigen::Index>(dim)));
    }

    std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& covariance() const { return cov_; }

    /// Density at x; requires a nonsingular covariance.
    double pdf(const Eigen::VectorXd& x) const {
        Eigen::LLT<Eigen::MatrixXd> llt(cov_);
        if (llt.info() != Eigen::Success) throw ValidationError("gaussian: singular covariance has no density");
        const Eigen::VectorXd z = llt.matrixL().solve(x - mean_);
        const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        const double d = static_cast<double>(dim());
        return std::exp(-0.5 * z.squaredNorm() - 0.5 * logdet - 0.5 * d * std::log(2.0 * std::numbers::pi));
    }

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
};

/// Samples a Gaussian at the grid nodes and normalizes.
inline DensityGrid discretize(const GaussianMeasure& g, DomainPtr domain) {
    if (g.dim() != domain->dim()) throw ValidationError("discretize: dimension mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt(g.covariance());
    if (llt.info() != Eigen::Success) throw ValidationError("discretize: singular covariance");
    std::vector<double> v(domain->size(), 0.0);
    Eigen::VectorXd x(static_cast<Eigen::Index>(domain->dim()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!domain->active(i)) continue;
        for (std::size_t k = 0; k < domain->dim(); ++k) x[static_cast<Eigen::Index>(k)] = domain->coord(i, k);
        const Eigen::VectorXd z = llt.matrixL().solve(x - g.mean());
        v[i] = std::exp(-0.5 * z.squaredNorm());
    }
    return DensityGrid(std::move(domain), std::move(v));
}

template <class Measure>
struct Atom {
    double weight;
    Measure measure;
};

/// Finite weighted population of measures with an entropy weight lambda.
/// Grid populations require every atom to live on the population domain.
template <class Measure>
class Population {
public:
    Population(double lambda, std::vector<Atom<Measure>> atoms, DomainPtr domain = nullptr)
        : lambda_(lambda), atoms_(std::move(atoms)), domain_(std::move(domain)) {
        if (!(lambda_ > 0.0) || !std::isfinite(lambda_)) throw ValidationError("lambda must be positive");
        if (atoms_.empty()) throw ValidationError("population: no atoms");
        double total = 0.0;
        for (const auto& a : atoms_) {
            if (!(a.weight > 0.0)) throw ValidationError("population: atom weights must be positive");
            total += a.weight;
        }
        if (std::abs(total - 1.0) > 1e-12) throw ValidationError("population: weights must sum to 1");
        if constexpr (std::is_same_v<Measure, DensityGrid>) {
            if (!domain_) domain_ = atoms_.front().measure.domain_ptr();
            for (const auto& a : atoms_)
                if (!(a.measure.domain() == *domain_))
                    throw ValidationError("population: atom grid differs from population domain");
        }
    }

    /// Uniform weights 1/n.
    static Population uniform(double lambda, std::vector<Measure> measures, DomainPtr domain = nullptr) {
        std::vector<Atom<Measure>> atoms;
        const double w = 1.0 / static_cast<double>(measures.size());
        for (auto& m : measures) atoms.push_back({w, std::move(m)});
        return Population(lambda, fix_weight_sum(std::move(atoms)), std::move(domain));
    }

    /// Rescales positive weights to sum exactly to one (up to rounding).
    static std::vector<Atom<Measure>> fix_weight_sum(std::vector<Atom<Measure>> atoms) {
        double total = 0.0;
        for (const auto& a : atoms) total += a.weight;
        for (auto& a : atoms) a.weight /= total;
        return atoms;
    }

    double lambda() const { return lambda_; }
    const std::vector<Atom<Measure>>& atoms() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }
    const DomainPtr& domain_ptr() const { return domain_; }
    const Domain& domain() const { return *domain_; }

private:
    double lambda_;
    std::vector<Atom<Measure>> atoms_;
    DomainPtr domain_;
};

// ---------------------------------------------------------------------------
// Moments, entropy, translation.

inline Eigen::VectorXd mean(const DensityGrid& m) {
    const auto& dom = m.domain();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dom.dim()));
    for (std::size_t k = 0; k < dom.dim(); ++k)
        out[static_cast<Eigen::Index>(k)] = m.integrate([&](std::size_t i) { return dom.coord(i, k); });
    return out;
}

inline Eigen::VectorXd mean(const GaussianMeasure& g) { return g.mean(); }

inline double second_moment(const DensityGrid& m) {
    return m.integrate([&](std::size_t i) { return m.domain().squared_norm(i); });
}

inline double second_moment(const GaussianMeasure& g) {
    return g.covariance().trace() + g.mean().squaredNorm();
}

inline double p_moment(const DensityGrid& m, double p) {
    if (!(p >= 1.0)) throw ValidationError("p_moment: p must be at least 1");
    return m.integrate([&](std::size_t i) { return std::pow(m.domain().squared_norm(i), 0.5 * p); });
}

/// E|X|^p = (2s)^{p/2} Gamma((p+d)/2) / Gamma(d/2) for X ~ N(0, s I_d).
inline double centered_isotropic_gaussian_moment(std::size_t dim, double variance, double p) {
    const double d = static_cast<double>(dim);
    return std::pow(2.0 * variance, 0.5 * p) * std::exp(std::lgamma(0.5 * (p + d)) - std::lgamma(0.5 * d));
}

inline double p_moment(const GaussianMeasure& g, double p) {
    if (!(p >= 1.0)) throw ValidationError("p_moment: p must be at least 1");
    const auto d = static_cast<Eigen::Index>(g.dim());
    const Eigen::MatrixXd& S = g.covariance();
    const double s0 = S.trace() / static_cast<double>(d);
    const bool isotropic = (S - s0 * Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() <= 1e-14 * std::max(1.0, s0);
    if (g.mean().squaredNorm() == 0.0 && isotropic) return centered_isotropic_gaussian_moment(g.dim(), s0, p);
    if (p == 2.0) return second_moment(g);
    // General case: tensor trapezoidal rule in the whitened eigenbasis.
    if (d > 2) throw ValidationError("p_moment: general Gaussians supported for d <= 2 only");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    const Eigen::VectorXd sd = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const int n = d == 1 ? 40001 : 1201;
    const double L = 12.0;
    const double h = 2.0 * L / (n - 1);
    auto phi = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); };
    double total = 0.0;
    Eigen::VectorXd z(d);
    for (int a = 0; a < n; ++a) {
        const double za = -L + h * a;
        const double wa = (a == 0 || a == n - 1) ? 0.5 : 1.0;
        const int nb = d == 1 ? 1 : n;
        for (int b = 0; b < nb; ++b) {
            double w = wa * h * phi(za);
            z[0] = za;
            if (d == 2) {
                const double zb = -L + h * b;
                w *= ((b == 0 || b == n - 1) ? 0.5 : 1.0) * h * phi(zb);
                z[1] = zb;
            }
            const Eigen::VectorXd x = g.mean() + es.eigenvectors() * sd.cwiseProduct(z);
            total += w * std::pow(x.squaredNorm(), 0.5 * p);
        }
    }
    return total;
}

/// Trapezoidal quadrature of rho log rho with 0 log 0 = 0.
inline double entropy(const DensityGrid& m) {
    return m.integrate([&](std::size_t i) { return std::log(std::max(m[i], kDensityFloor)); });
}

inline GaussianMeasure shift(const GaussianMeasure& g, const Eigen::VectorXd& s) {
    if (static_cast<std::size_t>(s.size()) != g.dim()) throw ValidationError("shift: dimension mismatch");
    return GaussianMeasure(g.mean() + s, g.covariance());
}

namespace detail {

// Multilinear interpolation of nodal values at point x; returns false when x
// is outside the grid or any corner of its cell is inactive.
inline bool interpolate(const Domain& dom, std::span<const double> values, const double* x, double& out) {
    std::size_t base[2] = {0, 0};
    double frac[2] = {0.0, 0.0};
    for (std::size_t k = 0; k < dom.dim(); ++k) {
        const Axis& a = dom.axis(k);
        const double t = (x[k] - a.lower) / a.spacing();
        const double tol = 1e-9;
        if (t < -tol || t > static_cast<double>(a.points - 1) + tol) return false;
        double fl = std::floor(t);
        if (fl >= static_cast<double>(a.points - 1)) fl = static_cast<double>(a.points - 2);
        if (fl < 0.0) fl = 0.0;
        base[k] = static_cast<std::size_t>(fl);
        frac[k] = std::clamp(t - fl, 0.0, 1.0);
    }
    out = 0.0;
    const std::size_t corners = dom.dim() == 1 ? 2 : 4;
    for (std::size_t c = 0; c < corners; ++c) {
        const std::size_t o0 = c & 1U, o1 = (c >> 1) & 1U;
        double w = o0 ? frac[0] : 1.0 - frac[0];
        std::size_t node;
        if (dom.dim() == 1) {
            node = base[0] + o0;
        } else {
            w *= o1 ? frac[1] : 1.0 - frac[1];
            node = dom.index(base[0] + o0, base[1] + o1);
        }
        if (w == 0.0) continue;
        if (!dom.active(node)) return false;
        out += w * values[node];
    }
    return true;
}

}  // namespace detail

/// Pushforward by x -> x + s. Shifts by whole grid steps move values
/// exactly; other shifts interpolate multilinearly. Throws when more than
/// 1e-10 of the mass would leave the active domain.
inline DensityGrid shift(const DensityGrid& m, std::span<const double> s) {
    const Domain& dom = m.domain();
    if (s.size() != dom.dim()) throw ValidationError("shift: dimension mismatch");
    // Mass whose image lands outside the active domain.
    double leaked = 0.0;
    std::vector<double> ones(dom.size(), 1.0);
    double xs[2];
    for (std::size_t i = 0; i < dom.size(); ++i) {
        if (m[i] <= 0.0) continue;
        for (std::size_t k = 0; k < dom.dim(); ++k) xs[k] = dom.coord(i, k) + s[k];
        double unused;
        if (!detail::interpolate(dom, ones, xs, unused)) leaked += dom.weights()[i] * m[i];
    }
    if (leaked > 1e-10) throw SupportOverflowError("shift: " + std::to_string(leaked) + " of the mass leaves the domain");

    std::vector<double> out(dom.size(), 0.0);
    for (std::size_t i = 0; i < dom.size(); ++i) {
        if (!dom.active(i)) continue;
        for (std::size_t k = 0; k < dom.dim(); ++k) xs[k] = dom.coord(i, k) - s[k];
        double v;
        if (detail::interpolate(dom, m.values(), xs, v)) out[i] = std::max(v, 0.0);
    }
    return DensityGrid(m.domain_ptr(), std::move(out));
}

inline DensityGrid shift(const DensityGrid& m, const Eigen::VectorXd& s) {
    return shift(m, std::span<const double>(s.data(), static_cast<std::size_t>(s.size())));
}

/// Convex combination (1 - t) a + t b of two densities on the same grid.
inline DensityGrid mix(const DensityGrid& a, const DensityGrid& b, double t) {
    if (!(a.domain() == b.domain())) throw ValidationError("mix: densities live on different grids");
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (1.0 - t) * a[i] + t * b[i];
    return DensityGrid(a.domain_ptr(), std::move(v));
}

/// Normalized mixture sum_i p_i nu_i of a grid population.
inline DensityGrid mixture(const Population<DensityGrid>& pop) {
    std::vector<double> v(pop.domain().size(), 0.0);
    for (const auto& a : pop.atoms())
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += a.weight * a.measure[i];
    return DensityGrid(pop.domain_ptr(), std::move(v));
}

}  // namespace entrobar
