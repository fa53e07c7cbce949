#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "entrobar/error.hpp"
#include "entrobar/linma.hpp"
#include "entrobar/measures.hpp"
#include "entrobar/ot.hpp"
#include "entrobar/parallel.hpp"
#include "entrobar/rng.hpp"
#include "entrobar/solver.hpp"

namespace entrobar {

enum class SamplerFamily { random_gaussian, random_translated_template, random_bump_mixture, finite_atoms };

inline std::string to_string(SamplerFamily f) {
    switch (f) {
        case SamplerFamily::random_gaussian: return "random-gaussian";
        case SamplerFamily::random_translated_template: return "random-translated-template";
        case SamplerFamily::random_bump_mixture: return "random-bump-mixture";
        case SamplerFamily::finite_atoms: return "finite-atoms";
    }
    return "unknown";
}

inline SamplerFamily sampler_family_from_string(const std::string& s) {
    if (s == "random-gaussian") return SamplerFamily::random_gaussian;
    if (s == "random-translated-template") return SamplerFamily::random_translated_template;
    if (s == "random-bump-mixture") return SamplerFamily::random_bump_mixture;
    if (s == "finite-atoms") return SamplerFamily::finite_atoms;
    throw ValidationError("sampler.family: unknown family '" + s + "'");
}

/// Hyperparameters of every family; each family reads its own fields.
struct SamplerSpec {
    SamplerFamily family = SamplerFamily::random_gaussian;
    // random-gaussian: N(m, s I) with m uniform per axis and s uniform.
    double mean_lo = -1.0, mean_hi = 1.0;
    double var_lo = 0.3, var_hi = 1.0;
    // random-translated-template: template shifted by a uniform vector.
    std::optional<DensityGrid> templ;
    double shift_lo = -1.0, shift_hi = 1.0;
    double template_log_concavity = 0.0;
    // random-bump-mixture: baseline + sum of Gaussian bumps, on an interval.
    std::size_t bumps = 3;
    double baseline = 1.0;
    double amplitude_max = 2.0;
    double bump_width = 0.5;
    // finite-atoms: i.i.d. draws from a fixed weighted list.
    std::vector<DensityGrid> atoms;
    std::vector<double> atom_weights;
    std::vector<double> atom_log_concavity;
};

struct SampleDraw {
    DensityGrid measure;
    std::size_t atom = 0;            ///< finite-atoms: index of the drawn atom
    double log_concavity = 0.0;      ///< A with D^2 V >= A for nu = exp(-V); 0 if unknown
};

/// Deterministic random-measure generator: draw i of stream s depends only
/// on (seed, s, i).
class MeasureSampler {
public:
    MeasureSampler(SamplerSpec spec, DomainPtr domain, std::uint64_t seed)
        : spec_(std::move(spec)), domain_(std::move(domain)), seed_(seed) {
        switch (spec_.family) {
            case SamplerFamily::random_gaussian:
                if (!(spec_.var_lo > 0.0 && spec_.var_lo <= spec_.var_hi))
                    throw ValidationError("sampler: need 0 < var_lo <= var_hi");
                if (!(spec_.mean_lo <= spec_.mean_hi)) throw ValidationError("sampler: need mean_lo <= mean_hi");
                break;
            case SamplerFamily::random_translated_template:
                if (!spec_.templ) throw ValidationError("sampler: translated-template family needs a template");
                if (!(spec_.templ->domain() == *domain_)) throw ValidationError("sampler: template is not on the domain");
                break;
            case SamplerFamily::random_bump_mixture:
                if (domain_->dim() != 1) throw ValidationError("sampler: bump mixtures are one-dimensional");
                if (!(spec_.baseline > 0.0) || spec_.amplitude_max < 0.0 || !(spec_.bump_width > 0.0))
                    throw ValidationError("sampler: bump mixture needs baseline > 0, amplitude_max >= 0, bump_width > 0");
                break;
            case SamplerFamily::finite_atoms: {
                if (spec_.atoms.empty()) throw ValidationError("sampler: finite-atoms family needs atoms");
                if (spec_.atom_weights.empty()) spec_.atom_weights.assign(spec_.atoms.size(), 1.0 / static_cast<double>(spec_.atoms.size()));
                if (spec_.atom_weights.size() != spec_.atoms.size()) throw ValidationError("sampler: one weight per atom");
                double t = 0.0;
                for (double w : spec_.atom_weights) {
                    if (!(w > 0.0)) throw ValidationError("sampler: atom weights must be positive");
                    t += w;
                }
                if (std::abs(t - 1.0) > 1e-12) throw ValidationError("sampler: atom weights must sum to 1");
                for (const auto& a : spec_.atoms)
                    if (!(a.domain() == *domain_)) throw ValidationError("sampler: atom is not on the domain");
                spec_.atom_log_concavity.resize(spec_.atoms.size(), 0.0);
                break;
            }
        }
    }

    const SamplerSpec& spec() const { return spec_; }
    const DomainPtr& domain() const { return domain_; }
    std::uint64_t seed() const { return seed_; }
    bool deterministic() const {
        return spec_.family == SamplerFamily::finite_atoms && spec_.atoms.size() == 1;
    }

    SampleDraw draw(std::uint64_t stream, std::uint64_t index) const {
        CounterRng rng(seed_, hash_combine(stream, index));
        const Domain& dom = *domain_;
        switch (spec_.family) {
            case SamplerFamily::random_gaussian: {
                Eigen::VectorXd m(static_cast<Eigen::Index>(dom.dim()));
                for (Eigen::Index k = 0; k < m.size(); ++k) m[k] = rng.uniform(spec_.mean_lo, spec_.mean_hi);
                const double s = rng.uniform(spec_.var_lo, spec_.var_hi);
                const GaussianMeasure g(m, s * Eigen::MatrixXd::Identity(m.size(), m.size()));
                return {discretize(g, domain_), 0, 1.0 / s};
            }
            case SamplerFamily::random_translated_template: {
                Eigen::VectorXd s(static_cast<Eigen::Index>(dom.dim()));
                for (Eigen::Index k = 0; k < s.size(); ++k) s[k] = rng.uniform(spec_.shift_lo, spec_.shift_hi);
                return {shift(*spec_.templ, s), 0, spec_.template_log_concavity};
            }
            case SamplerFamily::random_bump_mixture: {
                const Axis& ax = dom.axis(0);
                const double lo = ax.lower + spec_.bump_width, hi = ax.upper - spec_.bump_width;
                std::vector<double> c(spec_.bumps), a(spec_.bumps);
                for (std::size_t k = 0; k < spec_.bumps; ++k) {
                    c[k] = rng.uniform(std::min(lo, hi), std::max(lo, hi));
                    a[k] = rng.uniform(0.0, spec_.amplitude_max);
                }
                const double w = spec_.bump_width;
                auto f = [&](double x) {
                    double v = spec_.baseline;
                    for (std::size_t k = 0; k < spec_.bumps; ++k) v += a[k] * std::exp(-0.5 * (x - c[k]) * (x - c[k]) / (w * w));
                    return v;
                };
                return {DensityGrid::from_function(domain_, f), 0, 0.0};
            }
            case SamplerFamily::finite_atoms: {
                const double u = rng.uniform();
                double acc = 0.0;
                std::size_t k = 0;
                for (; k + 1 < spec_.atoms.size(); ++k) {
                    acc += spec_.atom_weights[k];
                    if (u < acc) break;
                }
                return {spec_.atoms[k], k, spec_.atom_log_concavity[k]};
            }
        }
        throw ValidationError("sampler: unknown family");
    }

    /// Population behind a finite-atoms sampler.
    Population<DensityGrid> finite_population(double lambda) const {
        if (spec_.family != SamplerFamily::finite_atoms) throw ValidationError("sampler: not a finite-atoms sampler");
        std::vector<Atom<DensityGrid>> atoms;
        for (std::size_t k = 0; k < spec_.atoms.size(); ++k) atoms.push_back({spec_.atom_weights[k], spec_.atoms[k]});
        return Population<DensityGrid>(lambda, std::move(atoms), domain_);
    }

private:
    SamplerSpec spec_;
    DomainPtr domain_;
    std::uint64_t seed_;
};

/// Empirical population of the first n draws of a stream. Draws of a
/// finite-atoms sampler are merged into count / n weights.
inline Population<DensityGrid> empirical_population(const MeasureSampler& sampler, std::size_t n, double lambda,
                                                    std::uint64_t stream) {
    if (n == 0) throw ValidationError("empirical population: n must be at least 1");
    if (sampler.spec().family == SamplerFamily::finite_atoms) {
        std::map<std::size_t, std::size_t> counts;
        for (std::size_t i = 0; i < n; ++i) ++counts[sampler.draw(stream, i).atom];
        std::vector<Atom<DensityGrid>> atoms;
        for (const auto& [k, c] : counts)
            atoms.push_back({static_cast<double>(c) / static_cast<double>(n), sampler.spec().atoms[k]});
        return Population<DensityGrid>(lambda, Population<DensityGrid>::fix_weight_sum(std::move(atoms)), sampler.domain());
    }
    std::vector<DensityGrid> draws;
    for (std::size_t i = 0; i < n; ++i) draws.push_back(sampler.draw(stream, i).measure);
    return Population<DensityGrid>::uniform(lambda, std::move(draws), sampler.domain());
}

struct EmpiricalBarycenter {
    Population<DensityGrid> population;
    BarycenterResult result;
};

inline EmpiricalBarycenter empirical_barycenter(const MeasureSampler& sampler, std::size_t n, double lambda,
                                                const SolverConfig& cfg, std::uint64_t stream = 0) {
    auto pop = empirical_population(sampler, n, lambda, stream);
    auto res = solve_barycenter(pop, cfg);
    return {std::move(pop), std::move(res)};
}

// ---------------------------------------------------------------------------
// Statistics helpers.

/// One-sided binomial tail P(X >= k) for X ~ Bin(n, 1/2).
inline double binomial_upper_tail(std::size_t k, std::size_t n) {
    if (k == 0) return 1.0;
    if (k > n) return 0.0;
    double total = 0.0;
    for (std::size_t j = k; j <= n; ++j)
        total += std::exp(std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(j) + 1.0) -
                          std::lgamma(static_cast<double>(n - j) + 1.0) - static_cast<double>(n) * std::log(2.0));
    return std::min(1.0, total);
}

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Central-difference derivative of nodal values along a 1D grid, at interior nodes.
inline double sobolev_log_gap(const Domain& dom, const std::vector<double>& la, const std::vector<double>& lb,
                              double inner_fraction = 0.8) {
    if (dom.dim() != 1) throw ValidationError("sobolev_log_gap: one-dimensional grids only");
    const Axis& ax = dom.axis(0);
    const double mid = 0.5 * (ax.lower + ax.upper), half = 0.5 * inner_fraction * (ax.upper - ax.lower);
    const double h = ax.spacing();
    double s = 0.0;
    for (std::size_t i = 1; i + 1 < dom.size(); ++i) {
        const double x = dom.coord(i, 0);
        if (std::abs(x - mid) > half || !dom.active(i - 1) || !dom.active(i + 1)) continue;
        const double da = (la[i + 1] - la[i - 1]) / (2.0 * h), db = (lb[i + 1] - lb[i - 1]) / (2.0 * h);
        s += h * (da - db) * (da - db);
    }
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Law of large numbers.

struct LlnRow {
    std::size_t n;
    std::size_t replicate;
    double w2;
    double sobolev;
    bool converged;
};

struct SignTest {
    std::size_t n_from, n_to;
    std::size_t wins = 0, losses = 0, ties = 0;
    double p_value = 1.0;
    bool passed = false;
};

struct LlnReport {
    std::vector<LlnRow> rows;
    std::vector<std::size_t> n_values;
    std::vector<double> median_w2;
    std::vector<double> median_sobolev;
    std::vector<SignTest> sign_tests;
    bool medians_decreasing = false;
    bool passed = false;
    double reference_residual = 0.0;
};

struct LlnOptions {
    std::vector<std::size_t> n_schedule{4, 16, 64, 256};
    std::size_t replicates = 50;
    double alpha = 0.05;
    std::size_t reference_n = 4096;  ///< large-n proxy size when the sampler has no finite population
    std::size_t threads = 0;
};

/// Reference barycenter: exact for finite-atoms samplers, otherwise a large-n
/// empirical proxy on a dedicated stream.
inline BarycenterResult reference_barycenter(const MeasureSampler& sampler, double lambda, const SolverConfig& cfg,
                                             std::size_t reference_n) {
    if (sampler.spec().family == SamplerFamily::finite_atoms) return solve_barycenter(sampler.finite_population(lambda), cfg);
    return empirical_barycenter(sampler, reference_n, lambda, cfg, 0xfeedULL << 32).result;
}

/// Replicate r draws one nested sequence; rho_n uses its first n draws. The
/// trend is tested with a paired one-sided sign test between consecutive n.
inline LlnReport lln_experiment(const MeasureSampler& sampler, double lambda, const SolverConfig& cfg,
                                const LlnOptions& opt) {
    if (opt.n_schedule.empty()) throw ValidationError("lln: empty n schedule");
    if (opt.replicates == 0) throw ValidationError("lln: replicates must be positive");
    if (sampler.domain()->dim() != 1) throw ValidationError("lln: one-dimensional domains only");
    SolverConfig inner = cfg;
    inner.threads = 1;
    const BarycenterResult ref = reference_barycenter(sampler, lambda, inner, opt.reference_n);
    LlnReport rep;
    rep.reference_residual = ref.final_residual;
    rep.n_values = opt.n_schedule;
    const std::size_t S = opt.n_schedule.size();
    std::vector<LlnRow> rows(S * opt.replicates);
    parallel_for(opt.replicates, resolve_threads(opt.threads), [&](std::size_t r) {
        for (std::size_t k = 0; k < S; ++k) {
            const std::size_t n = opt.n_schedule[k];
            auto eb = empirical_barycenter(sampler, n, lambda, inner, r);
            rows[r * S + k] = {n, r, w2_grid(eb.result.density, ref.density),
                               sobolev_log_gap(*sampler.domain(), eb.result.log_density, ref.log_density),
                               eb.result.converged};
        }
    });
    // Rows ordered by n, then replicate.
    for (std::size_t k = 0; k < S; ++k)
        for (std::size_t r = 0; r < opt.replicates; ++r) rep.rows.push_back(rows[r * S + k]);
    for (std::size_t k = 0; k < S; ++k) {
        std::vector<double> w, s;
        for (std::size_t r = 0; r < opt.replicates; ++r) {
            w.push_back(rows[r * S + k].w2);
            s.push_back(rows[r * S + k].sobolev);
        }
        rep.median_w2.push_back(median(w));
        rep.median_sobolev.push_back(median(s));
    }
    rep.medians_decreasing = true;
    for (std::size_t k = 0; k + 1 < S; ++k) {
        SignTest t{opt.n_schedule[k], opt.n_schedule[k + 1]};
        for (std::size_t r = 0; r < opt.replicates; ++r) {
            const double a = rows[r * S + k].w2, b = rows[r * S + k + 1].w2;
            if (b < a)
                ++t.wins;
            else if (b > a)
                ++t.losses;
            else
                ++t.ties;
        }
        t.p_value = binomial_upper_tail(t.wins, t.wins + t.losses);
        t.passed = t.p_value < opt.alpha;
        rep.sign_tests.push_back(t);
        if (!(rep.median_w2[k + 1] < rep.median_w2[k])) rep.medians_decreasing = false;
    }
    rep.passed = rep.medians_decreasing &&
                 std::all_of(rep.sign_tests.begin(), rep.sign_tests.end(), [](const SignTest& t) { return t.passed; });
    return rep;
}

// ---------------------------------------------------------------------------
// Central limit theorem.

/// First k monomials x, x^2, ... on the rescaled interval, made zero-mean
/// and orthonormal for the trapezoidal inner product (columns).
inline Eigen::MatrixXd zero_mean_polynomial_basis(const Domain& dom, std::size_t k) {
    if (dom.dim() != 1) throw ValidationError("basis: one-dimensional grids only");
    const auto n = static_cast<Eigen::Index>(dom.size());
    const Axis& ax = dom.axis(0);
    const double mid = 0.5 * (ax.lower + ax.upper), half = 0.5 * (ax.upper - ax.lower);
    Eigen::MatrixXd B(n, static_cast<Eigen::Index>(k));
    for (std::size_t j = 0; j < k; ++j) {
        Eigen::VectorXd f(n);
        for (Eigen::Index i = 0; i < n; ++i) f[i] = std::pow((dom.coord(static_cast<std::size_t>(i), 0) - mid) / half, static_cast<double>(j + 1));
        f = zero_mean(dom, f);
        for (std::size_t q = 0; q < j; ++q) f -= inner(dom, f, B.col(static_cast<Eigen::Index>(q))) * B.col(static_cast<Eigen::Index>(q));
        f /= std::sqrt(inner(dom, f, f));
        B.col(static_cast<Eigen::Index>(j)) = f;
    }
    return B;
}

struct CltReport {
    std::size_t n = 0;
    std::size_t replicates = 0;
    std::size_t k = 0;
    Eigen::MatrixXd projections;   ///< replicates x k
    Eigen::MatrixXd empirical_cov;
    Eigen::MatrixXd plugin_cov;    ///< projection of G^{-1} Var(phi) G^{-1}
    Eigen::MatrixXd plugin_cov_sampled;  ///< same with Var(phi) estimated from sampled potentials
    double relative_frobenius = 0.0;
    double bootstrap_band = 0.0;   ///< 95th percentile of the bootstrap relative deviation
    bool within_band = false;
    double leading_eigen_share = 0.0;  ///< of the empirical covariance
    std::vector<double> skewness;
    std::vector<double> excess_kurtosis;
    double g_condition = 0.0;
    std::size_t unconverged = 0;
    std::optional<LinearizedOperator> g_operator;
    std::optional<LinearizedOperator> sigma_operator;  ///< the operator behind plugin_cov
};

struct CltOptions {
    std::size_t n = 256;
    std::size_t replicates = 400;
    std::size_t k_basis = 5;
    std::size_t bootstrap = 1000;
    std::size_t variance_samples = 400;  ///< sampled potentials for the cross-check
    std::size_t reference_n = 4096;
    std::size_t threads = 0;
};

inline constexpr std::size_t kMinCltReplicates = 50;

inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& X) {
    const Eigen::RowVectorXd m = X.colwise().mean();
    const Eigen::MatrixXd C = X.rowwise() - m;
    return C.transpose() * C / static_cast<double>(X.rows() - 1);
}

inline CltReport clt_experiment(const MeasureSampler& sampler, double lambda, const SolverConfig& cfg,
                                const CltOptions& opt) {
    if (opt.replicates < kMinCltReplicates)
        throw ValidationError("clt.replicates: at least " + std::to_string(kMinCltReplicates) + " replicates required");
    if (opt.k_basis == 0) throw ValidationError("clt.k_basis must be positive");
    const DomainPtr& domain = sampler.domain();
    const Domain& dom = *domain;
    SolverConfig inner_cfg = cfg;
    inner_cfg.threads = 1;
    const std::size_t threads = resolve_threads(opt.threads);

    // Ground truth and its potentials.
    const BarycenterResult ref = reference_barycenter(sampler, lambda, inner_cfg, opt.reference_n);
    const Eigen::MatrixXd B = zero_mean_polynomial_basis(dom, opt.k_basis);
    const Eigen::VectorXd rbar = Eigen::Map<const Eigen::VectorXd>(ref.density.values().data(), static_cast<Eigen::Index>(dom.size()));

    CltReport rep;
    rep.n = opt.n;
    rep.replicates = opt.replicates;
    rep.k = opt.k_basis;
    rep.projections.resize(static_cast<Eigen::Index>(opt.replicates), static_cast<Eigen::Index>(opt.k_basis));
    std::vector<std::uint8_t> conv(opt.replicates, 1);
    parallel_for(opt.replicates, threads, [&](std::size_t r) {
        auto eb = empirical_barycenter(sampler, opt.n, lambda, inner_cfg, r);
        conv[r] = eb.result.converged;
        const Eigen::VectorXd rn = Eigen::Map<const Eigen::VectorXd>(eb.result.density.values().data(), static_cast<Eigen::Index>(dom.size()));
        const Eigen::VectorXd u = std::sqrt(static_cast<double>(opt.n)) * (rn - rbar);
        for (std::size_t j = 0; j < opt.k_basis; ++j)
            rep.projections(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = inner(dom, u, B.col(static_cast<Eigen::Index>(j)));
    });
    for (auto c : conv) rep.unconverged += c ? 0 : 1;
    rep.empirical_cov = sample_covariance(rep.projections);

    // Plug-in covariance. For a finite population G and Var(phi) are exact;
    // otherwise both are estimated from fresh draws against rho_bar.
    const bool finite = sampler.spec().family == SamplerFamily::finite_atoms;
    std::vector<DensityGrid> fresh;
    for (std::size_t i = 0; i < opt.variance_samples; ++i) fresh.push_back(sampler.draw(0xabcULL << 32, i).measure);
    std::vector<Potential> sampled(fresh.size());
    parallel_for(fresh.size(), threads, [&](std::size_t i) { sampled[i] = ot_1d(ref.density, fresh[i]).potential; });
    const LinearizedOperator C_sampled = [&] {
        std::vector<Eigen::VectorXd> s;
        for (const auto& p : sampled) s.push_back(to_vector(p.phi));
        const double m = static_cast<double>(s.size());
        LinearizedOperator C = covariance_operator(domain, s, std::vector<double>(s.size(), 1.0 / m));
        C.matrix *= m / (m - 1.0);
        return C;
    }();
    if (finite) {
        const Population<DensityGrid> pop = sampler.finite_population(lambda);
        const LinearizedOperator G = build_G(ref.density, ref.potentials, pop);
        rep.g_condition = G.condition_number;
        rep.sigma_operator = sigma_from(G, population_covariance(pop, ref.potentials));
        rep.plugin_cov = project_covariance(*rep.sigma_operator, B);
        rep.plugin_cov_sampled = project_covariance(sigma_from(G, C_sampled), B);
        rep.g_operator = G;
    } else {
        const Population<DensityGrid> pop = Population<DensityGrid>::uniform(lambda, std::move(fresh), domain);
        const LinearizedOperator G = build_G(ref.density, sampled, pop);
        rep.g_condition = G.condition_number;
        rep.sigma_operator = sigma_from(G, C_sampled);
        rep.plugin_cov = project_covariance(*rep.sigma_operator, B);
        rep.plugin_cov_sampled = rep.plugin_cov;
        rep.g_operator = G;
    }

    const double emp_norm = rep.empirical_cov.norm();
    rep.relative_frobenius = emp_norm > 0.0 ? (rep.plugin_cov - rep.empirical_cov).norm() / emp_norm
                                            : rep.plugin_cov.norm();
    // Bootstrap over replicates.
    std::vector<double> devs(opt.bootstrap);
    CounterRng boot(sampler.seed(), 0xb007ULL << 32);
    Eigen::MatrixXd Xb(rep.projections.rows(), rep.projections.cols());
    for (std::size_t b = 0; b < opt.bootstrap; ++b) {
        for (Eigen::Index r = 0; r < Xb.rows(); ++r)
            Xb.row(r) = rep.projections.row(static_cast<Eigen::Index>(boot.below(static_cast<std::uint64_t>(Xb.rows()))));
        const Eigen::MatrixXd Cb = sample_covariance(Xb);
        devs[b] = emp_norm > 0.0 ? (Cb - rep.empirical_cov).norm() / emp_norm : Cb.norm();
    }
    std::sort(devs.begin(), devs.end());
    if (!devs.empty())
        rep.bootstrap_band = devs[std::min(devs.size() - 1, static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(devs.size()))) - 1)];
    rep.within_band = rep.relative_frobenius <= rep.bootstrap_band;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rep.empirical_cov, Eigen::EigenvaluesOnly);
    const double tr = rep.empirical_cov.trace();
    rep.leading_eigen_share = tr > 0.0 ? es.eigenvalues().maxCoeff() / tr : 0.0;
    for (Eigen::Index j = 0; j < rep.projections.cols(); ++j) {
        const Eigen::VectorXd c = rep.projections.col(j).array() - rep.projections.col(j).mean();
        const double m2 = c.array().square().mean();
        const double m3 = c.array().cube().mean();
        const double m4 = c.array().square().square().mean();
        rep.skewness.push_back(m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0);
        rep.excess_kurtosis.push_back(m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0);
    }
    return rep;
}

}  // namespace entrobar
