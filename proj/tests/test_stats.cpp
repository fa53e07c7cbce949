#include <gtest/gtest.h>

#include <cmath>

#include "entrobar/ot.hpp"
#include "entrobar/stats.hpp"
#include "helpers.hpp"

using namespace entrobar;
using namespace entrobar::testing;

namespace {

SolverConfig fast_cfg() {
    SolverConfig c;
    c.tol_l1 = 1e-8;
    c.threads = 1;
    return c;
}

MeasureSampler two_atom_sampler(const DomainPtr& dom, double w0 = 0.3) {
    SamplerSpec s;
    s.family = SamplerFamily::finite_atoms;
    s.atoms = {gauss(dom, -1.0, 0.4), gauss(dom, 1.2, 0.6)};
    s.atom_weights = {w0, 1.0 - w0};
    return MeasureSampler(s, dom, 2024);
}

}  // namespace

TEST(Sampler, FamilyNamesRoundTrip) {
    for (auto f : {SamplerFamily::random_gaussian, SamplerFamily::random_translated_template,
                   SamplerFamily::random_bump_mixture, SamplerFamily::finite_atoms})
        EXPECT_EQ(sampler_family_from_string(to_string(f)), f);
    EXPECT_THROW(sampler_family_from_string("dirichlet"), ValidationError);
}

TEST(Sampler, DrawsDependOnlyOnSeedStreamIndex) {
    const auto dom = full_line(-6.0, 6.0, 241);
    SamplerSpec s;
    const MeasureSampler a(s, dom, 7), b(s, dom, 7), c(s, dom, 8);
    EXPECT_EQ(vec(a.draw(3, 11).measure), vec(b.draw(3, 11).measure));
    // Order of requests does not matter.
    (void)b.draw(0, 0);
    EXPECT_EQ(vec(a.draw(3, 12).measure), vec(b.draw(3, 12).measure));
    EXPECT_NE(vec(a.draw(3, 11).measure), vec(a.draw(3, 12).measure));
    EXPECT_NE(vec(a.draw(3, 11).measure), vec(a.draw(4, 11).measure));
    EXPECT_NE(vec(a.draw(3, 11).measure), vec(c.draw(3, 11).measure));
}

TEST(Sampler, GaussianDrawsRespectRanges) {
    const auto dom = full_line(-8.0, 8.0, 401);
    SamplerSpec s;
    s.mean_lo = 0.5;
    s.mean_hi = 1.0;
    s.var_lo = 0.4;
    s.var_hi = 0.6;
    const MeasureSampler sm(s, dom, 1);
    for (std::uint64_t i = 0; i < 20; ++i) {
        const auto d = sm.draw(0, i);
        EXPECT_GE(mean(d.measure)[0], 0.5 - 1e-6);
        EXPECT_LE(mean(d.measure)[0], 1.0 + 1e-6);
        EXPECT_GE(d.log_concavity, 1.0 / 0.6);
        EXPECT_LE(d.log_concavity, 1.0 / 0.4);
    }
}

TEST(Sampler, TranslatedTemplateAndBumps) {
    const auto dom = line(-4.0, 4.0, 161);
    SamplerSpec t;
    t.family = SamplerFamily::random_translated_template;
    EXPECT_THROW(MeasureSampler(t, dom, 1), ValidationError);
    t.templ = gauss(dom, 0.0, 0.2);
    t.shift_lo = -0.5;
    t.shift_hi = 0.5;
    const MeasureSampler ts(t, dom, 1);
    for (std::uint64_t i = 0; i < 10; ++i) EXPECT_LE(std::abs(mean(ts.draw(0, i).measure)[0]), 0.5 + 1e-3);

    SamplerSpec b;
    b.family = SamplerFamily::random_bump_mixture;
    const MeasureSampler bs(b, dom, 1);
    const auto d = bs.draw(0, 0).measure;
    EXPECT_NEAR(d.mass(), 1.0, 1e-12);
    for (double v : d.values()) EXPECT_GT(v, 0.0);
    b.baseline = 0.0;
    EXPECT_THROW(MeasureSampler(b, dom, 1), ValidationError);
    EXPECT_THROW(MeasureSampler(SamplerSpec{SamplerFamily::random_bump_mixture}, make_domain(Domain::box({Axis{-1, 1, 5}, Axis{-1, 1, 5}})), 1),
                 ValidationError);
}

TEST(Sampler, FiniteAtomsValidation) {
    const auto dom = line(-3.0, 3.0, 61);
    SamplerSpec s;
    s.family = SamplerFamily::finite_atoms;
    EXPECT_THROW(MeasureSampler(s, dom, 1), ValidationError);
    s.atoms = {gauss(dom, 0.0, 1.0), gauss(dom, 1.0, 1.0)};
    s.atom_weights = {0.5, 0.6};
    EXPECT_THROW(MeasureSampler(s, dom, 1), ValidationError);
    s.atom_weights = {1.0};
    EXPECT_THROW(MeasureSampler(s, dom, 1), ValidationError);
    s.atom_weights.clear();
    const MeasureSampler ok(s, dom, 1);
    EXPECT_DOUBLE_EQ(ok.spec().atom_weights[0], 0.5);
    s.atoms.push_back(gauss(line(-3.0, 3.0, 31), 0.0, 1.0));
    EXPECT_THROW(MeasureSampler(s, dom, 1), ValidationError);
}

TEST(Sampler, FiniteAtomFrequencies) {
    const auto dom = line(-4.0, 4.0, 81);
    const auto sm = two_atom_sampler(dom, 0.3);
    std::size_t zeros = 0;
    const std::size_t N = 20000;
    for (std::size_t i = 0; i < N; ++i) zeros += sm.draw(5, i).atom == 0;
    // Binomial sd is about 0.0032.
    EXPECT_NEAR(static_cast<double>(zeros) / N, 0.3, 0.015);
}

TEST(EmpiricalBarycenter, SingleDrawIsThatMeasuresBarycenter) {
    const auto dom = full_line(-8.0, 8.0, 321);
    SamplerSpec s;
    const MeasureSampler sm(s, dom, 3);
    const auto eb = empirical_barycenter(sm, 1, 0.5, fast_cfg(), 2);
    ASSERT_EQ(eb.population.size(), 1u);
    EXPECT_EQ(vec(eb.population.atoms()[0].measure), vec(sm.draw(2, 0).measure));
    const auto direct = solve_barycenter(Population<DensityGrid>(0.5, {{1.0, sm.draw(2, 0).measure}}), fast_cfg());
    EXPECT_LT(sup_diff(vec(eb.result.density), vec(direct.density)), 1e-12);
    EXPECT_THROW(empirical_population(sm, 0, 0.5, 0), ValidationError);
}

TEST(EmpiricalBarycenter, ConstantTemplateGivesFixedAnswer) {
    const auto dom = full_line(-8.0, 8.0, 321);
    SamplerSpec s;
    s.family = SamplerFamily::random_translated_template;
    s.templ = gauss(dom, 0.3, 0.5);
    s.shift_lo = s.shift_hi = 0.0;
    const MeasureSampler sm(s, dom, 3);
    const auto a = empirical_barycenter(sm, 1, 0.4, fast_cfg(), 0).result;
    const auto b = empirical_barycenter(sm, 12, 0.4, fast_cfg(), 9).result;
    EXPECT_LT(sup_diff(vec(a.density), vec(b.density)), 1e-8);
}

TEST(EmpiricalBarycenter, SameSeedIsBitwiseIdentical) {
    const auto dom = full_line(-8.0, 8.0, 321);
    SamplerSpec s;
    const MeasureSampler a(s, dom, 42), b(s, dom, 42);
    const auto ra = empirical_barycenter(a, 6, 0.5, fast_cfg(), 1).result;
    const auto rb = empirical_barycenter(b, 6, 0.5, fast_cfg(), 1).result;
    EXPECT_EQ(vec(ra.density), vec(rb.density));
    EXPECT_EQ(ra.iterations, rb.iterations);
}

TEST(EmpiricalBarycenter, FiniteAtomDrawsAreMerged) {
    const auto dom = line(-4.0, 4.0, 81);
    const auto sm = two_atom_sampler(dom);
    const auto pop = empirical_population(sm, 40, 0.5, 0);
    EXPECT_LE(pop.size(), 2u);
    double t = 0.0;
    for (const auto& a : pop.atoms()) t += a.weight;
    EXPECT_DOUBLE_EQ(t, 1.0);
}

TEST(Statistics, BinomialTail) {
    EXPECT_DOUBLE_EQ(binomial_upper_tail(0, 10), 1.0);
    EXPECT_DOUBLE_EQ(binomial_upper_tail(11, 10), 0.0);
    EXPECT_NEAR(binomial_upper_tail(10, 10), std::pow(0.5, 10), 1e-15);
    // P(X >= 8), n = 10: (45 + 10 + 1) / 1024.
    EXPECT_NEAR(binomial_upper_tail(8, 10), 56.0 / 1024.0, 1e-14);
    EXPECT_NEAR(binomial_upper_tail(3, 6), 42.0 / 64.0, 1e-14);
}

TEST(Statistics, Median) {
    EXPECT_DOUBLE_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_DOUBLE_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
    EXPECT_DOUBLE_EQ(median({}), 0.0);
}

TEST(Statistics, PolynomialBasisIsZeroMeanOrthonormal) {
    const auto dom = line(-2.0, 5.0, 141);
    const Eigen::MatrixXd B = zero_mean_polynomial_basis(*dom, 5);
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(B.rows());
    for (Eigen::Index a = 0; a < B.cols(); ++a) {
        EXPECT_NEAR(inner(*dom, B.col(a), one), 0.0, 1e-12);
        for (Eigen::Index b = 0; b < B.cols(); ++b) EXPECT_NEAR(inner(*dom, B.col(a), B.col(b)), a == b ? 1.0 : 0.0, 1e-10);
    }
    // The first column is the centred linear function up to sign and scale.
    const Eigen::VectorXd x = zero_mean(*dom, Eigen::VectorXd::LinSpaced(B.rows(), -2.0, 5.0));
    EXPECT_NEAR(std::abs(inner(*dom, B.col(0), x)) / std::sqrt(inner(*dom, x, x)), 1.0, 1e-12);
}

TEST(Statistics, SobolevGapVanishesOnEqualInputs) {
    const auto dom = line(-1.0, 1.0, 41);
    std::vector<double> a(41), b(41);
    for (std::size_t i = 0; i < 41; ++i) {
        a[i] = dom->coord(i, 0);
        b[i] = a[i] + 3.0;
    }
    EXPECT_NEAR(sobolev_log_gap(*dom, a, b), 0.0, 1e-12);
    for (std::size_t i = 0; i < 41; ++i) b[i] = 2.0 * a[i];
    // Derivative gap 1 integrated over the inner 80%.
    EXPECT_NEAR(sobolev_log_gap(*dom, a, b), std::sqrt(1.6), 0.06);
}

TEST(Lln, SmallRunShrinksTowardsThePopulationBarycenter) {
    const auto dom = line(-4.0, 4.0, 161);
    const auto sm = two_atom_sampler(dom, 0.3);
    LlnOptions opt;
    opt.n_schedule = {2, 200};
    opt.replicates = 12;
    opt.threads = 1;
    const auto rep = lln_experiment(sm, 0.5, fast_cfg(), opt);
    ASSERT_EQ(rep.rows.size(), 24u);
    EXPECT_EQ(rep.rows[0].n, 2u);
    EXPECT_EQ(rep.rows[12].n, 200u);
    ASSERT_EQ(rep.sign_tests.size(), 1u);
    EXPECT_EQ(rep.sign_tests[0].wins + rep.sign_tests[0].losses + rep.sign_tests[0].ties, 12u);
    EXPECT_LT(rep.median_w2[1], rep.median_w2[0]);
    EXPECT_TRUE(rep.medians_decreasing);
    EXPECT_LT(rep.reference_residual, 1e-8);
}

TEST(Lln, RejectsBadOptions) {
    const auto dom = line(-4.0, 4.0, 41);
    const auto sm = two_atom_sampler(dom);
    LlnOptions opt;
    opt.n_schedule.clear();
    EXPECT_THROW(lln_experiment(sm, 0.5, fast_cfg(), opt), ValidationError);
    opt.n_schedule = {2};
    opt.replicates = 0;
    EXPECT_THROW(lln_experiment(sm, 0.5, fast_cfg(), opt), ValidationError);
}

TEST(Clt, DeterministicSamplerHasNoFluctuation) {
    const auto dom = line(-4.0, 4.0, 81);
    SamplerSpec s;
    s.family = SamplerFamily::finite_atoms;
    s.atoms = {gauss(dom, 0.2, 0.5)};
    const MeasureSampler sm(s, dom, 1);
    ASSERT_TRUE(sm.deterministic());
    CltOptions opt;
    opt.n = 16;
    opt.replicates = kMinCltReplicates;
    opt.k_basis = 3;
    opt.bootstrap = 20;
    opt.variance_samples = 4;
    opt.threads = 1;
    const auto rep = clt_experiment(sm, 0.5, fast_cfg(), opt);
    EXPECT_LT(rep.projections.cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT(rep.plugin_cov.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(rep.unconverged, 0u);
}

TEST(Clt, RejectsTooFewReplicates) {
    const auto dom = line(-4.0, 4.0, 41);
    const auto sm = two_atom_sampler(dom);
    CltOptions opt;
    opt.replicates = kMinCltReplicates - 1;
    EXPECT_THROW(clt_experiment(sm, 0.5, fast_cfg(), opt), ValidationError);
}
