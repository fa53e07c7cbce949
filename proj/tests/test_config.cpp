#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include "entrobar/config.hpp"

using namespace entrobar;
using nlohmann::json;

namespace {

std::string error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const ValidationError& e) {
        return e.what();
    }
    return "";
}

bool mentions(const std::string& msg, const std::string& path) { return msg.find(path) != std::string::npos; }

json grid_config() {
    return json::parse(R"({
      "lambda": 0.3,
      "domain": {"kind": "interval", "lower": -4, "upper": 4, "points": 81},
      "population": {"atoms": [
        {"weight": 0.25, "type": "gaussian", "mean": [-1.0], "covariance": [[0.5]]},
        {"weight": 0.75, "type": "uniform", "lower": 0.0, "upper": 2.0}
      ]}
    })");
}

}  // namespace

TEST(Config, NodeReportsDottedPaths) {
    const json j = json::parse(R"({"solver": {"tol_l1": "tiny", "max_iters": -3}, "xs": [1, "a"], "list": [{"a": 1}, 5]})");
    const config::Node root(j, "");
    const auto solver = root.child("solver");
    EXPECT_TRUE(mentions(error_of([&] { solver.number("tol_l1"); }), "solver.tol_l1"));
    EXPECT_TRUE(mentions(error_of([&] { solver.count("max_iters"); }), "solver.max_iters"));
    EXPECT_TRUE(mentions(error_of([&] { solver.number("damping"); }), "solver.damping"));
    EXPECT_TRUE(mentions(error_of([&] { root.child("domain"); }), "domain"));
    EXPECT_TRUE(mentions(error_of([&] { root.numbers("xs"); }), "xs"));
    EXPECT_TRUE(mentions(error_of([&] { root.objects("list"); }), "list[1]"));
    EXPECT_DOUBLE_EQ(solver.number("damping", 0.7), 0.7);
}

TEST(Config, LoadRejectsMissingAndMalformedFiles) {
    EXPECT_THROW(config::load("/nonexistent/config.json"), ValidationError);
    const auto p = std::filesystem::temp_directory_path() / "entrobar_bad_config.json";
    std::ofstream(p) << "{\"lambda\": 0.3,";
    EXPECT_THROW(config::load(p), ValidationError);
    std::ofstream(p) << "// comments are allowed\n{\"lambda\": 0.3}";
    EXPECT_DOUBLE_EQ(config::load(p)["lambda"].get<double>(), 0.3);
    std::filesystem::remove(p);
}

TEST(Config, LambdaMustBePositive) {
    for (const char* bad : {R"({"lambda": 0})", R"({"lambda": -1})", R"({"lambda": "x"})", R"({})"}) {
        const json j = json::parse(bad);
        EXPECT_TRUE(mentions(error_of([&] { config::lambda(config::Node(j, "")); }), "lambda")) << bad;
    }
    const json ok = json::parse(R"({"lambda": 0.25})");
    EXPECT_DOUBLE_EQ(config::lambda(config::Node(ok, "")), 0.25);
}

TEST(Config, DomainKinds) {
    auto dom = [](const char* s) {
        const json j = json::parse(s);
        return config::domain(config::Node(j, "domain"));
    };
    const auto iv = dom(R"({"kind": "interval", "lower": -1, "upper": 1, "points": 21})");
    EXPECT_EQ(iv->kind(), DomainKind::interval);
    EXPECT_EQ(iv->size(), 21u);
    const auto un = dom(R"({"kind": "interval", "lower": -8, "upper": 8, "points": 161, "pieces": [[-8, -4], [-1, 1], [4, 8]]})");
    EXPECT_FALSE(un->convex());
    const auto bx = dom(R"({"kind": "box", "axes": [{"lower": 0, "upper": 1, "points": 5}, {"lower": -2, "upper": 2, "points": 9}]})");
    EXPECT_EQ(bx->dim(), 2u);
    EXPECT_EQ(bx->size(), 45u);
    const auto fs = dom(R"({"kind": "full-space-truncation", "lower": -5, "upper": 5, "points": 11, "dim": 2})");
    EXPECT_EQ(fs->kind(), DomainKind::full_space_truncation);
    EXPECT_EQ(fs->size(), 121u);
    const auto ball = dom(R"({"kind": "ball", "dim": 2, "radius": 1.5, "points": 31})");
    EXPECT_EQ(ball->kind(), DomainKind::ball);

    EXPECT_THROW(dom(R"({"kind": "torus", "lower": 0, "upper": 1, "points": 5})"), ValidationError);
    EXPECT_TRUE(mentions(error_of([&] { dom(R"({"kind": "interval", "lower": 1, "upper": 0, "points": 5})"); }), "domain"));
    EXPECT_TRUE(mentions(error_of([&] { dom(R"({"kind": "interval", "lower": 0, "upper": 1, "points": 1})"); }), "domain.points"));
    EXPECT_TRUE(mentions(error_of([&] { dom(R"({"kind": "interval", "lower": 0, "upper": 1, "points": 5, "pieces": [[1, 0]]})"); }),
                         "domain.pieces"));
}

TEST(Config, GridPopulationAtomTypes) {
    const json j = grid_config();
    const config::Node root(j, "");
    const auto dom = config::domain(root.child("domain"));
    const auto gp = config::grid_population(root, dom, ".");
    ASSERT_EQ(gp.population.size(), 2u);
    EXPECT_DOUBLE_EQ(gp.population.atoms()[0].weight, 0.25);
    EXPECT_DOUBLE_EQ(gp.population.lambda(), 0.3);
    // The uniform atom is not known to be log-concave.
    EXPECT_DOUBLE_EQ(gp.log_concavity, 0.0);
    // Indicator of [0, 2] at 21 nodes: trapezoidal mass 21 h.
    EXPECT_NEAR(gp.population.atoms()[1].measure.max_value(), 1.0 / 2.1, 1e-12);
}

TEST(Config, GaussianAtomLogConcavity) {
    json j = grid_config();
    j["population"]["atoms"][1] = json::parse(R"({"weight": 0.75, "mean": [1.0], "covariance": [[0.25]]})");
    const config::Node root(j, "");
    const auto gp = config::grid_population(root, config::domain(root.child("domain")), ".");
    EXPECT_DOUBLE_EQ(gp.log_concavity, 2.0);
}

TEST(Config, ValuesAndCsvAtoms) {
    const auto dir = std::filesystem::temp_directory_path() / "entrobar_config_test";
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir / "atom.csv");
        f << "x,density\n";
        for (int i = 0; i < 5; ++i) f << (-1.0 + 0.5 * i) << "," << 1.0 + i << "\n";
    }
    const json j = json::parse(R"({
      "lambda": 1.0,
      "domain": {"kind": "interval", "lower": -1, "upper": 1, "points": 5},
      "population": {"atoms": [
        {"type": "values", "values": [1, 2, 3, 4, 5]},
        {"type": "csv", "path": "atom.csv"}
      ]}
    })");
    const config::Node root(j, "");
    const auto gp = config::grid_population(root, config::domain(root.child("domain")), dir);
    ASSERT_EQ(gp.population.size(), 2u);
    EXPECT_DOUBLE_EQ(gp.population.atoms()[0].weight, 0.5);
    for (std::size_t i = 0; i < 5; ++i)
        EXPECT_NEAR(gp.population.atoms()[0].measure[i], gp.population.atoms()[1].measure[i], 1e-12);
    std::filesystem::remove_all(dir);
}

TEST(Config, AtomErrorsNameTheAtom) {
    auto err = [](const std::function<void(json&)>& edit) {
        json j = grid_config();
        edit(j);
        const config::Node root(j, "");
        return error_of([&] { config::grid_population(root, config::domain(root.child("domain")), "."); });
    };
    EXPECT_TRUE(mentions(err([](json& j) { j["population"]["atoms"][1]["type"] = "cauchy"; }), "population.atoms[1].type"));
    EXPECT_TRUE(mentions(err([](json& j) { j["population"]["atoms"][0]["covariance"] = {{-1.0}}; }), "population.atoms[0]"));
    EXPECT_TRUE(mentions(err([](json& j) { j["population"]["atoms"][0]["mean"] = {0.0, 1.0}; }), "population.atoms[0]"));
    EXPECT_TRUE(mentions(err([](json& j) { j["population"]["atoms"][1]["lower"] = 3.0; }), "population.atoms[1]"));
    EXPECT_TRUE(mentions(err([](json& j) { j["population"]["atoms"][0]["weight"] = -0.25; }), "population.atoms[0].weight"));
    EXPECT_TRUE(mentions(err([](json& j) { j["population"]["atoms"] = json::array(); }), "population.atoms"));
    EXPECT_TRUE(mentions(err([](json& j) { j["population"]["atoms"][0].erase("weight"); }), "population.atoms[0].weight"));
}

TEST(Config, WeightsMustSumToOne) {
    json j = grid_config();
    j["population"]["atoms"][0]["weight"] = 0.5;
    const config::Node root(j, "");
    const std::string msg = error_of([&] { config::grid_population(root, config::domain(root.child("domain")), "."); });
    EXPECT_TRUE(mentions(msg, "sum to 1")) << msg;
}

TEST(Config, SolverSection) {
    json j = json::parse(R"({"solver": {"tol_l1": 1e-6, "damping": 0.5, "potential_backend": "discrete-lp"}, "threads": 3})");
    const auto c = config::solver(config::Node(j, ""));
    EXPECT_DOUBLE_EQ(c.tol_l1, 1e-6);
    EXPECT_DOUBLE_EQ(c.damping, 0.5);
    EXPECT_EQ(c.potential_backend, PotentialBackend::discrete_lp);
    EXPECT_EQ(c.threads, 3u);
    j["solver"]["potential_backend"] = "sinkhorn";
    EXPECT_TRUE(mentions(error_of([&] { config::solver(config::Node(j, "")); }), "solver.potential_backend"));
    j["solver"]["potential_backend"] = "exact-1d";
    j["solver"]["damping"] = 1.5;
    EXPECT_THROW(config::solver(config::Node(j, "")), ValidationError);
}

TEST(Config, GaussianPopulation) {
    const json j = json::parse(R"({"lambda": 0.5, "population": {"atoms": [
        {"mean": [0, 0], "covariance": [[1, 0], [0, 2]]}, {"mean": [1, 1], "covariance": [[1, 0.2], [0.2, 1]]}]}})");
    const auto pop = config::gaussian_population(config::Node(j, ""));
    EXPECT_EQ(pop.size(), 2u);
    EXPECT_DOUBLE_EQ(pop.atoms()[1].weight, 0.5);
    json bad = j;
    bad["population"]["atoms"][1]["mean"] = {1.0};
    bad["population"]["atoms"][1]["covariance"] = {{1.0}};
    EXPECT_TRUE(mentions(error_of([&] { config::gaussian_population(config::Node(bad, "")); }), "population.atoms[1]"));
    bad = j;
    bad["population"]["atoms"][0]["type"] = "uniform";
    EXPECT_TRUE(mentions(error_of([&] { config::gaussian_population(config::Node(bad, "")); }), "population.atoms[0].type"));
}

TEST(Config, SamplerAndExperimentOptions) {
    const json j = json::parse(R"({
      "domain": {"kind": "interval", "lower": -3, "upper": 3, "points": 61},
      "sampler": {"family": "finite-atoms", "weights": [0.4, 0.6], "atoms": [
        {"mean": [-1.0], "covariance": [[0.5]]}, {"type": "uniform", "lower": -1, "upper": 2}]},
      "lln": {"n_schedule": [2, 8], "replicates": 5},
      "clt": {"n": 10, "replicates": 60, "k_basis": 3}
    })");
    const config::Node root(j, "");
    const auto dom = config::domain(root.child("domain"));
    const auto s = config::sampler(root, dom, 9, ".");
    EXPECT_EQ(s.spec().family, SamplerFamily::finite_atoms);
    EXPECT_DOUBLE_EQ(s.spec().atom_weights[1], 0.6);
    EXPECT_DOUBLE_EQ(s.spec().atom_log_concavity[0], 2.0);
    const auto lo = config::lln_options(root);
    EXPECT_EQ(lo.n_schedule, (std::vector<std::size_t>{2, 8}));
    EXPECT_EQ(lo.replicates, 5u);
    const auto co = config::clt_options(root);
    EXPECT_EQ(co.n, 10u);
    EXPECT_EQ(co.k_basis, 3u);

    json bad = j;
    bad["sampler"]["family"] = "dirichlet";
    EXPECT_TRUE(mentions(error_of([&] { config::sampler(config::Node(bad, ""), dom, 9, "."); }), "sampler.family"));
    bad = j;
    bad["sampler"]["weights"] = {0.4, 0.4};
    EXPECT_TRUE(mentions(error_of([&] { config::sampler(config::Node(bad, ""), dom, 9, "."); }), "sampler"));
    bad = j;
    bad["clt"]["replicates"] = 49;
    EXPECT_TRUE(mentions(error_of([&] { config::clt_options(config::Node(bad, "")); }), "clt.replicates"));
    bad = j;
    bad["lln"]["n_schedule"] = {2.5};
    EXPECT_TRUE(mentions(error_of([&] { config::lln_options(config::Node(bad, "")); }), "lln.n_schedule"));
}

TEST(Config, ShippedConfigsParse) {
    for (const auto& entry : std::filesystem::directory_iterator(ENTROBAR_CONFIG_DIR)) {
        if (entry.path().extension() != ".json") continue;
        const json j = config::load(entry.path());
        EXPECT_TRUE(j.contains("command")) << entry.path();
        EXPECT_TRUE(j.contains("output")) << entry.path();
    }
}
