#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "entrobar/config.hpp"
#include "entrobar/diagnostics.hpp"
#include "entrobar/error.hpp"
#include "entrobar/gaussian.hpp"
#include "entrobar/io.hpp"
#include "entrobar/linma.hpp"
#include "entrobar/solver.hpp"
#include "entrobar/stats.hpp"
#include "entrobar/version.hpp"

namespace entrobar::cli {

using nlohmann::json;

enum ExitCode : int { kOk = 0, kFailure = 1, kValidation = 2, kNonConvergence = 3 };

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> c{"gaussian-bary", "grid-bary", "lln", "clt", "diagnostics", "counterexample"};
    return c;
}

struct RunRequest {
    std::string command;
    json config;
    std::filesystem::path config_dir = ".";
    std::optional<std::filesystem::path> output;  ///< overrides config "output"
    std::optional<std::uint64_t> seed;            ///< overrides config "seed"
};

namespace detail {

/// Output directory plus the list of files written into it.
class Outputs {
public:
    explicit Outputs(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }
    std::filesystem::path add(const std::string& name) {
        files_.push_back(name);
        return dir_ / name;
    }
    const std::filesystem::path& dir() const { return dir_; }
    const std::vector<std::string>& files() const { return files_; }

private:
    std::filesystem::path dir_;
    std::vector<std::string> files_;
};

inline json grid_json(const Domain& dom) {
    json axes = json::array();
    for (const auto& a : dom.axes()) axes.push_back({{"lower", a.lower}, {"upper", a.upper}, {"points", a.points}});
    return {{"kind", to_string(dom.kind())}, {"axes", axes}, {"convex", dom.convex()}};
}

inline void write_operator(Outputs& out, const std::string& stem, const LinearizedOperator& op, const json& build) {
    io::write_matrix_csv(out.add(stem + ".csv"), op.matrix);
    json side{{"kind", to_string(op.kind)},
              {"rows", op.matrix.rows()},
              {"cols", op.matrix.cols()},
              {"grid", grid_json(*op.domain)},
              {"matrix", stem + ".csv"},
              {"convention", "row-major nodal matrix M; (M f)_i acts on nodal values, inner product weighted by trapezoid weights"},
              {"build", build}};
    if (op.condition_number > 0.0) side["condition_number"] = op.condition_number;
    io::write_json(out.add(stem + ".json"), side);
}

inline json barycenter_json(const BarycenterResult& r, const Population<DensityGrid>& pop, const SolverConfig& cfg) {
    const auto g = gradient_residual(r, pop);
    const auto [lhs, rhs] = mean_identity_check(r, pop);
    return {{"converged", r.converged},
            {"iterations", r.iterations},
            {"final_residual", r.final_residual},
            {"residual_bound", 2.0 * cfg.tol_l1},
            {"final_damping", r.final_damping},
            {"objective", r.objective_value},
            {"w2", r.w2},
            {"gradient_residual", {{"value", g.value}, {"constant", g.constant}, {"h", g.h}, {"bound", g.bound(cfg.tol_l1, pop.lambda())}}},
            {"mean", io::to_json(lhs)},
            {"mean_of_atoms", io::to_json(rhs)},
            {"max_density", r.density.max_value()}};
}

inline void write_barycenter(Outputs& out, const BarycenterResult& r) {
    const Domain& dom = r.density.domain();
    io::write_density_csv(out.add("density.csv"), r.density);
    io::write_nodal_csv(out.add("log_density.csv"), dom, r.log_density, "log_density");
    for (std::size_t i = 0; i < r.potentials.size(); ++i) {
        const auto& p = r.potentials[i];
        std::vector<std::string> names{"phi"};
        std::vector<std::vector<double>> cols{p.phi};
        for (std::size_t k = 0; k < dom.dim(); ++k) {
            names.push_back(dom.dim() == 1 ? "map" : "map" + std::to_string(k + 1));
            std::vector<double> c(dom.size());
            for (std::size_t x = 0; x < dom.size(); ++x) c[x] = p.map(x, k);
            cols.push_back(std::move(c));
        }
        io::write_nodal_table(out.add("potential_" + std::to_string(i) + ".csv"), dom, names, cols);
    }
}

inline json check_json(const BoundCheck& c) {
    return {{"name", c.name}, {"applicable", c.applicable}, {"note", c.note}, {"lhs", c.lhs},
            {"rhs", c.rhs},   {"slack", c.slack},           {"passed", c.passed}};
}

inline std::string header_comment(const json& echo) {
    return "# " + echo.dump() + "\n";
}

struct CommandResult {
    json result;
    int code = kOk;
};

inline CommandResult run_gaussian(const config::Node& root, Outputs& out) {
    const auto pop = config::gaussian_population(root);
    const auto opt = config::gaussian_options(root);
    const auto r = gaussian_barycenter(pop, opt);
    json j{{"barycenter", io::to_json(r.barycenter)},
           {"iterations", r.iterations},
           {"residual", r.residual},
           {"alpha", r.alpha},
           {"bracket_violations", r.bracket_violations},
           {"restart_gap", r.restart_gap}};
    if (r.restart_covariance) j["restart_covariance"] = io::to_json(*r.restart_covariance);
    io::write_json(out.add("barycenter.json"), j);
    return {j, kOk};
}

inline CommandResult run_grid(const config::Node& root, Outputs& out, const std::filesystem::path& base) {
    const DomainPtr dom = config::domain(root.child("domain"));
    const auto gp = config::grid_population(root, dom, base);
    const SolverConfig cfg = config::solver(root);
    const auto r = solve_barycenter(gp.population, cfg);
    write_barycenter(out, r);
    return {barycenter_json(r, gp.population, cfg), r.converged ? kOk : kNonConvergence};
}

inline CommandResult run_diagnostics(const config::Node& root, Outputs& out, const std::filesystem::path& base) {
    const DomainPtr dom = config::domain(root.child("domain"));
    const auto gp = config::grid_population(root, dom, base);
    const SolverConfig cfg = config::solver(root);
    const auto r = solve_barycenter(gp.population, cfg);
    write_barycenter(out, r);
    DiagnosticsOptions opt;
    opt.log_concavity = std::isfinite(gp.log_concavity) ? gp.log_concavity : 0.0;
    if (root.has("diagnostics")) {
        const auto n = root.child("diagnostics");
        opt.log_concavity = n.number("log_concavity", opt.log_concavity);
        opt.band_density_fraction = n.number("band_density_fraction", opt.band_density_fraction);
    }
    const auto rep = diagnostics(r, gp.population, opt);
    json checks = json::array();
    for (const auto& c : rep.checks) checks.push_back(check_json(c));
    json j{{"barycenter", barycenter_json(r, gp.population, cfg)},
           {"log_concavity", opt.log_concavity},
           {"checks", checks},
           {"all_passed", rep.all_passed()}};
    io::write_json(out.add("diagnostics.json"), j);
    return {{{"all_passed", rep.all_passed()}, {"converged", r.converged}}, r.converged ? kOk : kNonConvergence};
}

inline CommandResult run_counterexample(const config::Node& root, Outputs& out) {
    std::vector<double> lambdas{0.01, 0.1, 1.0, 10.0};
    std::size_t points = 1601, steps = 12;
    if (root.has("counterexample")) {
        const auto n = root.child("counterexample");
        if (n.has("lambdas")) lambdas = n.numbers("lambdas");
        for (double l : lambdas)
            if (!(l > 0.0)) throw ValidationError(n.field("lambdas") + ": every lambda must be positive");
        points = static_cast<std::size_t>(n.count("points", points));
        steps = static_cast<std::size_t>(n.count("bisection_steps", steps));
    }
    if (lambdas.empty()) throw ValidationError("counterexample.lambdas: must not be empty");
    const SolverConfig cfg = config::solver(root);
    const auto rep = counterexample_sweep(lambdas, cfg, points, steps);
    json rows = json::array();
    bool all_conv = true;
    for (const auto& r : rep.rows) {
        rows.push_back({{"lambda", r.lambda}, {"max_density", r.max_density}, {"exceeds_atom_bound", r.exceeds},
                        {"converged", r.converged}, {"iterations", r.iterations}, {"residual", r.residual}});
        all_conv = all_conv && r.converged;
    }
    json j{{"domain", "(-8,-4) u (-1,1) u (4,8)"},
           {"atoms", "1/4 on (-8,-4) and 1/4 on (4,8), weights 1/2"},
           {"points", points},
           {"atom_bound", rep.atom_bound},
           {"sweep", rows},
           {"crossing_lambda", rep.crossing_lambda ? json(*rep.crossing_lambda) : json(nullptr)},
           {"first_respecting_lambda", rep.first_respecting_lambda ? json(*rep.first_respecting_lambda) : json(nullptr)},
           {"threshold_lambda", rep.threshold_lambda ? json(*rep.threshold_lambda) : json(nullptr)}};
    io::write_json(out.add("counterexample.json"), j);
    return {{{"crossing_lambda", j["crossing_lambda"]}, {"threshold_lambda", j["threshold_lambda"]}},
            all_conv ? kOk : kNonConvergence};
}

inline CommandResult run_lln(const config::Node& root, Outputs& out, std::uint64_t seed, const std::filesystem::path& base,
                             const json& echo) {
    const DomainPtr dom = config::domain(root.child("domain"));
    const auto sampler = config::sampler(root, dom, seed, base);
    const SolverConfig cfg = config::solver(root);
    const auto opt = config::lln_options(root);
    const auto rep = lln_experiment(sampler, config::lambda(root), cfg, opt);
    {
        auto f = io::open_out(out.add("lln.csv"));
        f << header_comment(echo);
        f << "n,replicate,w2,sobolev_log_gap,converged\n";
        for (const auto& r : rep.rows)
            f << r.n << ',' << r.replicate << ',' << io::fmt(r.w2) << ',' << io::fmt(r.sobolev) << ',' << (r.converged ? 1 : 0) << '\n';
    }
    json tests = json::array();
    for (const auto& t : rep.sign_tests)
        tests.push_back({{"n_from", t.n_from}, {"n_to", t.n_to}, {"decreases", t.wins}, {"increases", t.losses},
                         {"ties", t.ties}, {"p_value", t.p_value}, {"passed", t.passed}});
    return {{{"n_values", rep.n_values},
             {"median_w2", rep.median_w2},
             {"median_sobolev_log_gap", rep.median_sobolev},
             {"sign_tests", tests},
             {"medians_decreasing", rep.medians_decreasing},
             {"passed", rep.passed},
             {"reference_residual", rep.reference_residual}},
            kOk};
}

inline CommandResult run_clt(const config::Node& root, Outputs& out, std::uint64_t seed, const std::filesystem::path& base,
                             const json& echo) {
    const DomainPtr dom = config::domain(root.child("domain"));
    const auto opt = config::clt_options(root);
    const auto sampler = config::sampler(root, dom, seed, base);
    const SolverConfig cfg = config::solver(root);
    const auto rep = clt_experiment(sampler, config::lambda(root), cfg, opt);
    const bool write_ops = !root.has("clt") || root.child("clt").flag("write_operators", true);
    json ops = json::array();
    if (write_ops) {
        const json build{{"command", "clt"}, {"lambda", config::lambda(root)}, {"seed", seed}, {"version", kVersion}};
        if (rep.g_operator) {
            write_operator(out, "operator_G", *rep.g_operator, build);
            ops.push_back("operator_G.json");
        }
        if (rep.sigma_operator) {
            write_operator(out, "operator_Sigma", *rep.sigma_operator, build);
            ops.push_back("operator_Sigma.json");
        }
    }
    json j{{"config", echo},
           {"n", rep.n},
           {"replicates", rep.replicates},
           {"k_basis", rep.k},
           {"projections", io::to_json(rep.projections)},
           {"empirical_cov", io::to_json(rep.empirical_cov)},
           {"plugin_cov", io::to_json(rep.plugin_cov)},
           {"plugin_cov_sampled_variance", io::to_json(rep.plugin_cov_sampled)},
           {"relative_frobenius", rep.relative_frobenius},
           {"bootstrap_band_95", rep.bootstrap_band},
           {"within_band", rep.within_band},
           {"leading_eigen_share", rep.leading_eigen_share},
           {"skewness", rep.skewness},
           {"excess_kurtosis", rep.excess_kurtosis},
           {"g_condition", rep.g_condition},
           {"unconverged_replicates", rep.unconverged},
           {"operators", ops}};
    io::write_json(out.add("clt_report.json"), j);
    return {{{"relative_frobenius", rep.relative_frobenius},
             {"bootstrap_band_95", rep.bootstrap_band},
             {"within_band", rep.within_band},
             {"leading_eigen_share", rep.leading_eigen_share}},
            kOk};
}

inline std::string eigen_version() {
    return std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." + std::to_string(EIGEN_MINOR_VERSION);
}

}  // namespace detail

/// Runs one experiment. The config echo drops "output" and records the
/// effective command and seed. Writes summary.json into the output directory
/// whenever that directory is known, including on failure.
inline int run(const RunRequest& req, std::ostream& err = std::cerr) {
    const auto t0 = std::chrono::steady_clock::now();
    json echo = req.config;
    std::optional<detail::Outputs> out;
    json summary;
    int code = kOk;
    std::string message;
    try {
        if (std::find(commands().begin(), commands().end(), req.command) == commands().end())
            throw ValidationError("unknown command '" + req.command + "'");
        const config::Node root(req.config, "");
        if (root.has("command") && root.text("command") != req.command)
            throw ValidationError("command: config is for '" + root.text("command") + "', not '" + req.command + "'");
        std::filesystem::path dir;
        if (req.output)
            dir = *req.output;
        else if (root.has("output"))
            dir = root.text("output");
        else
            throw ValidationError("output: no output directory (set 'output' or pass --output)");
        std::uint64_t seed = root.count("seed", 0);
        if (req.seed) seed = *req.seed;
        // The output location is left out of the echo so that runs into
        // different directories produce identical files.
        echo.erase("output");
        echo["command"] = req.command;
        echo["seed"] = seed;
        out.emplace(dir);
        detail::CommandResult res;
        if (req.command == "gaussian-bary")
            res = detail::run_gaussian(root, *out);
        else if (req.command == "grid-bary")
            res = detail::run_grid(root, *out, req.config_dir);
        else if (req.command == "diagnostics")
            res = detail::run_diagnostics(root, *out, req.config_dir);
        else if (req.command == "counterexample")
            res = detail::run_counterexample(root, *out);
        else if (req.command == "lln")
            res = detail::run_lln(root, *out, seed, req.config_dir, echo);
        else
            res = detail::run_clt(root, *out, seed, req.config_dir, echo);
        summary["result"] = res.result;
        code = res.code;
        if (code == kNonConvergence) message = "solver did not reach the requested tolerance";
    } catch (const ValidationError& e) {
        code = kValidation;
        message = e.what();
    } catch (const NonConvergenceError& e) {
        code = kNonConvergence;
        message = e.what();
    } catch (const std::filesystem::filesystem_error& e) {
        code = kValidation;
        message = e.what();
    } catch (const std::exception& e) {
        code = kFailure;
        message = e.what();
    }
    if (!message.empty()) err << "entrobar " << req.command << ": " << message << '\n';
    if (!out) return code;
    summary["config"] = echo;
    summary["command"] = req.command;
    summary["version"] = kVersion;
    summary["versions"] = {{"entrobar", kVersion}, {"eigen", detail::eigen_version()}, {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    summary["exit_code"] = code;
    if (!message.empty()) summary["error"] = message;
    summary["outputs"] = out->files();
    summary["wall_time"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    try {
        io::write_json(out->dir() / "summary.json", summary);
    } catch (const std::exception& e) {
        err << "entrobar " << req.command << ": " << e.what() << '\n';
        return code == kOk ? kValidation : code;
    }
    return code;
}

}  // namespace entrobar::cli
