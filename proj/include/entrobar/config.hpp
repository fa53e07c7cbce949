#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "entrobar/diagnostics.hpp"
#include "entrobar/domain.hpp"
#include "entrobar/error.hpp"
#include "entrobar/gaussian.hpp"
#include "entrobar/io.hpp"
#include "entrobar/measures.hpp"
#include "entrobar/solver.hpp"
#include "entrobar/stats.hpp"

namespace entrobar::config {

using nlohmann::json;

/// A JSON object together with its dotted path, so that every error names
/// the offending field.
class Node {
public:
    Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
        if (!j_->is_object()) throw ValidationError(where() + ": expected an object");
    }

    const json& raw() const { return *j_; }
    const std::string& path() const { return path_; }
    bool has(const std::string& key) const { return j_->contains(key) && !j_->at(key).is_null(); }
    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    Node child(const std::string& key) const {
        if (!has(key)) throw ValidationError(field(key) + ": required section is missing");
        return Node(j_->at(key), field(key));
    }

    const json& at(const std::string& key) const {
        if (!has(key)) throw ValidationError(field(key) + ": required field is missing");
        return j_->at(key);
    }

    double number(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_number()) throw ValidationError(field(key) + ": expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ValidationError(field(key) + ": must be finite");
        return x;
    }
    double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

    std::uint64_t count(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
            throw ValidationError(field(key) + ": expected a non-negative integer");
        return v.get<std::uint64_t>();
    }
    std::uint64_t count(const std::string& key, std::uint64_t fallback) const { return has(key) ? count(key) : fallback; }

    bool flag(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        if (!j_->at(key).is_boolean()) throw ValidationError(field(key) + ": expected true or false");
        return j_->at(key).get<bool>();
    }

    std::string text(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_string()) throw ValidationError(field(key) + ": expected a string");
        return v.get<std::string>();
    }
    std::string text(const std::string& key, const std::string& fallback) const { return has(key) ? text(key) : fallback; }

    std::vector<double> numbers(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_array()) throw ValidationError(field(key) + ": expected an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) throw ValidationError(field(key) + ": expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::vector<Node> objects(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_array()) throw ValidationError(field(key) + ": expected an array");
        std::vector<Node> out;
        for (std::size_t i = 0; i < v.size(); ++i) out.emplace_back(v[i], field(key) + "[" + std::to_string(i) + "]");
        return out;
    }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }
    const json* j_;
    std::string path_;
};

inline json load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read config '" + path.string() + "'");
    try {
        return json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ValidationError("config is not valid JSON: " + std::string(e.what()));
    }
}

inline double lambda(const Node& root) {
    const double l = root.number("lambda");
    if (!(l > 0.0)) throw ValidationError("lambda: must be positive");
    return l;
}

inline std::size_t threads(const Node& root) { return static_cast<std::size_t>(root.count("threads", 0)); }

inline Axis axis(const Node& n) {
    const auto points = n.count("points");
    if (points < 2) throw ValidationError(n.field("points") + ": at least 2 required");
    const Axis a{n.number("lower"), n.number("upper"), static_cast<std::size_t>(points)};
    if (!(a.lower < a.upper)) throw ValidationError(n.path() + ": lower < upper required");
    return a;
}

inline std::vector<Axis> axes(const Node& n) {
    if (n.has("axes")) {
        std::vector<Axis> out;
        for (const auto& a : n.objects("axes")) out.push_back(axis(a));
        return out;
    }
    const std::size_t dim = n.count("dim", 1);
    return std::vector<Axis>(dim, axis(n));
}

/// {"kind": "interval", "lower", "upper", "points", optional "pieces": [[a, b], ...]},
/// {"kind": "box" | "full-space-truncation", "axes": [...]} or {lower, upper, points, dim},
/// {"kind": "ball", "dim", "radius", "points"}.
inline DomainPtr domain(const Node& n) {
    const DomainKind kind = domain_kind_from_string(n.text("kind"));
    switch (kind) {
        case DomainKind::interval: {
            const Axis a = axis(n);
            if (!n.has("pieces")) return make_domain(Domain::interval(a.lower, a.upper, a.points));
            std::vector<std::pair<double, double>> pieces;
            for (const auto& p : n.at("pieces")) {
                if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number() || !(p[0].get<double>() < p[1].get<double>()))
                    throw ValidationError(n.field("pieces") + ": expected [lower, upper] pairs");
                pieces.emplace_back(p[0].get<double>(), p[1].get<double>());
            }
            return make_domain(Domain::union_of_intervals(a, pieces));
        }
        case DomainKind::box: return make_domain(Domain::box(axes(n)));
        case DomainKind::full_space_truncation: return make_domain(Domain::full_space_truncation(axes(n)));
        case DomainKind::ball:
            return make_domain(Domain::ball(static_cast<std::size_t>(n.count("dim")), n.number("radius"),
                                            static_cast<std::size_t>(n.count("points"))));
    }
    throw ValidationError(n.field("kind") + ": unsupported");
}

inline GaussianMeasure gaussian(const Node& n) {
    try {
        return io::gaussian_from_json(n.raw());
    } catch (const ValidationError& e) {
        throw ValidationError(n.path() + ": " + e.what());
    }
}

/// Smallest eigenvalue of the inverse covariance: the log-concavity constant.
inline double gaussian_log_concavity(const GaussianMeasure& g) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.covariance(), Eigen::EigenvaluesOnly);
    return 1.0 / es.eigenvalues().maxCoeff();
}

struct GridAtomSpec {
    DensityGrid measure;
    double log_concavity;  ///< 0 when unknown
};

/// One grid measure: {"type": "gaussian", "mean", "covariance"},
/// {"type": "uniform", "lower", "upper"} (1D), {"type": "spike", "center", "halfwidth"} (1D),
/// {"type": "values", "values": [...]} or {"type": "csv", "path"} (relative to the config file).
inline GridAtomSpec grid_atom(const Node& n, const DomainPtr& dom, const std::filesystem::path& base) {
    const std::string type = n.text("type", "gaussian");
    try {
        if (type == "gaussian") {
            const auto g = gaussian(n);
            if (g.dim() != dom->dim()) throw ValidationError(n.path() + ": dimension does not match the domain");
            return {discretize(g, dom), gaussian_log_concavity(g)};
        }
        if (type == "uniform" || type == "spike") {
            if (dom->dim() != 1) throw ValidationError(n.path() + ": '" + type + "' atoms are one-dimensional");
            double lo, hi;
            if (type == "uniform") {
                lo = n.number("lower");
                hi = n.number("upper");
            } else {
                const double c = n.number("center"), w = n.number("halfwidth");
                if (!(w > 0.0)) throw ValidationError(n.field("halfwidth") + ": must be positive");
                lo = c - w;
                hi = c + w;
            }
            if (!(lo < hi)) throw ValidationError(n.path() + ": lower < upper required");
            const double eps = 1e-9 * dom->axis(0).spacing();
            return {DensityGrid::from_function(dom, [&](double x) { return x >= lo - eps && x <= hi + eps ? 1.0 : 0.0; }), 0.0};
        }
        if (type == "values") {
            const auto v = n.numbers("values");
            return {DensityGrid(dom, v), 0.0};
        }
        if (type == "csv") {
            std::filesystem::path p = n.text("path");
            if (p.is_relative()) p = base / p;
            return {DensityGrid(dom, io::read_nodal_csv(p, *dom)), 0.0};
        }
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        if (msg.rfind(n.path(), 0) == 0) throw;
        throw ValidationError(n.path() + ": " + msg);
    }
    throw ValidationError(n.field("type") + ": unknown atom type '" + type + "'");
}

inline std::vector<double> atom_weights(const std::vector<Node>& atoms) {
    std::vector<double> w;
    bool any = false;
    for (const auto& a : atoms) any = any || a.has("weight");
    for (const auto& a : atoms) {
        if (!any) {
            w.push_back(1.0 / static_cast<double>(atoms.size()));
            continue;
        }
        const double x = a.number("weight");
        if (!(x > 0.0)) throw ValidationError(a.field("weight") + ": must be positive");
        w.push_back(x);
    }
    double t = 0.0;
    for (double x : w) t += x;
    if (std::abs(t - 1.0) > 1e-9) throw ValidationError("population.atoms: weights must sum to 1");
    for (double& x : w) x /= t;
    return w;
}

struct GridPopulation {
    Population<DensityGrid> population;
    double log_concavity;  ///< min over atoms; 0 when some atom is not known to be log-concave
};

inline GridPopulation grid_population(const Node& root, const DomainPtr& dom, const std::filesystem::path& base) {
    const Node pop = root.child("population");
    const auto atoms = pop.objects("atoms");
    if (atoms.empty()) throw ValidationError(pop.field("atoms") + ": at least one atom required");
    const auto w = atom_weights(atoms);
    std::vector<Atom<DensityGrid>> out;
    double A = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        auto spec = grid_atom(atoms[i], dom, base);
        A = std::min(A, spec.log_concavity);
        out.push_back({w[i], std::move(spec.measure)});
    }
    return {Population<DensityGrid>(lambda(root), Population<DensityGrid>::fix_weight_sum(std::move(out)), dom), A};
}

inline Population<GaussianMeasure> gaussian_population(const Node& root) {
    const Node pop = root.child("population");
    const auto atoms = pop.objects("atoms");
    if (atoms.empty()) throw ValidationError(pop.field("atoms") + ": at least one atom required");
    const auto w = atom_weights(atoms);
    std::vector<Atom<GaussianMeasure>> out;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (atoms[i].text("type", "gaussian") != "gaussian")
            throw ValidationError(atoms[i].field("type") + ": gaussian-bary takes Gaussian atoms only");
        out.push_back({w[i], gaussian(atoms[i])});
    }
    const auto d = out.front().measure.dim();
    for (std::size_t i = 0; i < out.size(); ++i)
        if (out[i].measure.dim() != d) throw ValidationError(atoms[i].path() + ": all atoms must share one dimension");
    return Population<GaussianMeasure>(lambda(root), Population<GaussianMeasure>::fix_weight_sum(std::move(out)));
}

inline SolverConfig solver(const Node& root) {
    SolverConfig c;
    if (root.has("solver")) {
        const Node n = root.child("solver");
        c.max_iters = static_cast<std::size_t>(n.count("max_iters", c.max_iters));
        c.tol_l1 = n.number("tol_l1", c.tol_l1);
        c.damping = n.number("damping", c.damping);
        c.adaptive_damping = n.flag("adaptive_damping", c.adaptive_damping);
        if (n.has("potential_backend")) {
            try {
                c.potential_backend = backend_from_string(n.text("potential_backend"));
            } catch (const ValidationError& e) {
                throw ValidationError(n.field("potential_backend") + ": " + e.what());
            }
        }
        c.validate();
    }
    c.threads = threads(root);
    return c;
}

inline GaussianBaryOptions gaussian_options(const Node& root) {
    GaussianBaryOptions o;
    if (!root.has("gaussian")) return o;
    const Node n = root.child("gaussian");
    o.damping = n.number("damping", o.damping);
    o.tol = n.number("tol", o.tol);
    o.stall_limit = static_cast<std::size_t>(n.count("stall_limit", o.stall_limit));
    o.max_iters = static_cast<std::size_t>(n.count("max_iters", o.max_iters));
    o.probe_uniqueness = n.flag("probe_uniqueness", o.probe_uniqueness);
    if (!(o.damping > 0.0 && o.damping <= 1.0)) throw ValidationError(n.field("damping") + ": must lie in (0, 1]");
    if (!(o.tol > 0.0)) throw ValidationError(n.field("tol") + ": must be positive");
    return o;
}

/// {"family": ..., family parameters}. Finite atoms use the atom syntax of
/// grid_atom under "atoms", with optional "weights".
inline MeasureSampler sampler(const Node& root, const DomainPtr& dom, std::uint64_t seed, const std::filesystem::path& base) {
    const Node n = root.child("sampler");
    SamplerSpec s;
    try {
        s.family = sampler_family_from_string(n.text("family"));
    } catch (const ValidationError& e) {
        throw ValidationError(n.field("family") + ": " + e.what());
    }
    s.mean_lo = n.number("mean_lo", s.mean_lo);
    s.mean_hi = n.number("mean_hi", s.mean_hi);
    s.var_lo = n.number("var_lo", s.var_lo);
    s.var_hi = n.number("var_hi", s.var_hi);
    s.shift_lo = n.number("shift_lo", s.shift_lo);
    s.shift_hi = n.number("shift_hi", s.shift_hi);
    s.bumps = static_cast<std::size_t>(n.count("bumps", s.bumps));
    s.baseline = n.number("baseline", s.baseline);
    s.amplitude_max = n.number("amplitude_max", s.amplitude_max);
    s.bump_width = n.number("bump_width", s.bump_width);
    if (n.has("template")) {
        auto t = grid_atom(n.child("template"), dom, base);
        s.templ = std::move(t.measure);
        s.template_log_concavity = n.number("template_log_concavity", t.log_concavity);
    }
    if (n.has("atoms")) {
        for (const auto& a : n.objects("atoms")) {
            auto t = grid_atom(a, dom, base);
            s.atoms.push_back(std::move(t.measure));
            s.atom_log_concavity.push_back(t.log_concavity);
        }
    }
    if (n.has("weights")) s.atom_weights = n.numbers("weights");
    try {
        return MeasureSampler(std::move(s), dom, seed);
    } catch (const ValidationError& e) {
        throw ValidationError(n.path() + ": " + e.what());
    }
}

inline LlnOptions lln_options(const Node& root) {
    LlnOptions o;
    o.threads = threads(root);
    if (!root.has("lln")) return o;
    const Node n = root.child("lln");
    if (n.has("n_schedule")) {
        o.n_schedule.clear();
        for (double v : n.numbers("n_schedule")) {
            if (!(v >= 1.0) || v != std::floor(v)) throw ValidationError(n.field("n_schedule") + ": positive integers required");
            o.n_schedule.push_back(static_cast<std::size_t>(v));
        }
        if (o.n_schedule.empty()) throw ValidationError(n.field("n_schedule") + ": must not be empty");
    }
    o.replicates = static_cast<std::size_t>(n.count("replicates", o.replicates));
    if (o.replicates == 0) throw ValidationError(n.field("replicates") + ": must be positive");
    o.alpha = n.number("alpha", o.alpha);
    o.reference_n = static_cast<std::size_t>(n.count("reference_n", o.reference_n));
    return o;
}

inline CltOptions clt_options(const Node& root) {
    CltOptions o;
    o.threads = threads(root);
    if (!root.has("clt")) return o;
    const Node n = root.child("clt");
    o.n = static_cast<std::size_t>(n.count("n", o.n));
    o.replicates = static_cast<std::size_t>(n.count("replicates", o.replicates));
    if (o.replicates < kMinCltReplicates)
        throw ValidationError(n.field("replicates") + ": at least " + std::to_string(kMinCltReplicates) + " required");
    o.k_basis = static_cast<std::size_t>(n.count("k_basis", o.k_basis));
    o.bootstrap = static_cast<std::size_t>(n.count("bootstrap", o.bootstrap));
    o.variance_samples = static_cast<std::size_t>(n.count("variance_samples", o.variance_samples));
    o.reference_n = static_cast<std::size_t>(n.count("reference_n", o.reference_n));
    if (o.n == 0) throw ValidationError(n.field("n") + ": must be positive");
    if (o.k_basis == 0) throw ValidationError(n.field("k_basis") + ": must be positive");
    if (o.variance_samples < 2) throw ValidationError(n.field("variance_samples") + ": at least 2 required");
    return o;
}

}  // namespace entrobar::config
