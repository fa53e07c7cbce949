#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "entrobar/domain.hpp"
#include "entrobar/error.hpp"
#include "entrobar/measures.hpp"
#include "entrobar/network_simplex.hpp"

namespace entrobar::io {

/// A double at 17 significant digits.
inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
    return out;
}

/// Nodal values as CSV with header `x1,...,xd,<column>`, row-major over all
/// grid nodes.
inline void write_nodal_csv(const std::filesystem::path& path, const Domain& dom,
                            const std::vector<double>& values, const std::string& column) {
    auto out = open_out(path);
    for (std::size_t k = 0; k < dom.dim(); ++k) out << 'x' << (k + 1) << ',';
    out << column << '\n';
    for (std::size_t i = 0; i < dom.size(); ++i) {
        for (std::size_t k = 0; k < dom.dim(); ++k) out << fmt(dom.coord(i, k)) << ',';
        out << fmt(values[i]) << '\n';
    }
}

/// Several nodal columns side by side.
inline void write_nodal_table(const std::filesystem::path& path, const Domain& dom, const std::vector<std::string>& names,
                              const std::vector<std::vector<double>>& columns) {
    if (names.size() != columns.size()) throw ValidationError("write_nodal_table: one name per column");
    auto out = open_out(path);
    for (std::size_t k = 0; k < dom.dim(); ++k) out << 'x' << (k + 1) << ',';
    for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
    out << '\n';
    for (std::size_t i = 0; i < dom.size(); ++i) {
        for (std::size_t k = 0; k < dom.dim(); ++k) out << fmt(dom.coord(i, k)) << ',';
        for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << fmt(columns[c][i]);
        out << '\n';
    }
}

inline void write_density_csv(const std::filesystem::path& path, const DensityGrid& m) {
    write_nodal_csv(path, m.domain(), {m.values().begin(), m.values().end()}, "value");
}

/// Reads the last column of a nodal CSV and checks the coordinates against dom.
inline std::vector<double> read_nodal_csv(const std::filesystem::path& path, const Domain& dom) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read '" + path.string() + "'");
    std::string line;
    std::getline(in, line);
    std::vector<double> values;
    values.reserve(dom.size());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0) throw ValidationError(path.string() + ": non-numeric cell '" + cell + "'");
            row.push_back(v);
        }
        if (row.size() != dom.dim() + 1) throw ValidationError(path.string() + ": wrong column count");
        const std::size_t i = values.size();
        if (i >= dom.size()) throw ValidationError(path.string() + ": more rows than grid nodes");
        for (std::size_t k = 0; k < dom.dim(); ++k) {
            const double tol = 1e-9 * std::max(1.0, std::abs(dom.coord(i, k)));
            if (std::abs(row[k] - dom.coord(i, k)) > tol)
                throw ValidationError(path.string() + ": coordinates do not match the domain grid");
        }
        values.push_back(row.back());
    }
    if (values.size() != dom.size()) throw ValidationError(path.string() + ": fewer rows than grid nodes");
    return values;
}

/// Transport plan as `i,j,mass` triplets.
inline void write_plan_csv(const std::filesystem::path& path, const std::vector<PlanEntry>& plan) {
    auto out = open_out(path);
    out << "i,j,mass\n";
    for (const auto& e : plan) out << e.i << ',' << e.j << ',' << fmt(e.mass) << '\n';
}

inline nlohmann::json to_json(const Eigen::VectorXd& v) {
    nlohmann::json j = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

inline nlohmann::json to_json(const Eigen::MatrixXd& m) {
    nlohmann::json j = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        j.push_back(row);
    }
    return j;
}

inline nlohmann::json to_json(const GaussianMeasure& g) {
    return {{"mean", to_json(g.mean())}, {"covariance", to_json(g.covariance())}};
}

inline GaussianMeasure gaussian_from_json(const nlohmann::json& j) {
    if (!j.contains("mean") || !j.contains("covariance"))
        throw ValidationError("gaussian: 'mean' and 'covariance' are required");
    const auto& jm = j.at("mean");
    const auto& jc = j.at("covariance");
    if (!jm.is_array() || !jc.is_array()) throw ValidationError("gaussian: 'mean' and 'covariance' must be arrays");
    auto num = [](const nlohmann::json& v) {
        if (!v.is_number()) throw ValidationError("gaussian: entries must be numbers");
        return v.get<double>();
    };
    Eigen::VectorXd m(static_cast<Eigen::Index>(jm.size()));
    for (std::size_t i = 0; i < jm.size(); ++i) m[static_cast<Eigen::Index>(i)] = num(jm[i]);
    const auto d = m.size();
    if (static_cast<Eigen::Index>(jc.size()) != d) throw ValidationError("gaussian: covariance shape does not match mean");
    Eigen::MatrixXd c(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
        const auto& row = jc[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != d) throw ValidationError("gaussian: covariance is not square");
        for (Eigen::Index k = 0; k < d; ++k) c(r, k) = num(row[static_cast<std::size_t>(k)]);
    }
    return GaussianMeasure(m, c);
}

/// Pretty-printed JSON; nlohmann prints doubles in round-trip exact form.
inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

inline void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
    auto out = open_out(path);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out << ',';
            out << fmt(m(r, c));
        }
        out << '\n';
    }
}

}  // namespace entrobar::io
