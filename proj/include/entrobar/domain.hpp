#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "entrobar/error.hpp"

namespace entrobar {

enum class DomainKind { interval, box, ball, full_space_truncation };

inline std::string to_string(DomainKind kind) {
    switch (kind) {
        case DomainKind::interval: return "interval";
        case DomainKind::box: return "box";
        case DomainKind::ball: return "ball";
        case DomainKind::full_space_truncation: return "full-space-truncation";
    }
    return "unknown";
}

inline DomainKind domain_kind_from_string(const std::string& name) {
    if (name == "interval") return DomainKind::interval;
    if (name == "box") return DomainKind::box;
    if (name == "ball") return DomainKind::ball;
    if (name == "full-space-truncation") return DomainKind::full_space_truncation;
    throw ValidationError("domain.kind: unknown kind '" + name + "'");
}

/// One axis of a regular grid. Nodes are lower, lower + h, ..., upper.
struct Axis {
    double lower = 0.0;
    double upper = 1.0;
    std::size_t points = 2;

    double spacing() const { return (upper - lower) / static_cast<double>(points - 1); }

    double node(std::size_t i) const {
        if (i + 1 == points) return upper;
        return lower + spacing() * static_cast<double>(i);
    }

    bool operator==(const Axis&) const = default;
};

/// Regular grid over an interval (d = 1) or a rectangle (d = 2), with an
/// active-node mask. Quadrature is the trapezoidal rule restricted to cells
/// whose corners are all active.
class Domain {
public:
    static Domain interval(double lower, double upper, std::size_t points) {
        return Domain(DomainKind::interval, {Axis{lower, upper, points}}, 0.0, {});
    }

    static Domain box(std::vector<Axis> axes) {
        return Domain(DomainKind::box, std::move(axes), 0.0, {});
    }

    /// Full-space problem approximated on a box holding all but a negligible
    /// fraction of every atom's mass.
    static Domain full_space_truncation(std::vector<Axis> axes) {
        return Domain(DomainKind::full_space_truncation, std::move(axes), 0.0, {});
    }

    /// Closed ball of the given radius centred at the origin, gridded on the
    /// bounding box [-R, R]^dim.
    static Domain ball(std::size_t dim, double radius, std::size_t points_per_axis) {
        if (!(radius > 0.0)) throw ValidationError("domain.radius must be positive");
        std::vector<Axis> axes(dim, Axis{-radius, radius, points_per_axis});
        return Domain(DomainKind::ball, std::move(axes), radius, {});
    }

    /// 1D domain made of several closed intervals inside one grid axis; nodes
    /// outside every piece are inactive. The result is not convex when there
    /// is more than one piece.
    static Domain union_of_intervals(const Axis& axis,
                                     const std::vector<std::pair<double, double>>& pieces) {
        std::vector<std::uint8_t> mask(axis.points, 0);
        const double eps = 1e-9 * axis.spacing();
        for (std::size_t i = 0; i < axis.points; ++i) {
            const double x = axis.node(i);
            for (const auto& [lo, hi] : pieces) {
                if (x >= lo - eps && x <= hi + eps) mask[i] = 1;
            }
        }
        return Domain(DomainKind::interval, {axis}, 0.0, std::move(mask));
    }

    DomainKind kind() const { return kind_; }
    std::size_t dim() const { return axes_.size(); }
    const Axis& axis(std::size_t k) const { return axes_[k]; }
    const std::vector<Axis>& axes() const { return axes_; }
    double radius() const { return radius_; }
    std::size_t size() const { return active_.size(); }

    /// Row-major multi-index: in 2D node (i0, i1) has index i0 * n1 + i1.
    std::size_t index(std::size_t i0, std::size_t i1 = 0) const {
        return dim() == 1 ? i0 : i0 * axes_[1].points + i1;
    }

    double coord(std::size_t node, std::size_t k) const { return coords_[node * dim() + k]; }
    double squared_norm(std::size_t node) const {
        double s = 0.0;
        for (std::size_t k = 0; k < dim(); ++k) s += coord(node, k) * coord(node, k);
        return s;
    }

    bool active(std::size_t node) const { return active_[node] != 0; }
    const std::vector<std::uint8_t>& mask() const { return active_; }

    /// Trapezoidal weights; zero on inactive nodes.
    const std::vector<double>& weights() const { return weights_; }
    double volume() const { return volume_; }

    /// Cell volume h_1 * ... * h_d.
    double cell_volume() const {
        double v = 1.0;
        for (const auto& a : axes_) v *= a.spacing();
        return v;
    }

    /// True for a 1D cell [i, i+1] with both ends active.
    bool cell_active(std::size_t i) const { return active(i) && active(i + 1); }

    bool convex() const { return convex_; }

    bool operator==(const Domain& other) const {
        return kind_ == other.kind_ && axes_ == other.axes_ && active_ == other.active_;
    }

private:
    Domain(DomainKind kind, std::vector<Axis> axes, double radius, std::vector<std::uint8_t> mask)
        : kind_(kind), axes_(std::move(axes)), radius_(radius) {
        if (axes_.empty() || axes_.size() > 2)
            throw ValidationError("domain: grids are supported in dimension 1 or 2 only");
        std::size_t n = 1;
        for (const auto& a : axes_) {
            if (a.points < 2) throw ValidationError("domain.points must be at least 2 on every axis");
            if (!(a.lower < a.upper) || !std::isfinite(a.lower) || !std::isfinite(a.upper))
                throw ValidationError("domain: lower < upper required on every axis");
            n *= a.points;
        }
        coords_.resize(n * dim());
        for (std::size_t node = 0; node < n; ++node) {
            if (dim() == 1) {
                coords_[node] = axes_[0].node(node);
            } else {
                coords_[2 * node] = axes_[0].node(node / axes_[1].points);
                coords_[2 * node + 1] = axes_[1].node(node % axes_[1].points);
            }
        }
        const bool custom_mask = !mask.empty();
        if (custom_mask) {
            if (mask.size() != n) throw ValidationError("domain: mask size does not match grid");
            active_ = std::move(mask);
        } else {
            active_.assign(n, 1);
            if (kind_ == DomainKind::ball) {
                const double r2 = radius_ * radius_ * (1.0 + 1e-12);
                for (std::size_t node = 0; node < n; ++node)
                    active_[node] = squared_norm(node) <= r2 ? 1 : 0;
            }
        }
        build_weights();
        convex_ = compute_convexity(custom_mask);
    }

    void build_weights() {
        weights_.assign(size(), 0.0);
        if (dim() == 1) {
            const double h = axes_[0].spacing();
            for (std::size_t i = 0; i + 1 < axes_[0].points; ++i) {
                if (cell_active(i)) {
                    weights_[i] += 0.5 * h;
                    weights_[i + 1] += 0.5 * h;
                }
            }
        } else {
            const double q = 0.25 * axes_[0].spacing() * axes_[1].spacing();
            const std::size_t n0 = axes_[0].points, n1 = axes_[1].points;
            for (std::size_t i = 0; i + 1 < n0; ++i) {
                for (std::size_t j = 0; j + 1 < n1; ++j) {
                    const std::size_t c[4] = {index(i, j), index(i + 1, j), index(i, j + 1),
                                              index(i + 1, j + 1)};
                    if (active(c[0]) && active(c[1]) && active(c[2]) && active(c[3]))
                        for (auto node : c) weights_[node] += q;
                }
            }
        }
        volume_ = 0.0;
        for (double w : weights_) volume_ += w;
        if (!(volume_ > 0.0)) throw ValidationError("domain: no active cell");
    }

    bool compute_convexity(bool custom_mask) const {
        if (!custom_mask) return true;
        if (dim() != 1) return false;
        // 1D: convex iff the active nodes are contiguous.
        std::size_t first = size(), last = 0;
        for (std::size_t i = 0; i < size(); ++i) {
            if (active(i)) {
                first = std::min(first, i);
                last = i;
            }
        }
        for (std::size_t i = first; i <= last; ++i)
            if (!active(i)) return false;
        return true;
    }

    DomainKind kind_;
    std::vector<Axis> axes_;
    double radius_ = 0.0;
    std::vector<double> coords_;
    std::vector<std::uint8_t> active_;
    std::vector<double> weights_;
    double volume_ = 0.0;
    bool convex_ = true;
};

using DomainPtr = std::shared_ptr<const Domain>;

inline DomainPtr make_domain(Domain d) { return std::make_shared<const Domain>(std::move(d)); }

}  // namespace entrobar
