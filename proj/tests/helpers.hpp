#pragma once

#include <cmath>
#include <vector>

#include "entrobar/domain.hpp"
#include "entrobar/measures.hpp"

namespace entrobar::testing {

inline DomainPtr line(double lo, double hi, std::size_t n) { return make_domain(Domain::interval(lo, hi, n)); }

inline DomainPtr full_line(double lo, double hi, std::size_t n) {
    return make_domain(Domain::full_space_truncation({Axis{lo, hi, n}}));
}

inline DensityGrid gauss(const DomainPtr& dom, double mean, double var) {
    return discretize(GaussianMeasure::isotropic(1, var, mean), dom);
}

inline DensityGrid uniform(const DomainPtr& dom, double lo, double hi) {
    const double eps = 1e-9 * dom->axis(0).spacing();
    return DensityGrid::from_function(dom, [&](double x) { return x >= lo - eps && x <= hi + eps ? 1.0 : 0.0; });
}

inline double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline std::vector<double> vec(const DensityGrid& m) { return {m.values().begin(), m.values().end()}; }

}  // namespace entrobar::testing
