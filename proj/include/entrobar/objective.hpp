#pragma once

#include <vector>

#include "entrobar/measures.hpp"
#include "entrobar/ot.hpp"

namespace entrobar {

/// V(rho) = sum_i p_i W2^2(rho, nu_i) / 2 + lambda Ent(rho).
inline double objective(const Population<DensityGrid>& pop, const DensityGrid& rho) {
    if (!(rho.domain() == pop.domain())) throw ValidationError("objective: rho is not on the population domain");
    double transport = 0.0;
    for (const auto& atom : pop.atoms()) {
        const double w = w2_grid(rho, atom.measure);
        transport += atom.weight * 0.5 * w * w;
    }
    return transport + pop.lambda() * entropy(rho);
}

}  // namespace entrobar
