#pragma once

#include <cmath>
#include <random>

#include "ld/energy.hpp"

namespace ldtest {

inline ld::Domain small_disk(int N = 2, double h = 0.2, double L = 1.0) {
    ld::DomainSpec s;
    s.radius = 1.0;
    s.h_grid = h;
    s.L = L;
    s.N = N;
    s.R_box = 3.0;
    s.h_box = 1.0;
    s.z_cells = 2;
    return ld::build_domain(s);
}

inline ld::OrderParameterStack random_u(const ld::Domain& d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> r(0.0, 1.0), ph(0.0, 2 * M_PI);
    ld::OrderParameterStack u = ld::constant_order_parameter(d, {0.0, 0.0});
    for (auto& layer : u.u)
        for (std::size_t p = 0; p < layer.size(); ++p)
            if (d.layer.mask[p]) layer[p] = std::polar(r(rng), ph(rng));
    return u;
}

// h_ex a plus a random perturbation on free edges.
inline ld::MagneticPotential random_A(const ld::Domain& d, double h_ex, double amp,
                                      std::mt19937_64& rng) {
    std::uniform_real_distribution<double> r(-amp, amp);
    ld::MagneticPotential A = ld::applied_potential(d, h_ex);
    ld::MagneticPotential m = ld::free_edge_mask(d);
    for (std::size_t e = 0; e < A.a1.size(); ++e) A.a1[e] += m.a1[e] * r(rng);
    for (std::size_t e = 0; e < A.a2.size(); ++e) A.a2[e] += m.a2[e] * r(rng);
    for (std::size_t e = 0; e < A.a3.size(); ++e) A.a3[e] += m.a3[e] * r(rng);
    return A;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

} // namespace ldtest
