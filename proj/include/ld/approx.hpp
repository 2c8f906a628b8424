#pragma once

#include <vector>

#include "ld/fields.hpp"

namespace ld {

// Shells of D by distance to the boundary: D_k = {dist > t_k}, t_k = 1/(m+k).
// The family stops at the first shell thinner than 2h; that last shell
// takes the remaining boundary layer.
struct ShellPartition {
    int m = 1;
    std::vector<double> t; // t_1 > t_2 > ... > t_K
    int shells() const { return int(t.size()); }

    // zeta_k(d) for k = 1..K, indexed from 0.
    std::vector<double> weights(double dist) const;
    // Number of shells U_k containing a point at distance dist.
    int membership(double dist) const;
};

ShellPartition make_shells(int m, double h);

// dist((x, y, z), boundary of D).
double cylinder_distance(const DomainSpec& spec, double x, double y, double z);

struct MollifyResult {
    VectorField2DStack v;
    int mollified_shells = 0;
    std::vector<double> radius;           // per mollified shell
    std::vector<double> shell_error;      // L2 error of each mollified piece
    std::vector<double> commutator_error; // L1 error of the mollified curl commutator
    double l2_error = 0.0;
    bool met = false;        // at least one shell mollified and l2_error < requested
    double achievable = 0.0; // smallest eps the first shell admits when it fails (inf without shells), else 0
};

// sum_k eta_{r_k} * (v zeta_k) slice by slice, each r_k the largest radius
// in a geometric ladder meeting the budget eps / 2^k both for the L2 error
// of the piece and for the L1 error of the commutator
// curl(v zeta_k) - zeta_k curl v, which bounds the growth of |curl v|.
// The first shell that fails at the smallest radius 1.5h, and every thinner
// one, is kept unmollified. m = 0 places t_1 just inside the inradius of D.
MollifyResult mollify_approx(const DomainSpec& spec, const LayerGrid& g, const VectorField2DStack& v,
                             double eps, int m = 0);

// eta_r * v on both edge lattices; r = 0 returns v.
std::pair<Vec, Vec> mollify_slice(const LayerGrid& g, const Vec& v1, const Vec& v2, double r);

// Total variation of curl v over the slices, weighted by their thickness.
double tv_measure(const LayerGrid& g, const VectorField2DStack& v);
double tv_slice(const LayerGrid& g, const Vec& v1, const Vec& v2);

// L2 norm over the slices, weighted by thickness.
double stack_l2(const LayerGrid& g, const VectorField2DStack& v);

// Reflection of a field on {x2 > 0} across x2 = 0.
PlanarField reflect_extend(const PlanarField& v);

// |curl v| over the plaquettes within delta of the line x2 = 0.
double strip_mass(const LayerGrid& g, const Vec& v1, const Vec& v2, double delta);

} // namespace ld
