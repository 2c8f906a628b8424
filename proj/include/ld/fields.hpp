#pragma once

#include <complex>
#include <functional>
#include <utility>
#include <vector>

#include "ld/domain.hpp"
#include "ld/linalg.hpp"

namespace ld {

using cplx = std::complex<double>;

// u[n] holds layer n on every window node; entries outside the mask are
// carried along but never read.
struct OrderParameterStack {
    std::vector<std::vector<cplx>> u;
};

// Edge values of A on the box grid: a1 on x-edges, a2 on y-edges,
// a3 on z-edges. Edge values are line averages, so h * a is the link phase.
struct MagneticPotential {
    Vec a1, a2, a3;
    double h_ex = 0.0;
};

// One slice of a planar field on the layer window edges. `weight` is the
// x3-thickness the slice represents.
struct Slice2D {
    double z = 0.0;
    double weight = 0.0;
    Vec v1, v2;
};

struct VectorField2DStack {
    std::vector<Slice2D> slices;
};

using PlanarField = std::function<std::pair<double, double>(double, double, double)>;
using ScalarField = std::function<double(double, double, double)>;

OrderParameterStack constant_order_parameter(const Domain& d, cplx value);
MagneticPotential zero_potential(const Domain& d);
// Edge-exact sampling of h_ex * a with a = (-x2/2, x1/2, 0).
MagneticPotential applied_potential(const Domain& d, double h_ex);

// Boundary edges of the box lie in its faces and stay clamped to h_ex * a.
bool boundary_ex(const BoxGrid& b, int i, int j, int k);
bool boundary_ey(const BoxGrid& b, int i, int j, int k);
bool boundary_ez(const BoxGrid& b, int i, int j, int k);
void clamp_boundary(const Domain& d, MagneticPotential& A);
// Sets the clamped edges to zero, as for a gradient or a perturbation.
void zero_clamped(const Domain& d, MagneticPotential& A);
// 1 on free edges, 0 on clamped ones, laid out like MagneticPotential.
MagneticPotential free_edge_mask(const Domain& d);

std::vector<double> sample_box_nodes(const Domain& d, const ScalarField& g);

struct GaugeState {
    OrderParameterStack u;
    MagneticPotential A;
};

// u_n -> u_n exp(i g(., ns)), A -> A + grad g with g on box nodes.
GaugeState apply_gauge(const Domain& d, const OrderParameterStack& u, const MagneticPotential& A,
                       const Vec& g);

Vec divergence(const Domain& d, const MagneticPotential& A);

struct FaceField {
    Vec fx, fy, fz; // normal components on yz-, zx- and xy-faces
};
FaceField curl(const Domain& d, const MagneticPotential& A);
Vec divergence_of_faces(const Domain& d, const FaceField& B); // per box cell

struct CoulombResult {
    MagneticPotential A;
    Vec g;
    CGResult solve;
    double max_div = 0.0;
};

// Gauge change with g = 0 on the box boundary making div A = 0 at every
// interior node.
CoulombResult project_coulomb(const Domain& d, const MagneticPotential& A, double rtol = 1e-11,
                              int max_iters = 20000);

struct LayerTrace {
    Vec t1, t2; // layer window x- and y-edges, zero off the mask
};

LayerTrace trace(const Domain& d, const MagneticPotential& A, int n);
// Linear interpolation between the neighbouring box planes.
LayerTrace trace_at(const Domain& d, const MagneticPotential& A, double z);
// Integral of A3 over [ns, (n+1)s] at every window node.
Vec link_phase(const Domain& d, const MagneticPotential& A, int n);

// Planar operators on the layer window.
Vec plaquette_curl(const LayerGrid& g, const Vec& v1, const Vec& v2);
// (d2 f, -d1 f) of a plaquette function, zero outside the mask.
std::pair<Vec, Vec> rot_of_plaquette_field(const LayerGrid& g, const Vec& f);

struct PoissonResult {
    Vec x;
    CGResult solve;
};

// -Lap f = rhs on interior plaquettes, f = 0 on the rest.
PoissonResult dirichlet_poisson_plaquettes(const LayerGrid& g, const Vec& rhs, double rtol = 1e-12);
// Least-squares potential: grad g closest to (e1, e2) on mask edges, mean zero.
PoissonResult potential_of_edge_field(const LayerGrid& g, const Vec& e1, const Vec& e2,
                                      double rtol = 1e-12);

struct HodgeResult {
    Vec rot1, rot2;   // v_1 = (d2 f, -d1 f)
    Vec grad1, grad2; // v_2 = v - v_1
    Vec f;            // plaquettes
    Vec g;            // nodes, grad g = v_2
    CGResult solve;
};

HodgeResult hodge_decompose(const LayerGrid& g, const Vec& v1, const Vec& v2, double rtol = 1e-13);

// Midpoint samples of a planar field on mask edges at height z.
std::pair<Vec, Vec> sample_edge_field(const LayerGrid& g, const PlanarField& v, double z);

// v(., ns) on layers n = 0..N-1, each of thickness s.
VectorField2DStack layer_stack(const Domain& d, const PlanarField& v);
// Slices at the midpoints of the box cells spanning [0, L].
VectorField2DStack cell_stack(const Domain& d, const PlanarField& v);
VectorField2DStack zero_cell_stack(const Domain& d);

// Weighted L2 inner product over mask edges.
double edge_dot(const LayerGrid& g, const Vec& a1, const Vec& a2, const Vec& b1, const Vec& b2);

} // namespace ld
