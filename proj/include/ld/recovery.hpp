#pragma once

#include <array>
#include <vector>

#include "ld/diagnostics.hpp"

namespace ld {

// Standard mollifier exp(-1/(1-r^2)) on the unit disk, normalized in 2D.
double mollifier(double r);

// q^eps with q^eps(x) xi(x) = (eta^eps * xi)(x). For a radial eta this is
// the eta^eps-mass of the disk of radius |x|, which is what is tabulated.
class CoreProfile {
public:
    CoreProfile(double eps, int resolution);

    double eps() const { return eps_; }
    double operator()(double r) const;
    // Radial samples on [0, 3 eps].
    std::vector<double> sample_r(int count) const;
    // int over B_eps of |q^eps xi|^2.
    double core_integral() const;

private:
    double eps_;
    std::vector<double> m_, dm_; // enclosed mass and its derivative on [0, 1]
};

CoreProfile q_profile(double eps, int resolution = 2048);

struct Placement {
    VortexMeasure measure;
    double delta = 0.0;          // square side |ln eps|^{-1/4}
    double c0 = 0.0;             // separation constant
    double w_inf = 0.0;
    double required_separation = 0.0; // c0 |ln eps|^{-1/2}
    double min_separation = 0.0;      // over all pairs on a layer (inf if < 2 points)
    double min_boundary_distance = 0.0;
    std::vector<double> layer_l1; // ||w_n||_{L^1(Omega)}
};

double placement_c0(double w_inf);

// Vortex points on layers n = 0..N-1 for the density w(x, y, ns).
Placement place_vortices(const Domain& d, const ScalarField& w, double eps);

struct VortexFactor {
    std::vector<cplx> u;
    Vec v1, v2; // rot f / |ln eps|
    Vec f;      // stream function on plaquettes
};

VortexFactor build_vortex_factor(const LayerGrid& g, const VortexMeasure& m, int n,
                                 const CoreProfile& q);
std::vector<cplx> build_gradient_factor(const LayerGrid& g, const Vec& potential, double eps);

struct RecoveryState {
    OrderParameterStack u;
    std::vector<VortexFactor> vortex;  // per layer n < N
    std::vector<Vec> stream;           // Hodge stream functions of the v slices
    std::vector<Vec> potential;        // Hodge potentials g_n on nodes
    Placement placement;
    MagneticPotential A;
};

// A^eps = |ln eps| A0 + (h_ex - h0 |ln eps|) a, with A0 on the same box grid.
MagneticPotential recovery_potential(const Domain& d, const MagneticPotential& A0, double h0,
                                     const ModelParams& p);

RecoveryState build_recovery(const Domain& d, const PlanarField& v, const ModelParams& p,
                             const MagneticPotential& A0, double h0, int profile_resolution = 2048);

// int over [-1/2, 1/2]^3 of 1/|x|, equal to 3 ln(2 + sqrt 3) - pi/2
// (tools/derive_cube_constant.py).
inline constexpr double K_CUBE = 2.3800773639795532;

// Cubic cells of side h covering the cylinder; cells whose centers lie in
// the cross-section carry the source.
struct CellGrid3 {
    double h = 0.0;
    double x0 = 0.0, y0 = 0.0, z0 = 0.0; // corner of cell (0, 0, 0)
    int nx = 0, ny = 0, nz = 0;
    std::vector<uint8_t> inside;

    std::size_t cell(int i, int j, int k) const {
        return std::size_t(i) + std::size_t(nx) * (std::size_t(j) + std::size_t(ny) * k);
    }
    std::array<double, 3> center(int i, int j, int k) const {
        return {x0 + (i + 0.5) * h, y0 + (j + 0.5) * h, z0 + (k + 0.5) * h};
    }
    std::size_t size() const { return std::size_t(nx) * ny * nz; }
};

CellGrid3 cylinder_cells(const DomainSpec& spec, double h);

// (1 / 4 pi) sum over cells of g(y) |cell| / |x - y|. A target at a cell
// center uses the exact cube mean there; any other target strictly inside a
// source cell is rejected.
Vec newtonian_trace(const CellGrid3& grid, const Vec& g, const std::vector<std::array<double, 3>>& targets);

// sum_n ||A(., ns) - A||^2 over Omega x (ns, (n+1)s) for A the Newtonian
// potential of g, one value per N. Planes ns must be cell faces; the in-plane
// integral samples every `stride`-th cell.
std::vector<double> layer_deviation(const CellGrid3& grid, const Vec& g, const std::vector<int>& Ns,
                                    int stride);

} // namespace ld
