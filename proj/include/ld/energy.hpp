#pragma once

#include <vector>

#include "ld/fields.hpp"

namespace ld {

struct ModelParams {
    double eps = 0.1;
    double lambda = 1.0;
    double h_ex = 0.0;
    double h0 = 0.0;
};

void validate(const ModelParams& p); // throws std::invalid_argument

struct EnergyBreakdown {
    std::vector<double> kinetic;      // per layer, n = 0..N
    std::vector<double> gl_potential; // per layer
    std::vector<double> josephson;    // per link, n = 0..N-1
    double magnetic = 0.0;
    double total = 0.0;
};

// The kinetic term split into the field-free part, the term linear in the
// trace and the term quadratic in it.
struct SplitBreakdown {
    std::vector<double> pure_gl; // s * E_eps(u_n)
    double cross_term = 0.0;
    double quadratic_A_term = 0.0;
    double josephson = 0.0;
    double magnetic = 0.0;
    double total = 0.0;
};

EnergyBreakdown ld_energy(const Domain& d, const OrderParameterStack& u, const MagneticPotential& A,
                          const ModelParams& p);
SplitBreakdown ld_energy_split(const Domain& d, const OrderParameterStack& u,
                               const MagneticPotential& A, const ModelParams& p);

double gl2d_energy(const LayerGrid& g, const std::vector<cplx>& u, double eps);

// 1/2 sum over box faces of |curl A - h e3|^2 times the dual face volume.
double magnetic_energy(const Domain& d, const MagneticPotential& A, double h);
// Gradient of magnetic_energy with respect to every edge value (clamped
// edges included; callers mask them).
MagneticPotential magnetic_gradient(const Domain& d, const MagneticPotential& A, double h);

struct LDGradient {
    std::vector<std::vector<cplx>> gu; // dE/dRe u + i dE/dIm u, zero off the mask
    MagneticPotential gA;              // zero on clamped edges
};

LDGradient ld_gradient(const Domain& d, const OrderParameterStack& u, const MagneticPotential& A,
                       const ModelParams& p);

// Edge volumes used to turn gradients into pointwise residuals.
MagneticPotential edge_volumes(const Domain& d);

struct ResidualNorm {
    double max = 0.0;
    double l2 = 0.0;     // sqrt(sum weight * r^2)
    double scaled = 0.0; // l2 / (1 + |E|)
};

struct ELResidual {
    ResidualNorm gl;       // layer equation at interior mask nodes
    ResidualNorm neumann;  // layer equation at boundary mask nodes
    ResidualNorm ampere;   // curl curl A - j on free edges
    double field_excess_l2 = 0.0; // ||curl A - h_ex e3||, finite on the box
    double energy = 0.0;
    double worst_scaled() const;
};

ELResidual el_residual(const Domain& d, const OrderParameterStack& u, const MagneticPotential& A,
                       const ModelParams& p);

// Pointwise residual of the layer equation,
// (grad - i A_n)^2 u_n + (1 - |u_n|^2) u_n / eps^2 + P_n, on mask nodes.
std::vector<std::vector<cplx>> gl_residual_field(const Domain& d, const OrderParameterStack& u,
                                                 const MagneticPotential& A, const ModelParams& p);

struct LimitBreakdown {
    double trace_term = 0.0; // ||v - A_hat||^2 over D
    double tv_term = 0.0;    // |curl v|(D)
    double magnetic = 0.0;   // ||curl A - h0 e3||^2 over the box
    double total = 0.0;      // half the sum
};

LimitBreakdown limit_energy(const Domain& d, const VectorField2DStack& v, const MagneticPotential& A,
                            double h0);

} // namespace ld
