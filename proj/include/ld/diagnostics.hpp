#pragma once

#include <string>
#include <vector>

#include "ld/minimize.hpp"

namespace ld {

// Edge current Im(conj(u_p) u_q) / h, the midpoint sample of (iu, grad u).
struct EdgeCurrent {
    Vec j1, j2;
};

EdgeCurrent current(const LayerGrid& g, const std::vector<cplx>& u);
// Half the plaquette curl of the edge current.
Vec jacobian(const LayerGrid& g, const std::vector<cplx>& u);

// Fields on layers n = 0..N-1, each extended over a slab of thickness s.
struct PlaquetteStack {
    std::vector<Vec> layers;
    double weight = 0.0;
};

VectorField2DStack stack_current(const Domain& d, const OrderParameterStack& u);
PlaquetteStack stack_jacobian(const Domain& d, const OrderParameterStack& u);
// Integral over D of the stacked plaquette field.
double stack_integral(const LayerGrid& g, const PlaquetteStack& J);

struct VortexEntry {
    int n = 0;
    double x = 0.0, y = 0.0;
    int sigma = 1;
};

// Point masses of weight pi / |ln eps| on layers extended over slabs of thickness s.
struct VortexMeasure {
    double eps = 0.1;
    double s = 1.0;
    std::vector<VortexEntry> entries;

    double weight() const;
    double total_mass() const; // weight * s * number of entries
    int count(int n) const;
    int net_charge(int n) const;
};

struct VortexDetection {
    std::vector<VortexEntry> entries;
    std::vector<std::size_t> indeterminate; // plaquettes with all four corners near zero
};

// Plaquette phase winding, merged over same-sign detections within 2h.
VortexDetection detect_vortices(const LayerGrid& g, const std::vector<cplx>& u, int n = 0,
                                double floor = 1e-6);
VortexMeasure detect_measure(const Domain& d, const OrderParameterStack& u, double eps);

// Plaquette density of the n-th layer of a measure (cloud in cell).
Vec measure_density(const LayerGrid& g, const VortexMeasure& m, int n);

// ||grad phi|| for -Lap phi = mu1 - mu2, phi = 0 off the interior plaquettes.
double hminus1_distance(const LayerGrid& g, const Vec& mu1, const Vec& mu2);

struct MeasureDistanceReport {
    double hminus1 = 0.0; // sqrt(sum_n weight * d_n^2)
    double total_variation = 0.0;
    std::vector<double> per_slice;
};

MeasureDistanceReport measure_distance(const LayerGrid& g, const std::vector<Vec>& mu1,
                                       const std::vector<Vec>& mu2, double weight);

struct Supercurrent {
    std::vector<Vec> j1, j2; // layer surface densities, n = 0..N, weight s
    std::vector<Vec> j3;     // slab densities on layer nodes, n = 0..N-1
    double s = 1.0;
};

Supercurrent supercurrent(const Domain& d, const OrderParameterStack& u, const MagneticPotential& A,
                          const ModelParams& p);
double j3_l2_squared(const LayerGrid& g, const Supercurrent& J);

struct ScaledObservables {
    double log_eps = 0.0; // |ln eps|
    double energy = 0.0;  // G_LD / |ln eps|^2
    double josephson = 0.0;
    double magnetic = 0.0;
    double kinetic = 0.0;
    double potential = 0.0;
    double current_l2 = 0.0;    // ||j^{eps,s}|| / |ln eps| over D
    double jacobian_mass = 0.0; // |J^{eps,s}|(D) / |ln eps|
    double jacobian_total = 0.0;
    double j3_l2 = 0.0;             // ||j3|| / |ln eps|
    double slab_trace = 0.0;        // sum_n int_{D_n} |A_hat - A_hat_n|^2
    double slab_trace_ratio = 0.0;  // slab_trace / G_LD
    double potential_excess = 0.0;  // ||A - h_ex a|| / |ln eps| over the box
    VectorField2DStack scaled_current;
    PlaquetteStack scaled_jacobian;
};

ScaledObservables scaled_observables(const Domain& d, const OrderParameterStack& u,
                                     const MagneticPotential& A, const ModelParams& p);

// sum_n int_{ns}^{(n+1)s} int_Omega |A_hat(., z) - A_hat_n|^2.
double slab_trace_quantity(const Domain& d, const MagneticPotential& A);

void write_vortex_csv(const std::string& path, const VortexMeasure& m);

} // namespace ld
