#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ld/energy.hpp"

namespace ld {

enum class StepRule { fixed, barzilai_borwein };

struct SolveOptions {
    int max_iters = 20000;
    double grad_tol = 1e-6;   // relative to 1 + |E|
    double energy_tol = 0.0;  // relative change per step; 0 disables
    StepRule step_rule = StepRule::barzilai_borwein;
    double fixed_step = 1e-3; // in the L2 metric
    std::uint64_t seed = 0;
    bool coulomb = true;      // report in Coulomb gauge

    // Limit solver.
    double pd_sigma = 0.0;    // 0 selects 1/||K||
    double pd_tau = 0.0;
    int pd_iters = 400;       // primal-dual iterations per slice and sweep
    int outer_iters = 200;
    double gap_tol = 1e-7;    // absolute primal-dual gap
    double cg_tol = 1e-10;
};

struct HistoryRow {
    int iter = 0;
    double energy = 0.0;
    double measure = 0.0; // gradient norm or primal-dual gap
    double step = 0.0;
};

struct SolveReport {
    int iterations = 0;
    double energy = 0.0;
    double grad_norm = 0.0;
    double gap = 0.0;
    bool converged = false;
    std::string stop_reason;
    double max_modulus = 0.0;
    bool modulus_ok = true;
    std::vector<HistoryRow> history;
};

struct LDState {
    OrderParameterStack u;
    MagneticPotential A;
};

// u = r e^{i phi} with r ~ U[0,1], phi ~ U[0, 2 pi) on mask nodes; A = h_ex a.
LDState random_state(const Domain& d, const ModelParams& p, std::uint64_t seed);

// sqrt(g^T M^{-1} g) with M the L2 mass of the discrete unknowns.
double gradient_norm(const Domain& d, const LDGradient& G);

// max |u_n| over mask nodes.
double max_modulus(const Domain& d, const OrderParameterStack& u);

struct LDResult {
    LDState state;
    SolveReport report;
};

LDResult minimize_ld(const Domain& d, const LDState& init, const ModelParams& p,
                     const SolveOptions& opts);

struct LimitResult {
    VectorField2DStack v; // slices at the box cell midpoints in [0, L]
    MagneticPotential A;
    VectorField2DStack dual; // plaquette multipliers, |p| <= 1/2, stored in v1
    LimitBreakdown value;
    SolveReport report;
};

// Minimizer of the limit functional on the given grid.
LimitResult minimize_limit(const Domain& d, double h0, const SolveOptions& opts);

// argmin over A of the limit functional for fixed v (boundary clamped to h0 a).
MagneticPotential solve_limit_potential(const Domain& d, const VectorField2DStack& v, double h0,
                                        const MagneticPotential* warm, double cg_tol,
                                        CGResult* info = nullptr);

// Weak-duality lower bound for the limit functional at plaquette multipliers p.
double limit_dual_value(const Domain& d, const VectorField2DStack& p, double h0, double cg_tol);

// Largest eigenvalue of K^T K for the plaquette curl on the layer grid.
double curl_norm_squared(const LayerGrid& g, int iters = 200);

void write_history_csv(const std::string& path, const SolveReport& r);

} // namespace ld
