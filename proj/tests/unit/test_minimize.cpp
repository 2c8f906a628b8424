#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "helpers.hpp"
#include "ld/minimize.hpp"

using namespace ld;
using ldtest::small_disk;

TEST_SUITE("minimize") {

TEST_CASE("random_state is reproducible and bounded") {
    Domain d = small_disk();
    ModelParams p;
    p.h_ex = 0.4;
    LDState a = random_state(d, p, 7), b = random_state(d, p, 7), c = random_state(d, p, 8);
    CHECK(a.u.u == b.u.u);
    CHECK(a.u.u != c.u.u);
    for (const auto& layer : a.u.u)
        for (cplx z : layer) CHECK(std::abs(z) <= 1.0);
    MagneticPotential ap = applied_potential(d, 0.4);
    CHECK(a.A.a1 == ap.a1);
}

TEST_CASE("superconducting state at zero field needs no iterations") {
    Domain d = small_disk();
    ModelParams p;
    p.eps = 0.3;
    LDState s{constant_order_parameter(d, 1.0), zero_potential(d)};
    LDResult r = minimize_ld(d, s, p, SolveOptions{});
    CHECK(r.report.converged);
    CHECK(r.report.iterations == 0);
    CHECK(r.report.energy == doctest::Approx(0.0));
    CHECK(r.report.modulus_ok);
}

TEST_CASE("zero field descent from a random start") {
    Domain d = small_disk(2, 0.2);
    ModelParams p;
    p.eps = 0.4;
    SolveOptions o;
    o.grad_tol = 1e-7;
    LDState init = random_state(d, p, 3);
    double E0 = ld_energy(d, init.u, init.A, p).total;
    LDResult r = minimize_ld(d, init, p, o);
    REQUIRE(r.report.converged);
    CHECK(r.report.energy < E0);
    CHECK(r.report.modulus_ok);
    for (std::size_t i = 1; i < r.report.history.size(); ++i)
        CHECK(r.report.history[i].energy <= r.report.history[i - 1].energy);
    ELResidual res = el_residual(d, r.state.u, r.state.A, p);
    CHECK(res.worst_scaled() < 1e-5);
}

TEST_CASE("applied field: stationary point and Coulomb gauge") {
    Domain d = small_disk(2, 0.2);
    ModelParams p;
    p.eps = 0.3;
    p.h_ex = 0.8;
    p.lambda = 0.7;
    LDState init{constant_order_parameter(d, 1.0), applied_potential(d, p.h_ex)};
    double E0 = ld_energy(d, init.u, init.A, p).total;
    SolveOptions o;
    o.grad_tol = 1e-8;
    LDResult r = minimize_ld(d, init, p, o);
    REQUIRE(r.report.converged);
    CHECK(r.report.energy < E0);
    // The gauge change leaves the energy and the residual unchanged.
    LDGradient G = ld_gradient(d, r.state.u, r.state.A, p);
    CHECK(gradient_norm(d, G) <= 1e-7 * (1.0 + r.report.energy));
    CHECK(project_coulomb(d, r.state.A).max_div < 1e-8);
    CHECK(r.report.modulus_ok);
}

TEST_CASE("fixed step rule is monotone") {
    Domain d = small_disk(1, 0.25);
    ModelParams p;
    p.eps = 0.5;
    SolveOptions o;
    o.step_rule = StepRule::fixed;
    o.fixed_step = 0.01;
    o.max_iters = 200;
    LDResult r = minimize_ld(d, random_state(d, p, 5), p, o);
    CHECK(r.report.iterations > 0);
    for (std::size_t i = 1; i < r.report.history.size(); ++i)
        CHECK(r.report.history[i].energy <= r.report.history[i - 1].energy);
}

TEST_CASE("history csv") {
    SolveReport r;
    r.history = {{0, 1.0, 0.5, 0.0}, {1, 0.5, 0.1, 0.01}};
    std::string path = "ld_history_test.csv";
    write_history_csv(path, r);
    std::ifstream f(path);
    std::string line;
    std::getline(f, line);
    CHECK(line.rfind("iter,energy,measure,step", 0) == 0);
    int rows = 0;
    while (std::getline(f, line)) ++rows;
    CHECK(rows == 2);
    std::remove(path.c_str());
}

TEST_CASE("curl operator norm") {
    Domain d = small_disk(1, 0.1);
    double k2 = curl_norm_squared(d.layer);
    double h2 = d.layer.h * d.layer.h;
    CHECK(k2 <= 8.0 / h2 * (1 + 1e-9));
    CHECK(k2 >= 6.0 / h2);
}

TEST_CASE("potential solve reproduces the applied field for v = trace") {
    Domain d = small_disk(2, 0.1);
    const double h0 = 0.3;
    MagneticPotential a = applied_potential(d, h0);
    VectorField2DStack v = zero_cell_stack(d);
    for (Slice2D& s : v.slices) {
        LayerTrace t = trace_at(d, a, s.z);
        s.v1 = t.t1;
        s.v2 = t.t2;
    }
    MagneticPotential A = solve_limit_potential(d, v, h0, nullptr, 1e-12);
    for (std::size_t e = 0; e < A.a1.size(); ++e) CHECK(A.a1[e] == doctest::Approx(a.a1[e]));
    CHECK(limit_energy(d, v, A, h0).trace_term == doctest::Approx(0.0));
}

TEST_CASE("limit minimizer at zero field") {
    Domain d = small_disk(2, 0.1);
    SolveOptions o;
    LimitResult r = minimize_limit(d, 0.0, o);
    CHECK(r.report.converged);
    CHECK(std::abs(r.value.total) <= 1e-8);
}

TEST_CASE("limit minimizer at a weak field") {
    Domain d = small_disk(2, 0.1);
    const double h0 = 0.1;
    SolveOptions o;
    o.gap_tol = 1e-7;
    LimitResult r = minimize_limit(d, h0, o);
    CHECK(r.report.converged);
    CHECK(r.report.gap >= -1e-9);
    CHECK(r.report.gap <= o.gap_tol);
    // Competitor v = 0, A = h0 a.
    CHECK(r.value.total <= h0 * h0 * M_PI * d.spec.L / 16.0 * 1.02);
    CHECK(limit_dual_value(d, r.dual, h0, 1e-12) <= r.value.total + 1e-10);
    for (const Slice2D& s : r.dual.slices)
        for (double x : s.v1) CHECK(std::abs(x) <= 0.5);
}

}
