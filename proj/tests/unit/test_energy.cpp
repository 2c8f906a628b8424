#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "ld/energy.hpp"

using namespace ld;
using ldtest::rel;

namespace {

struct Direction {
    std::vector<std::vector<cplx>> du;
    MagneticPotential dA;
};

Direction random_direction(const Domain& d, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Direction v;
    v.du.assign(d.N() + 1, std::vector<cplx>(d.layer.n_nodes(), cplx(0.0, 0.0)));
    for (auto& l : v.du)
        for (std::size_t p = 0; p < l.size(); ++p)
            if (d.layer.mask[p]) l[p] = cplx(nd(rng), nd(rng));
    v.dA = zero_potential(d);
    MagneticPotential m = free_edge_mask(d);
    for (std::size_t e = 0; e < m.a1.size(); ++e) v.dA.a1[e] = m.a1[e] * nd(rng);
    for (std::size_t e = 0; e < m.a2.size(); ++e) v.dA.a2[e] = m.a2[e] * nd(rng);
    for (std::size_t e = 0; e < m.a3.size(); ++e) v.dA.a3[e] = m.a3[e] * nd(rng);
    return v;
}

double energy_along(const Domain& d, const OrderParameterStack& u, const MagneticPotential& A,
                    const Direction& v, double t, const ModelParams& p) {
    OrderParameterStack ut = u;
    MagneticPotential At = A;
    for (std::size_t n = 0; n < ut.u.size(); ++n)
        for (std::size_t q = 0; q < ut.u[n].size(); ++q) ut.u[n][q] += t * v.du[n][q];
    axpy(t, v.dA.a1, At.a1);
    axpy(t, v.dA.a2, At.a2);
    axpy(t, v.dA.a3, At.a3);
    return ld_energy(d, ut, At, p).total;
}

double pairing(const LDGradient& G, const Direction& v) {
    long double acc = 0.0L;
    for (std::size_t n = 0; n < G.gu.size(); ++n)
        for (std::size_t q = 0; q < G.gu[n].size(); ++q)
            acc += G.gu[n][q].real() * v.du[n][q].real() + G.gu[n][q].imag() * v.du[n][q].imag();
    acc += dot(G.gA.a1, v.dA.a1);
    acc += dot(G.gA.a2, v.dA.a2);
    acc += dot(G.gA.a3, v.dA.a3);
    return double(acc);
}

} // namespace

TEST_SUITE("energy") {

TEST_CASE("superconducting state without field has zero energy") {
    Domain d = ldtest::small_disk();
    ModelParams p;
    EnergyBreakdown e = ld_energy(d, constant_order_parameter(d, 1.0), zero_potential(d), p);
    CHECK(e.total == 0.0);
}

TEST_CASE("normal state energy") {
    Domain d = ldtest::small_disk(3, 0.1);
    ModelParams p;
    p.eps = 0.25;
    p.h_ex = 1.7;
    EnergyBreakdown e = ld_energy(d, constant_order_parameter(d, 0.0), applied_potential(d, p.h_ex), p);
    double expect = d.s() * (d.N() + 1) * d.layer.mask_area() / (4 * p.eps * p.eps);
    CHECK(rel(e.total, expect) < 1e-13);
    CHECK(e.magnetic < 1e-20);
}

TEST_CASE("kinetic energy of the Meissner trial state") {
    DomainSpec s;
    s.h_grid = 0.01;
    s.N = 2;
    s.R_box = 3.0;
    s.h_box = 1.0;
    Domain d = build_domain(s);
    ModelParams p;
    p.h_ex = 0.3;
    EnergyBreakdown e = ld_energy(d, constant_order_parameter(d, 1.0), applied_potential(d, p.h_ex), p);
    double kin = 0.0;
    for (double k : e.kinetic) kin += k;
    double expect = d.s() * (d.N() + 1) * 0.5 * p.h_ex * p.h_ex * M_PI / 8.0;
    CHECK(std::abs(kin - expect) / expect < 0.01);
    for (double j : e.josephson) CHECK(j < 1e-24);
}

TEST_CASE("splitting identity") {
    Domain d = ldtest::small_disk(3, 0.15);
    std::mt19937_64 rng(21);
    ModelParams p;
    p.eps = 0.15;
    p.h_ex = 2.0;
    for (int trial = 0; trial < 10; ++trial) {
        auto u = ldtest::random_u(d, rng);
        auto A = ldtest::random_A(d, p.h_ex, 1.0, rng);
        EnergyBreakdown e = ld_energy(d, u, A, p);
        SplitBreakdown sp = ld_energy_split(d, u, A, p);
        CHECK(std::abs(sp.total - e.total) <= 1e-12 * (1 + std::abs(e.total)));
    }
    SUBCASE("zero potential") {
        auto u = ldtest::random_u(d, rng);
        SplitBreakdown sp = ld_energy_split(d, u, zero_potential(d), p);
        CHECK(sp.cross_term == 0.0);
        CHECK(sp.quadratic_A_term == 0.0);
        for (int n = 0; n <= d.N(); ++n)
            CHECK(rel(sp.pure_gl[n], d.s() * gl2d_energy(d.layer, u.u[n], p.eps)) < 1e-15);
    }
    SUBCASE("real order parameter has no cross term") {
        auto u = ldtest::random_u(d, rng);
        for (auto& l : u.u)
            for (auto& z : l) z = std::abs(z);
        SplitBreakdown sp = ld_energy_split(d, u, ldtest::random_A(d, p.h_ex, 1.0, rng), p);
        CHECK(std::abs(sp.cross_term) < 1e-14);
    }
}

TEST_CASE("two dimensional energy") {
    DomainSpec s;
    s.h_grid = 0.01;
    LayerGrid g = build_layer_grid(s);
    CHECK(gl2d_energy(g, std::vector<cplx>(g.n_nodes(), 1.0), 0.1) == 0.0);
    const double k1 = 1.0, k2 = 0.5;
    std::vector<cplx> u(g.n_nodes());
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) u[g.node(i, j)] = std::polar(1.0, k1 * g.x(i) + k2 * g.y(j));
    double expect = 0.5 * (k1 * k1 + k2 * k2) * M_PI;
    CHECK(std::abs(gl2d_energy(g, u, 0.1) - expect) / expect < 0.02);
}

TEST_CASE("gradient matches central differences") {
    Domain d = ldtest::small_disk(2, 0.2);
    std::mt19937_64 rng(4);
    ModelParams p;
    p.eps = 0.3;
    p.h_ex = 1.1;
    p.lambda = 0.8;
    auto u = ldtest::random_u(d, rng);
    auto A = ldtest::random_A(d, p.h_ex, 0.5, rng);
    LDGradient G = ld_gradient(d, u, A, p);
    const double t = 1e-5;
    for (int trial = 0; trial < 20; ++trial) {
        Direction v = random_direction(d, rng);
        double fd = (energy_along(d, u, A, v, t, p) - energy_along(d, u, A, v, -t, p)) / (2 * t);
        double an = pairing(G, v);
        CHECK(std::abs(fd - an) <= 1e-5 * std::abs(an));
    }
}

TEST_CASE("gradient at the trivial minimum vanishes") {
    Domain d = ldtest::small_disk();
    ModelParams p;
    LDGradient G = ld_gradient(d, constant_order_parameter(d, 1.0), zero_potential(d), p);
    double m = 0.0;
    for (auto& l : G.gu)
        for (auto z : l) m = std::max(m, std::abs(z));
    for (double v : G.gA.a1) m = std::max(m, std::abs(v));
    for (double v : G.gA.a3) m = std::max(m, std::abs(v));
    CHECK(m == 0.0);
}

TEST_CASE("gradient is orthogonal to the global phase direction") {
    Domain d = ldtest::small_disk();
    std::mt19937_64 rng(9);
    ModelParams p;
    p.eps = 0.2;
    p.h_ex = 0.9;
    auto u = ldtest::random_u(d, rng);
    auto A = ldtest::random_A(d, p.h_ex, 0.3, rng);
    LDGradient G = ld_gradient(d, u, A, p);
    long double acc = 0.0L, nrm = 0.0L;
    for (int n = 0; n <= d.N(); ++n)
        for (std::size_t q = 0; q < u.u[n].size(); ++q) {
            cplx iu = cplx(0, 1) * u.u[n][q];
            acc += G.gu[n][q].real() * iu.real() + G.gu[n][q].imag() * iu.imag();
            nrm += std::norm(G.gu[n][q]);
        }
    CHECK(std::abs(double(acc)) < 1e-12 * std::sqrt(double(nrm)));
}

TEST_CASE("residuals agree with the gradient") {
    for (int N : {1, 3}) {
        Domain d = ldtest::small_disk(N, 0.2);
        std::mt19937_64 rng(13 + N);
        ModelParams p;
        p.eps = 0.25;
        p.h_ex = 0.6;
        auto u = ldtest::random_u(d, rng);
        auto A = ldtest::random_A(d, p.h_ex, 0.4, rng);
        LDGradient G = ld_gradient(d, u, A, p);
        auto r = gl_residual_field(d, u, A, p);
        const double w = d.s() * d.layer.h * d.layer.h;
        double err = 0.0, mag = 0.0;
        for (int n = 0; n <= N; ++n)
            for (std::size_t q = 0; q < r[n].size(); ++q) {
                err = std::max(err, std::abs(r[n][q] + G.gu[n][q] / w));
                mag = std::max(mag, std::abs(r[n][q]));
            }
        CHECK(err <= 1e-11 * mag);

        ELResidual el = el_residual(d, u, A, p);
        MagneticPotential vol = edge_volumes(d);
        long double sa = 0.0L;
        for (std::size_t e = 0; e < vol.a1.size(); ++e) sa += G.gA.a1[e] * G.gA.a1[e] / vol.a1[e];
        for (std::size_t e = 0; e < vol.a2.size(); ++e) sa += G.gA.a2[e] * G.gA.a2[e] / vol.a2[e];
        for (std::size_t e = 0; e < vol.a3.size(); ++e) sa += G.gA.a3[e] * G.gA.a3[e] / vol.a3[e];
        CHECK(el.ampere.l2 == doctest::Approx(std::sqrt(double(sa))).epsilon(1e-9));
    }
}

TEST_CASE("residuals vanish at the trivial state") {
    Domain d = ldtest::small_disk();
    ELResidual el = el_residual(d, constant_order_parameter(d, 1.0), zero_potential(d), ModelParams{});
    CHECK(el.gl.max == 0.0);
    CHECK(el.neumann.max == 0.0);
    CHECK(el.ampere.max == 0.0);
}

TEST_CASE("limit functional") {
    Domain d = ldtest::small_disk(2, 0.01);
    CHECK(limit_energy(d, zero_cell_stack(d), zero_potential(d), 0.0).total == 0.0);

    const double h0 = 0.4;
    LimitBreakdown lb = limit_energy(d, zero_cell_stack(d), applied_potential(d, h0), h0);
    double expect = 0.5 * h0 * h0 * M_PI / 8.0;
    CHECK(std::abs(lb.total - expect) / expect < 0.01);
    CHECK(lb.tv_term == 0.0);
    CHECK(lb.magnetic < 1e-20);

    // v equal to the trace leaves the total variation and magnetic terms.
    std::mt19937_64 rng(2);
    MagneticPotential A = ldtest::random_A(d, h0, 0.2, rng);
    VectorField2DStack v = zero_cell_stack(d);
    for (Slice2D& sl : v.slices) {
        LayerTrace t = trace_at(d, A, sl.z);
        sl.v1 = t.t1;
        sl.v2 = t.t2;
    }
    LimitBreakdown lt = limit_energy(d, v, A, h0);
    CHECK(lt.trace_term == 0.0);
    CHECK(lt.total == doctest::Approx(0.5 * (lt.tv_term + lt.magnetic)));
}

TEST_CASE("limit functional is jointly convex") {
    Domain d = ldtest::small_disk(2, 0.1);
    std::mt19937_64 rng(6);
    std::normal_distribution<double> nd;
    auto random_v = [&]() {
        VectorField2DStack v = zero_cell_stack(d);
        for (Slice2D& sl : v.slices) {
            for (std::size_t e = 0; e < sl.v1.size(); ++e)
                if (d.layer.xedge[e]) sl.v1[e] = nd(rng);
            for (std::size_t e = 0; e < sl.v2.size(); ++e)
                if (d.layer.yedge[e]) sl.v2[e] = nd(rng);
        }
        return v;
    };
    for (int trial = 0; trial < 5; ++trial) {
        auto v1 = random_v(), v2 = random_v();
        auto A1 = ldtest::random_A(d, 0.5, 0.5, rng), A2 = ldtest::random_A(d, 0.5, 0.5, rng);
        VectorField2DStack vm = v1;
        for (std::size_t k = 0; k < vm.slices.size(); ++k) {
            for (std::size_t e = 0; e < vm.slices[k].v1.size(); ++e)
                vm.slices[k].v1[e] = 0.5 * (v1.slices[k].v1[e] + v2.slices[k].v1[e]);
            for (std::size_t e = 0; e < vm.slices[k].v2.size(); ++e)
                vm.slices[k].v2[e] = 0.5 * (v1.slices[k].v2[e] + v2.slices[k].v2[e]);
        }
        MagneticPotential Am = A1;
        for (std::size_t e = 0; e < Am.a1.size(); ++e) Am.a1[e] = 0.5 * (A1.a1[e] + A2.a1[e]);
        for (std::size_t e = 0; e < Am.a2.size(); ++e) Am.a2[e] = 0.5 * (A1.a2[e] + A2.a2[e]);
        for (std::size_t e = 0; e < Am.a3.size(); ++e) Am.a3[e] = 0.5 * (A1.a3[e] + A2.a3[e]);
        double em = limit_energy(d, vm, Am, 0.5).total;
        double e1 = limit_energy(d, v1, A1, 0.5).total, e2 = limit_energy(d, v2, A2, 0.5).total;
        CHECK(em <= 0.5 * (e1 + e2) + 1e-10);
    }
}

}
