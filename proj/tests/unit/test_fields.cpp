#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "ld/energy.hpp"
#include "ld/fields.hpp"

using namespace ld;
using ldtest::rel;

namespace {

double max_abs_diff(const Vec& a, const Vec& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double max_abs(const Vec& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

// Smooth bump supported in the ball of radius r around c.
double bump(double x, double y, double z, double cz, double r) {
    double q = (x * x + y * y + (z - cz) * (z - cz)) / (r * r);
    return q < 1.0 ? std::exp(-1.0 / (1.0 - q)) : 0.0;
}

} // namespace

TEST_SUITE("fields") {

TEST_CASE("constant gauge rotates u and leaves A alone") {
    Domain d = ldtest::small_disk();
    std::mt19937_64 rng(3);
    auto u = ldtest::random_u(d, rng);
    auto A = ldtest::random_A(d, 0.7, 0.3, rng);
    const double c = 0.83;
    Vec g(d.box.n_nodes(), c);
    GaugeState out = apply_gauge(d, u, A, g);
    CHECK(max_abs_diff(out.A.a1, A.a1) == 0.0);
    CHECK(max_abs_diff(out.A.a2, A.a2) == 0.0);
    CHECK(max_abs_diff(out.A.a3, A.a3) == 0.0);
    double err = 0.0;
    for (int n = 0; n <= d.N(); ++n)
        for (std::size_t p = 0; p < u.u[n].size(); ++p)
            err = std::max(err, std::abs(out.u.u[n][p] - u.u[n][p] * std::polar(1.0, c)));
    CHECK(err < 1e-15);
}

TEST_CASE("gauge g = x1 adds one to A1") {
    Domain d = ldtest::small_disk();
    MagneticPotential A = applied_potential(d, 0.5);
    Vec g = sample_box_nodes(d, [](double x, double, double) { return x; });
    GaugeState out = apply_gauge(d, constant_order_parameter(d, 1.0), A, g);
    double err = 0.0;
    for (std::size_t e = 0; e < A.a1.size(); ++e) err = std::max(err, std::abs(out.A.a1[e] - A.a1[e] - 1.0));
    CHECK(err < 1e-12);
    CHECK(max_abs_diff(out.A.a2, A.a2) < 1e-12);
    CHECK(max_abs_diff(out.A.a3, A.a3) < 1e-12);
}

TEST_CASE("every energy term is gauge invariant") {
    Domain d = ldtest::small_disk(3, 0.15);
    std::mt19937_64 rng(11);
    ModelParams p;
    p.eps = 0.2;
    p.h_ex = 1.3;
    auto u = ldtest::random_u(d, rng);
    auto A = ldtest::random_A(d, p.h_ex, 0.4, rng);
    EnergyBreakdown e0 = ld_energy(d, u, A, p);
    std::uniform_real_distribution<double> c(-2.0, 2.0);
    for (int trial = 0; trial < 5; ++trial) {
        double a = c(rng), b = c(rng), w = c(rng);
        Vec g = sample_box_nodes(d, [&](double x, double y, double z) {
            return a * std::sin(x + 0.3 * y) + b * std::cos(0.7 * z - y) + w * x * z;
        });
        GaugeState gs = apply_gauge(d, u, A, g);
        EnergyBreakdown e1 = ld_energy(d, gs.u, gs.A, p);
        for (int n = 0; n <= d.N(); ++n) {
            CHECK(rel(e1.kinetic[n], e0.kinetic[n]) < 1e-10);
            CHECK(rel(e1.gl_potential[n], e0.gl_potential[n]) < 1e-10);
        }
        for (int n = 0; n < d.N(); ++n) CHECK(rel(e1.josephson[n], e0.josephson[n]) < 1e-10);
        CHECK(rel(e1.magnetic, e0.magnetic) < 1e-10);
    }
}

TEST_CASE("discrete div curl vanishes") {
    Domain d = ldtest::small_disk();
    std::mt19937_64 rng(5);
    auto A = ldtest::random_A(d, 0.9, 1.0, rng);
    Vec dv = divergence_of_faces(d, curl(d, A));
    CHECK(max_abs(dv) < 1e-11);
}

TEST_CASE("applied potential has unit curl along e3") {
    Domain d = ldtest::small_disk();
    FaceField B = curl(d, applied_potential(d, 2.5));
    double ez = 0.0;
    for (double v : B.fz) ez = std::max(ez, std::abs(v - 2.5));
    CHECK(ez < 1e-12);
    CHECK(max_abs(B.fx) < 1e-12);
    CHECK(max_abs(B.fy) < 1e-12);
}

TEST_CASE("coulomb projection") {
    Domain d = ldtest::small_disk();

    SUBCASE("applied potential is already divergence free") {
        MagneticPotential A = applied_potential(d, 1.7);
        CHECK(max_abs(divergence(d, A)) < 1e-12);
        CoulombResult c = project_coulomb(d, A);
        CHECK(max_abs(c.g) < 1e-10);
        CHECK(max_abs_diff(c.A.a1, A.a1) < 1e-10);
        CHECK(max_abs_diff(c.A.a2, A.a2) < 1e-10);
    }

    SUBCASE("a discrete gradient is annihilated") {
        Vec phi = sample_box_nodes(d, [](double x, double y, double z) {
            return bump(x, y, z, 0.5, 2.0) * (1.0 + x - 0.5 * y * z);
        });
        MagneticPotential A = apply_gauge(d, OrderParameterStack{}, zero_potential(d), phi).A;
        CHECK(max_abs(A.a1) > 0.05);
        CoulombResult c = project_coulomb(d, A);
        CHECK(c.solve.converged);
        CHECK(max_abs(c.A.a1) < 1e-8);
        CHECK(max_abs(c.A.a2) < 1e-8);
        CHECK(max_abs(c.A.a3) < 1e-8);
    }

    SUBCASE("random potential: divergence removed, energy unchanged") {
        std::mt19937_64 rng(8);
        ModelParams p;
        p.eps = 0.3;
        p.h_ex = 0.8;
        auto u = ldtest::random_u(d, rng);
        auto A = ldtest::random_A(d, p.h_ex, 0.5, rng);
        CoulombResult c = project_coulomb(d, A);
        CHECK(c.solve.converged);
        CHECK(c.max_div < 1e-7 * std::max(1.0, max_abs(divergence(d, A))));
        GaugeState gs = apply_gauge(d, u, A, c.g);
        CHECK(rel(ld_energy(d, gs.u, c.A, p).total, ld_energy(d, u, A, p).total) < 1e-10);
    }
}

TEST_CASE("layer traces") {
    Domain d = ldtest::small_disk(4);
    const BoxGrid& b = d.box;
    auto z = layer_positions(d.spec);

    MagneticPotential A = zero_potential(d);
    for (int k = 0; k < b.nz; ++k)
        for (int j = 0; j < b.ny; ++j)
            for (int i = 0; i + 1 < b.nx; ++i) A.a1[b.ex(i, j, k)] = b.z[k];
    for (int n = 0; n <= d.N(); ++n) {
        LayerTrace t = trace(d, A, n);
        for (std::size_t e = 0; e < t.t1.size(); ++e)
            if (d.layer.xedge[e]) CHECK(t.t1[e] == doctest::Approx(z[n]).epsilon(1e-14));
        CHECK(max_abs(t.t2) == 0.0);
    }

    MagneticPotential a = applied_potential(d, 1.5);
    const LayerGrid& g = d.layer;
    for (int n = 0; n <= d.N(); ++n) {
        LayerTrace t = trace(d, a, n);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i + 1 < g.nx; ++i)
                if (g.xedge[g.ex(i, j)]) CHECK(t.t1[g.ex(i, j)] == doctest::Approx(-0.75 * g.y(j)));
    }

    MagneticPotential a3 = zero_potential(d);
    for (double& v : a3.a3) v = 2.0;
    CHECK(max_abs(trace(d, a3, 1).t1) == 0.0);
    CHECK(max_abs(trace(d, a3, 1).t2) == 0.0);
    Vec th = link_phase(d, a3, 0);
    CHECK(th[g.node(g.nx / 2, g.ny / 2)] == doctest::Approx(2.0 * d.s()));

    CHECK_THROWS_AS(trace(d, A, -1), std::out_of_range);
    CHECK_THROWS_AS(trace(d, A, d.N() + 1), std::out_of_range);
}

TEST_CASE("hodge decomposition") {
    DomainSpec s;
    s.h_grid = 0.05;
    LayerGrid g = build_layer_grid(s);

    SUBCASE("gradient input has no rotational part") {
        // Exact discrete gradient of sin(x) y.
        Vec v1(g.n_xedges(), 0.0), v2(g.n_yedges(), 0.0);
        auto G = [](double x, double y) { return std::sin(x) * y; };
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i + 1 < g.nx; ++i)
                if (g.xedge[g.ex(i, j)]) v1[g.ex(i, j)] = (G(g.x(i + 1), g.y(j)) - G(g.x(i), g.y(j))) / g.h;
        for (int j = 0; j + 1 < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                if (g.yedge[g.ey(i, j)]) v2[g.ey(i, j)] = (G(g.x(i), g.y(j + 1)) - G(g.x(i), g.y(j))) / g.h;
        HodgeResult h = hodge_decompose(g, v1, v2);
        CHECK(max_abs(h.rot1) < 1e-12);
        CHECK(max_abs(h.rot2) < 1e-12);
        CHECK(max_abs_diff(h.grad1, v1) < 1e-12);
    }

    SUBCASE("rotation of a compactly supported stream function has no gradient part") {
        Vec f0(g.n_plaq(), 0.0);
        for (int j = 0; j + 1 < g.ny; ++j)
            for (int i = 0; i + 1 < g.nx; ++i) {
                double x = g.x(i) + 0.5 * g.h, y = g.y(j) + 0.5 * g.h;
                if (g.plaq[g.pl(i, j)]) f0[g.pl(i, j)] = bump(x - 0.1, y, 0.0, 0.0, 0.7);
            }
        auto [v1, v2] = rot_of_plaquette_field(g, f0);
        HodgeResult h = hodge_decompose(g, v1, v2);
        CHECK(max_abs_diff(h.f, f0) < 1e-9);
        CHECK(max_abs(h.grad1) < 1e-9);
        CHECK(max_abs(h.grad2) < 1e-9);
    }

    SUBCASE("random input splits orthogonally") {
        std::mt19937_64 rng(17);
        std::normal_distribution<double> nd;
        for (int trial = 0; trial < 3; ++trial) {
            Vec v1(g.n_xedges(), 0.0), v2(g.n_yedges(), 0.0);
            for (std::size_t e = 0; e < v1.size(); ++e)
                if (g.xedge[e]) v1[e] = nd(rng);
            for (std::size_t e = 0; e < v2.size(); ++e)
                if (g.yedge[e]) v2[e] = nd(rng);
            HodgeResult h = hodge_decompose(g, v1, v2);
            double n1 = std::sqrt(edge_dot(g, h.rot1, h.rot2, h.rot1, h.rot2));
            double n2 = std::sqrt(edge_dot(g, h.grad1, h.grad2, h.grad1, h.grad2));
            double nv = edge_dot(g, v1, v2, v1, v2);
            CHECK(std::abs(edge_dot(g, h.rot1, h.rot2, h.grad1, h.grad2)) <= 1e-8 * n1 * n2);
            CHECK(std::abs(n1 * n1 + n2 * n2 - nv) <= 1e-8 * nv);
            // grad g reproduces the gradient part.
            double err = 0.0;
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i + 1 < g.nx; ++i)
                    if (g.xedge[g.ex(i, j)])
                        err = std::max(err, std::abs((h.g[g.node(i + 1, j)] - h.g[g.node(i, j)]) / g.h -
                                                     h.grad1[g.ex(i, j)]));
            CHECK(err < 1e-7 * max_abs(h.grad1));
        }
    }
}

TEST_CASE("layer stack of a smooth field converges at first order") {
    Domain coarse = ldtest::small_disk(4, 0.1);
    PlanarField v = [](double x, double y, double z) {
        return std::pair{std::sin(z) + x, y * std::cos(z)};
    };
    // Compare the piecewise constant stack with cell midpoint samples.
    double prev = 0.0;
    for (int N : {4, 8, 16}) {
        DomainSpec s = coarse.spec;
        s.N = N;
        s.z_cells = 4;
        Domain d = build_domain(s);
        auto layers = layer_stack(d, v);
        auto cells = cell_stack(d, v);
        long double err = 0.0L;
        for (const Slice2D& c : cells.slices) {
            int n = std::min(int(c.z / d.s()), N - 1);
            const Slice2D& l = layers.slices[n];
            for (std::size_t e = 0; e < c.v1.size(); ++e) err += std::pow(c.v1[e] - l.v1[e], 2) * c.weight;
            for (std::size_t e = 0; e < c.v2.size(); ++e) err += std::pow(c.v2[e] - l.v2[e], 2) * c.weight;
        }
        double e = std::sqrt(double(err));
        if (prev > 0) CHECK(prev / e == doctest::Approx(2.0).epsilon(0.1));
        prev = e;
    }
}

}
