#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "ld/recovery.hpp"

using namespace ld;
using ldtest::small_disk;

namespace {

Vec plaquette_samples(const LayerGrid& g, const std::function<double(double, double)>& f) {
    Vec out(g.n_plaq(), 0.0);
    for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i + 1 < g.nx; ++i)
            if (g.plaq[g.pl(i, j)]) out[g.pl(i, j)] = f(g.x(i) + 0.5 * g.h, g.y(j) + 0.5 * g.h);
    return out;
}

} // namespace

TEST_SUITE("recovery") {

TEST_CASE("core profile bounds, exactness beyond eps and scaling") {
    for (double eps : {0.1, 0.01}) {
        CoreProfile q = q_profile(eps);
        CoreProfile q1 = q_profile(1.0);
        CHECK(q(0.0) == 0.0);
        CHECK(q(eps) == 1.0);
        CHECK(q(1.5 * eps) == 1.0);
        for (double r : q.sample_r(301)) {
            CHECK(q(r) >= 0.0);
            CHECK(q(r) <= 1.0);
            CHECK(std::abs(q(r) - q1(r / eps)) <= 1e-6);
        }
    }
    CHECK_THROWS_AS(q_profile(0.0), std::invalid_argument);
}

TEST_CASE("core integral is bounded uniformly in eps") {
    double prev = q_profile(0.1).core_integral();
    CHECK(prev > 0.0);
    for (double eps : {0.01, 0.001}) {
        double cur = q_profile(eps).core_integral();
        CHECK(cur / prev == doctest::Approx(1.0).epsilon(0.1));
        prev = cur;
    }
}

TEST_CASE("profile is monotone and close to the enclosed mass") {
    CoreProfile q = q_profile(0.2);
    double last = 0.0;
    for (double r : q.sample_r(200)) {
        CHECK(q(r) >= last - 1e-15);
        last = q(r);
    }
    // Enclosed mollifier mass of the disk of radius eps / 2, by 2D midpoint quadrature.
    const int n = 800;
    const double hs = 2.0 / n;
    long double acc = 0.0L;
    for (int b = 0; b < n; ++b)
        for (int a = 0; a < n; ++a) {
            double x = -1 + (a + 0.5) * hs, y = -1 + (b + 0.5) * hs;
            if (std::hypot(x, y) < 0.5) acc += mollifier(std::hypot(x, y));
        }
    CHECK(q(0.1) == doctest::Approx(double(acc) * hs * hs).epsilon(2e-3));
}

TEST_CASE("placement: empty, direct count and separation") {
    Domain d = small_disk(2, 0.05);
    Placement empty = place_vortices(d, [](double, double, double) { return 0.0; }, 0.01);
    CHECK(empty.measure.entries.empty());

    // |ln eps| = 100 gives delta^2 = 0.1; w = pi on the square [0, delta]^2.
    const double eps = std::exp(-100.0), delta = std::pow(100.0, -0.25);
    ScalarField w = [delta](double x, double y, double) {
        return x > 0 && y > 0 && x < delta && y < delta ? M_PI : 0.0;
    };
    Placement pl = place_vortices(d, w, eps);
    CHECK(pl.delta == doctest::Approx(delta));
    CHECK(pl.measure.count(0) == 10);
    CHECK(pl.measure.count(1) == 10);
    for (const auto& e : pl.measure.entries) {
        CHECK(e.sigma == 1);
        CHECK(e.x > 0);
        CHECK(e.x < delta);
    }
    CHECK(pl.min_separation >= pl.required_separation);
    CHECK(pl.min_boundary_distance >= pl.required_separation);
    CHECK(pl.c0 == doctest::Approx(1.0 / (4.0 * std::sqrt(M_PI + 1.0))));

    // The separation constant adapts to large densities.
    Placement dense = place_vortices(d, [](double, double, double) { return 50.0; }, std::exp(-100.0));
    CHECK(dense.measure.count(0) > 100);
    CHECK(dense.min_separation >= dense.required_separation);
    CHECK_THROWS_AS(place_vortices(d, w, 1.0), std::invalid_argument);
}

TEST_CASE("placement mass bound and separation on a smooth density") {
    Domain d = small_disk(3, 0.05);
    ScalarField w = [](double x, double y, double z) { return 1.0 + 0.5 * std::sin(M_PI * x) - 0.8 * y * z; };
    for (double L : {10.0, 40.0, 160.0}) {
        Placement pl = place_vortices(d, w, std::exp(-L));
        double bound = 0.0;
        for (double m : pl.layer_l1) bound += d.s() * m;
        CHECK(pl.measure.total_mass() <= bound + 1e-12);
        CHECK(pl.min_separation >= pl.required_separation);
        CHECK(pl.min_boundary_distance >= pl.required_separation);
    }
}

TEST_CASE("placement tiling of a single square is mass-consistent") {
    Domain d = small_disk(1, 0.05);
    ScalarField w = [](double, double, double) { return 1.0; };
    Placement pl = place_vortices(d, w, std::exp(-60.0));
    // Every interior square of side delta carries floor(60 delta^2 / pi) points.
    const long per = long(std::floor(60.0 / M_PI * pl.delta * pl.delta));
    CHECK(pl.measure.count(0) % per == 0);
}

TEST_CASE("H^-1 distance of the placement to the density decreases with |ln eps|") {
    Domain d = small_disk(1, 0.02);
    const LayerGrid& g = d.layer;
    ScalarField w = [](double x, double, double) { return 1.0 + 0.5 * std::sin(M_PI * x); };
    Vec wn = plaquette_samples(g, [&](double x, double y) { return w(x, y, 0.0); });
    double prev = std::numeric_limits<double>::infinity();
    for (double L : {25.0, 100.0, 400.0}) {
        Placement pl = place_vortices(d, w, std::exp(-L));
        double dist = hminus1_distance(g, measure_density(g, pl.measure, 0), wn);
        CHECK(dist < prev);
        prev = dist;
    }
}

TEST_CASE("weak consistency of the placement against smooth test functions") {
    Domain d = small_disk(2, 0.05);
    ScalarField w = [](double x, double y, double) { return 1.0 + 0.5 * std::sin(M_PI * x) * std::cos(y); };
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    struct Test {
        double a, b, c, k;
    };
    std::vector<Test> tests;
    for (int t = 0; t < 10; ++t) tests.push_back({U(rng), U(rng), U(rng), 1.0 + 2.0 * std::abs(U(rng))});
    auto psi = [](const Test& t, double x, double y) {
        return t.a + t.b * std::sin(t.k * x) + t.c * std::cos(t.k * y + t.a);
    };
    // int psi w over the disk by polar Gauss-Legendre-free midpoint sums.
    auto exact = [&](const Test& t) {
        const int nr = 800, nt = 1600;
        long double acc = 0.0L;
        for (int a = 0; a < nr; ++a)
            for (int b = 0; b < nt; ++b) {
                double r = (a + 0.5) / nr, th = 2 * M_PI * (b + 0.5) / nt;
                double x = r * std::cos(th), y = r * std::sin(th);
                acc += psi(t, x, y) * w(x, y, 0.0) * r;
            }
        return double(acc) * (1.0 / nr) * (2 * M_PI / nt);
    };
    std::vector<double> ref;
    for (const Test& t : tests) ref.push_back(exact(t));
    std::vector<double> worst;
    for (double L : {16.0, 64.0, 256.0}) {
        Placement pl = place_vortices(d, w, std::exp(-L));
        double err = 0.0;
        for (std::size_t k = 0; k < tests.size(); ++k) {
            long double acc = 0.0L;
            for (const auto& e : pl.measure.entries)
                if (e.n == 0) acc += e.sigma * psi(tests[k], e.x, e.y);
            err = std::max(err, std::abs(double(acc) * pl.measure.weight() - ref[k]));
        }
        worst.push_back(err);
    }
    CHECK(worst[1] < worst[0]);
    CHECK(worst[2] < worst[1]);
}

TEST_CASE("vortex factor: empty measure and a centred vortex") {
    const double eps = 0.05;
    Domain d = small_disk(1, eps / 3);
    const LayerGrid& g = d.layer;
    CoreProfile q = q_profile(eps);
    VortexMeasure none;
    none.eps = eps;
    VortexFactor f0 = build_vortex_factor(g, none, 0, q);
    for (std::size_t p = 0; p < g.n_nodes(); ++p)
        if (g.mask[p]) CHECK(f0.u[p] == cplx(1.0, 0.0));

    VortexMeasure one = none;
    one.entries = {{0, 0.0, 0.0, 1}};
    VortexFactor f1 = build_vortex_factor(g, one, 0, q);
    VortexDetection det = detect_vortices(g, f1.u);
    REQUIRE(det.entries.size() == 1);
    CHECK(det.entries[0].sigma == 1);
    CHECK(std::hypot(det.entries[0].x, det.entries[0].y) <= 2 * g.h);
    // Unit modulus away from the core.
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (g.mask[g.node(i, j)] && std::hypot(g.x(i), g.y(j)) >= eps)
                CHECK(std::abs(std::abs(f1.u[g.node(i, j)]) - 1.0) < 1e-10);
}

TEST_CASE("vortex factor windings follow the signs") {
    const double eps = 0.05;
    Domain d = small_disk(1, eps / 3);
    const LayerGrid& g = d.layer;
    VortexMeasure m;
    m.eps = eps;
    m.entries = {{0, 0.3, 0.2, 1}, {0, -0.4, 0.1, -1}, {0, 0.1, -0.5, 1}};
    VortexFactor f = build_vortex_factor(g, m, 0, q_profile(eps));
    VortexDetection det = detect_vortices(g, f.u);
    REQUIRE(det.entries.size() == 3);
    for (const auto& a : m.entries) {
        bool found = false;
        for (const auto& e : det.entries)
            if (e.sigma == a.sigma && std::hypot(e.x - a.x, e.y - a.y) <= 2 * g.h) found = true;
        CHECK(found);
    }
}

TEST_CASE("vortex factor energy tracks the smooth field plus the core cost") {
    const double eps = 0.02, L = std::abs(std::log(eps));
    Domain d = small_disk(1, eps / 3);
    const LayerGrid& g = d.layer;
    VortexMeasure m;
    m.eps = eps;
    m.entries = {{0, 0.0, 0.0, 1}};
    VortexFactor f = build_vortex_factor(g, m, 0, q_profile(eps));
    // The smooth density of the same mass is w = 1 / |ln eps| on the unit disk,
    // whose field -2 rot Lap^{-1} w has 1/2 ||v||^2 = pi / (4 |ln eps|^2).
    double expect = M_PI / (4 * L * L) + M_PI / L;
    CHECK(gl2d_energy(g, f.u, eps) / (L * L) == doctest::Approx(expect).epsilon(0.2));
}

TEST_CASE("gradient factor is unimodular with energy 1/2 ||grad g||^2") {
    const double eps = 0.05, L = std::abs(std::log(eps));
    Domain d = small_disk(1, 0.005);
    const LayerGrid& g = d.layer;
    Vec c(g.n_nodes(), 0.3), pot(g.n_nodes(), 0.0);
    std::vector<cplx> uc = build_gradient_factor(g, c, eps);
    for (std::size_t p = 0; p < g.n_nodes(); ++p)
        if (g.mask[p]) CHECK(std::abs(uc[p] - std::polar(1.0, 0.3 * L)) < 1e-15);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) pot[g.node(i, j)] = 0.5 * (g.x(i) * g.x(i) - g.y(j) * g.y(j));
    std::vector<cplx> u = build_gradient_factor(g, pot, eps);
    for (std::size_t p = 0; p < g.n_nodes(); ++p)
        if (g.mask[p]) CHECK(std::abs(u[p]) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(gl2d_energy(g, u, eps) / (L * L) == doctest::Approx(M_PI / 4).epsilon(0.01));
    EdgeCurrent j = current(g, u);
    double worst = 0.0;
    for (int jj = 0; jj < g.ny; ++jj)
        for (int i = 0; i + 1 < g.nx; ++i)
            if (g.xedge[g.ex(i, jj)]) worst = std::max(worst, std::abs(j.j1[g.ex(i, jj)] / L - (g.x(i) + 0.5 * g.h)));
    CHECK(worst < 1e-4);
}

TEST_CASE("recovery of v = 0 is the Meissner state") {
    Domain d = small_disk(3, 0.05);
    ModelParams p;
    p.eps = 0.05;
    const double h0 = 0.4;
    p.h_ex = h0 * std::abs(std::log(p.eps));
    PlanarField v = [](double, double, double) { return std::pair<double, double>{0.0, 0.0}; };
    RecoveryState st = build_recovery(d, v, p, applied_potential(d, h0), h0);
    REQUIRE(st.u.u.size() == 4);
    for (const auto& layer : st.u.u)
        for (std::size_t k = 0; k < layer.size(); ++k)
            if (d.layer.mask[k]) CHECK(std::abs(layer[k] - cplx(1.0, 0.0)) < 1e-12);
    MagneticPotential a = applied_potential(d, p.h_ex);
    for (std::size_t e = 0; e < a.a1.size(); ++e) CHECK(st.A.a1[e] == doctest::Approx(a.a1[e]).epsilon(1e-12));
    CHECK(st.placement.measure.entries.empty());
}

TEST_CASE("recovery of a gradient field places no vortices and has energy 1/2 ||v||^2") {
    Domain d = small_disk(2, 0.01);
    PlanarField v = [](double x, double y, double) { return std::pair<double, double>{x, -y}; };
    for (double eps : {0.1, 0.03, 0.01}) {
        ModelParams p;
        p.eps = eps;
        const double L = std::abs(std::log(eps));
        RecoveryState st = build_recovery(d, v, p, applied_potential(d, 0.0), 0.0);
        CHECK(st.placement.measure.entries.empty());
        double E = 0.0;
        for (int n = 0; n < d.N(); ++n) E += d.s() * gl2d_energy(d.layer, st.u.u[n], eps);
        CHECK(E / (L * L) == doctest::Approx(0.5 * d.spec.L * M_PI / 2).epsilon(0.01));
    }
}

TEST_CASE("recovery modulus is the product of core profiles") {
    const double eps = 0.01;
    Domain d = small_disk(2, eps / 2);
    ModelParams p;
    p.eps = eps;
    const double kappa = 6.0;
    PlanarField v = [kappa](double x, double y, double) {
        return std::pair<double, double>{-0.5 * kappa * y, 0.5 * kappa * x};
    };
    RecoveryState st = build_recovery(d, v, p, applied_potential(d, 0.0), 0.0);
    const auto& pts = st.placement.measure.entries;
    REQUIRE(!pts.empty());
    CoreProfile q = q_profile(eps);
    const LayerGrid& g = d.layer;
    double max_mod = 0.0, worst_rho = 0.0, worst_far = 0.0;
    for (int n = 0; n < d.N(); ++n) {
        CHECK(detect_vortices(g, st.u.u[n]).entries.size() == std::size_t(st.placement.measure.count(n)));
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                std::size_t k = g.node(i, j);
                if (!g.mask[k]) continue;
                double rho = 1.0, dmin = 1e9;
                for (const auto& e : pts)
                    if (e.n == n) {
                        double r = std::hypot(g.x(i) - e.x, g.y(j) - e.y);
                        rho *= q(r);
                        dmin = std::min(dmin, r);
                    }
                double mod = std::abs(st.u.u[n][k]);
                max_mod = std::max(max_mod, mod);
                worst_rho = std::max(worst_rho, std::abs(mod - rho));
                if (dmin >= eps) worst_far = std::max(worst_far, std::abs(mod - 1.0));
            }
    }
    CHECK(max_mod <= 1.0 + 1e-12);
    CHECK(worst_rho <= 1e-12);
    CHECK(worst_far < 1e-10);
    for (std::size_t k = 0; k < g.n_nodes(); ++k)
        if (g.mask[k]) CHECK(st.u.u[d.N()][k] == cplx(1.0, 0.0));
}

TEST_CASE("Newtonian potential: zero source, far field and self cell") {
    DomainSpec s;
    s.radius = 1.0;
    s.L = 1.0;
    CellGrid3 c = cylinder_cells(s, 0.1);
    CHECK(c.nz == 10);
    Vec zero(c.size(), 0.0);
    Vec z0 = newtonian_trace(c, zero, {{0.0, 0.0, 0.5}, {3.0, 0.0, 0.5}});
    CHECK(z0[0] == 0.0);
    CHECK(z0[1] == 0.0);

    Vec g(c.size(), 0.0);
    const std::size_t cell = c.cell(c.nx / 2, c.ny / 2, 5);
    g[cell] = 1.0 / std::pow(c.h, 3);
    auto ctr = c.center(c.nx / 2, c.ny / 2, 5);
    for (double dist : {2.0, 5.0}) {
        Vec v = newtonian_trace(c, g, {{ctr[0] + dist, ctr[1], ctr[2]}});
        CHECK(v[0] == doctest::Approx(1.0 / (4 * M_PI * dist)).epsilon(0.01));
    }
    Vec self = newtonian_trace(c, g, {ctr});
    CHECK(self[0] == doctest::Approx(K_CUBE / (4 * M_PI * c.h)).epsilon(1e-14));
    CHECK_THROWS_AS(newtonian_trace(c, g, {{ctr[0] + 0.01, ctr[1], ctr[2]}}), std::invalid_argument);
    CHECK_THROWS_AS(cylinder_cells(s, 0.3), std::invalid_argument);
}

TEST_CASE("layer deviation vanishes for z-independent potentials only") {
    DomainSpec s;
    s.radius = 1.0;
    s.L = 1.0;
    CellGrid3 c = cylinder_cells(s, 0.125);
    Vec g(c.size(), 0.0);
    for (int k = 0; k < c.nz; ++k)
        for (int j = 0; j < c.ny; ++j)
            for (int i = 0; i < c.nx; ++i) {
                auto x = c.center(i, j, k);
                g[c.cell(i, j, k)] = std::cos(x[0]) * (1.0 + x[2]);
            }
    std::vector<double> dev = layer_deviation(c, g, {2, 4, 8}, 2);
    REQUIRE(dev.size() == 3);
    CHECK(dev[0] > dev[1]);
    CHECK(dev[1] > dev[2]);
    CHECK(dev[2] > 0.0);
    CHECK_THROWS(layer_deviation(c, g, {3}, 1));
}

}
