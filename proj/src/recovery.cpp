#include "ld/recovery.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace ld {

namespace {

using boost::math::quadrature::gauss;
using boost::math::quadrature::gauss_kronrod;

double bump(double r) { return r < 1.0 ? std::exp(-1.0 / (1.0 - r * r)) : 0.0; }

double bump_normalizer() {
    static const double c = [] {
        double I = gauss_kronrod<double, 61>::integrate([](double t) { return bump(t) * t; }, 0.0, 1.0, 12, 1e-15);
        return 1.0 / (2.0 * M_PI * I);
    }();
    return c;
}

} // namespace

double mollifier(double r) { return bump_normalizer() * bump(r); }

CoreProfile::CoreProfile(double eps, int resolution) : eps_(eps) {
    if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
    if (resolution < 16) throw std::invalid_argument("profile resolution must be at least 16");
    const double C = bump_normalizer();
    m_.assign(resolution + 1, 0.0);
    dm_.assign(resolution + 1, 0.0);
    const double dr = 1.0 / resolution;
    auto integrand = [C](double t) { return 2.0 * M_PI * C * bump(t) * t; };
    long double acc = 0.0L;
    for (int k = 1; k <= resolution; ++k) {
        acc += gauss<double, 15>::integrate(integrand, (k - 1) * dr, k * dr);
        m_[k] = double(acc);
        dm_[k] = integrand(k * dr);
    }
    // Removes the quadrature residue so that q = 1 holds exactly at r = eps.
    const double total = m_.back();
    for (double& x : m_) x /= total;
    for (double& x : dm_) x /= total;
    m_.back() = 1.0;
}

double CoreProfile::operator()(double r) const {
    double rho = std::abs(r) / eps_;
    if (rho >= 1.0) return 1.0;
    const int n = int(m_.size()) - 1;
    const double dr = 1.0 / n;
    int k = std::min(n - 1, int(rho / dr));
    double t = (rho - k * dr) / dr;
    double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
    double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
    double q = h00 * m_[k] + h10 * dr * dm_[k] + h01 * m_[k + 1] + h11 * dr * dm_[k + 1];
    return std::clamp(q, 0.0, 1.0);
}

std::vector<double> CoreProfile::sample_r(int count) const {
    std::vector<double> r(count);
    for (int i = 0; i < count; ++i) r[i] = 3.0 * eps_ * i / std::max(1, count - 1);
    return r;
}

double CoreProfile::core_integral() const {
    auto f = [this](double r) {
        if (r <= 0.0) return 0.0;
        double q = (*this)(r);
        return 2.0 * M_PI * q * q / r;
    };
    return gauss_kronrod<double, 61>::integrate(f, 0.0, eps_, 15, 1e-13);
}

CoreProfile q_profile(double eps, int resolution) { return CoreProfile(eps, resolution); }

double placement_c0(double w_inf) { return std::min(1.0, 1.0 / (4.0 * std::sqrt(w_inf + 1.0))); }

namespace {

template <class F>
double square_integral(F&& f, double x0, double y0, double side) {
    return gauss<double, 10>::integrate(
        [&](double x) {
            return gauss<double, 10>::integrate([&](double y) { return f(x, y); }, y0, y0 + side);
        },
        x0, x0 + side);
}

} // namespace

Placement place_vortices(const Domain& d, const ScalarField& w, double eps) {
    if (!(eps > 0 && eps < 1)) throw std::invalid_argument("eps must lie in (0, 1)");
    const DomainSpec& sp = d.spec;
    const LayerGrid& g = d.layer;
    const double L = std::abs(std::log(eps));
    Placement pl;
    pl.measure.eps = eps;
    pl.measure.s = d.s();
    pl.delta = std::pow(L, -0.25);
    if (pl.delta >= sp.diameter()) throw std::invalid_argument("eps too large: delta exceeds diam(Omega)");

    for (int n = 0; n < d.N(); ++n)
        for (std::size_t q = 0; q < g.n_nodes(); ++q)
            if (g.mask[q]) {
                double x = g.x0 + double(q % g.nx) * g.h, y = g.y0 + double(q / g.nx) * g.h;
                pl.w_inf = std::max(pl.w_inf, std::abs(w(x, y, n * d.s())));
            }
    pl.c0 = placement_c0(pl.w_inf);
    pl.required_separation = pl.c0 / std::sqrt(L);

    const double delta = pl.delta;
    const int k0 = int(std::floor(-sp.half_x() / delta)) - 1, k1 = int(std::ceil(sp.half_x() / delta)) + 1;
    const int l0 = int(std::floor(-sp.half_y() / delta)) - 1, l1 = int(std::ceil(sp.half_y() / delta)) + 1;
    const double snap = 1.0 + 8.0 * std::numeric_limits<double>::epsilon();
    pl.min_separation = std::numeric_limits<double>::infinity();
    pl.min_boundary_distance = std::numeric_limits<double>::infinity();

    for (int n = 0; n < d.N(); ++n) {
        const double z = n * d.s();
        auto wn = [&](double x, double y) { return w(x, y, z); };
        auto absw = [&](double x, double y) { return sp.inside(x, y) ? std::abs(w(x, y, z)) : 0.0; };
        long double mass = 0.0L;
        const std::size_t first = pl.measure.entries.size();
        for (int l = l0; l < l1; ++l)
            for (int k = k0; k < k1; ++k) {
                const double xa = k * delta, ya = l * delta;
                if (!sp.square_inside(xa, ya, xa + delta, ya + delta)) {
                    // Boundary squares only contribute to the L1 norm, by a midpoint rule.
                    const int sub = 64;
                    const double hs = delta / sub;
                    long double part = 0.0L;
                    for (int b = 0; b < sub; ++b)
                        for (int a = 0; a < sub; ++a) part += absw(xa + (a + 0.5) * hs, ya + (b + 0.5) * hs);
                    mass += part * hs * hs;
                    continue;
                }
                mass += square_integral(absw, xa, ya, delta);
                const double I = square_integral(wn, xa, ya, delta);
                const long M = long(std::floor(L / M_PI * std::abs(I) * snap));
                if (M == 0) continue;
                const int sigma = I > 0 ? 1 : -1;
                const long m = long(std::ceil(std::sqrt(double(M))));
                const double step = delta / double(m);
                for (long c = 0; c < M; ++c) {
                    long a = c % m, b = c / m;
                    pl.measure.entries.push_back({n, xa + (a + 0.5) * step, ya + (b + 0.5) * step, sigma});
                }
            }
        pl.layer_l1.push_back(double(mass));

        for (std::size_t a = first; a < pl.measure.entries.size(); ++a) {
            const VortexEntry& ea = pl.measure.entries[a];
            pl.min_boundary_distance = std::min(pl.min_boundary_distance, sp.boundary_distance(ea.x, ea.y));
            for (std::size_t b = a + 1; b < pl.measure.entries.size(); ++b) {
                const VortexEntry& eb = pl.measure.entries[b];
                pl.min_separation = std::min(pl.min_separation, std::hypot(ea.x - eb.x, ea.y - eb.y));
            }
        }
    }
    if (pl.min_separation < pl.required_separation || pl.min_boundary_distance < pl.required_separation)
        throw std::runtime_error("vortex count exceeds the separation capacity of a square");
    return pl;
}

VortexFactor build_vortex_factor(const LayerGrid& g, const VortexMeasure& m, int n, const CoreProfile& q) {
    VortexFactor out;
    const double L = std::abs(std::log(m.eps));
    Vec rhs(g.n_plaq(), 0.0);
    std::vector<VortexEntry> pts;
    for (const VortexEntry& e : m.entries) {
        if (e.n != n) continue;
        int i = int(std::floor((e.x - g.x0) / g.h)), j = int(std::floor((e.y - g.y0) / g.h));
        if (i < 0 || j < 0 || i + 1 >= g.nx || j + 1 >= g.ny || !g.plaq[g.pl(i, j)])
            throw std::invalid_argument("vortex outside the plaquette mask");
        rhs[g.pl(i, j)] += 2.0 * M_PI * e.sigma / (g.h * g.h);
        pts.push_back(e);
    }
    if (pts.empty()) {
        out.f.assign(g.n_plaq(), 0.0);
    } else {
        PoissonResult f = dirichlet_poisson_plaquettes(g, rhs, 1e-13);
        out.f = std::move(f.x);
    }
    auto [r1, r2] = rot_of_plaquette_field(g, out.f);

    // Phase by integration along a breadth-first spanning tree.
    Vec phi(g.n_nodes(), 0.0);
    std::vector<uint8_t> seen(g.n_nodes(), 0);
    for (std::size_t root = 0; root < g.n_nodes(); ++root) {
        if (!g.mask[root] || seen[root]) continue;
        std::deque<std::size_t> queue{root};
        seen[root] = 1;
        while (!queue.empty()) {
            std::size_t p = queue.front();
            queue.pop_front();
            int i = int(p % g.nx), j = int(p / g.nx);
            auto visit = [&](int ii, int jj, double dphi) {
                std::size_t q2 = g.node(ii, jj);
                if (seen[q2]) return;
                seen[q2] = 1;
                phi[q2] = phi[p] + dphi;
                queue.push_back(q2);
            };
            if (i + 1 < g.nx && g.xedge[g.ex(i, j)]) visit(i + 1, j, g.h * r1[g.ex(i, j)]);
            if (i > 0 && g.xedge[g.ex(i - 1, j)]) visit(i - 1, j, -g.h * r1[g.ex(i - 1, j)]);
            if (j + 1 < g.ny && g.yedge[g.ey(i, j)]) visit(i, j + 1, g.h * r2[g.ey(i, j)]);
            if (j > 0 && g.yedge[g.ey(i, j - 1)]) visit(i, j - 1, -g.h * r2[g.ey(i, j - 1)]);
        }
    }

    Vec rho(g.n_nodes(), 1.0);
    const double eps = q.eps();
    for (const VortexEntry& e : pts) {
        int i0 = std::max(0, int(std::floor((e.x - eps - g.x0) / g.h)));
        int i1 = std::min(g.nx - 1, int(std::ceil((e.x + eps - g.x0) / g.h)));
        int j0 = std::max(0, int(std::floor((e.y - eps - g.y0) / g.h)));
        int j1 = std::min(g.ny - 1, int(std::ceil((e.y + eps - g.y0) / g.h)));
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) rho[g.node(i, j)] *= q(std::hypot(g.x(i) - e.x, g.y(j) - e.y));
    }
    out.u.assign(g.n_nodes(), cplx(0.0, 0.0));
    for (std::size_t p = 0; p < g.n_nodes(); ++p)
        if (g.mask[p]) out.u[p] = std::polar(rho[p], phi[p]);

    VortexDetection det = detect_vortices(g, out.u, n, 0.0);
    for (const VortexEntry& e : det.entries) {
        bool near = std::any_of(pts.begin(), pts.end(), [&](const VortexEntry& a) {
            return std::hypot(a.x - e.x, a.y - e.y) <= 2.0 * g.h;
        });
        if (!near) throw std::runtime_error("phase defect outside every vortex core");
    }

    out.v1 = std::move(r1);
    out.v2 = std::move(r2);
    for (double& x : out.v1) x /= L;
    for (double& x : out.v2) x /= L;
    return out;
}

std::vector<cplx> build_gradient_factor(const LayerGrid& g, const Vec& potential, double eps) {
    const double L = std::abs(std::log(eps));
    std::vector<cplx> u(g.n_nodes(), cplx(0.0, 0.0));
    for (std::size_t p = 0; p < g.n_nodes(); ++p)
        if (g.mask[p]) u[p] = std::polar(1.0, L * potential[p]);
    return u;
}

MagneticPotential recovery_potential(const Domain& d, const MagneticPotential& A0, double h0,
                                     const ModelParams& p) {
    const double L = std::abs(std::log(p.eps));
    const double c = p.h_ex - h0 * L;
    MagneticPotential a = applied_potential(d, 1.0), A = A0;
    for (std::size_t e = 0; e < A.a1.size(); ++e) A.a1[e] = L * A0.a1[e] + c * a.a1[e];
    for (std::size_t e = 0; e < A.a2.size(); ++e) A.a2[e] = L * A0.a2[e] + c * a.a2[e];
    for (std::size_t e = 0; e < A.a3.size(); ++e) A.a3[e] = L * A0.a3[e] + c * a.a3[e];
    A.h_ex = p.h_ex;
    return A;
}

RecoveryState build_recovery(const Domain& d, const PlanarField& v, const ModelParams& p,
                             const MagneticPotential& A0, double h0, int profile_resolution) {
    validate(p);
    const LayerGrid& g = d.layer;
    const double dx = 1e-5;
    ScalarField w = [&v, dx](double x, double y, double z) {
        double dv2 = v(x + dx, y, z).second - v(x - dx, y, z).second;
        double dv1 = v(x, y + dx, z).first - v(x, y - dx, z).first;
        return 0.25 * (dv2 - dv1) / dx;
    };
    RecoveryState st;
    st.placement = place_vortices(d, w, p.eps);
    CoreProfile q = q_profile(p.eps, profile_resolution);
    st.u.u.resize(d.N() + 1);
    for (int n = 0; n < d.N(); ++n) {
        auto [s1, s2] = sample_edge_field(g, v, n * d.s());
        HodgeResult H = hodge_decompose(g, s1, s2);
        VortexFactor vf = build_vortex_factor(g, st.placement.measure, n, q);
        std::vector<cplx> ug = build_gradient_factor(g, H.g, p.eps);
        std::vector<cplx> un(g.n_nodes(), cplx(0.0, 0.0));
        for (std::size_t k = 0; k < un.size(); ++k)
            if (g.mask[k]) un[k] = vf.u[k] * ug[k];
        st.u.u[n] = std::move(un);
        st.vortex.push_back(std::move(vf));
        st.stream.push_back(std::move(H.f));
        st.potential.push_back(std::move(H.g));
    }
    st.u.u[d.N()] = constant_order_parameter(d, 1.0).u[0];
    st.A = recovery_potential(d, A0, h0, p);
    return st;
}

CellGrid3 cylinder_cells(const DomainSpec& spec, double h) {
    if (!(h > 0)) throw std::invalid_argument("cell size must be positive");
    CellGrid3 c;
    c.h = h;
    c.nz = int(std::lround(spec.L / h));
    if (c.nz < 1 || std::abs(c.nz * h - spec.L) > 1e-9 * spec.L)
        throw std::invalid_argument("L must be a multiple of the cell size");
    c.nx = 2 * int(std::ceil(spec.half_x() / h));
    c.ny = 2 * int(std::ceil(spec.half_y() / h));
    c.x0 = -0.5 * c.nx * h;
    c.y0 = -0.5 * c.ny * h;
    c.z0 = 0.0;
    c.inside.assign(c.size(), 0);
    for (int k = 0; k < c.nz; ++k)
        for (int j = 0; j < c.ny; ++j)
            for (int i = 0; i < c.nx; ++i) {
                auto x = c.center(i, j, k);
                c.inside[c.cell(i, j, k)] = spec.inside(x[0], x[1]);
            }
    return c;
}

Vec newtonian_trace(const CellGrid3& grid, const Vec& g, const std::vector<std::array<double, 3>>& targets) {
    if (g.size() != grid.size()) throw std::invalid_argument("source size does not match the cell grid");
    const double h = grid.h;
    struct Src {
        double x, y, z, q;
    };
    std::vector<Src> src;
    for (int k = 0; k < grid.nz; ++k)
        for (int j = 0; j < grid.ny; ++j)
            for (int i = 0; i < grid.nx; ++i) {
                std::size_t c = grid.cell(i, j, k);
                if (!grid.inside[c] || g[c] == 0.0) continue;
                auto x = grid.center(i, j, k);
                src.push_back({x[0], x[1], x[2], g[c] * h * h * h / (4.0 * M_PI)});
            }
    Vec out(targets.size(), 0.0);
    const double self2 = std::pow(1e-9 * h, 2), half = 0.5 * h * (1.0 - 1e-12);
    int bad = 0;
#pragma omp parallel for schedule(dynamic, 64) reduction(+ : bad)
    for (long t = 0; t < long(targets.size()); ++t) {
        const auto& x = targets[t];
        double acc = 0.0;
        for (const Src& s : src) {
            double dx = x[0] - s.x, dy = x[1] - s.y, dz = x[2] - s.z;
            double r2 = dx * dx + dy * dy + dz * dz;
            if (r2 < self2) {
                acc += s.q * K_CUBE / h;
            } else if (std::abs(dx) < half && std::abs(dy) < half && std::abs(dz) < half) {
                ++bad;
            } else {
                acc += s.q / std::sqrt(r2);
            }
        }
        out[t] = acc;
    }
    if (bad) throw std::invalid_argument("target strictly inside a source cell away from its center");
    return out;
}

std::vector<double> layer_deviation(const CellGrid3& grid, const Vec& g, const std::vector<int>& Ns,
                                    int stride) {
    if (stride < 1) throw std::invalid_argument("stride must be positive");
    for (int N : Ns)
        if (N < 1 || grid.nz % N != 0) throw std::invalid_argument("every N must divide the number of z-cells");
    const double h = grid.h;
    std::vector<std::array<int, 2>> cols;
    for (int j = 0; j < grid.ny; j += stride)
        for (int i = 0; i < grid.nx; i += stride)
            if (grid.inside[grid.cell(i, j, 0)]) cols.push_back({i, j});
    // Per column: values at the nz cell centers, then at the nz + 1 faces.
    const int per = 2 * grid.nz + 1;
    std::vector<std::array<double, 3>> targets;
    targets.reserve(cols.size() * per);
    for (auto [i, j] : cols) {
        auto c = grid.center(i, j, 0);
        for (int k = 0; k < grid.nz; ++k) targets.push_back({c[0], c[1], grid.z0 + (k + 0.5) * h});
        for (int k = 0; k <= grid.nz; ++k) targets.push_back({c[0], c[1], grid.z0 + k * h});
    }
    Vec A = newtonian_trace(grid, g, targets);
    const double area = double(stride) * stride * h * h;
    std::vector<double> out;
    for (int N : Ns) {
        const int c = grid.nz / N;
        long double acc = 0.0L;
        for (std::size_t col = 0; col < cols.size(); ++col) {
            const double* a = &A[col * per];
            for (int n = 0; n < N; ++n) {
                const double base = a[grid.nz + n * c];
                for (int k = n * c; k < (n + 1) * c; ++k) acc += std::pow((long double)(a[k] - base), 2);
            }
        }
        out.push_back(double(acc) * area * h);
    }
    return out;
}

} // namespace ld
