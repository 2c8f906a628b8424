#include "ld/fields.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ld {

OrderParameterStack constant_order_parameter(const Domain& d, cplx value) {
    OrderParameterStack s;
    s.u.assign(d.N() + 1, std::vector<cplx>(d.layer.n_nodes(), cplx(0.0, 0.0)));
    for (auto& layer : s.u)
        for (std::size_t p = 0; p < layer.size(); ++p)
            if (d.layer.mask[p]) layer[p] = value;
    return s;
}

MagneticPotential zero_potential(const Domain& d) {
    MagneticPotential A;
    A.a1.assign(d.box.n_ex(), 0.0);
    A.a2.assign(d.box.n_ey(), 0.0);
    A.a3.assign(d.box.n_ez(), 0.0);
    return A;
}

MagneticPotential applied_potential(const Domain& d, double h_ex) {
    const BoxGrid& b = d.box;
    MagneticPotential A = zero_potential(d);
    A.h_ex = h_ex;
    for (int k = 0; k < b.nz; ++k)
        for (int j = 0; j < b.ny; ++j) {
            for (int i = 0; i + 1 < b.nx; ++i) A.a1[b.ex(i, j, k)] = -0.5 * h_ex * b.y[j];
        }
    for (int k = 0; k < b.nz; ++k)
        for (int j = 0; j + 1 < b.ny; ++j)
            for (int i = 0; i < b.nx; ++i) A.a2[b.ey(i, j, k)] = 0.5 * h_ex * b.x[i];
    return A;
}

bool boundary_ex(const BoxGrid& b, int, int j, int k) {
    return j == 0 || j == b.ny - 1 || k == 0 || k == b.nz - 1;
}
bool boundary_ey(const BoxGrid& b, int i, int, int k) {
    return i == 0 || i == b.nx - 1 || k == 0 || k == b.nz - 1;
}
bool boundary_ez(const BoxGrid& b, int i, int j, int) {
    return i == 0 || i == b.nx - 1 || j == 0 || j == b.ny - 1;
}

namespace {

// Visits only the clamped edges: f1(e, j), f2(e, i), f3(e).
template <class F1, class F2, class F3>
void for_each_clamped(const BoxGrid& b, F1&& f1, F2&& f2, F3&& f3) {
    for (int k = 0; k < b.nz; ++k) {
        const bool face = k == 0 || k == b.nz - 1;
        for (int j = 0; j < b.ny; ++j) {
            if (face || j == 0 || j == b.ny - 1) {
                for (int i = 0; i + 1 < b.nx; ++i) f1(b.ex(i, j, k), j);
            }
        }
        for (int j = 0; j + 1 < b.ny; ++j) {
            if (face) {
                for (int i = 0; i < b.nx; ++i) f2(b.ey(i, j, k), i);
            } else {
                f2(b.ey(0, j, k), 0);
                f2(b.ey(b.nx - 1, j, k), b.nx - 1);
            }
        }
        if (k + 1 < b.nz) {
            for (int j = 0; j < b.ny; ++j) {
                if (j == 0 || j == b.ny - 1) {
                    for (int i = 0; i < b.nx; ++i) f3(b.ez(i, j, k));
                } else {
                    f3(b.ez(0, j, k));
                    f3(b.ez(b.nx - 1, j, k));
                }
            }
        }
    }
}

} // namespace

void clamp_boundary(const Domain& d, MagneticPotential& A) {
    const BoxGrid& b = d.box;
    for_each_clamped(
        b, [&](std::size_t e, int j) { A.a1[e] = -0.5 * A.h_ex * b.y[j]; },
        [&](std::size_t e, int i) { A.a2[e] = 0.5 * A.h_ex * b.x[i]; }, [&](std::size_t e) { A.a3[e] = 0.0; });
}

void zero_clamped(const Domain& d, MagneticPotential& A) {
    for_each_clamped(
        d.box, [&](std::size_t e, int) { A.a1[e] = 0.0; }, [&](std::size_t e, int) { A.a2[e] = 0.0; },
        [&](std::size_t e) { A.a3[e] = 0.0; });
}

MagneticPotential free_edge_mask(const Domain& d) {
    const BoxGrid& b = d.box;
    MagneticPotential m = zero_potential(d);
    for (int k = 0; k < b.nz; ++k)
        for (int j = 0; j < b.ny; ++j)
            for (int i = 0; i + 1 < b.nx; ++i)
                m.a1[b.ex(i, j, k)] = boundary_ex(b, i, j, k) ? 0.0 : 1.0;
    for (int k = 0; k < b.nz; ++k)
        for (int j = 0; j + 1 < b.ny; ++j)
            for (int i = 0; i < b.nx; ++i)
                m.a2[b.ey(i, j, k)] = boundary_ey(b, i, j, k) ? 0.0 : 1.0;
    for (int k = 0; k + 1 < b.nz; ++k)
        for (int j = 0; j < b.ny; ++j)
            for (int i = 0; i < b.nx; ++i)
                m.a3[b.ez(i, j, k)] = boundary_ez(b, i, j, k) ? 0.0 : 1.0;
    return m;
}

std::vector<double> sample_box_nodes(const Domain& d, const ScalarField& g) {
    const BoxGrid& b = d.box;
    Vec out(b.n_nodes());
    for (int k = 0; k < b.nz; ++k)
        for (int j = 0; j < b.ny; ++j)
            for (int i = 0; i < b.nx; ++i) out[b.node(i, j, k)] = g(b.x[i], b.y[j], b.z[k]);
    return out;
}

GaugeState apply_gauge(const Domain& d, const OrderParameterStack& u, const MagneticPotential& A,
                       const Vec& g) {
    const BoxGrid& b = d.box;
    const LayerGrid& lg = d.layer;
    if (g.size() != b.n_nodes()) throw std::invalid_argument("gauge function size mismatch");
    GaugeState out{u, A};
    for (int k = 0; k < b.nz; ++k)
        for (int j = 0; j < b.ny; ++j)
            for (int i = 0; i + 1 < b.nx; ++i)
                out.A.a1[b.ex(i, j, k)] += (g[b.node(i + 1, j, k)] - g[b.node(i, j, k)]) / b.dx[i];
    for (int k = 0; k < b.nz; ++k)
        for (int j = 0; j + 1 < b.ny; ++j)
            for (int i = 0; i < b.nx; ++i)
                out.A.a2[b.ey(i, j, k)] += (g[b.node(i, j + 1, k)] - g[b.node(i, j, k)]) / b.dy[j];
    for (int k = 0; k + 1 < b.nz; ++k)
        for (int j = 0; j < b.ny; ++j)
            for (int i = 0; i < b.nx; ++i)
                out.A.a3[b.ez(i, j, k)] += (g[b.node(i, j, k + 1)] - g[b.node(i, j, k)]) / b.dz[k];
    for (int n = 0; n < int(out.u.u.size()); ++n) {
        int k = b.layer_k[n];
        for (int j = 0; j < lg.ny; ++j)
            for (int i = 0; i < lg.nx; ++i) {
                std::size_t p = lg.node(i, j);
                out.u.u[n][p] *= std::polar(1.0, g[b.node(b.ix0 + i, b.iy0 + j, k)]);
            }
    }
    return out;
}

Vec divergence(const Domain& d, const MagneticPotential& A) {
    const BoxGrid& b = d.box;
    Vec div(b.n_nodes(), 0.0);
    for (int k = 1; k + 1 < b.nz; ++k)
        for (int j = 1; j + 1 < b.ny; ++j)
            for (int i = 1; i + 1 < b.nx; ++i) {
                double fx = (A.a1[b.ex(i, j, k)] - A.a1[b.ex(i - 1, j, k)]) * b.dyd[j] * b.dzd[k];
                double fy = (A.a2[b.ey(i, j, k)] - A.a2[b.ey(i, j - 1, k)]) * b.dxd[i] * b.dzd[k];
                double fz = (A.a3[b.ez(i, j, k)] - A.a3[b.ez(i, j, k - 1)]) * b.dxd[i] * b.dyd[j];
                div[b.node(i, j, k)] = (fx + fy + fz) / (b.dxd[i] * b.dyd[j] * b.dzd[k]);
            }
    return div;
}

FaceField curl(const Domain& d, const MagneticPotential& A) {
    const BoxGrid& b = d.box;
    FaceField B;
    B.fz.assign(std::size_t(b.nx - 1) * (b.ny - 1) * b.nz, 0.0);
    B.fx.assign(std::size_t(b.nx) * (b.ny - 1) * (b.nz - 1), 0.0);
    B.fy.assign(std::size_t(b.nx - 1) * b.ny * (b.nz - 1), 0.0);
    for (int k = 0; k < b.nz; ++k)
        for (int j = 0; j + 1 < b.ny; ++j)
            for (int i = 0; i + 1 < b.nx; ++i) {
                double c = (A.a1[b.ex(i, j, k)] - A.a1[b.ex(i, j + 1, k)]) * b.dx[i] +
                           (A.a2[b.ey(i + 1, j, k)] - A.a2[b.ey(i, j, k)]) * b.dy[j];
                B.fz[i + std::size_t(b.nx - 1) * (j + std::size_t(b.ny - 1) * k)] =
                    c / (b.dx[i] * b.dy[j]);
            }
    for (int k = 0; k + 1 < b.nz; ++k)
        for (int j = 0; j + 1 < b.ny; ++j)
            for (int i = 0; i < b.nx; ++i) {
                double c = (A.a2[b.ey(i, j, k)] - A.a2[b.ey(i, j, k + 1)]) * b.dy[j] +
                           (A.a3[b.ez(i, j + 1, k)] - A.a3[b.ez(i, j, k)]) * b.dz[k];
                B.fx[i + std::size_t(b.nx) * (j + std::size_t(b.ny - 1) * k)] =
                    c / (b.dy[j] * b.dz[k]);
            }
    for (int k = 0; k + 1 < b.nz; ++k)
        for (int j = 0; j < b.ny; ++j)
            for (int i = 0; i + 1 < b.nx; ++i) {
                double c = (A.a3[b.ez(i, j, k)] - A.a3[b.ez(i + 1, j, k)]) * b.dz[k] +
                           (A.a1[b.ex(i, j, k + 1)] - A.a1[b.ex(i, j, k)]) * b.dx[i];
                B.fy[i + std::size_t(b.nx - 1) * (j + std::size_t(b.ny) * k)] =
                    c / (b.dz[k] * b.dx[i]);
            }
    return B;
}

Vec divergence_of_faces(const Domain& d, const FaceField& B) {
    const BoxGrid& b = d.box;
    Vec div(std::size_t(b.nx - 1) * (b.ny - 1) * (b.nz - 1), 0.0);
    auto fz = [&](int i, int j, int k) {
        return B.fz[i + std::size_t(b.nx - 1) * (j + std::size_t(b.ny - 1) * k)];
    };
    auto fx = [&](int i, int j, int k) {
        return B.fx[i + std::size_t(b.nx) * (j + std::size_t(b.ny - 1) * k)];
    };
    auto fy = [&](int i, int j, int k) {
        return B.fy[i + std::size_t(b.nx - 1) * (j + std::size_t(b.ny) * k)];
    };
    for (int k = 0; k + 1 < b.nz; ++k)
        for (int j = 0; j + 1 < b.ny; ++j)
            for (int i = 0; i + 1 < b.nx; ++i) {
                double flux = (fx(i + 1, j, k) - fx(i, j, k)) * b.dy[j] * b.dz[k] +
                              (fy(i, j + 1, k) - fy(i, j, k)) * b.dz[k] * b.dx[i] +
                              (fz(i, j, k + 1) - fz(i, j, k)) * b.dx[i] * b.dy[j];
                div[i + std::size_t(b.nx - 1) * (j + std::size_t(b.ny - 1) * k)] =
                    flux / (b.dx[i] * b.dy[j] * b.dz[k]);
            }
    return div;
}

namespace {

// G^T w G on box nodes (weighted graph Laplacian).
void box_laplacian(const BoxGrid& b, const Vec& g, Vec& out) {
    out.assign(b.n_nodes(), 0.0);
#pragma omp parallel for schedule(static)
    for (int k = 0; k < b.nz; ++k)
        for (int j = 0; j < b.ny; ++j)
            for (int i = 0; i < b.nx; ++i) {
                std::size_t p = b.node(i, j, k);
                double acc = 0.0;
                if (i + 1 < b.nx) acc += (g[p] - g[b.node(i + 1, j, k)]) * b.dyd[j] * b.dzd[k] / b.dx[i];
                if (i > 0) acc += (g[p] - g[b.node(i - 1, j, k)]) * b.dyd[j] * b.dzd[k] / b.dx[i - 1];
                if (j + 1 < b.ny) acc += (g[p] - g[b.node(i, j + 1, k)]) * b.dxd[i] * b.dzd[k] / b.dy[j];
                if (j > 0) acc += (g[p] - g[b.node(i, j - 1, k)]) * b.dxd[i] * b.dzd[k] / b.dy[j - 1];
                if (k + 1 < b.nz) acc += (g[p] - g[b.node(i, j, k + 1)]) * b.dxd[i] * b.dyd[j] / b.dz[k];
                if (k > 0) acc += (g[p] - g[b.node(i, j, k - 1)]) * b.dxd[i] * b.dyd[j] / b.dz[k - 1];
                out[p] = acc;
            }
}

} // namespace

CoulombResult project_coulomb(const Domain& d, const MagneticPotential& A, double rtol,
                              int max_iters) {
    const BoxGrid& b = d.box;
    Vec div = divergence(d, A);
    Vec rhs(b.n_nodes(), 0.0), dinv(b.n_nodes(), 0.0);
    for (int k = 1; k + 1 < b.nz; ++k)
        for (int j = 1; j + 1 < b.ny; ++j)
            for (int i = 1; i + 1 < b.nx; ++i) {
                std::size_t p = b.node(i, j, k);
                double vol = b.dxd[i] * b.dyd[j] * b.dzd[k];
                rhs[p] = vol * div[p];
                double diag = b.dyd[j] * b.dzd[k] * (1.0 / b.dx[i] + 1.0 / b.dx[i - 1]) +
                              b.dxd[i] * b.dzd[k] * (1.0 / b.dy[j] + 1.0 / b.dy[j - 1]) +
                              b.dxd[i] * b.dyd[j] * (1.0 / b.dz[k] + 1.0 / b.dz[k - 1]);
                dinv[p] = 1.0 / diag;
            }
    CoulombResult res;
    res.g.assign(b.n_nodes(), 0.0);
    res.solve = conjugate_gradient([&](const Vec& x, Vec& y) { box_laplacian(b, x, y); }, rhs,
                                   res.g, dinv, rtol, max_iters);
    GaugeState gs = apply_gauge(d, OrderParameterStack{}, A, res.g);
    res.A = std::move(gs.A);
    Vec div2 = divergence(d, res.A);
    for (double v : div2) res.max_div = std::max(res.max_div, std::abs(v));
    return res;
}

LayerTrace trace(const Domain& d, const MagneticPotential& A, int n) {
    if (n < 0 || n > d.N()) throw std::out_of_range("layer index out of range");
    const BoxGrid& b = d.box;
    const LayerGrid& g = d.layer;
    const int k = b.layer_k[n];
    LayerTrace t;
    t.t1.assign(g.n_xedges(), 0.0);
    t.t2.assign(g.n_yedges(), 0.0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i + 1 < g.nx; ++i)
            if (g.xedge[g.ex(i, j)]) t.t1[g.ex(i, j)] = A.a1[b.ex(b.ix0 + i, b.iy0 + j, k)];
    for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (g.yedge[g.ey(i, j)]) t.t2[g.ey(i, j)] = A.a2[b.ey(b.ix0 + i, b.iy0 + j, k)];
    return t;
}

LayerTrace trace_at(const Domain& d, const MagneticPotential& A, double z) {
    const BoxGrid& b = d.box;
    const LayerGrid& g = d.layer;
    if (z < b.z.front() || z > b.z.back()) throw std::out_of_range("trace height outside the box");
    int k = int(std::upper_bound(b.z.begin(), b.z.end(), z) - b.z.begin()) - 1;
    k = std::clamp(k, 0, b.nz - 2);
    double t = (z - b.z[k]) / b.dz[k];
    LayerTrace tr;
    tr.t1.assign(g.n_xedges(), 0.0);
    tr.t2.assign(g.n_yedges(), 0.0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i + 1 < g.nx; ++i)
            if (g.xedge[g.ex(i, j)])
                tr.t1[g.ex(i, j)] = (1 - t) * A.a1[b.ex(b.ix0 + i, b.iy0 + j, k)] +
                                    t * A.a1[b.ex(b.ix0 + i, b.iy0 + j, k + 1)];
    for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (g.yedge[g.ey(i, j)])
                tr.t2[g.ey(i, j)] = (1 - t) * A.a2[b.ey(b.ix0 + i, b.iy0 + j, k)] +
                                    t * A.a2[b.ey(b.ix0 + i, b.iy0 + j, k + 1)];
    return tr;
}

Vec link_phase(const Domain& d, const MagneticPotential& A, int n) {
    if (n < 0 || n >= d.N()) throw std::out_of_range("link index out of range");
    const BoxGrid& b = d.box;
    const LayerGrid& g = d.layer;
    Vec th(g.n_nodes(), 0.0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double acc = 0.0;
            for (int k = b.layer_k[n]; k < b.layer_k[n + 1]; ++k)
                acc += b.dz[k] * A.a3[b.ez(b.ix0 + i, b.iy0 + j, k)];
            th[g.node(i, j)] = acc;
        }
    return th;
}

Vec plaquette_curl(const LayerGrid& g, const Vec& v1, const Vec& v2) {
    Vec c(g.n_plaq(), 0.0);
    for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i + 1 < g.nx; ++i) {
            std::size_t P = g.pl(i, j);
            if (!g.plaq[P]) continue;
            c[P] = (v1[g.ex(i, j)] + v2[g.ey(i + 1, j)] - v1[g.ex(i, j + 1)] - v2[g.ey(i, j)]) / g.h;
        }
    return c;
}

std::pair<Vec, Vec> rot_of_plaquette_field(const LayerGrid& g, const Vec& f) {
    Vec r1(g.n_xedges(), 0.0), r2(g.n_yedges(), 0.0);
    auto F = [&](int i, int j) {
        if (i < 0 || j < 0 || i + 1 >= g.nx || j + 1 >= g.ny) return 0.0;
        std::size_t P = g.pl(i, j);
        return g.plaq[P] ? f[P] : 0.0;
    };
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i + 1 < g.nx; ++i)
            if (g.xedge[g.ex(i, j)]) r1[g.ex(i, j)] = (F(i, j) - F(i, j - 1)) / g.h;
    for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (g.yedge[g.ey(i, j)]) r2[g.ey(i, j)] = -(F(i, j) - F(i - 1, j)) / g.h;
    return {r1, r2};
}

PoissonResult dirichlet_poisson_plaquettes(const LayerGrid& g, const Vec& rhs, double rtol) {
    const double ih2 = 1.0 / (g.h * g.h);
    Vec dinv(g.n_plaq(), 0.0), b(g.n_plaq(), 0.0);
    for (std::size_t P = 0; P < g.n_plaq(); ++P)
        if (g.plaq[P]) {
            dinv[P] = 1.0 / (4.0 * ih2);
            b[P] = rhs[P];
        }
    auto apply = [&](const Vec& x, Vec& y) {
        y.assign(x.size(), 0.0);
        for (int j = 0; j + 1 < g.ny; ++j)
            for (int i = 0; i + 1 < g.nx; ++i) {
                std::size_t P = g.pl(i, j);
                if (!g.plaq[P]) continue;
                double acc = 4.0 * x[P];
                if (i > 0 && g.plaq[g.pl(i - 1, j)]) acc -= x[g.pl(i - 1, j)];
                if (i + 2 < g.nx && g.plaq[g.pl(i + 1, j)]) acc -= x[g.pl(i + 1, j)];
                if (j > 0 && g.plaq[g.pl(i, j - 1)]) acc -= x[g.pl(i, j - 1)];
                if (j + 2 < g.ny && g.plaq[g.pl(i, j + 1)]) acc -= x[g.pl(i, j + 1)];
                y[P] = acc * ih2;
            }
    };
    PoissonResult r;
    r.x.assign(g.n_plaq(), 0.0);
    r.solve = conjugate_gradient(apply, b, r.x, dinv, rtol, 20 * int(g.n_plaq()) + 100);
    return r;
}

PoissonResult potential_of_edge_field(const LayerGrid& g, const Vec& e1, const Vec& e2,
                                      double rtol) {
    Vec b(g.n_nodes(), 0.0), deg(g.n_nodes(), 0.0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i + 1 < g.nx; ++i)
            if (g.xedge[g.ex(i, j)]) {
                double f = g.h * e1[g.ex(i, j)];
                b[g.node(i, j)] -= f;
                b[g.node(i + 1, j)] += f;
                deg[g.node(i, j)] += 1;
                deg[g.node(i + 1, j)] += 1;
            }
    for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (g.yedge[g.ey(i, j)]) {
                double f = g.h * e2[g.ey(i, j)];
                b[g.node(i, j)] -= f;
                b[g.node(i, j + 1)] += f;
                deg[g.node(i, j)] += 1;
                deg[g.node(i, j + 1)] += 1;
            }
    Vec dinv(g.n_nodes(), 0.0);
    for (std::size_t p = 0; p < g.n_nodes(); ++p)
        if (g.mask[p] && deg[p] > 0) dinv[p] = 1.0 / deg[p];
    auto apply = [&](const Vec& x, Vec& y) {
        y.assign(x.size(), 0.0);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i + 1 < g.nx; ++i)
                if (g.xedge[g.ex(i, j)]) {
                    double dlt = x[g.node(i, j)] - x[g.node(i + 1, j)];
                    y[g.node(i, j)] += dlt;
                    y[g.node(i + 1, j)] -= dlt;
                }
        for (int j = 0; j + 1 < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                if (g.yedge[g.ey(i, j)]) {
                    double dlt = x[g.node(i, j)] - x[g.node(i, j + 1)];
                    y[g.node(i, j)] += dlt;
                    y[g.node(i, j + 1)] -= dlt;
                }
    };
    PoissonResult r;
    r.x.assign(g.n_nodes(), 0.0);
    r.solve = conjugate_gradient(apply, b, r.x, dinv, rtol, 20 * int(g.n_nodes()) + 100);
    long double mean = 0.0L;
    std::size_t cnt = 0;
    for (std::size_t p = 0; p < g.n_nodes(); ++p)
        if (g.mask[p]) {
            mean += r.x[p];
            ++cnt;
        }
    double m = double(mean / (long double)cnt);
    for (std::size_t p = 0; p < g.n_nodes(); ++p) r.x[p] = g.mask[p] ? r.x[p] - m : 0.0;
    return r;
}

HodgeResult hodge_decompose(const LayerGrid& g, const Vec& v1, const Vec& v2, double rtol) {
    HodgeResult h;
    Vec c = plaquette_curl(g, v1, v2);
    PoissonResult f = dirichlet_poisson_plaquettes(g, c, rtol);
    h.f = f.x;
    h.solve = f.solve;
    auto [r1, r2] = rot_of_plaquette_field(g, h.f);
    h.rot1 = r1;
    h.rot2 = r2;
    h.grad1.assign(g.n_xedges(), 0.0);
    h.grad2.assign(g.n_yedges(), 0.0);
    for (std::size_t e = 0; e < g.n_xedges(); ++e)
        if (g.xedge[e]) h.grad1[e] = v1[e] - h.rot1[e];
    for (std::size_t e = 0; e < g.n_yedges(); ++e)
        if (g.yedge[e]) h.grad2[e] = v2[e] - h.rot2[e];
    h.g = potential_of_edge_field(g, h.grad1, h.grad2, rtol).x;
    return h;
}

std::pair<Vec, Vec> sample_edge_field(const LayerGrid& g, const PlanarField& v, double z) {
    Vec v1(g.n_xedges(), 0.0), v2(g.n_yedges(), 0.0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i + 1 < g.nx; ++i)
            if (g.xedge[g.ex(i, j)]) v1[g.ex(i, j)] = v(g.x(i) + 0.5 * g.h, g.y(j), z).first;
    for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (g.yedge[g.ey(i, j)]) v2[g.ey(i, j)] = v(g.x(i), g.y(j) + 0.5 * g.h, z).second;
    return {v1, v2};
}

VectorField2DStack layer_stack(const Domain& d, const PlanarField& v) {
    VectorField2DStack st;
    std::vector<double> z = layer_positions(d.spec);
    for (int n = 0; n < d.N(); ++n) {
        Slice2D sl;
        sl.z = z[n];
        sl.weight = d.s();
        auto [a, b] = sample_edge_field(d.layer, v, z[n]);
        sl.v1 = std::move(a);
        sl.v2 = std::move(b);
        st.slices.push_back(std::move(sl));
    }
    return st;
}

VectorField2DStack cell_stack(const Domain& d, const PlanarField& v) {
    VectorField2DStack st;
    const BoxGrid& b = d.box;
    for (int k = b.k0; k < b.k1; ++k) {
        Slice2D sl;
        sl.z = 0.5 * (b.z[k] + b.z[k + 1]);
        sl.weight = b.dz[k];
        auto [a, c] = sample_edge_field(d.layer, v, sl.z);
        sl.v1 = std::move(a);
        sl.v2 = std::move(c);
        st.slices.push_back(std::move(sl));
    }
    return st;
}

VectorField2DStack zero_cell_stack(const Domain& d) {
    return cell_stack(d, [](double, double, double) { return std::pair<double, double>{0.0, 0.0}; });
}

double edge_dot(const LayerGrid& g, const Vec& a1, const Vec& a2, const Vec& b1, const Vec& b2) {
    long double acc = 0.0L;
    for (std::size_t e = 0; e < g.n_xedges(); ++e)
        if (g.xedge[e]) acc += (long double)a1[e] * b1[e];
    for (std::size_t e = 0; e < g.n_yedges(); ++e)
        if (g.yedge[e]) acc += (long double)a2[e] * b2[e];
    return double(acc) * g.h * g.h;
}

} // namespace ld
