#include "ld/energy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ld {

namespace {

void check_shapes(const Domain& d, const OrderParameterStack& u, const MagneticPotential& A) {
    if (int(u.u.size()) != d.N() + 1) throw std::invalid_argument("order parameter has wrong layer count");
    for (const auto& layer : u.u)
        if (layer.size() != d.layer.n_nodes())
            throw std::invalid_argument("order parameter layer does not match the layer grid");
    if (A.a1.size() != d.box.n_ex() || A.a2.size() != d.box.n_ey() || A.a3.size() != d.box.n_ez())
        throw std::invalid_argument("magnetic potential does not match the box grid");
}

// Link phases of layer n: theta on window x- and y-edges.
struct LayerPhases {
    Vec t1, t2;
};

LayerPhases layer_phases(const Domain& d, const MagneticPotential& A, int n) {
    const BoxGrid& b = d.box;
    const LayerGrid& g = d.layer;
    const int k = b.layer_k[n];
    LayerPhases ph;
    ph.t1.assign(g.n_xedges(), 0.0);
    ph.t2.assign(g.n_yedges(), 0.0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i + 1 < g.nx; ++i)
            ph.t1[g.ex(i, j)] = b.dx[b.ix0 + i] * A.a1[b.ex(b.ix0 + i, b.iy0 + j, k)];
    for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            ph.t2[g.ey(i, j)] = b.dy[b.iy0 + j] * A.a2[b.ey(b.ix0 + i, b.iy0 + j, k)];
    return ph;
}

double josephson_coefficient(const Domain& d, const ModelParams& p) {
    const double h = d.layer.h;
    return h * h / (2.0 * p.lambda * p.lambda * d.s());
}

// Kinetic energy of one layer, 1/2 sum |u_q e^{-i theta} - u_p|^2.
double layer_kinetic(const LayerGrid& g, const std::vector<cplx>& u, const LayerPhases& ph) {
    long double acc = 0.0L;
    for (int j = 0; j < g.ny; ++j) {
        long double row = 0.0L;
        for (int i = 0; i + 1 < g.nx; ++i) {
            std::size_t e = g.ex(i, j);
            if (!g.xedge[e]) continue;
            cplx dlt = u[g.node(i + 1, j)] * std::polar(1.0, -ph.t1[e]) - u[g.node(i, j)];
            row += 0.5L * std::norm(dlt);
        }
        if (j + 1 < g.ny)
            for (int i = 0; i < g.nx; ++i) {
                std::size_t e = g.ey(i, j);
                if (!g.yedge[e]) continue;
                cplx dlt = u[g.node(i, j + 1)] * std::polar(1.0, -ph.t2[e]) - u[g.node(i, j)];
                row += 0.5L * std::norm(dlt);
            }
        acc += row;
    }
    return double(acc);
}

double layer_potential(const LayerGrid& g, const std::vector<cplx>& u, double eps) {
    long double acc = 0.0L;
    for (std::size_t p = 0; p < g.n_nodes(); ++p) {
        if (!g.mask[p]) continue;
        double w = 1.0 - std::norm(u[p]);
        acc += (long double)w * w;
    }
    return double(acc) * g.h * g.h / (4.0 * eps * eps);
}

double link_energy(const Domain& d, const OrderParameterStack& u, const Vec& theta, int n,
                   const ModelParams& p) {
    const LayerGrid& g = d.layer;
    long double acc = 0.0L;
    for (std::size_t q = 0; q < g.n_nodes(); ++q) {
        if (!g.mask[q]) continue;
        acc += std::norm(u.u[n + 1][q] - u.u[n][q] * std::polar(1.0, theta[q]));
    }
    return double(acc) * josephson_coefficient(d, p);
}

} // namespace

void validate(const ModelParams& p) {
    if (!(p.eps > 0)) throw std::invalid_argument("eps must be positive");
    if (!(p.lambda > 0)) throw std::invalid_argument("lambda must be positive");
    if (!(p.h_ex >= 0)) throw std::invalid_argument("h_ex must be nonnegative");
    if (!(p.h0 >= 0)) throw std::invalid_argument("h0 must be nonnegative");
}

double magnetic_energy(const Domain& d, const MagneticPotential& A, double h) {
    const BoxGrid& b = d.box;
    std::vector<long double> part(b.nz, 0.0L);
#pragma omp parallel for schedule(static)
    for (int k = 0; k < b.nz; ++k) {
        long double acc = 0.0L;
        for (int j = 0; j + 1 < b.ny; ++j)
            for (int i = 0; i + 1 < b.nx; ++i) {
                double c = (A.a1[b.ex(i, j, k)] - A.a1[b.ex(i, j + 1, k)]) * b.dx[i] +
                           (A.a2[b.ey(i + 1, j, k)] - A.a2[b.ey(i, j, k)]) * b.dy[j];
                double area = b.dx[i] * b.dy[j];
                double r = c / area - h;
                acc += (long double)r * r * area * b.dzd[k];
            }
        if (k + 1 < b.nz) {
            for (int j = 0; j + 1 < b.ny; ++j)
                for (int i = 0; i < b.nx; ++i) {
                    double c = (A.a2[b.ey(i, j, k)] - A.a2[b.ey(i, j, k + 1)]) * b.dy[j] +
                               (A.a3[b.ez(i, j + 1, k)] - A.a3[b.ez(i, j, k)]) * b.dz[k];
                    double area = b.dy[j] * b.dz[k];
                    acc += (long double)c * c / area * b.dxd[i];
                }
            for (int j = 0; j < b.ny; ++j)
                for (int i = 0; i + 1 < b.nx; ++i) {
                    double c = (A.a3[b.ez(i, j, k)] - A.a3[b.ez(i + 1, j, k)]) * b.dz[k] +
                               (A.a1[b.ex(i, j, k + 1)] - A.a1[b.ex(i, j, k)]) * b.dx[i];
                    double area = b.dz[k] * b.dx[i];
                    acc += (long double)c * c / area * b.dyd[j];
                }
        }
        part[k] = acc;
    }
    return 0.5 * combine(part);
}

MagneticPotential magnetic_gradient(const Domain& d, const MagneticPotential& A, double h) {
    const BoxGrid& b = d.box;
    MagneticPotential g = zero_potential(d);
    g.h_ex = A.h_ex;
    // Scatter face residuals onto their four edges. The xz- and yz-face
    // passes touch planes k and k + 1, so they run in two parity sweeps.
#pragma omp parallel for schedule(static)
    for (int k = 0; k < b.nz; ++k)
        for (int j = 0; j + 1 < b.ny; ++j)
            for (int i = 0; i + 1 < b.nx; ++i) {
                double c = (A.a1[b.ex(i, j, k)] - A.a1[b.ex(i, j + 1, k)]) * b.dx[i] +
                           (A.a2[b.ey(i + 1, j, k)] - A.a2[b.ey(i, j, k)]) * b.dy[j];
                double r = (c / (b.dx[i] * b.dy[j]) - h) * b.dzd[k];
                g.a1[b.ex(i, j, k)] += r * b.dx[i];
                g.a1[b.ex(i, j + 1, k)] -= r * b.dx[i];
                g.a2[b.ey(i + 1, j, k)] += r * b.dy[j];
                g.a2[b.ey(i, j, k)] -= r * b.dy[j];
            }
    for (int parity = 0; parity < 2; ++parity) {
#pragma omp parallel for schedule(static)
        for (int k = parity; k < b.nz - 1; k += 2) {
            for (int j = 0; j + 1 < b.ny; ++j)
                for (int i = 0; i < b.nx; ++i) {
                    double c = (A.a2[b.ey(i, j, k)] - A.a2[b.ey(i, j, k + 1)]) * b.dy[j] +
                               (A.a3[b.ez(i, j + 1, k)] - A.a3[b.ez(i, j, k)]) * b.dz[k];
                    double r = c / (b.dy[j] * b.dz[k]) * b.dxd[i];
                    g.a2[b.ey(i, j, k)] += r * b.dy[j];
                    g.a2[b.ey(i, j, k + 1)] -= r * b.dy[j];
                    g.a3[b.ez(i, j + 1, k)] += r * b.dz[k];
                    g.a3[b.ez(i, j, k)] -= r * b.dz[k];
                }
            for (int j = 0; j < b.ny; ++j)
                for (int i = 0; i + 1 < b.nx; ++i) {
                    double c = (A.a3[b.ez(i, j, k)] - A.a3[b.ez(i + 1, j, k)]) * b.dz[k] +
                               (A.a1[b.ex(i, j, k + 1)] - A.a1[b.ex(i, j, k)]) * b.dx[i];
                    double r = c / (b.dz[k] * b.dx[i]) * b.dyd[j];
                    g.a3[b.ez(i, j, k)] += r * b.dz[k];
                    g.a3[b.ez(i + 1, j, k)] -= r * b.dz[k];
                    g.a1[b.ex(i, j, k + 1)] += r * b.dx[i];
                    g.a1[b.ex(i, j, k)] -= r * b.dx[i];
                }
        }
    }
    return g;
}

EnergyBreakdown ld_energy(const Domain& d, const OrderParameterStack& u, const MagneticPotential& A,
                          const ModelParams& p) {
    check_shapes(d, u, A);
    const int N = d.N();
    const double s = d.s();
    EnergyBreakdown e;
    e.kinetic.assign(N + 1, 0.0);
    e.gl_potential.assign(N + 1, 0.0);
    e.josephson.assign(N, 0.0);
#pragma omp parallel for schedule(static)
    for (int n = 0; n <= N; ++n) {
        LayerPhases ph = layer_phases(d, A, n);
        e.kinetic[n] = s * layer_kinetic(d.layer, u.u[n], ph);
        e.gl_potential[n] = s * layer_potential(d.layer, u.u[n], p.eps);
    }
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n) e.josephson[n] = link_energy(d, u, link_phase(d, A, n), n, p);
    e.magnetic = magnetic_energy(d, A, p.h_ex);
    long double t = 0.0L;
    for (double v : e.kinetic) t += v;
    for (double v : e.gl_potential) t += v;
    for (double v : e.josephson) t += v;
    t += e.magnetic;
    e.total = double(t);
    return e;
}

double gl2d_energy(const LayerGrid& g, const std::vector<cplx>& u, double eps) {
    LayerPhases zero{Vec(g.n_xedges(), 0.0), Vec(g.n_yedges(), 0.0)};
    return layer_kinetic(g, u, zero) + layer_potential(g, u, eps);
}

SplitBreakdown ld_energy_split(const Domain& d, const OrderParameterStack& u,
                               const MagneticPotential& A, const ModelParams& p) {
    check_shapes(d, u, A);
    const LayerGrid& g = d.layer;
    const int N = d.N();
    const double s = d.s();
    SplitBreakdown out;
    out.pure_gl.assign(N + 1, 0.0);
    std::vector<long double> cross(N + 1, 0.0L), quad(N + 1, 0.0L);
#pragma omp parallel for schedule(static)
    for (int n = 0; n <= N; ++n) {
        LayerPhases ph = layer_phases(d, A, n);
        const auto& un = u.u[n];
        long double c = 0.0L, q = 0.0L;
        auto edge = [&](std::size_t a, std::size_t b, double th) {
            cplx z = std::conj(un[a]) * un[b];
            c += -std::sin(th) * z.imag();
            q += (1.0 - std::cos(th)) * z.real();
        };
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i + 1 < g.nx; ++i)
                if (g.xedge[g.ex(i, j)]) edge(g.node(i, j), g.node(i + 1, j), ph.t1[g.ex(i, j)]);
        for (int j = 0; j + 1 < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                if (g.yedge[g.ey(i, j)]) edge(g.node(i, j), g.node(i, j + 1), ph.t2[g.ey(i, j)]);
        cross[n] = c * s;
        quad[n] = q * s;
        out.pure_gl[n] = s * gl2d_energy(g, un, p.eps);
    }
    long double jt = 0.0L;
    for (int n = 0; n < N; ++n) jt += link_energy(d, u, link_phase(d, A, n), n, p);
    long double ct = 0.0L, qt = 0.0L, pt = 0.0L;
    for (int n = 0; n <= N; ++n) {
        ct += cross[n];
        qt += quad[n];
        pt += out.pure_gl[n];
    }
    out.cross_term = double(ct);
    out.quadratic_A_term = double(qt);
    out.josephson = double(jt);
    out.magnetic = magnetic_energy(d, A, p.h_ex);
    out.total = double(pt + ct + qt + jt + (long double)out.magnetic);
    return out;
}

MagneticPotential edge_volumes(const Domain& d) {
    const BoxGrid& b = d.box;
    MagneticPotential w = zero_potential(d);
    for (int k = 0; k < b.nz; ++k)
        for (int j = 0; j < b.ny; ++j)
            for (int i = 0; i < b.nx; ++i) {
                if (i + 1 < b.nx) w.a1[b.ex(i, j, k)] = b.dx[i] * b.dyd[j] * b.dzd[k];
                if (j + 1 < b.ny) w.a2[b.ey(i, j, k)] = b.dxd[i] * b.dy[j] * b.dzd[k];
                if (k + 1 < b.nz) w.a3[b.ez(i, j, k)] = b.dxd[i] * b.dyd[j] * b.dz[k];
            }
    return w;
}

LDGradient ld_gradient(const Domain& d, const OrderParameterStack& u, const MagneticPotential& A,
                       const ModelParams& p) {
    check_shapes(d, u, A);
    const LayerGrid& g = d.layer;
    const BoxGrid& b = d.box;
    const int N = d.N();
    const double s = d.s();
    const double h2 = g.h * g.h;
    LDGradient G;
    G.gu.assign(N + 1, std::vector<cplx>(g.n_nodes(), cplx(0.0, 0.0)));
    G.gA = magnetic_gradient(d, A, p.h_ex);

#pragma omp parallel for schedule(static)
    for (int n = 0; n <= N; ++n) {
        const auto& un = u.u[n];
        auto& gn = G.gu[n];
        const int k = b.layer_k[n];
        LayerPhases ph = layer_phases(d, A, n);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i + 1 < g.nx; ++i) {
                std::size_t e = g.ex(i, j);
                if (!g.xedge[e]) continue;
                std::size_t pp = g.node(i, j), qq = g.node(i + 1, j);
                cplx ph_m = std::polar(1.0, -ph.t1[e]);
                cplx dlt = un[qq] * ph_m - un[pp];
                gn[qq] += s * dlt * std::conj(ph_m);
                gn[pp] -= s * dlt;
                G.gA.a1[b.ex(b.ix0 + i, b.iy0 + j, k)] +=
                    -s * b.dx[b.ix0 + i] * (std::conj(un[pp]) * un[qq] * ph_m).imag();
            }
        for (int j = 0; j + 1 < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                std::size_t e = g.ey(i, j);
                if (!g.yedge[e]) continue;
                std::size_t pp = g.node(i, j), qq = g.node(i, j + 1);
                cplx ph_m = std::polar(1.0, -ph.t2[e]);
                cplx dlt = un[qq] * ph_m - un[pp];
                gn[qq] += s * dlt * std::conj(ph_m);
                gn[pp] -= s * dlt;
                G.gA.a2[b.ey(b.ix0 + i, b.iy0 + j, k)] +=
                    -s * b.dy[b.iy0 + j] * (std::conj(un[pp]) * un[qq] * ph_m).imag();
            }
        for (std::size_t q = 0; q < g.n_nodes(); ++q)
            if (g.mask[q]) gn[q] += -s * h2 * (1.0 - std::norm(un[q])) * un[q] / (p.eps * p.eps);
    }

    const double c = josephson_coefficient(d, p);
    for (int n = 0; n < N; ++n) {
        Vec theta = link_phase(d, A, n);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                std::size_t q = g.node(i, j);
                if (!g.mask[q]) continue;
                cplx ups = std::polar(1.0, theta[q]);
                cplx D = u.u[n + 1][q] - u.u[n][q] * ups;
                G.gu[n + 1][q] += 2.0 * c * D;
                G.gu[n][q] -= 2.0 * c * D * std::conj(ups);
                double dth = -2.0 * c * (u.u[n + 1][q] * std::conj(u.u[n][q]) * std::conj(ups)).imag();
                for (int kk = b.layer_k[n]; kk < b.layer_k[n + 1]; ++kk)
                    G.gA.a3[b.ez(b.ix0 + i, b.iy0 + j, kk)] += dth * b.dz[kk];
            }
    }

    zero_clamped(d, G.gA);
    return G;
}

std::vector<std::vector<cplx>> gl_residual_field(const Domain& d, const OrderParameterStack& u,
                                                 const MagneticPotential& A, const ModelParams& p) {
    check_shapes(d, u, A);
    const LayerGrid& g = d.layer;
    const int N = d.N();
    const double ih2 = 1.0 / (g.h * g.h);
    const double cpl = 1.0 / (p.lambda * p.lambda * d.s() * d.s());
    std::vector<Vec> theta(N);
    for (int n = 0; n < N; ++n) theta[n] = link_phase(d, A, n);
    std::vector<std::vector<cplx>> r(N + 1, std::vector<cplx>(g.n_nodes(), cplx(0.0, 0.0)));
    for (int n = 0; n <= N; ++n) {
        LayerPhases ph = layer_phases(d, A, n);
        const auto& un = u.u[n];
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                std::size_t q = g.node(i, j);
                if (!g.mask[q]) continue;
                cplx lap(0.0, 0.0);
                if (i + 1 < g.nx && g.xedge[g.ex(i, j)])
                    lap += un[g.node(i + 1, j)] * std::polar(1.0, -ph.t1[g.ex(i, j)]) - un[q];
                if (i > 0 && g.xedge[g.ex(i - 1, j)])
                    lap += un[g.node(i - 1, j)] * std::polar(1.0, ph.t1[g.ex(i - 1, j)]) - un[q];
                if (j + 1 < g.ny && g.yedge[g.ey(i, j)])
                    lap += un[g.node(i, j + 1)] * std::polar(1.0, -ph.t2[g.ey(i, j)]) - un[q];
                if (j > 0 && g.yedge[g.ey(i, j - 1)])
                    lap += un[g.node(i, j - 1)] * std::polar(1.0, ph.t2[g.ey(i, j - 1)]) - un[q];
                cplx P(0.0, 0.0);
                if (N >= 1) {
                    if (n == 0) {
                        P = u.u[1][q] * std::polar(1.0, -theta[0][q]) - un[q];
                    } else if (n == N) {
                        P = u.u[N - 1][q] * std::polar(1.0, theta[N - 1][q]) - un[q];
                    } else {
                        P = u.u[n + 1][q] * std::polar(1.0, -theta[n][q]) +
                            u.u[n - 1][q] * std::polar(1.0, theta[n - 1][q]) - 2.0 * un[q];
                    }
                }
                r[n][q] = lap * ih2 + (1.0 - std::norm(un[q])) * un[q] / (p.eps * p.eps) + cpl * P;
            }
    }
    return r;
}

double ELResidual::worst_scaled() const {
    return std::max({gl.scaled, neumann.scaled, ampere.scaled});
}

ELResidual el_residual(const Domain& d, const OrderParameterStack& u, const MagneticPotential& A,
                       const ModelParams& p) {
    const LayerGrid& g = d.layer;
    const BoxGrid& b = d.box;
    const int N = d.N();
    const double s = d.s();
    ELResidual res;
    res.energy = ld_energy(d, u, A, p).total;
    const double scale = 1.0 + std::abs(res.energy);

    auto r = gl_residual_field(d, u, A, p);
    long double sg = 0.0L, sb = 0.0L;
    for (int n = 0; n <= N; ++n)
        for (std::size_t q = 0; q < g.n_nodes(); ++q) {
            if (!g.mask[q]) continue;
            double m = std::abs(r[n][q]);
            long double w = (long double)s * g.h * g.h * m * m;
            if (g.boundary[q]) {
                sb += w;
                res.neumann.max = std::max(res.neumann.max, m);
            } else {
                sg += w;
                res.gl.max = std::max(res.gl.max, m);
            }
        }
    res.gl.l2 = std::sqrt(double(sg));
    res.neumann.l2 = std::sqrt(double(sb));

    // curl curl A from the magnetic gradient, supercurrent from the order parameters.
    MagneticPotential cc = magnetic_gradient(d, A, p.h_ex);
    MagneticPotential vol = edge_volumes(d);
    MagneticPotential jc = zero_potential(d);
    for (int n = 0; n <= N; ++n) {
        const int k = b.layer_k[n];
        LayerPhases ph = layer_phases(d, A, n);
        const auto& un = u.u[n];
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i + 1 < g.nx; ++i) {
                std::size_t e = g.ex(i, j);
                if (!g.xedge[e]) continue;
                cplx z = std::conj(un[g.node(i, j)]) * un[g.node(i + 1, j)] * std::polar(1.0, -ph.t1[e]);
                jc.a1[b.ex(b.ix0 + i, b.iy0 + j, k)] =
                    s * z.imag() / b.dx[b.ix0 + i] / b.dzd[k];
            }
        for (int j = 0; j + 1 < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                std::size_t e = g.ey(i, j);
                if (!g.yedge[e]) continue;
                cplx z = std::conj(un[g.node(i, j)]) * un[g.node(i, j + 1)] * std::polar(1.0, -ph.t2[e]);
                jc.a2[b.ey(b.ix0 + i, b.iy0 + j, k)] =
                    s * z.imag() / b.dy[b.iy0 + j] / b.dzd[k];
            }
    }
    for (int n = 0; n < N; ++n) {
        Vec theta = link_phase(d, A, n);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                std::size_t q = g.node(i, j);
                if (!g.mask[q]) continue;
                double j3 = (u.u[n + 1][q] * std::conj(u.u[n][q]) * std::polar(1.0, -theta[q])).imag() /
                            (p.lambda * p.lambda * s);
                for (int kk = b.layer_k[n]; kk < b.layer_k[n + 1]; ++kk)
                    jc.a3[b.ez(b.ix0 + i, b.iy0 + j, kk)] = j3;
            }
    }
    long double sa = 0.0L;
    auto accumulate = [&](const Vec& c, const Vec& jv, const Vec& w, std::size_t e) {
        double rr = c[e] / w[e] - jv[e];
        sa += (long double)w[e] * rr * rr;
        res.ampere.max = std::max(res.ampere.max, std::abs(rr));
    };
    for (int k = 0; k < b.nz; ++k)
        for (int j = 0; j < b.ny; ++j)
            for (int i = 0; i < b.nx; ++i) {
                if (i + 1 < b.nx && !boundary_ex(b, i, j, k)) accumulate(cc.a1, jc.a1, vol.a1, b.ex(i, j, k));
                if (j + 1 < b.ny && !boundary_ey(b, i, j, k)) accumulate(cc.a2, jc.a2, vol.a2, b.ey(i, j, k));
                if (k + 1 < b.nz && !boundary_ez(b, i, j, k)) accumulate(cc.a3, jc.a3, vol.a3, b.ez(i, j, k));
            }
    res.ampere.l2 = std::sqrt(double(sa));
    for (ResidualNorm* rn : {&res.gl, &res.neumann, &res.ampere}) rn->scaled = rn->l2 / scale;
    res.field_excess_l2 = std::sqrt(2.0 * magnetic_energy(d, A, p.h_ex));
    return res;
}

LimitBreakdown limit_energy(const Domain& d, const VectorField2DStack& v, const MagneticPotential& A,
                            double h0) {
    const LayerGrid& g = d.layer;
    const double h2 = g.h * g.h;
    LimitBreakdown out;
    long double tr = 0.0L, tv = 0.0L;
    for (const Slice2D& sl : v.slices) {
        if (sl.v1.size() != g.n_xedges() || sl.v2.size() != g.n_yedges())
            throw std::invalid_argument("slice does not match the layer grid");
        LayerTrace t = trace_at(d, A, sl.z);
        long double a = 0.0L;
        for (std::size_t e = 0; e < g.n_xedges(); ++e)
            if (g.xedge[e]) a += std::pow((long double)(sl.v1[e] - t.t1[e]), 2);
        for (std::size_t e = 0; e < g.n_yedges(); ++e)
            if (g.yedge[e]) a += std::pow((long double)(sl.v2[e] - t.t2[e]), 2);
        tr += a * h2 * sl.weight;
        Vec c = plaquette_curl(g, sl.v1, sl.v2);
        long double m = 0.0L;
        for (std::size_t P = 0; P < g.n_plaq(); ++P)
            if (g.plaq[P]) m += std::abs(c[P]);
        tv += m * h2 * sl.weight;
    }
    out.trace_term = double(tr);
    out.tv_term = double(tv);
    out.magnetic = 2.0 * magnetic_energy(d, A, h0);
    out.total = 0.5 * (out.trace_term + out.tv_term + out.magnetic);
    return out;
}

} // namespace ld
