#include "ld/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace ld {

EdgeCurrent current(const LayerGrid& g, const std::vector<cplx>& u) {
    EdgeCurrent j{Vec(g.n_xedges(), 0.0), Vec(g.n_yedges(), 0.0)};
    const double ih = 1.0 / g.h;
    for (int jj = 0; jj < g.ny; ++jj)
        for (int i = 0; i + 1 < g.nx; ++i)
            if (g.xedge[g.ex(i, jj)])
                j.j1[g.ex(i, jj)] = std::imag(std::conj(u[g.node(i, jj)]) * u[g.node(i + 1, jj)]) * ih;
    for (int jj = 0; jj + 1 < g.ny; ++jj)
        for (int i = 0; i < g.nx; ++i)
            if (g.yedge[g.ey(i, jj)])
                j.j2[g.ey(i, jj)] = std::imag(std::conj(u[g.node(i, jj)]) * u[g.node(i, jj + 1)]) * ih;
    return j;
}

Vec jacobian(const LayerGrid& g, const std::vector<cplx>& u) {
    EdgeCurrent j = current(g, u);
    Vec J = plaquette_curl(g, j.j1, j.j2);
    for (double& x : J) x *= 0.5;
    return J;
}

VectorField2DStack stack_current(const Domain& d, const OrderParameterStack& u) {
    VectorField2DStack st;
    for (int n = 0; n < d.N(); ++n) {
        EdgeCurrent j = current(d.layer, u.u[n]);
        st.slices.push_back({n * d.s(), d.s(), std::move(j.j1), std::move(j.j2)});
    }
    return st;
}

PlaquetteStack stack_jacobian(const Domain& d, const OrderParameterStack& u) {
    PlaquetteStack st;
    st.weight = d.s();
    st.layers.resize(d.N());
#pragma omp parallel for schedule(static)
    for (int n = 0; n < d.N(); ++n) st.layers[n] = jacobian(d.layer, u.u[n]);
    return st;
}

double stack_integral(const LayerGrid& g, const PlaquetteStack& J) {
    long double acc = 0.0L;
    for (const Vec& layer : J.layers)
        for (std::size_t P = 0; P < layer.size(); ++P)
            if (g.plaq[P]) acc += layer[P];
    return double(acc) * J.weight * g.h * g.h;
}

double VortexMeasure::weight() const { return M_PI / std::abs(std::log(eps)); }
double VortexMeasure::total_mass() const { return weight() * s * double(entries.size()); }

int VortexMeasure::count(int n) const {
    return int(std::count_if(entries.begin(), entries.end(), [n](const VortexEntry& e) { return e.n == n; }));
}

int VortexMeasure::net_charge(int n) const {
    int q = 0;
    for (const VortexEntry& e : entries)
        if (e.n == n) q += e.sigma;
    return q;
}

namespace {

struct Detection {
    double x, y;
    int sigma;
};

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
}

} // namespace

VortexDetection detect_vortices(const LayerGrid& g, const std::vector<cplx>& u, int n, double floor) {
    VortexDetection out;
    std::vector<Detection> det;
    for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i + 1 < g.nx; ++i) {
            std::size_t P = g.pl(i, j);
            if (!g.plaq[P]) continue;
            const cplx c[4] = {u[g.node(i, j)], u[g.node(i + 1, j)], u[g.node(i + 1, j + 1)],
                               u[g.node(i, j + 1)]};
            if (std::all_of(c, c + 4, [floor](cplx z) { return std::abs(z) < floor; })) {
                out.indeterminate.push_back(P);
                continue;
            }
            double w = 0.0;
            for (int k = 0; k < 4; ++k) w += std::arg(std::conj(c[k]) * c[(k + 1) % 4]);
            int q = int(std::lround(w / (2.0 * M_PI)));
            for (int r = 0; r < std::abs(q); ++r)
                det.push_back({g.x(i) + 0.5 * g.h, g.y(j) + 0.5 * g.h, q > 0 ? 1 : -1});
        }

    std::vector<std::size_t> parent(det.size());
    std::iota(parent.begin(), parent.end(), 0);
    const double r2 = std::pow(2.0 * g.h * (1 + 1e-9), 2);
    for (std::size_t a = 0; a < det.size(); ++a)
        for (std::size_t b = a + 1; b < det.size(); ++b) {
            if (det[a].sigma != det[b].sigma) continue;
            double dx = det[a].x - det[b].x, dy = det[a].y - det[b].y;
            if (dx * dx + dy * dy <= r2) parent[find_root(parent, a)] = find_root(parent, b);
        }
    std::vector<std::size_t> root_index(det.size(), det.size());
    std::vector<int> members;
    for (std::size_t a = 0; a < det.size(); ++a) {
        std::size_t r = find_root(parent, a);
        if (root_index[r] == det.size()) {
            root_index[r] = out.entries.size();
            out.entries.push_back({n, 0.0, 0.0, det[a].sigma});
            members.push_back(0);
        }
        VortexEntry& e = out.entries[root_index[r]];
        e.x += det[a].x;
        e.y += det[a].y;
        ++members[root_index[r]];
    }
    for (std::size_t k = 0; k < out.entries.size(); ++k) {
        out.entries[k].x /= members[k];
        out.entries[k].y /= members[k];
    }
    return out;
}

VortexMeasure detect_measure(const Domain& d, const OrderParameterStack& u, double eps) {
    VortexMeasure m;
    m.eps = eps;
    m.s = d.s();
    for (int n = 0; n < d.N(); ++n) {
        VortexDetection det = detect_vortices(d.layer, u.u[n], n);
        m.entries.insert(m.entries.end(), det.entries.begin(), det.entries.end());
    }
    return m;
}

Vec measure_density(const LayerGrid& g, const VortexMeasure& m, int n) {
    Vec rho(g.n_plaq(), 0.0);
    const double scale = m.weight() / (g.h * g.h);
    for (const VortexEntry& e : m.entries) {
        if (e.n != n) continue;
        double fx = (e.x - g.x0) / g.h - 0.5, fy = (e.y - g.y0) / g.h - 0.5;
        int i0 = int(std::floor(fx)), j0 = int(std::floor(fy));
        double tx = fx - i0, ty = fy - j0;
        double w[4] = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
        int ii[4] = {i0, i0 + 1, i0, i0 + 1}, jj[4] = {j0, j0, j0 + 1, j0 + 1};
        double total = 0.0;
        for (int k = 0; k < 4; ++k) {
            bool ok = ii[k] >= 0 && jj[k] >= 0 && ii[k] + 1 < g.nx && jj[k] + 1 < g.ny &&
                      g.plaq[g.pl(ii[k], jj[k])];
            if (!ok) w[k] = 0.0;
            total += w[k];
        }
        if (total <= 0.0) throw std::invalid_argument("vortex outside the plaquette mask");
        for (int k = 0; k < 4; ++k)
            if (w[k] > 0) rho[g.pl(ii[k], jj[k])] += e.sigma * scale * w[k] / total;
    }
    return rho;
}

double hminus1_distance(const LayerGrid& g, const Vec& mu1, const Vec& mu2) {
    Vec rhs(g.n_plaq(), 0.0);
    for (std::size_t P = 0; P < rhs.size(); ++P)
        if (g.plaq[P]) rhs[P] = mu1[P] - mu2[P];
    PoissonResult phi = dirichlet_poisson_plaquettes(g, rhs, 1e-12);
    return std::sqrt(std::max(0.0, dot(phi.x, rhs) * g.h * g.h));
}

MeasureDistanceReport measure_distance(const LayerGrid& g, const std::vector<Vec>& mu1,
                                       const std::vector<Vec>& mu2, double weight) {
    if (mu1.size() != mu2.size()) throw std::invalid_argument("slice counts differ");
    MeasureDistanceReport r;
    long double sq = 0.0L, tv = 0.0L;
    for (std::size_t n = 0; n < mu1.size(); ++n) {
        double dn = hminus1_distance(g, mu1[n], mu2[n]);
        r.per_slice.push_back(dn);
        sq += weight * dn * dn;
        for (std::size_t P = 0; P < mu1[n].size(); ++P)
            if (g.plaq[P]) tv += weight * g.h * g.h * std::abs(mu1[n][P] - mu2[n][P]);
    }
    r.hminus1 = std::sqrt(double(sq));
    r.total_variation = double(tv);
    return r;
}

Supercurrent supercurrent(const Domain& d, const OrderParameterStack& u, const MagneticPotential& A,
                          const ModelParams& p) {
    const LayerGrid& g = d.layer;
    const double s = d.s();
    Supercurrent J;
    J.s = s;
    J.j1.resize(d.N() + 1);
    J.j2.resize(d.N() + 1);
    J.j3.resize(d.N());
    for (int n = 0; n <= d.N(); ++n) {
        LayerTrace t = trace(d, A, n);
        const auto& un = u.u[n];
        Vec j1(g.n_xedges(), 0.0), j2(g.n_yedges(), 0.0);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i + 1 < g.nx; ++i) {
                std::size_t e = g.ex(i, j);
                if (!g.xedge[e]) continue;
                cplx z = std::conj(un[g.node(i, j)]) * un[g.node(i + 1, j)] * std::polar(1.0, -g.h * t.t1[e]);
                j1[e] = s * z.imag() / g.h;
            }
        for (int j = 0; j + 1 < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                std::size_t e = g.ey(i, j);
                if (!g.yedge[e]) continue;
                cplx z = std::conj(un[g.node(i, j)]) * un[g.node(i, j + 1)] * std::polar(1.0, -g.h * t.t2[e]);
                j2[e] = s * z.imag() / g.h;
            }
        J.j1[n] = std::move(j1);
        J.j2[n] = std::move(j2);
    }
    const double c = 1.0 / (p.lambda * p.lambda * s);
    for (int n = 0; n < d.N(); ++n) {
        Vec theta = link_phase(d, A, n);
        Vec j3(g.n_nodes(), 0.0);
        for (std::size_t q = 0; q < g.n_nodes(); ++q)
            if (g.mask[q])
                j3[q] = c * std::imag(u.u[n + 1][q] * std::conj(u.u[n][q]) * std::polar(1.0, -theta[q]));
        J.j3[n] = std::move(j3);
    }
    return J;
}

double j3_l2_squared(const LayerGrid& g, const Supercurrent& J) {
    long double acc = 0.0L;
    for (const Vec& slab : J.j3)
        for (std::size_t q = 0; q < slab.size(); ++q)
            if (g.mask[q]) acc += (long double)slab[q] * slab[q];
    return double(acc) * J.s * g.h * g.h;
}

namespace {

// In-plane components of A on box plane k, restricted to the layer window.
LayerTrace plane_trace(const Domain& d, const MagneticPotential& A, int k) {
    const BoxGrid& b = d.box;
    const LayerGrid& g = d.layer;
    LayerTrace t{Vec(g.n_xedges(), 0.0), Vec(g.n_yedges(), 0.0)};
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i + 1 < g.nx; ++i)
            if (g.xedge[g.ex(i, j)]) t.t1[g.ex(i, j)] = A.a1[b.ex(b.ix0 + i, b.iy0 + j, k)];
    for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (g.yedge[g.ey(i, j)]) t.t2[g.ey(i, j)] = A.a2[b.ey(b.ix0 + i, b.iy0 + j, k)];
    return t;
}

double trace_gap(const LayerGrid& g, const LayerTrace& a, const LayerTrace& b) {
    long double acc = 0.0L;
    for (std::size_t e = 0; e < a.t1.size(); ++e) acc += std::pow((long double)(a.t1[e] - b.t1[e]), 2);
    for (std::size_t e = 0; e < a.t2.size(); ++e) acc += std::pow((long double)(a.t2[e] - b.t2[e]), 2);
    return double(acc) * g.h * g.h;
}

} // namespace

double slab_trace_quantity(const Domain& d, const MagneticPotential& A) {
    const BoxGrid& b = d.box;
    long double acc = 0.0L;
    for (int n = 0; n < d.N(); ++n) {
        LayerTrace base = plane_trace(d, A, b.layer_k[n]);
        double prev = 0.0;
        for (int k = b.layer_k[n] + 1; k <= b.layer_k[n + 1]; ++k) {
            double cur = trace_gap(d.layer, plane_trace(d, A, k), base);
            acc += 0.5 * b.dz[k - 1] * (prev + cur);
            prev = cur;
        }
    }
    return double(acc);
}

ScaledObservables scaled_observables(const Domain& d, const OrderParameterStack& u,
                                     const MagneticPotential& A, const ModelParams& p) {
    validate(p);
    const LayerGrid& g = d.layer;
    ScaledObservables r;
    const double L = std::abs(std::log(p.eps));
    const double L2 = L * L;
    r.log_eps = L;
    EnergyBreakdown E = ld_energy(d, u, A, p);
    auto total = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); };
    r.energy = E.total / L2;
    r.kinetic = total(E.kinetic) / L2;
    r.potential = total(E.gl_potential) / L2;
    r.josephson = total(E.josephson) / L2;
    r.magnetic = E.magnetic / L2;

    r.scaled_current = stack_current(d, u);
    long double cur = 0.0L;
    for (Slice2D& sl : r.scaled_current.slices) {
        cur += sl.weight * edge_dot(g, sl.v1, sl.v2, sl.v1, sl.v2);
        for (double& x : sl.v1) x /= L;
        for (double& x : sl.v2) x /= L;
    }
    r.current_l2 = std::sqrt(double(cur)) / L;

    r.scaled_jacobian = stack_jacobian(d, u);
    long double mass = 0.0L, tot = 0.0L;
    for (Vec& layer : r.scaled_jacobian.layers)
        for (std::size_t P = 0; P < layer.size(); ++P) {
            layer[P] /= L;
            if (!g.plaq[P]) continue;
            mass += std::abs(layer[P]);
            tot += layer[P];
        }
    r.jacobian_mass = double(mass) * d.s() * g.h * g.h;
    r.jacobian_total = double(tot) * d.s() * g.h * g.h;

    r.j3_l2 = std::sqrt(j3_l2_squared(g, supercurrent(d, u, A, p))) / L;
    r.slab_trace = slab_trace_quantity(d, A);
    r.slab_trace_ratio = E.total > 0 ? r.slab_trace / E.total : 0.0;

    MagneticPotential a = applied_potential(d, p.h_ex), vol = edge_volumes(d);
    long double ex = 0.0L;
    for (std::size_t e = 0; e < a.a1.size(); ++e) ex += vol.a1[e] * std::pow((long double)(A.a1[e] - a.a1[e]), 2);
    for (std::size_t e = 0; e < a.a2.size(); ++e) ex += vol.a2[e] * std::pow((long double)(A.a2[e] - a.a2[e]), 2);
    for (std::size_t e = 0; e < a.a3.size(); ++e) ex += vol.a3[e] * std::pow((long double)(A.a3[e] - a.a3[e]), 2);
    r.potential_excess = std::sqrt(double(ex)) / L;
    return r;
}

void write_vortex_csv(const std::string& path, const VortexMeasure& m) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.precision(17);
    f << "n,x,y,sigma\r\n";
    for (const VortexEntry& e : m.entries) f << e.n << ',' << e.x << ',' << e.y << ',' << e.sigma << "\r\n";
}

} // namespace ld
