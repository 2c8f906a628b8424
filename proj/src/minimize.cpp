#include "ld/minimize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace ld {

namespace {

// Maps the free unknowns (mask nodes of every layer, free box edges) to a
// flat real vector.
class Packing {
public:
    explicit Packing(const Domain& d) : d_(d) {
        const LayerGrid& g = d.layer;
        for (std::size_t p = 0; p < g.n_nodes(); ++p)
            if (g.mask[p]) nodes_.push_back(p);
        const BoxGrid& b = d.box;
        for (int k = 0; k < b.nz; ++k)
            for (int j = 0; j < b.ny; ++j)
                for (int i = 0; i < b.nx; ++i) {
                    if (i + 1 < b.nx && !boundary_ex(b, i, j, k)) e1_.push_back(b.ex(i, j, k));
                    if (j + 1 < b.ny && !boundary_ey(b, i, j, k)) e2_.push_back(b.ey(i, j, k));
                    if (k + 1 < b.nz && !boundary_ez(b, i, j, k)) e3_.push_back(b.ez(i, j, k));
                }
        n_u_ = 2 * nodes_.size() * (d.N() + 1);
    }

    std::size_t size() const { return n_u_ + e1_.size() + e2_.size() + e3_.size(); }
    std::size_t n_u() const { return n_u_; }

    void pack(const std::vector<std::vector<cplx>>& u, const MagneticPotential& A, Vec& x) const {
        x.resize(size());
        std::size_t o = 0;
        for (const auto& layer : u)
            for (std::size_t p : nodes_) {
                x[o++] = layer[p].real();
                x[o++] = layer[p].imag();
            }
        for (std::size_t e : e1_) x[o++] = A.a1[e];
        for (std::size_t e : e2_) x[o++] = A.a2[e];
        for (std::size_t e : e3_) x[o++] = A.a3[e];
    }

    void unpack(const Vec& x, LDState& s) const {
        std::size_t o = 0;
        for (auto& layer : s.u.u)
            for (std::size_t p : nodes_) {
                layer[p] = cplx(x[o], x[o + 1]);
                o += 2;
            }
        for (std::size_t e : e1_) s.A.a1[e] = x[o++];
        for (std::size_t e : e2_) s.A.a2[e] = x[o++];
        for (std::size_t e : e3_) s.A.a3[e] = x[o++];
    }

    Vec metric() const {
        Vec m(size());
        const double w = d_.s() * d_.layer.h * d_.layer.h;
        std::fill(m.begin(), m.begin() + n_u_, w);
        MagneticPotential vol = edge_volumes(d_);
        std::size_t o = n_u_;
        for (std::size_t e : e1_) m[o++] = vol.a1[e];
        for (std::size_t e : e2_) m[o++] = vol.a2[e];
        for (std::size_t e : e3_) m[o++] = vol.a3[e];
        return m;
    }

private:
    const Domain& d_;
    std::vector<std::size_t> nodes_, e1_, e2_, e3_;
    std::size_t n_u_ = 0;
};

double metric_dot(const Vec& a, const Vec& b, const Vec& w, bool inverse) {
    std::vector<long double> part((a.size() + kBlock - 1) / kBlock, 0.0L);
#pragma omp parallel for schedule(static)
    for (long blk = 0; blk < long(part.size()); ++blk) {
        long double acc = 0.0L;
        std::size_t hi = std::min(a.size(), std::size_t(blk + 1) * kBlock);
        for (std::size_t i = std::size_t(blk) * kBlock; i < hi; ++i)
            acc += inverse ? (long double)a[i] * b[i] / w[i] : (long double)a[i] * b[i] * w[i];
        part[blk] = acc;
    }
    return combine(part);
}

// Flat view of a potential over all box edges.
Vec flatten(const MagneticPotential& A) {
    Vec x;
    x.reserve(A.a1.size() + A.a2.size() + A.a3.size());
    x.insert(x.end(), A.a1.begin(), A.a1.end());
    x.insert(x.end(), A.a2.begin(), A.a2.end());
    x.insert(x.end(), A.a3.begin(), A.a3.end());
    return x;
}

void unflatten(const Vec& x, MagneticPotential& A) {
    auto it = x.begin();
    std::copy(it, it + A.a1.size(), A.a1.begin());
    it += A.a1.size();
    std::copy(it, it + A.a2.size(), A.a2.begin());
    it += A.a2.size();
    std::copy(it, it + A.a3.size(), A.a3.begin());
}

} // namespace

double max_modulus(const Domain& d, const OrderParameterStack& u) {
    double m = 0.0;
    for (const auto& layer : u.u)
        for (std::size_t p = 0; p < layer.size(); ++p)
            if (d.layer.mask[p]) m = std::max(m, std::abs(layer[p]));
    return m;
}

LDState random_state(const Domain& d, const ModelParams& p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    LDState s{constant_order_parameter(d, 0.0), applied_potential(d, p.h_ex)};
    for (auto& layer : s.u.u)
        for (std::size_t q = 0; q < layer.size(); ++q)
            if (d.layer.mask[q]) {
                double r = uni(rng);
                double phi = 2.0 * M_PI * uni(rng);
                layer[q] = std::polar(r, phi);
            }
    return s;
}

double gradient_norm(const Domain& d, const LDGradient& G) {
    Packing pk(d);
    Vec g;
    pk.pack(G.gu, G.gA, g);
    return std::sqrt(metric_dot(g, g, pk.metric(), true));
}

LDResult minimize_ld(const Domain& d, const LDState& init, const ModelParams& p,
                     const SolveOptions& opts) {
    validate(p);
    if (opts.max_iters < 0) throw std::invalid_argument("max_iters must be nonnegative");
    Packing pk(d);
    const Vec M = pk.metric();
    LDState work = init;
    work.A.h_ex = p.h_ex;
    clamp_boundary(d, work.A);

    auto energy_at = [&](const Vec& x) {
        pk.unpack(x, work);
        return ld_energy(d, work.u, work.A, p).total;
    };
    auto gradient_at = [&](const Vec& x, Vec& g) {
        pk.unpack(x, work);
        LDGradient G = ld_gradient(d, work.u, work.A, p);
        pk.pack(G.gu, G.gA, g);
    };

    Vec x, g, xt, gt, dir(pk.size());
    pk.pack(work.u.u, work.A, x);
    double E = energy_at(x);
    gradient_at(x, g);
    double gnorm = std::sqrt(metric_dot(g, g, M, true));

    LDResult res;
    SolveReport& rep = res.report;
    rep.history.push_back({0, E, gnorm, 0.0});
    const double c1 = 1e-4;
    double alpha = opts.step_rule == StepRule::fixed ? opts.fixed_step : 1e-3;
    int it = 0;
    int quiet = 0;
    rep.stop_reason = "max_iters";
    while (true) {
        if (gnorm <= opts.grad_tol * (1.0 + std::abs(E))) {
            rep.converged = true;
            rep.stop_reason = "grad_tol";
            break;
        }
        if (it >= opts.max_iters) break;
        for (std::size_t i = 0; i < dir.size(); ++i) dir[i] = -g[i] / M[i];
        const double slope = -gnorm * gnorm;

        double a = alpha, Et = 0.0;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            xt = x;
            axpy(a, dir, xt);
            Et = energy_at(xt);
            if (std::isfinite(Et) && Et <= E + c1 * a * slope) {
                accepted = true;
                break;
            }
            if (opts.step_rule == StepRule::fixed) {
                a *= 0.5;
                continue;
            }
            // Safeguarded quadratic interpolation.
            double denom = 2.0 * (Et - E - slope * a);
            double an = std::isfinite(Et) && denom > 0 ? -slope * a * a / denom : 0.1 * a;
            a = std::clamp(an, 0.1 * a, 0.5 * a);
        }
        if (!accepted) {
            rep.stop_reason = "line_search";
            break;
        }
        gradient_at(xt, gt);
        ++it;

        if (opts.step_rule == StepRule::barzilai_borwein) {
            // s = a * dir; y = gt - g.
            Vec y(g.size());
            for (std::size_t i = 0; i < y.size(); ++i) y[i] = gt[i] - g[i];
            double sy = a * dot(dir, y);
            double sMs = a * a * metric_dot(dir, dir, M, false);
            double yMy = metric_dot(y, y, M, true);
            double next;
            if (sy > 0) {
                next = (it % 2 == 1) ? sMs / sy : sy / yMy;
            } else {
                next = 2.0 * a;
            }
            alpha = std::clamp(next, 1e-12, 1e6);
        }
        double dE = E - Et;
        x.swap(xt);
        g.swap(gt);
        E = Et;
        gnorm = std::sqrt(metric_dot(g, g, M, true));
        rep.history.push_back({it, E, gnorm, a});
        if (opts.energy_tol > 0 && dE <= opts.energy_tol * (1.0 + std::abs(E))) {
            if (++quiet >= 10) {
                rep.stop_reason = "energy_tol";
                break;
            }
        } else {
            quiet = 0;
        }
    }
    pk.unpack(x, work);

    if (opts.coulomb) {
        CoulombResult c = project_coulomb(d, work.A);
        GaugeState gs = apply_gauge(d, work.u, work.A, c.g);
        work.u = std::move(gs.u);
        work.A = std::move(c.A);
        clamp_boundary(d, work.A);
    }
    res.state = std::move(work);
    rep.iterations = it;
    rep.energy = ld_energy(d, res.state.u, res.state.A, p).total;
    rep.grad_norm = gnorm;
    rep.max_modulus = max_modulus(d, res.state.u);
    rep.modulus_ok = rep.max_modulus <= 1.0 + 1e-6;
    return res;
}

// ---------------------------------------------------------------------------
// Limit functional.

double curl_norm_squared(const LayerGrid& g, int iters) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    Vec p(g.n_plaq(), 0.0);
    for (std::size_t P = 0; P < p.size(); ++P)
        if (g.plaq[P]) p[P] = nd(rng);
    double lam = 0.0;
    for (int it = 0; it < iters; ++it) {
        double n = norm2(p);
        if (n == 0.0) return 0.0;
        for (double& v : p) v /= n;
        auto [r1, r2] = rot_of_plaquette_field(g, p);
        Vec q = plaquette_curl(g, r1, r2);
        lam = dot(p, q);
        p.swap(q);
    }
    return lam;
}

namespace {

struct LimitProblem {
    const Domain& d;
    double h0;
    std::vector<int> slice_k; // lower box plane of each slice
    Vec lambda;               // weight * h^2 per slice
    MagneticPotential free;   // 1 on free edges

    LimitProblem(const Domain& dom, double h) : d(dom), h0(h) {
        const BoxGrid& b = d.box;
        for (int k = b.k0; k < b.k1; ++k) {
            slice_k.push_back(k);
            lambda.push_back(b.dz[k] * d.layer.h * d.layer.h);
        }
        free = free_edge_mask(d);
    }

    // Adds sum_k lambda_k P_k^T (r_k) into g, with r_k on layer edges.
    void add_trace_adjoint(const std::vector<std::pair<Vec, Vec>>& r, MagneticPotential& g) const {
        const BoxGrid& b = d.box;
        const LayerGrid& lg = d.layer;
        for (std::size_t s = 0; s < slice_k.size(); ++s) {
            const double w = 0.5 * lambda[s];
            for (int kk : {slice_k[s], slice_k[s] + 1}) {
                for (int j = 0; j < lg.ny; ++j)
                    for (int i = 0; i + 1 < lg.nx; ++i)
                        if (lg.xedge[lg.ex(i, j)])
                            g.a1[b.ex(b.ix0 + i, b.iy0 + j, kk)] += w * r[s].first[lg.ex(i, j)];
                for (int j = 0; j + 1 < lg.ny; ++j)
                    for (int i = 0; i < lg.nx; ++i)
                        if (lg.yedge[lg.ey(i, j)])
                            g.a2[b.ey(b.ix0 + i, b.iy0 + j, kk)] += w * r[s].second[lg.ey(i, j)];
            }
        }
    }

    LayerTrace slice_trace(const MagneticPotential& A, std::size_t s) const {
        const BoxGrid& b = d.box;
        const LayerGrid& lg = d.layer;
        const int k = slice_k[s];
        LayerTrace t;
        t.t1.assign(lg.n_xedges(), 0.0);
        t.t2.assign(lg.n_yedges(), 0.0);
        for (int j = 0; j < lg.ny; ++j)
            for (int i = 0; i + 1 < lg.nx; ++i)
                if (lg.xedge[lg.ex(i, j)])
                    t.t1[lg.ex(i, j)] = 0.5 * (A.a1[b.ex(b.ix0 + i, b.iy0 + j, k)] +
                                               A.a1[b.ex(b.ix0 + i, b.iy0 + j, k + 1)]);
        for (int j = 0; j + 1 < lg.ny; ++j)
            for (int i = 0; i < lg.nx; ++i)
                if (lg.yedge[lg.ey(i, j)])
                    t.t2[lg.ey(i, j)] = 0.5 * (A.a2[b.ey(b.ix0 + i, b.iy0 + j, k)] +
                                               A.a2[b.ey(b.ix0 + i, b.iy0 + j, k + 1)]);
        return t;
    }

    Vec jacobi(bool with_trace) const {
        const BoxGrid& b = d.box;
        const LayerGrid& lg = d.layer;
        MagneticPotential dg = zero_potential(d);
        for (int k = 0; k < b.nz; ++k)
            for (int j = 0; j < b.ny; ++j)
                for (int i = 0; i < b.nx; ++i) {
                    if (i + 1 < b.nx) {
                        double v = 0.0;
                        if (j + 1 < b.ny) v += b.dx[i] * b.dzd[k] / b.dy[j];
                        if (j > 0) v += b.dx[i] * b.dzd[k] / b.dy[j - 1];
                        if (k + 1 < b.nz) v += b.dx[i] * b.dyd[j] / b.dz[k];
                        if (k > 0) v += b.dx[i] * b.dyd[j] / b.dz[k - 1];
                        dg.a1[b.ex(i, j, k)] = v;
                    }
                    if (j + 1 < b.ny) {
                        double v = 0.0;
                        if (i + 1 < b.nx) v += b.dy[j] * b.dzd[k] / b.dx[i];
                        if (i > 0) v += b.dy[j] * b.dzd[k] / b.dx[i - 1];
                        if (k + 1 < b.nz) v += b.dy[j] * b.dxd[i] / b.dz[k];
                        if (k > 0) v += b.dy[j] * b.dxd[i] / b.dz[k - 1];
                        dg.a2[b.ey(i, j, k)] = v;
                    }
                    if (k + 1 < b.nz) {
                        double v = 0.0;
                        if (i + 1 < b.nx) v += b.dz[k] * b.dyd[j] / b.dx[i];
                        if (i > 0) v += b.dz[k] * b.dyd[j] / b.dx[i - 1];
                        if (j + 1 < b.ny) v += b.dz[k] * b.dxd[i] / b.dy[j];
                        if (j > 0) v += b.dz[k] * b.dxd[i] / b.dy[j - 1];
                        dg.a3[b.ez(i, j, k)] = v;
                    }
                }
        if (with_trace)
            for (std::size_t s = 0; s < slice_k.size(); ++s)
                for (int kk : {slice_k[s], slice_k[s] + 1}) {
                    for (int j = 0; j < lg.ny; ++j)
                        for (int i = 0; i + 1 < lg.nx; ++i)
                            if (lg.xedge[lg.ex(i, j)])
                                dg.a1[b.ex(b.ix0 + i, b.iy0 + j, kk)] += 0.25 * lambda[s];
                    for (int j = 0; j + 1 < lg.ny; ++j)
                        for (int i = 0; i < lg.nx; ++i)
                            if (lg.yedge[lg.ey(i, j)])
                                dg.a2[b.ey(b.ix0 + i, b.iy0 + j, kk)] += 0.25 * lambda[s];
                }
        Vec diag = flatten(dg), mask = flatten(free), inv(diag.size(), 0.0);
        for (std::size_t e = 0; e < diag.size(); ++e)
            if (mask[e] > 0 && diag[e] > 0) inv[e] = 1.0 / diag[e];
        return inv;
    }

    // Hessian action on a flat increment.
    void apply(const Vec& x, Vec& y, bool with_trace) const {
        MagneticPotential dA = zero_potential(d);
        unflatten(x, dA);
        MagneticPotential h = magnetic_gradient(d, dA, 0.0);
        if (with_trace) {
            std::vector<std::pair<Vec, Vec>> r(slice_k.size());
            for (std::size_t s = 0; s < slice_k.size(); ++s) {
                LayerTrace t = slice_trace(dA, s);
                r[s] = {std::move(t.t1), std::move(t.t2)};
            }
            add_trace_adjoint(r, h);
        }
        y = flatten(h);
    }
};

// Accelerated primal-dual iterations for min_v 1/2|v - a|^2 + 1/2|K v|_1 on one slice.
// Returns the slice gap (unweighted).
double rof_slice(const LayerGrid& g, const Vec& a1, const Vec& a2, Vec& v1, Vec& v2, Vec& p,
                 double sigma0, double tau0, int iters, double tol) {
    double tau = tau0, sigma = sigma0;
    Vec vb1 = v1, vb2 = v2;
    auto gap = [&]() {
        long double pr = 0.0L, du = 0.0L, aa = 0.0L;
        Vec c = plaquette_curl(g, v1, v2);
        auto [r1, r2] = rot_of_plaquette_field(g, p);
        for (std::size_t e = 0; e < a1.size(); ++e)
            if (g.xedge[e]) {
                pr += 0.5L * std::pow((long double)(v1[e] - a1[e]), 2);
                du += 0.5L * std::pow((long double)(a1[e] - r1[e]), 2);
                aa += 0.5L * (long double)a1[e] * a1[e];
            }
        for (std::size_t e = 0; e < a2.size(); ++e)
            if (g.yedge[e]) {
                pr += 0.5L * std::pow((long double)(v2[e] - a2[e]), 2);
                du += 0.5L * std::pow((long double)(a2[e] - r2[e]), 2);
                aa += 0.5L * (long double)a2[e] * a2[e];
            }
        for (std::size_t P = 0; P < c.size(); ++P)
            if (g.plaq[P]) pr += 0.5L * std::abs(c[P]);
        return double(pr - (aa - du));
    };
    for (int it = 0; it < iters; ++it) {
        Vec c = plaquette_curl(g, vb1, vb2);
        for (std::size_t P = 0; P < p.size(); ++P)
            p[P] = g.plaq[P] ? std::clamp(p[P] + sigma * c[P], -0.5, 0.5) : 0.0;
        auto [r1, r2] = rot_of_plaquette_field(g, p);
        const double theta = 1.0 / std::sqrt(1.0 + 2.0 * tau);
        for (std::size_t e = 0; e < v1.size(); ++e) {
            if (!g.xedge[e]) continue;
            double vn = (v1[e] - tau * r1[e] + tau * a1[e]) / (1.0 + tau);
            vb1[e] = vn + theta * (vn - v1[e]);
            v1[e] = vn;
        }
        for (std::size_t e = 0; e < v2.size(); ++e) {
            if (!g.yedge[e]) continue;
            double vn = (v2[e] - tau * r2[e] + tau * a2[e]) / (1.0 + tau);
            vb2[e] = vn + theta * (vn - v2[e]);
            v2[e] = vn;
        }
        tau *= theta;
        sigma /= theta;
        if ((it + 1) % 50 == 0 && gap() <= tol) break;
    }
    return gap();
}

} // namespace

MagneticPotential solve_limit_potential(const Domain& d, const VectorField2DStack& v, double h0,
                                        const MagneticPotential* warm, double cg_tol,
                                        CGResult* info) {
    LimitProblem lp(d, h0);
    if (v.slices.size() != lp.slice_k.size())
        throw std::invalid_argument("v must have one slice per box cell in [0, L]");
    MagneticPotential A = warm ? *warm : applied_potential(d, h0);
    A.h_ex = h0;
    clamp_boundary(d, A);
    // Solve H x = b for the free edges, b the negative gradient at the
    // clamped values alone, so the tolerance is relative to the full
    // right-hand side and a warm start cannot drive CG into round-off.
    MagneticPotential Ac = zero_potential(d);
    Ac.h_ex = h0;
    clamp_boundary(d, Ac);
    MagneticPotential g = magnetic_gradient(d, Ac, h0);
    std::vector<std::pair<Vec, Vec>> r(lp.slice_k.size());
    for (std::size_t s = 0; s < r.size(); ++s) {
        LayerTrace t = lp.slice_trace(Ac, s);
        for (std::size_t e = 0; e < t.t1.size(); ++e) t.t1[e] -= v.slices[s].v1[e];
        for (std::size_t e = 0; e < t.t2.size(); ++e) t.t2[e] -= v.slices[s].v2[e];
        r[s] = {std::move(t.t1), std::move(t.t2)};
    }
    lp.add_trace_adjoint(r, g);
    Vec rhs = flatten(g);
    for (double& x : rhs) x = -x;
    Vec dinv = lp.jacobi(true);
    const Vec mask = flatten(lp.free);
    Vec x = flatten(A), base = flatten(Ac);
    for (std::size_t e = 0; e < x.size(); ++e) x[e] = mask[e] > 0 ? x[e] : 0.0;
    CGResult cg = conjugate_gradient([&](const Vec& y, Vec& hy) { lp.apply(y, hy, true); }, rhs, x, dinv,
                                     cg_tol, 20000);
    if (info) *info = cg;
    axpy(1.0, x, base);
    unflatten(base, A);
    return A;
}

double limit_dual_value(const Domain& d, const VectorField2DStack& p, double h0, double cg_tol) {
    LimitProblem lp(d, h0);
    const LayerGrid& g = d.layer;
    std::vector<std::pair<Vec, Vec>> kp(lp.slice_k.size());
    long double quad = 0.0L;
    for (std::size_t s = 0; s < kp.size(); ++s) {
        kp[s] = rot_of_plaquette_field(g, p.slices[s].v1);
        quad += lp.lambda[s] * (dot(kp[s].first, kp[s].first) + dot(kp[s].second, kp[s].second));
    }
    MagneticPotential c = zero_potential(d);
    lp.add_trace_adjoint(kp, c);
    Vec cv = flatten(c);
    Vec rhs = cv;
    for (double& x : rhs) x = -x;
    Vec dinv = lp.jacobi(false);
    Vec dx(rhs.size(), 0.0);
    conjugate_gradient([&](const Vec& x, Vec& y) { lp.apply(x, y, false); }, rhs, dx, dinv, cg_tol,
                       20000);
    MagneticPotential A = applied_potential(d, h0);
    Vec a = flatten(A);
    axpy(1.0, dx, a);
    unflatten(a, A);
    double phi = magnetic_energy(d, A, h0) + dot(cv, a);
    return phi - 0.5 * double(quad);
}

LimitResult minimize_limit(const Domain& d, double h0, const SolveOptions& opts) {
    if (!(h0 >= 0)) throw std::invalid_argument("h0 must be nonnegative");
    const LayerGrid& g = d.layer;
    LimitProblem lp(d, h0);
    LimitResult res;
    res.v = zero_cell_stack(d);
    res.dual = zero_cell_stack(d);
    for (Slice2D& s : res.dual.slices) {
        s.v1.assign(g.n_plaq(), 0.0);
        s.v2.clear();
    }
    res.A = applied_potential(d, h0);

    const double L2 = curl_norm_squared(g) * 1.01;
    double tau0 = opts.pd_tau, sigma0 = opts.pd_sigma;
    if (tau0 <= 0 || sigma0 <= 0) tau0 = sigma0 = 1.0 / std::sqrt(L2);
    if (sigma0 * tau0 * L2 > 1.0 + 1e-12)
        throw std::invalid_argument("primal-dual steps violate sigma tau ||K||^2 <= 1");

    SolveReport& rep = res.report;
    rep.stop_reason = "outer_iters";
    double gap = 0.0;
    const double slice_tol = 0.1 * opts.gap_tol / std::max<std::size_t>(1, lp.slice_k.size());
    for (int it = 1; it <= opts.outer_iters; ++it) {
        res.A = solve_limit_potential(d, res.v, h0, &res.A, opts.cg_tol);
        for (std::size_t s = 0; s < lp.slice_k.size(); ++s) {
            LayerTrace t = lp.slice_trace(res.A, s);
            Slice2D& vs = res.v.slices[s];
            rof_slice(g, t.t1, t.t2, vs.v1, vs.v2, res.dual.slices[s].v1, sigma0, tau0,
                      opts.pd_iters, slice_tol / lp.lambda[s]);
        }
        LimitBreakdown val = limit_energy(d, res.v, res.A, h0);
        double dual = limit_dual_value(d, res.dual, h0, opts.cg_tol);
        gap = val.total - dual;
        rep.history.push_back({it, val.total, gap, 0.0});
        rep.iterations = it;
        if (gap <= opts.gap_tol) {
            rep.converged = true;
            rep.stop_reason = "gap_tol";
            break;
        }
    }
    res.value = limit_energy(d, res.v, res.A, h0);
    rep.energy = res.value.total;
    rep.gap = gap;
    return res;
}

void write_history_csv(const std::string& path, const SolveReport& r) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.precision(17);
    f << "iter,energy,measure,step\r\n";
    for (const HistoryRow& h : r.history)
        f << h.iter << ',' << h.energy << ',' << h.measure << ',' << h.step << "\r\n";
}

} // namespace ld
