#include "ld/approx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <stdexcept>

#include "ld/recovery.hpp"

namespace ld {

namespace {

double smoothstep(double x) {
    x = std::clamp(x, 0.0, 1.0);
    return x * x * (3.0 - 2.0 * x);
}

} // namespace

ShellPartition make_shells(int m, double h) {
    if (m < 1) throw std::invalid_argument("shell index offset m must be positive");
    if (!(h > 0)) throw std::invalid_argument("grid spacing must be positive");
    ShellPartition p;
    p.m = m;
    p.t.push_back(1.0 / (m + 1));
    for (int k = 2;; ++k) {
        double next = 1.0 / (m + k);
        if (p.t.back() - next < 2.0 * h) break;
        p.t.push_back(next);
    }
    return p;
}

std::vector<double> ShellPartition::weights(double d) const {
    const int K = shells();
    std::vector<double> z(K, 0.0);
    if (K == 1) {
        z[0] = 1.0;
        return z;
    }
    // Phi_k rises from 0 at t_{k+1} to 1 at t_k.
    auto Phi = [&](int k) { return smoothstep((d - t[k + 1]) / (t[k] - t[k + 1])); };
    double prev = 0.0;
    for (int k = 0; k + 1 < K; ++k) {
        double cur = Phi(k);
        z[k] = cur - prev;
        prev = cur;
    }
    z[K - 1] = 1.0 - prev;
    return z;
}

int ShellPartition::membership(double d) const {
    const int K = shells();
    if (K == 1) return d > 0 ? 1 : 0;
    int c = 0;
    for (int k = 0; k < K; ++k) {
        double lo = k + 1 < K ? t[k + 1] : 0.0;
        double hi = k == 0 ? std::numeric_limits<double>::infinity() : t[k - 1];
        if (d > lo && d < hi) ++c;
    }
    return c;
}

double cylinder_distance(const DomainSpec& spec, double x, double y, double z) {
    return std::min({spec.boundary_distance(x, y), z, spec.L - z});
}

namespace {

// One of the staggered lattices (x-edges, y-edges or plaquettes) with its mask.
struct EdgeLattice {
    int nx, ny;
    double h;
    const std::vector<uint8_t>* mask;
};

// Normalized discrete mollifier applied on one lattice.
Vec convolve(const EdgeLattice& lat, const Vec& f, double r) {
    if (r <= 0.0) return f;
    const int R = int(std::ceil(r / lat.h));
    std::vector<std::tuple<int, int, double>> ker;
    double total = 0.0;
    for (int b = -R; b <= R; ++b)
        for (int a = -R; a <= R; ++a) {
            double rho = std::hypot(a * lat.h, b * lat.h) / r;
            if (rho >= 1.0) continue;
            double w = mollifier(rho);
            ker.emplace_back(a, b, w);
            total += w;
        }
    for (auto& k : ker) std::get<2>(k) /= total;
    Vec out(f.size(), 0.0);
#pragma omp parallel for schedule(static)
    for (int j = 0; j < lat.ny; ++j)
        for (int i = 0; i < lat.nx; ++i) {
            std::size_t e = std::size_t(i) + std::size_t(lat.nx) * j;
            if (!(*lat.mask)[e]) continue;
            double acc = 0.0;
            for (const auto& [a, b, w] : ker) {
                int ii = i + a, jj = j + b;
                if (ii < 0 || jj < 0 || ii >= lat.nx || jj >= lat.ny) continue;
                acc += w * f[std::size_t(ii) + std::size_t(lat.nx) * jj];
            }
            out[e] = acc;
        }
    return out;
}

} // namespace

double stack_l2(const LayerGrid& g, const VectorField2DStack& v) {
    long double acc = 0.0L;
    for (const Slice2D& s : v.slices) acc += s.weight * edge_dot(g, s.v1, s.v2, s.v1, s.v2);
    return std::sqrt(double(acc));
}

std::pair<Vec, Vec> mollify_slice(const LayerGrid& g, const Vec& v1, const Vec& v2, double r) {
    const EdgeLattice xl{g.nx - 1, g.ny, g.h, &g.xedge};
    const EdgeLattice yl{g.nx, g.ny - 1, g.h, &g.yedge};
    return {convolve(xl, v1, r), convolve(yl, v2, r)};
}

namespace {

// Per-slice data of one shell: the piece v zeta_k and its curl commutator.
struct ShellPiece {
    Vec v1, v2, comm;
};

double l1_plaquettes(const LayerGrid& g, const Vec& a, const Vec& b) {
    long double acc = 0.0L;
    for (std::size_t P = 0; P < a.size(); ++P)
        if (g.plaq[P]) acc += std::abs(a[P] - b[P]);
    return double(acc) * g.h * g.h;
}

} // namespace

MollifyResult mollify_approx(const DomainSpec& spec, const LayerGrid& g, const VectorField2DStack& v,
                             double eps, int m) {
    if (!(eps > 0)) throw std::invalid_argument("target eps must be positive");
    for (const Slice2D& s : v.slices)
        for (const Vec* c : {&s.v1, &s.v2})
            for (double x : *c)
                if (!std::isfinite(x)) throw std::invalid_argument("v must be finite");
    if (m <= 0) {
        double inradius = std::min(std::min(spec.half_x(), spec.half_y()), 0.5 * spec.L);
        m = std::max(1, int(std::ceil(1.0 / inradius)));
    }
    const ShellPartition P = make_shells(m, g.h);
    const int K = P.shells();
    const EdgeLattice pl{g.nx - 1, g.ny - 1, g.h, &g.plaq};
    const std::size_t S = v.slices.size();

    std::vector<std::vector<ShellPiece>> piece(K, std::vector<ShellPiece>(S));
    for (std::size_t s = 0; s < S; ++s) {
        const Slice2D& sl = v.slices[s];
        for (int k = 0; k < K; ++k) piece[k][s] = {Vec(sl.v1.size(), 0.0), Vec(sl.v2.size(), 0.0), {}};
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i + 1 < g.nx; ++i) {
                std::size_t e = g.ex(i, j);
                if (!g.xedge[e]) continue;
                auto z = P.weights(cylinder_distance(spec, g.x(i) + 0.5 * g.h, g.y(j), sl.z));
                for (int k = 0; k < K; ++k) piece[k][s].v1[e] = z[k] * sl.v1[e];
            }
        for (int j = 0; j + 1 < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                std::size_t e = g.ey(i, j);
                if (!g.yedge[e]) continue;
                auto z = P.weights(cylinder_distance(spec, g.x(i), g.y(j) + 0.5 * g.h, sl.z));
                for (int k = 0; k < K; ++k) piece[k][s].v2[e] = z[k] * sl.v2[e];
            }
        const Vec cv = plaquette_curl(g, sl.v1, sl.v2);
        for (int k = 0; k < K; ++k) {
            Vec c = plaquette_curl(g, piece[k][s].v1, piece[k][s].v2);
            for (int j = 0; j + 1 < g.ny; ++j)
                for (int i = 0; i + 1 < g.nx; ++i) {
                    std::size_t q = g.pl(i, j);
                    if (!g.plaq[q]) continue;
                    auto z = P.weights(cylinder_distance(spec, g.x(i) + 0.5 * g.h, g.y(j) + 0.5 * g.h, sl.z));
                    c[q] -= z[k] * cv[q];
                }
            piece[k][s].comm = std::move(c);
        }
    }

    MollifyResult res;
    res.v.slices.resize(S);
    for (std::size_t s = 0; s < S; ++s)
        res.v.slices[s] = {v.slices[s].z, v.slices[s].weight, Vec(v.slices[s].v1.size(), 0.0),
                           Vec(v.slices[s].v2.size(), 0.0)};
    auto accumulate = [&](const std::vector<std::pair<Vec, Vec>>& add) {
        for (std::size_t s = 0; s < S; ++s) {
            Slice2D& o = res.v.slices[s];
            for (std::size_t e = 0; e < o.v1.size(); ++e) o.v1[e] += add[s].first[e];
            for (std::size_t e = 0; e < o.v2.size(); ++e) o.v2[e] += add[s].second[e];
        }
    };
    const double r_min = 1.5 * g.h;
    int k = 0;
    for (; k + 1 < K; ++k) {
        const double budget = eps / std::pow(2.0, k + 1);
        std::vector<double> ladder;
        for (double r = 0.5 * P.t[k + 1]; r >= r_min; r /= std::sqrt(2.0)) ladder.push_back(r);
        if (ladder.empty()) break;
        bool ok = false;
        double err = 0.0, comm = 0.0;
        for (double r : ladder) {
            std::vector<std::pair<Vec, Vec>> trial(S);
            long double sq = 0.0L, l1 = 0.0L;
            for (std::size_t s = 0; s < S; ++s) {
                const ShellPiece& pc = piece[k][s];
                const double wt = v.slices[s].weight;
                trial[s] = mollify_slice(g, pc.v1, pc.v2, r);
                Vec d1 = trial[s].first, d2 = trial[s].second;
                for (std::size_t e = 0; e < d1.size(); ++e) d1[e] -= pc.v1[e];
                for (std::size_t e = 0; e < d2.size(); ++e) d2[e] -= pc.v2[e];
                sq += wt * edge_dot(g, d1, d2, d1, d2);
                l1 += wt * l1_plaquettes(g, convolve(pl, pc.comm, r), pc.comm);
            }
            err = std::sqrt(double(sq));
            comm = double(l1);
            if (err < budget && comm < budget) {
                res.radius.push_back(r);
                res.shell_error.push_back(err);
                res.commutator_error.push_back(comm);
                accumulate(trial);
                ok = true;
                break;
            }
        }
        if (!ok) {
            if (k == 0) res.achievable = 2.0 * std::max(err, comm);
            break;
        }
    }
    res.mollified_shells = k;
    if (k == 0 && res.achievable == 0.0) res.achievable = std::numeric_limits<double>::infinity();
    // Shells the grid cannot mollify within budget join the boundary remainder.
    for (int j = k; j < K; ++j) {
        std::vector<std::pair<Vec, Vec>> rest(S);
        for (std::size_t s = 0; s < S; ++s) rest[s] = {piece[j][s].v1, piece[j][s].v2};
        accumulate(rest);
    }
    VectorField2DStack diff = res.v;
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t e = 0; e < diff.slices[s].v1.size(); ++e) diff.slices[s].v1[e] -= v.slices[s].v1[e];
        for (std::size_t e = 0; e < diff.slices[s].v2.size(); ++e) diff.slices[s].v2[e] -= v.slices[s].v2[e];
    }
    res.l2_error = stack_l2(g, diff);
    res.met = res.mollified_shells > 0 && res.l2_error < eps;
    return res;
}

double tv_slice(const LayerGrid& g, const Vec& v1, const Vec& v2) {
    Vec c = plaquette_curl(g, v1, v2);
    long double acc = 0.0L;
    for (std::size_t P = 0; P < c.size(); ++P)
        if (g.plaq[P]) acc += std::abs(c[P]);
    return double(acc) * g.h * g.h;
}

double tv_measure(const LayerGrid& g, const VectorField2DStack& v) {
    long double acc = 0.0L;
    for (const Slice2D& s : v.slices) acc += s.weight * tv_slice(g, s.v1, s.v2);
    return double(acc);
}

PlanarField reflect_extend(const PlanarField& v) {
    return [v](double x, double y, double z) -> std::pair<double, double> {
        if (y >= 0.0) return v(x, y, z);
        auto [a, b] = v(x, -y, z);
        return {a, -b};
    };
}

double strip_mass(const LayerGrid& g, const Vec& v1, const Vec& v2, double delta) {
    Vec c = plaquette_curl(g, v1, v2);
    long double acc = 0.0L;
    for (int j = 0; j + 1 < g.ny; ++j) {
        double yc = g.y(j) + 0.5 * g.h;
        if (std::abs(yc) >= delta) continue;
        for (int i = 0; i + 1 < g.nx; ++i) {
            std::size_t P = g.pl(i, j);
            if (g.plaq[P]) acc += std::abs(c[P]);
        }
    }
    return double(acc) * g.h * g.h;
}

} // namespace ld
