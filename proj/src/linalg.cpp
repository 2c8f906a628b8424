#include "ld/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace ld {

namespace {

template <class F>
double blocked(std::size_t n, F&& term) {
    std::size_t nb = (n + kBlock - 1) / kBlock;
    std::vector<long double> part(nb, 0.0L);
#pragma omp parallel for schedule(static)
    for (long b = 0; b < long(nb); ++b) {
        long double acc = 0.0L;
        std::size_t hi = std::min(n, std::size_t(b + 1) * kBlock);
        for (std::size_t i = std::size_t(b) * kBlock; i < hi; ++i) acc += term(i);
        part[b] = acc;
    }
    return combine(part);
}

} // namespace

double combine(const std::vector<long double>& partials) {
    long double acc = 0.0L;
    for (long double p : partials) acc += p;
    return double(acc);
}

double dot(const Vec& a, const Vec& b) {
    return blocked(a.size(), [&](std::size_t i) { return (long double)a[i] * b[i]; });
}

double sum(const Vec& a) {
    return blocked(a.size(), [&](std::size_t i) { return (long double)a[i]; });
}

double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, const Vec& x, Vec& y) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < long(x.size()); ++i) y[i] += alpha * x[i];
}

CGResult conjugate_gradient(const std::function<void(const Vec&, Vec&)>& apply, const Vec& b,
                            Vec& x, const Vec& diag_inv, double rtol, int max_iters) {
    const std::size_t n = b.size();
    CGResult res;
    if (x.size() != n) x.assign(n, 0.0);
    Vec r(n), z(n), p(n), q(n);
    Vec bm(n);
    for (std::size_t i = 0; i < n; ++i) bm[i] = diag_inv[i] != 0.0 ? b[i] : 0.0;
    const double bnorm = norm2(bm);
    if (bnorm == 0.0) {
        for (std::size_t i = 0; i < n; ++i)
            if (diag_inv[i] != 0.0) x[i] = 0.0;
        res.converged = true;
        return res;
    }
    apply(x, q);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < long(n); ++i) {
        r[i] = diag_inv[i] != 0.0 ? b[i] - q[i] : 0.0;
        z[i] = diag_inv[i] * r[i];
        p[i] = z[i];
    }
    double rz = dot(r, z);
    double rnorm = norm2(r);
    res.residual = rnorm / bnorm;
    if (res.residual <= rtol) {
        res.converged = true;
        return res;
    }
    for (int it = 1; it <= max_iters; ++it) {
        apply(p, q);
#pragma omp parallel for schedule(static)
        for (long i = 0; i < long(n); ++i)
            if (diag_inv[i] == 0.0) q[i] = 0.0;
        double pq = dot(p, q);
        if (!(pq > 0.0)) {
            res.iterations = it;
            break;
        }
        double alpha = rz / pq;
#pragma omp parallel for schedule(static)
        for (long i = 0; i < long(n); ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
            z[i] = diag_inv[i] * r[i];
        }
        double rz_new = dot(r, z);
        rnorm = norm2(r);
        res.iterations = it;
        res.residual = rnorm / bnorm;
        if (res.residual <= rtol) {
            res.converged = true;
            break;
        }
        double beta = rz_new / rz;
        rz = rz_new;
#pragma omp parallel for schedule(static)
        for (long i = 0; i < long(n); ++i) p[i] = z[i] + beta * p[i];
    }
    return res;
}

} // namespace ld
