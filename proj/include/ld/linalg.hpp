#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace ld {

using Vec = std::vector<double>;

// Sums are accumulated in fixed-size blocks and combined in block order,
// so results do not depend on the thread count.
constexpr std::size_t kBlock = 4096;

double dot(const Vec& a, const Vec& b);
double sum(const Vec& a);
double norm2(const Vec& a); // Euclidean norm
void axpy(double alpha, const Vec& x, Vec& y);

// Ordered sum of per-block partials in extended precision.
double combine(const std::vector<long double>& partials);

struct CGResult {
    int iterations = 0;
    double residual = 0.0; // relative residual ||b - Ax|| / ||b||
    bool converged = false;
};

// Preconditioned conjugate gradients for a symmetric positive
// (semi)definite operator. `diag_inv` is a Jacobi preconditioner; entries
// set to zero freeze the corresponding unknowns.
CGResult conjugate_gradient(const std::function<void(const Vec&, Vec&)>& apply, const Vec& b,
                            Vec& x, const Vec& diag_inv, double rtol, int max_iters);

} // namespace ld
