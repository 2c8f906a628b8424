#include "ld/domain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ld {

namespace {

constexpr double kInsideTol = 1e-12;

int count_components(const LayerGrid& g, const std::vector<uint8_t>& in) {
    std::vector<uint8_t> seen(in.size(), 0);
    std::vector<std::size_t> stack;
    int comps = 0;
    for (std::size_t start = 0; start < in.size(); ++start) {
        if (!in[start] || seen[start]) continue;
        ++comps;
        stack.push_back(start);
        seen[start] = 1;
        while (!stack.empty()) {
            std::size_t p = stack.back();
            stack.pop_back();
            int i = int(p % g.nx), j = int(p / g.nx);
            const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
            for (int d = 0; d < 4; ++d) {
                int a = i + di[d], b = j + dj[d];
                if (a < 0 || b < 0 || a >= g.nx || b >= g.ny) continue;
                std::size_t q = g.node(a, b);
                if (in[q] && !seen[q]) {
                    seen[q] = 1;
                    stack.push_back(q);
                }
            }
        }
    }
    return comps;
}

// Extends a uniform core outward to [lo, hi] with geometric growth.
std::vector<double> graded_axis(const std::vector<double>& core, double lo, double hi,
                                double h_lo, double h_hi, double growth, double hmax,
                                int& offset) {
    std::vector<double> below, above;
    double cur = core.front(), d = h_lo;
    while (cur > lo) {
        d = std::min(d * growth, hmax);
        double nxt = cur - d;
        if (nxt - lo < 0.5 * d) nxt = lo;
        below.push_back(nxt);
        cur = nxt;
    }
    cur = core.back();
    d = h_hi;
    while (cur < hi) {
        d = std::min(d * growth, hmax);
        double nxt = cur + d;
        if (hi - nxt < 0.5 * d) nxt = hi;
        above.push_back(nxt);
        cur = nxt;
    }
    std::vector<double> out(below.rbegin(), below.rend());
    offset = int(out.size());
    out.insert(out.end(), core.begin(), core.end());
    out.insert(out.end(), above.begin(), above.end());
    return out;
}

void widths(const std::vector<double>& c, std::vector<double>& w, std::vector<double>& wd) {
    std::size_t n = c.size();
    w.assign(n - 1, 0.0);
    wd.assign(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) w[i] = c[i + 1] - c[i];
    for (std::size_t i = 0; i < n; ++i) {
        double l = i > 0 ? w[i - 1] : 0.0;
        double r = i + 1 < n ? w[i] : 0.0;
        wd[i] = 0.5 * (l + r);
    }
}

} // namespace

double DomainSpec::half_x() const { return shape == Shape::disk ? radius : 0.5 * width; }
double DomainSpec::half_y() const { return shape == Shape::disk ? radius : 0.5 * height; }

double DomainSpec::diameter() const {
    double planar = shape == Shape::disk ? 2.0 * radius : std::hypot(width, height);
    return std::hypot(planar, L);
}

double DomainSpec::area() const {
    return shape == Shape::disk ? M_PI * radius * radius : width * height;
}

double DomainSpec::box_half_width() const { return R_box > 0 ? R_box : 2.0 * diameter(); }

double DomainSpec::coarsest_box_spacing() const {
    return h_box > 0 ? h_box : 0.25 * box_half_width();
}

bool DomainSpec::inside(double x, double y) const {
    if (shape == Shape::disk) return x * x + y * y <= radius * radius * (1.0 + kInsideTol);
    return std::abs(x) <= 0.5 * width + kInsideTol && std::abs(y) <= 0.5 * height + kInsideTol;
}

double DomainSpec::boundary_distance(double x, double y) const {
    if (shape == Shape::disk) return radius - std::hypot(x, y);
    return std::min(0.5 * width - std::abs(x), 0.5 * height - std::abs(y));
}

bool DomainSpec::square_inside(double x0, double y0, double x1, double y1) const {
    if (shape == Shape::disk) {
        double fx = std::max(std::abs(x0), std::abs(x1));
        double fy = std::max(std::abs(y0), std::abs(y1));
        return fx * fx + fy * fy < radius * radius;
    }
    return x0 > -0.5 * width && x1 < 0.5 * width && y0 > -0.5 * height && y1 < 0.5 * height;
}

std::vector<double> layer_positions(const DomainSpec& spec) {
    if (spec.N < 1) throw std::invalid_argument("N must be at least 1");
    std::vector<double> z(spec.N + 1);
    for (int n = 0; n <= spec.N; ++n) z[n] = (n * spec.L) / spec.N;
    return z;
}

std::size_t LayerGrid::mask_count() const {
    return std::size_t(std::count(mask.begin(), mask.end(), uint8_t(1)));
}

std::size_t LayerGrid::plaq_count() const {
    return std::size_t(std::count(plaq.begin(), plaq.end(), uint8_t(1)));
}

LayerGrid build_layer_grid(const DomainSpec& spec) {
    if (!(spec.h_grid > 0)) throw std::invalid_argument("h_grid must be positive");
    if (spec.shape == Shape::disk && !(spec.radius > 0))
        throw std::invalid_argument("disk radius must be positive");
    if (spec.shape == Shape::rectangle && !(spec.width > 0 && spec.height > 0))
        throw std::invalid_argument("rectangle sides must be positive");
    LayerGrid g;
    g.h = spec.h_grid;
    int hx = int(std::ceil(spec.half_x() / g.h - 1e-9)) + 2;
    int hy = int(std::ceil(spec.half_y() / g.h - 1e-9)) + 2;
    g.nx = 2 * hx + 1;
    g.ny = 2 * hy + 1;
    g.x0 = -hx * g.h;
    g.y0 = -hy * g.h;
    g.mask.assign(g.n_nodes(), 0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) g.mask[g.node(i, j)] = spec.inside(g.x(i), g.y(j)) ? 1 : 0;

    if (g.mask_count() == 0) throw std::invalid_argument("cross-section mask is empty");
    std::vector<uint8_t> outside(g.mask.size());
    for (std::size_t p = 0; p < g.mask.size(); ++p) outside[p] = g.mask[p] ? 0 : 1;
    if (count_components(g, g.mask) != 1)
        throw std::invalid_argument("cross-section mask is not connected");
    if (count_components(g, outside) != 1)
        throw std::invalid_argument("cross-section mask is not simply connected");

    g.boundary.assign(g.n_nodes(), 0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            std::size_t p = g.node(i, j);
            if (!g.mask[p]) continue;
            bool b = !g.mask[g.node(i + 1, j)] || !g.mask[g.node(i - 1, j)] ||
                     !g.mask[g.node(i, j + 1)] || !g.mask[g.node(i, j - 1)];
            g.boundary[p] = b ? 1 : 0;
        }
    g.xedge.assign(g.n_xedges(), 0);
    g.yedge.assign(g.n_yedges(), 0);
    g.plaq.assign(g.n_plaq(), 0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i + 1 < g.nx; ++i)
            g.xedge[g.ex(i, j)] = g.mask[g.node(i, j)] && g.mask[g.node(i + 1, j)];
    for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            g.yedge[g.ey(i, j)] = g.mask[g.node(i, j)] && g.mask[g.node(i, j + 1)];
    for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i + 1 < g.nx; ++i)
            g.plaq[g.pl(i, j)] = g.mask[g.node(i, j)] && g.mask[g.node(i + 1, j)] &&
                                 g.mask[g.node(i, j + 1)] && g.mask[g.node(i + 1, j + 1)];
    return g;
}

Domain build_domain(const DomainSpec& spec) {
    if (spec.N < 1) throw std::invalid_argument("N must be at least 1");
    if (!(spec.L > 0)) throw std::invalid_argument("L must be positive");
    if (spec.z_cells < 1) throw std::invalid_argument("z_cells must be at least 1");
    if (!(spec.growth >= 1.0)) throw std::invalid_argument("growth must be >= 1");
    Domain d;
    d.spec = spec;
    d.layer = build_layer_grid(spec);

    const double R = spec.box_half_width();
    const double hmax = spec.coarsest_box_spacing();
    const double reach = std::max({spec.half_x(), spec.half_y(), 0.5 * spec.L});
    if (R - reach < 0.5 * R)
        throw std::invalid_argument("box too small: margin around D below R_box/2");
    const LayerGrid& g = d.layer;
    if (-g.x0 >= R || -g.y0 >= R) throw std::invalid_argument("box too small for the layer window");
    if (hmax < g.h) throw std::invalid_argument("h_box below h_grid");

    BoxGrid& b = d.box;
    std::vector<double> cx(g.nx), cy(g.ny);
    for (int i = 0; i < g.nx; ++i) cx[i] = g.x(i);
    for (int j = 0; j < g.ny; ++j) cy[j] = g.y(j);
    b.x = graded_axis(cx, -R, R, g.h, g.h, spec.growth, hmax, b.ix0);
    b.y = graded_axis(cy, -R, R, g.h, g.h, spec.growth, hmax, b.iy0);

    const int planes = spec.N * spec.z_cells;
    std::vector<double> cz(planes + 1);
    for (int k = 0; k <= planes; ++k) cz[k] = (k * spec.L) / planes;
    const double hz = spec.L / planes;
    int kz = 0;
    b.z = graded_axis(cz, 0.5 * spec.L - R, 0.5 * spec.L + R, hz, hz, spec.growth,
                      std::max(hmax, hz), kz);
    b.k0 = kz;
    b.k1 = kz + planes;
    b.layer_k.resize(spec.N + 1);
    for (int n = 0; n <= spec.N; ++n) b.layer_k[n] = kz + n * spec.z_cells;

    b.nx = int(b.x.size());
    b.ny = int(b.y.size());
    b.nz = int(b.z.size());
    widths(b.x, b.dx, b.dxd);
    widths(b.y, b.dy, b.dyd);
    widths(b.z, b.dz, b.dzd);
    return d;
}

} // namespace ld
