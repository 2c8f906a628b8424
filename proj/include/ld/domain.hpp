#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ld {

enum class Shape { disk, rectangle };

// Cross-section, cylinder height, layer count and box truncation.
// The rectangle is centered at the origin, as is the disk.
struct DomainSpec {
    Shape shape = Shape::disk;
    double radius = 1.0;
    double width = 1.0;
    double height = 1.0;
    double h_grid = 0.05;
    double L = 1.0;
    int N = 4;
    double R_box = 0.0;  // 0 selects 2 * diam(D)
    double h_box = 0.0;  // coarsest box spacing, 0 selects R_box / 4
    int z_cells = 2;     // box cells between neighbouring layers
    double growth = 1.5; // spacing ratio in the graded part of the box

    double s() const { return L / N; }
    double half_x() const;
    double half_y() const;
    double diameter() const;
    double area() const;
    double box_half_width() const;
    double coarsest_box_spacing() const;

    bool inside(double x, double y) const;
    // Distance to the boundary, positive inside.
    double boundary_distance(double x, double y) const;
    // True when the closed square lies in the open cross-section.
    bool square_inside(double x0, double y0, double x1, double y1) const;
};

std::vector<double> layer_positions(const DomainSpec& spec);

// Uniform node lattice covering the cross-section with a two node margin.
// Node (i, j) sits at (x0 + i h, y0 + j h); the origin is always a node.
struct LayerGrid {
    int nx = 0, ny = 0;
    double h = 0.0, x0 = 0.0, y0 = 0.0;
    std::vector<uint8_t> mask;     // nodes in the closure of Omega
    std::vector<uint8_t> boundary; // mask nodes with a 4-neighbour outside
    std::vector<uint8_t> xedge;    // both ends in mask
    std::vector<uint8_t> yedge;
    std::vector<uint8_t> plaq;     // all four corners in mask

    std::size_t node(int i, int j) const { return std::size_t(i) + std::size_t(nx) * j; }
    std::size_t ex(int i, int j) const { return std::size_t(i) + std::size_t(nx - 1) * j; }
    std::size_t ey(int i, int j) const { return std::size_t(i) + std::size_t(nx) * j; }
    std::size_t pl(int i, int j) const { return std::size_t(i) + std::size_t(nx - 1) * j; }
    std::size_t n_nodes() const { return std::size_t(nx) * ny; }
    std::size_t n_xedges() const { return std::size_t(nx - 1) * ny; }
    std::size_t n_yedges() const { return std::size_t(nx) * (ny - 1); }
    std::size_t n_plaq() const { return std::size_t(nx - 1) * (ny - 1); }
    double x(int i) const { return x0 + i * h; }
    double y(int j) const { return y0 + j * h; }
    double cell_area() const { return h * h; }
    std::size_t mask_count() const;
    std::size_t plaq_count() const;
    double mask_area() const { return double(mask_count()) * h * h; }
};

// Tensor-product box grid: uniform where it overlaps the layer window and
// D, geometrically graded outside. Layers sit on node planes.
struct BoxGrid {
    int nx = 0, ny = 0, nz = 0;
    std::vector<double> x, y, z;
    std::vector<double> dx, dy, dz;    // cell widths
    std::vector<double> dxd, dyd, dzd; // dual widths at nodes
    int ix0 = 0, iy0 = 0;              // window node (0,0) in box indices
    int k0 = 0, k1 = 0;                // planes z = 0 and z = L
    std::vector<int> layer_k;

    std::size_t node(int i, int j, int k) const {
        return std::size_t(i) + std::size_t(nx) * (std::size_t(j) + std::size_t(ny) * k);
    }
    std::size_t ex(int i, int j, int k) const {
        return std::size_t(i) + std::size_t(nx - 1) * (std::size_t(j) + std::size_t(ny) * k);
    }
    std::size_t ey(int i, int j, int k) const {
        return std::size_t(i) + std::size_t(nx) * (std::size_t(j) + std::size_t(ny - 1) * k);
    }
    std::size_t ez(int i, int j, int k) const {
        return std::size_t(i) + std::size_t(nx) * (std::size_t(j) + std::size_t(ny) * k);
    }
    std::size_t n_nodes() const { return std::size_t(nx) * ny * nz; }
    std::size_t n_ex() const { return std::size_t(nx - 1) * ny * nz; }
    std::size_t n_ey() const { return std::size_t(nx) * (ny - 1) * nz; }
    std::size_t n_ez() const { return std::size_t(nx) * ny * (nz - 1); }
};

struct Domain {
    DomainSpec spec;
    LayerGrid layer;
    BoxGrid box;

    double s() const { return spec.s(); }
    int N() const { return spec.N; }
};

LayerGrid build_layer_grid(const DomainSpec& spec);

// Throws std::invalid_argument on a bad spec.
Domain build_domain(const DomainSpec& spec);

} // namespace ld
