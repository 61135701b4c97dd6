#pragma once

#include <span>
#include <string>
#include <vector>

#include "doaopt/errors.hpp"

namespace doaopt {

// Axis-aligned box. For state-space regions lo[k] < hi[k] is required
// (validated where boxes enter the library); face geometry reuses the
// type with one collapsed axis (lo[axis] == hi[axis]).
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    Box() = default;
    Box(std::vector<double> lo_, std::vector<double> hi_)
        : lo(std::move(lo_)), hi(std::move(hi_)) {}

    int dim() const { return static_cast<int>(lo.size()); }
    double volume() const;
    bool contains(std::span<const double> x) const;  // closed box
};

// Throws InvalidArgument unless box has positive extent in every axis.
void validate_box(const Box& box, const std::string& what);

inline constexpr long kBoundary = -1;

// Uniform rectangular partition of a box. Cells are indexed row-major:
// the last axis varies fastest, cell index = sum_k i_k * stride_k with
// stride_{d-1} = 1. Cell (i_0,...,i_{d-1}) covers
// [lo_k + i_k*w_k, lo_k + (i_k+1)*w_k] per axis, w_k = (hi_k-lo_k)/res_k.
class Grid {
public:
    Grid() = default;
    Grid(Box box, std::vector<int> resolution);

    int dim() const { return static_cast<int>(res_.size()); }
    long cell_count() const { return n_; }
    const Box& box() const { return box_; }
    const std::vector<int>& resolution() const { return res_; }
    double width(int axis) const { return widths_[axis]; }
    const std::vector<double>& widths() const { return widths_; }
    double cell_volume() const { return cell_volume_; }

    long flat_index(std::span<const int> multi) const;
    void multi_index(long cell, std::span<int> out) const;
    void cell_center(long cell, std::span<double> out) const;
    std::vector<double> cell_center(long cell) const;
    Box cell_box(long cell) const;

    // Neighbor across the face with outer normal side*e_axis, or
    // kBoundary if that face lies on the domain boundary.
    long neighbor(long cell, int axis, int side) const;

    bool operator==(const Grid& other) const {
        return box_.lo == other.box_.lo && box_.hi == other.box_.hi &&
               res_ == other.res_;
    }

private:
    Box box_;
    std::vector<int> res_;
    std::vector<double> widths_;
    std::vector<long> strides_;
    long n_ = 0;
    double cell_volume_ = 0.0;
};

Grid build_grid(const Box& box, const std::vector<int>& resolution);

// One ordered face record: `owner` exports probability mass through this
// face in direction orientation*e_axis. Boundary faces carry
// neighbor == kBoundary. geometry is the (d-1)-dimensional face box
// (collapsed along `axis`); measure is its (d-1) volume (1 when d == 1).
struct Face {
    long owner;
    long neighbor;
    int axis;
    int orientation;  // +1 or -1
    Box geometry;
    double measure;
};

// All 2*d faces of every cell, grouped by owner in index order.
std::vector<Face> enumerate_faces(const Grid& grid);

enum class SelectRule {
    Contained,   // cell entirely inside the region (closed comparison)
    CenterIn,    // cell center inside the region (closed comparison)
    Intersects,  // positive-volume overlap with the region
};

// Sorted, duplicate-free set of cell indices.
struct CellSet {
    std::vector<long> cells;
    std::string label;

    long size() const { return static_cast<long>(cells.size()); }
    bool empty() const { return cells.empty(); }
    bool contains(long cell) const;
};

CellSet select_cells(const Grid& grid, const Box& region, SelectRule rule,
                     std::string label = {});

// Same selection rules against a closed ball |x - center| <= radius.
CellSet select_cells_disk(const Grid& grid, std::span<const double> center,
                          double radius, SelectRule rule,
                          std::string label = {});

}  // namespace doaopt
