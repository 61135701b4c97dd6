#include "doaopt/grid.hpp"

#include <algorithm>
#include <cmath>

namespace doaopt {

double Box::volume() const {
    double v = 1.0;
    for (int k = 0; k < dim(); ++k) v *= hi[k] - lo[k];
    return v;
}

bool Box::contains(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != dim()) return false;
    for (int k = 0; k < dim(); ++k) {
        if (x[k] < lo[k] || x[k] > hi[k]) return false;
    }
    return true;
}

void validate_box(const Box& box, const std::string& what) {
    if (box.lo.size() != box.hi.size() || box.lo.empty()) {
        throw InvalidArgument(what + ": lo/hi must be non-empty and of equal length");
    }
    for (int k = 0; k < box.dim(); ++k) {
        if (!(box.lo[k] < box.hi[k])) {
            throw InvalidArgument(what + ": needs lo < hi in every axis");
        }
        if (!std::isfinite(box.lo[k]) || !std::isfinite(box.hi[k])) {
            throw InvalidArgument(what + ": bounds must be finite");
        }
    }
}

Grid::Grid(Box box, std::vector<int> resolution)
    : box_(std::move(box)), res_(std::move(resolution)) {
    validate_box(box_, "grid box");
    if (static_cast<int>(res_.size()) != box_.dim()) {
        throw InvalidArgument("grid resolution dimension does not match box");
    }
    const int d = dim();
    widths_.resize(d);
    strides_.resize(d);
    n_ = 1;
    cell_volume_ = 1.0;
    for (int k = 0; k < d; ++k) {
        if (res_[k] < 1) throw InvalidArgument("grid resolution must be >= 1 per axis");
        widths_[k] = (box_.hi[k] - box_.lo[k]) / res_[k];
        cell_volume_ *= widths_[k];
    }
    for (int k = d - 1; k >= 0; --k) {
        strides_[k] = n_;
        n_ *= res_[k];
    }
}

long Grid::flat_index(std::span<const int> multi) const {
    long idx = 0;
    for (int k = 0; k < dim(); ++k) idx += multi[k] * strides_[k];
    return idx;
}

void Grid::multi_index(long cell, std::span<int> out) const {
    for (int k = 0; k < dim(); ++k) {
        out[k] = static_cast<int>(cell / strides_[k]);
        cell %= strides_[k];
    }
}

void Grid::cell_center(long cell, std::span<double> out) const {
    const int d = dim();
    for (int k = 0; k < d; ++k) {
        const long i = cell / strides_[k];
        cell %= strides_[k];
        out[k] = box_.lo[k] + (static_cast<double>(i) + 0.5) * widths_[k];
    }
}

std::vector<double> Grid::cell_center(long cell) const {
    std::vector<double> c(dim());
    cell_center(cell, c);
    return c;
}

Box Grid::cell_box(long cell) const {
    const int d = dim();
    Box b;
    b.lo.resize(d);
    b.hi.resize(d);
    for (int k = 0; k < d; ++k) {
        const long i = cell / strides_[k];
        cell %= strides_[k];
        b.lo[k] = box_.lo[k] + static_cast<double>(i) * widths_[k];
        b.hi[k] = box_.lo[k] + static_cast<double>(i + 1) * widths_[k];
    }
    return b;
}

long Grid::neighbor(long cell, int axis, int side) const {
    const long i = (cell / strides_[axis]) % res_[axis];
    if (side > 0) {
        return i + 1 < res_[axis] ? cell + strides_[axis] : kBoundary;
    }
    return i > 0 ? cell - strides_[axis] : kBoundary;
}

Grid build_grid(const Box& box, const std::vector<int>& resolution) {
    return Grid(box, resolution);
}

std::vector<Face> enumerate_faces(const Grid& grid) {
    const int d = grid.dim();
    std::vector<Face> out;
    out.reserve(static_cast<size_t>(grid.cell_count()) * 2 * d);
    for (long cell = 0; cell < grid.cell_count(); ++cell) {
        const Box cb = grid.cell_box(cell);
        for (int axis = 0; axis < d; ++axis) {
            double measure = 1.0;
            for (int k = 0; k < d; ++k) {
                if (k != axis) measure *= grid.width(k);
            }
            for (int side : {-1, +1}) {
                Face f;
                f.owner = cell;
                f.neighbor = grid.neighbor(cell, axis, side);
                f.axis = axis;
                f.orientation = side;
                f.geometry = cb;
                const double plane = side > 0 ? cb.hi[axis] : cb.lo[axis];
                f.geometry.lo[axis] = plane;
                f.geometry.hi[axis] = plane;
                f.measure = measure;
                out.push_back(std::move(f));
            }
        }
    }
    return out;
}

bool CellSet::contains(long cell) const {
    return std::binary_search(cells.begin(), cells.end(), cell);
}

namespace {

template <typename Pred>
CellSet select_by(const Grid& grid, Pred&& keep, std::string label) {
    CellSet set;
    set.label = std::move(label);
    for (long cell = 0; cell < grid.cell_count(); ++cell) {
        if (keep(cell)) set.cells.push_back(cell);
    }
    return set;
}

}  // namespace

CellSet select_cells(const Grid& grid, const Box& region, SelectRule rule,
                     std::string label) {
    validate_box(region, "selection region");
    if (region.dim() != grid.dim()) {
        throw InvalidArgument("selection region dimension does not match grid");
    }
    const Box& domain = grid.box();
    for (int k = 0; k < grid.dim(); ++k) {
        const double over = std::min(region.hi[k], domain.hi[k]) -
                            std::max(region.lo[k], domain.lo[k]);
        if (!(over > 0.0)) {
            throw InvalidArgument("selection region does not overlap the grid box");
        }
    }

    const int d = grid.dim();
    std::vector<double> center(d);
    switch (rule) {
        case SelectRule::Contained:
            return select_by(grid, [&](long cell) {
                const Box cb = grid.cell_box(cell);
                for (int k = 0; k < d; ++k) {
                    if (cb.lo[k] < region.lo[k] || cb.hi[k] > region.hi[k]) return false;
                }
                return true;
            }, std::move(label));
        case SelectRule::CenterIn:
            return select_by(grid, [&](long cell) {
                grid.cell_center(cell, center);
                return region.contains(center);
            }, std::move(label));
        case SelectRule::Intersects:
            return select_by(grid, [&](long cell) {
                const Box cb = grid.cell_box(cell);
                for (int k = 0; k < d; ++k) {
                    const double over = std::min(cb.hi[k], region.hi[k]) -
                                        std::max(cb.lo[k], region.lo[k]);
                    if (!(over > 0.0)) return false;
                }
                return true;
            }, std::move(label));
    }
    throw InvalidArgument("unknown selection rule");
}

CellSet select_cells_disk(const Grid& grid, std::span<const double> center,
                          double radius, SelectRule rule, std::string label) {
    const int d = grid.dim();
    if (static_cast<int>(center.size()) != d) {
        throw InvalidArgument("disk center dimension does not match grid");
    }
    if (!(radius > 0.0) || !std::isfinite(radius)) {
        throw InvalidArgument("disk radius must be positive and finite");
    }
    // Overlap precondition via the disk's bounding box.
    const Box& domain = grid.box();
    for (int k = 0; k < d; ++k) {
        const double over = std::min(center[k] + radius, domain.hi[k]) -
                            std::max(center[k] - radius, domain.lo[k]);
        if (!(over > 0.0)) {
            throw InvalidArgument("disk region does not overlap the grid box");
        }
    }

    const double r2 = radius * radius;
    std::vector<double> pt(d);
    switch (rule) {
        case SelectRule::Contained:
            // Farthest cell corner from the center decides containment.
            return select_by(grid, [&](long cell) {
                const Box cb = grid.cell_box(cell);
                double dist2 = 0.0;
                for (int k = 0; k < d; ++k) {
                    const double far = std::max(std::abs(cb.lo[k] - center[k]),
                                                std::abs(cb.hi[k] - center[k]));
                    dist2 += far * far;
                }
                return dist2 <= r2;
            }, std::move(label));
        case SelectRule::CenterIn:
            return select_by(grid, [&](long cell) {
                grid.cell_center(cell, pt);
                double dist2 = 0.0;
                for (int k = 0; k < d; ++k) {
                    const double dk = pt[k] - center[k];
                    dist2 += dk * dk;
                }
                return dist2 <= r2;
            }, std::move(label));
        case SelectRule::Intersects:
            // Closest cell point strictly inside the ball gives
            // positive-volume overlap.
            return select_by(grid, [&](long cell) {
                const Box cb = grid.cell_box(cell);
                double dist2 = 0.0;
                for (int k = 0; k < d; ++k) {
                    const double c = std::clamp(center[k], cb.lo[k], cb.hi[k]);
                    const double dk = c - center[k];
                    dist2 += dk * dk;
                }
                return dist2 < r2;
            }, std::move(label));
    }
    throw InvalidArgument("unknown selection rule");
}

}  // namespace doaopt
