// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fluidrec/vec.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace fluidrec {

/// Uniform grid over particle positions with cell size equal to the kernel
/// radius. Within a cell, particle indices are stored in ascending order, and
/// the 27-cell stencil is visited in a fixed order, so candidate enumeration
/// is deterministic.
///
/// Occupied cells live in a dense array over the bounding box when that array
/// is small relative to the particle count; otherwise occupied cells are kept
/// as a sorted key list and looked up by binary search.
class HashGrid {
public:
    HashGrid() = default;

    /// Throws Error(NonFinitePosition) on NaN/Inf input, Error(InvalidArgument)
    /// when cell_size <= 0.
    static HashGrid build(std::span<const Vec3> positions, Real cell_size);

    /// Candidate indices from the 27 cells around x, sorted ascending.
    /// The caller filters by exact distance.
    std::vector<std::uint32_t> neighbors(const Vec3& x) const;

    /// Calls f(index) for every candidate in the 27-cell stencil, in stencil
    /// order (not sorted across cells).
    template <class F>
    void for_each_candidate(const Vec3& x, F&& f) const;

    /// Cells within `reach` of the cell holding x (reach 1 is the stencil of
    /// for_each_candidate), reported as half-open ranges [begin, end) into
    /// order(). Adjacent cells along x arrive merged into one range.
    template <class F>
    void for_each_run(const Vec3& x, F&& f, int reach = 1) const;

    /// Particle indices grouped by cell, ascending within each cell.
    std::span<const std::uint32_t> order() const { return sorted_; }

    Real cell_size() const { return cell_size_; }
    std::size_t built_for_count() const { return count_; }
    std::size_t cell_count() const;

private:
    struct SparseCell {
        std::int64_t x, y, z;
        std::uint32_t begin, end;
    };

    bool cell_of(const Vec3& x, std::int64_t& cx, std::int64_t& cy, std::int64_t& cz) const;
    std::span<const std::uint32_t> sparse_range(std::int64_t x, std::int64_t y, std::int64_t z) const;

    Real cell_size_ = 1.0;
    Real inv_cell_ = 1.0;
    std::size_t count_ = 0;
    Vec3 origin_ = Vec3::Zero();
    bool dense_ = true;
    std::int64_t dims_[3] = {0, 0, 0};
    std::vector<std::uint32_t> cell_start_;  // dense: size ncells + 1
    std::vector<SparseCell> sparse_;         // sparse: sorted by (z, y, x)
    std::vector<std::uint32_t> sorted_;      // particle indices grouped by cell
};

template <class F>
void HashGrid::for_each_run(const Vec3& x, F&& f, int reach) const
{
    if (count_ == 0) {
        return;
    }
    std::int64_t cx, cy, cz;
    if (!cell_of(x, cx, cy, cz)) {
        return;
    }
    if (dense_) {
        const std::int64_t nx = dims_[0], ny = dims_[1], nz = dims_[2];
        if (cx < -reach || cy < -reach || cz < -reach || cx >= nx + reach || cy >= ny + reach ||
            cz >= nz + reach) {
            return;
        }
        const std::int64_t x0 = std::max<std::int64_t>(cx - reach, 0);
        const std::int64_t x1 = std::min<std::int64_t>(cx + reach, nx - 1);
        if (x0 > x1) {
            return;
        }
        for (std::int64_t z = cz - reach; z <= cz + reach; ++z) {
            if (z < 0 || z >= nz) {
                continue;
            }
            for (std::int64_t y = cy - reach; y <= cy + reach; ++y) {
                if (y < 0 || y >= ny) {
                    continue;
                }
                const std::int64_t row = (z * ny + y) * nx;
                const std::uint32_t b = cell_start_[static_cast<std::size_t>(row + x0)];
                const std::uint32_t e = cell_start_[static_cast<std::size_t>(row + x1 + 1)];
                if (b < e) {
                    f(b, e);
                }
            }
        }
        return;
    }
    for (std::int64_t z = cz - reach; z <= cz + reach; ++z) {
        for (std::int64_t y = cy - reach; y <= cy + reach; ++y) {
            for (std::int64_t xx = cx - reach; xx <= cx + reach; ++xx) {
                const std::span<const std::uint32_t> r = sparse_range(xx, y, z);
                if (!r.empty()) {
                    const auto b = static_cast<std::uint32_t>(r.data() - sorted_.data());
                    f(b, b + static_cast<std::uint32_t>(r.size()));
                }
            }
        }
    }
}

template <class F>
void HashGrid::for_each_candidate(const Vec3& x, F&& f) const
{
    for_each_run(x, [&](std::uint32_t b, std::uint32_t e) {
        for (std::uint32_t k = b; k < e; ++k) {
            f(sorted_[k]);
        }
    });
}

}  // namespace fluidrec
