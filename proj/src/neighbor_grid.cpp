// SPDX-License-Identifier: Apache-2.0
#include "fluidrec/neighbor_grid.hpp"

#include "fluidrec/error.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace fluidrec {

namespace {

// Cell coordinates beyond this magnitude are treated as "far away".
constexpr Real kMaxCellCoord = 1e15;

}  // namespace

HashGrid HashGrid::build(std::span<const Vec3> positions, Real cell_size)
{
    if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
        throw Error(ErrorCode::InvalidArgument, "grid cell size must be positive");
    }
    if (positions.size() >= std::numeric_limits<std::uint32_t>::max()) {
        throw Error(ErrorCode::InvalidArgument, "too many particles for grid");
    }
    HashGrid g;
    g.cell_size_ = cell_size;
    g.inv_cell_ = 1.0 / cell_size;
    g.count_ = positions.size();
    if (positions.empty()) {
        return g;
    }

    Vec3 lo = positions[0], hi = positions[0];
    for (const Vec3& p : positions) {
        if (!is_finite(p)) {
            throw Error(ErrorCode::NonFinitePosition, "non-finite particle position in grid build");
        }
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    g.origin_ = lo;

    const Vec3 span_cells = (hi - lo) * g.inv_cell_;
    const Real max_dense = std::max<Real>(64.0 * static_cast<Real>(positions.size()), 1 << 20);
    Real dense_cells = 1.0;
    for (int a = 0; a < 3; ++a) {
        dense_cells *= std::floor(span_cells[a]) + 1.0;
    }
    g.dense_ = dense_cells <= max_dense;

    const std::size_t n = positions.size();
    std::vector<std::int64_t> cx(n), cy(n), cz(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 c = (positions[i] - lo) * g.inv_cell_;
        cx[i] = static_cast<std::int64_t>(std::floor(c.x()));
        cy[i] = static_cast<std::int64_t>(std::floor(c.y()));
        cz[i] = static_cast<std::int64_t>(std::floor(c.z()));
    }

    if (g.dense_) {
        for (int a = 0; a < 3; ++a) {
            g.dims_[a] = static_cast<std::int64_t>(std::floor(span_cells[a])) + 1;
        }
        const auto nx = g.dims_[0], ny = g.dims_[1];
        const std::size_t ncells = static_cast<std::size_t>(g.dims_[0] * g.dims_[1] * g.dims_[2]);
        std::vector<std::uint32_t> cell(n);
        g.cell_start_.assign(ncells + 1, 0);
        for (std::size_t i = 0; i < n; ++i) {
            cell[i] = static_cast<std::uint32_t>((cz[i] * ny + cy[i]) * nx + cx[i]);
            ++g.cell_start_[cell[i] + 1];
        }
        std::partial_sum(g.cell_start_.begin(), g.cell_start_.end(), g.cell_start_.begin());
        g.sorted_.resize(n);
        std::vector<std::uint32_t> fill(g.cell_start_.begin(), g.cell_start_.end() - 1);
        // Ascending i keeps each cell's indices sorted (counting sort is stable).
        for (std::size_t i = 0; i < n; ++i) {
            g.sorted_[fill[cell[i]]++] = static_cast<std::uint32_t>(i);
        }
        return g;
    }

    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (cz[a] != cz[b]) return cz[a] < cz[b];
        if (cy[a] != cy[b]) return cy[a] < cy[b];
        return cx[a] < cx[b];
    });
    g.sorted_ = order;
    for (std::uint32_t k = 0; k < n; ++k) {
        const std::uint32_t i = order[k];
        if (g.sparse_.empty() || g.sparse_.back().x != cx[i] || g.sparse_.back().y != cy[i] ||
            g.sparse_.back().z != cz[i]) {
            g.sparse_.push_back({cx[i], cy[i], cz[i], k, k + 1});
        } else {
            g.sparse_.back().end = k + 1;
        }
    }
    return g;
}

std::size_t HashGrid::cell_count() const
{
    if (count_ == 0) {
        return 0;
    }
    if (!dense_) {
        return sparse_.size();
    }
    std::size_t occupied = 0;
    for (std::size_t c = 0; c + 1 < cell_start_.size(); ++c) {
        occupied += cell_start_[c + 1] > cell_start_[c] ? 1 : 0;
    }
    return occupied;
}

bool HashGrid::cell_of(const Vec3& x, std::int64_t& cx, std::int64_t& cy, std::int64_t& cz) const
{
    const Vec3 c = (x - origin_) * inv_cell_;
    if (!is_finite(c) || c.cwiseAbs().maxCoeff() > kMaxCellCoord) {
        return false;
    }
    cx = static_cast<std::int64_t>(std::floor(c.x()));
    cy = static_cast<std::int64_t>(std::floor(c.y()));
    cz = static_cast<std::int64_t>(std::floor(c.z()));
    return true;
}

std::span<const std::uint32_t> HashGrid::sparse_range(std::int64_t x, std::int64_t y,
                                                      std::int64_t z) const
{
    auto it = std::lower_bound(sparse_.begin(), sparse_.end(), 0, [&](const SparseCell& c, int) {
        if (c.z != z) return c.z < z;
        if (c.y != y) return c.y < y;
        return c.x < x;
    });
    if (it == sparse_.end() || it->x != x || it->y != y || it->z != z) {
        return {};
    }
    return {sorted_.data() + it->begin, it->end - it->begin};
}

std::vector<std::uint32_t> HashGrid::neighbors(const Vec3& x) const
{
    std::vector<std::uint32_t> out;
    for_each_candidate(x, [&](std::uint32_t i) { out.push_back(i); });
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace fluidrec
