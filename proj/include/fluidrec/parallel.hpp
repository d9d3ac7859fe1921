// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <algorithm>
#include <cstdint>

namespace fluidrec {

/// Bounds internal data parallelism. Results never depend on this value:
/// every parallel loop writes disjoint slots and reductions run serially
/// in index order.
void set_thread_count(int n);
int thread_count();

/// Static-scheduled loop over [0, n).
template <class Body>
void parallel_for(std::size_t n, Body&& body)
{
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (count > 256)
    for (std::int64_t i = 0; i < count; ++i) {
        body(static_cast<std::size_t>(i));
    }
}

/// Splits [0, n) into `chunks` fixed ranges (independent of thread count)
/// and runs body(chunk, begin, end) for each.
template <class Body>
void parallel_chunks(std::size_t n, std::size_t chunks, Body&& body)
{
    if (chunks == 0) {
        return;
    }
    const std::size_t per = (n + chunks - 1) / chunks;
    const auto count = static_cast<std::int64_t>(chunks);
#pragma omp parallel for schedule(static) if (n > 256)
    for (std::int64_t c = 0; c < count; ++c) {
        const std::size_t begin = std::min(n, static_cast<std::size_t>(c) * per);
        const std::size_t end = std::min(n, begin + per);
        body(static_cast<std::size_t>(c), begin, end);
    }
}

}  // namespace fluidrec
