#pragma once

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

namespace planemvs::detail {

/// Runs fn(y) for every row in [0, height) on the current TBB arena.
template <typename Fn>
void for_each_row(int height, Fn&& fn)
{
    tbb::parallel_for(tbb::blocked_range<int>(0, height), [&](const tbb::blocked_range<int>& rows) {
        for (int y = rows.begin(); y < rows.end(); ++y) {
            fn(y);
        }
    });
}

template <typename Fn>
void for_each_index(std::size_t count, Fn&& fn)
{
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, count, 1), [&](const tbb::blocked_range<std::size_t>& r) {
        for (std::size_t i = r.begin(); i < r.end(); ++i) {
            fn(i);
        }
    });
}

} // namespace planemvs::detail
