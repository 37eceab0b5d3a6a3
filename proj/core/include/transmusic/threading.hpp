#pragma once

#include <cstddef>
#include <functional>

namespace transmusic {

// Worker cap: TMK_THREADS when set (clamped to >= 1), hardware otherwise.
std::size_t max_threads();

// Runs fn(i) for i in [0, n) across up to max_threads() workers with a static
// block partition. Callers keep determinism by writing to per-index slots.
// The first exception thrown by any worker is rethrown after the join.
void parallel_for_indexed(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace transmusic
