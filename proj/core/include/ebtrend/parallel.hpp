#pragma once

#include <cstddef>
#include <functional>

namespace ebtrend {

/// Resolve a worker count: an explicit positive request wins, then the
/// EBTREND_THREADS environment variable, then hardware concurrency.
unsigned resolve_threads(unsigned requested = 0);

/// Run body(begin, end) over [0, n) split into contiguous static chunks.
/// Chunk boundaries depend only on n and the thread count, and each index is
/// visited exactly once, so per-index outputs are independent of scheduling.
void parallel_for_chunks(std::size_t n, unsigned threads,
                         const std::function<void(std::size_t, std::size_t)>& body);

template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  parallel_for_chunks(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
  });
}

}  // namespace ebtrend
