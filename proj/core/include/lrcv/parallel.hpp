#pragma once

#include <cstddef>
#include <functional>

namespace lrcv {

/// Number of worker threads to use when the caller asks for 0 ("auto").
unsigned resolve_threads(unsigned requested);

/// Calls body(i) for i in [0, n) on up to `threads` workers. Indices are handed
/// out in contiguous blocks; body must write only to slot i of its outputs, so
/// results do not depend on the thread count. If any call throws, the exception
/// with the smallest index among those that failed is rethrown once all workers stop.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace lrcv
