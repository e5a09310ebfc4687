#pragma once

#include <cstddef>
#include <functional>

namespace shiftdiag {

// Worker count: SHIFTDIAG_THREADS when set (>=1), otherwise the hardware
// concurrency.
std::size_t default_thread_count();

// Runs body(i) for i in [0, count). Each index is processed exactly once;
// callers write results into slot i so reductions stay order-independent.
// The first exception thrown by any body is rethrown on the calling thread.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace shiftdiag
