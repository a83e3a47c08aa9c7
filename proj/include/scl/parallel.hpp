#pragma once

#include <cstddef>
#include <functional>

namespace scl {

/// Upper bound on worker threads used by parallel_for. Defaults to 1.
void set_thread_count(std::size_t n);
std::size_t thread_count();

/// Runs body(i) for i in [0, n). Indices are split into contiguous static
/// chunks; callers must write only to slots owned by i so the result does
/// not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace scl
