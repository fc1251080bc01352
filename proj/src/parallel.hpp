#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace ssrcnn::detail {

// OpenMP loop over [0, n) that rethrows the first exception raised by
// `body` after the loop ends. Exceptions must not escape a parallel region.
template <typename F>
void parallel_for(std::size_t n, F&& body) {
  std::exception_ptr error;
  std::mutex guard;
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(guard);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace ssrcnn::detail
