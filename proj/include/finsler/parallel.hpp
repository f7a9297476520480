#pragma once

#include <cstddef>
#include <exception>

namespace finsler {

/// Runs fn(i) for i in [0, n) across OpenMP threads (when enabled), each index
/// exactly once. The first exception thrown by any iteration is rethrown
/// after the loop.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  std::exception_ptr error;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(finsler_parallel_for)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace finsler
