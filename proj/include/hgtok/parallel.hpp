#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace hgtok {

// OpenMP loop over [0, n) that rethrows the exception of the lowest failing
// index on the calling thread (exceptions cannot cross an OpenMP region).
template <class F>
void parallel_for(std::size_t n, F&& f) {
  std::exception_ptr first;
  std::size_t first_index = n;
  std::mutex mu;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      f(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (i < first_index) {
        first_index = i;
        first = std::current_exception();
      }
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace hgtok
