#pragma once

#include <cstddef>
#include <exception>

namespace saferep::detail {

// Runs f(i) for i in [0, n). Each call must only write to slot-i state so the
// result is independent of thread count and scheduling.
template <class F>
void parallel_for(std::size_t n, F&& f, bool dynamic = false) {
  std::exception_ptr error;
  const auto count = static_cast<long long>(n);
  if (dynamic) {
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < count; ++i) {
      try {
        f(static_cast<std::size_t>(i));
      } catch (...) {
#pragma omp critical(saferep_parallel_error)
        if (!error) error = std::current_exception();
      }
    }
  } else {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < count; ++i) {
      try {
        f(static_cast<std::size_t>(i));
      } catch (...) {
#pragma omp critical(saferep_parallel_error)
        if (!error) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace saferep::detail
