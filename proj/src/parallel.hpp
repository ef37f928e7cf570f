#pragma once

#include <exception>

namespace nsac::detail {

// body(j) for j < n over OpenMP threads; exceptions cannot cross the region, so the
// first one is kept and rethrown afterwards
template <class F>
void parallel_rows(int n, F&& body) {
  std::exception_ptr err;
#pragma omp parallel for schedule(static)
  for (int j = 0; j < n; ++j) {
    try {
      body(j);
    } catch (...) {
#pragma omp critical(nsac_parallel_rows)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace nsac::detail
