#pragma once

#include <exception>
#include <vector>

#include "gtw/gt_core.hpp"

namespace gtw::detail {

/// Runs fn(i) for i in [0, n) and returns the results in index order.
/// Exceptions are captured per index and the first one is rethrown, so the
/// serial and parallel paths agree bit for bit.
template <class T = double, class Fn>
std::vector<T> fan_out(int n, Exec exec, Fn&& fn) {
  std::vector<T> res(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> errs(static_cast<std::size_t>(n));
  const bool par = exec == Exec::parallel;
  (void)par;
#pragma omp parallel for schedule(dynamic) if (par)
  for (int i = 0; i < n; ++i) {
    try {
      res[static_cast<std::size_t>(i)] = fn(i);
    } catch (...) {
      errs[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  return res;
}

}  // namespace gtw::detail
