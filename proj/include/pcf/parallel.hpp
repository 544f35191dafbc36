#pragma once

#include <cstdint>
#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pcf::par {

// Process-wide switch between the OpenMP kernels and the serial reference
// path. Tests flip it to check that both produce identical results; the
// benchmark flips it to time them against each other.
inline bool& serial_mode() {
  static bool serial = false;
  return serial;
}

inline void set_serial(bool v) { serial_mode() = v; }

inline bool parallel_enabled() {
#ifdef _OPENMP
  return !serial_mode();
#else
  return false;
#endif
}

inline int max_threads() {
#ifdef _OPENMP
  return parallel_enabled() ? omp_get_max_threads() : 1;
#else
  return 1;
#endif
}

// f(i) for i in [0, n). Iterations must be independent; each runs with its
// own thread-local Tape when tracing. Exceptions may not cross an OpenMP
// region, so one thrown by any iteration is captured and rethrown after the
// loop (remaining iterations still run).
template <class F>
void parallel_for(std::int64_t n, F&& f) {
#ifdef _OPENMP
  if (parallel_enabled()) {
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t i = 0; i < n; ++i) {
      try {
        f(i);
      } catch (...) {
#pragma omp critical(pcf_parallel_for_err)
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
    return;
  }
#endif
  for (std::int64_t i = 0; i < n; ++i) f(i);
}

// Maps f over [0, n) in chunks and reduces with `fold` strictly in index
// order, so the floating-point sum is identical for any thread count.
// Only `chunk` results are alive at once, which bounds memory when each
// result holds full parameter gradients.
template <class R, class Map, class Fold>
void chunked_map_reduce(std::int64_t n, std::int64_t chunk, Map&& map,
                        Fold&& fold) {
  if (chunk < 1) chunk = 1;
  std::vector<R> results;
  for (std::int64_t lo = 0; lo < n; lo += chunk) {
    const std::int64_t hi = lo < n - chunk ? lo + chunk : n;
    results.assign(static_cast<std::size_t>(hi - lo), R{});
    parallel_for(hi - lo, [&](std::int64_t j) { results[j] = map(lo + j); });
    for (std::int64_t j = 0; j < hi - lo; ++j) fold(lo + j, results[j]);
  }
}

}  // namespace pcf::par
