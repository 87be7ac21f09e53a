#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace railhaz {

inline constexpr char const* kVersion = "0.1.0";

// Raised for bad user input (maps to CLI exit code 2).
struct validation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a fit fails to converge (maps to CLI exit code 3).
struct convergence_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thread count resolution: RAILHAZ_THREADS env var wins over the requested
// value; 0 means "all hardware threads".
inline unsigned resolve_threads(unsigned requested) {
  if (char const* env = std::getenv("RAILHAZ_THREADS")) {
    auto const v = std::strtoul(env, nullptr, 10);
    if (v > 0) {
      return static_cast<unsigned>(v);
    }
  }
  if (requested > 0) {
    return requested;
  }
  auto const hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Runs fn(i) for i in [0, n). Results must be written to per-index slots so
// that any thread count yields identical output.
inline void parallel_for(std::size_t n, unsigned threads,
                         std::function<void(std::size_t)> const& fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i != n; ++i) {
      fn(i);
    }
    return;
  }
  auto const n_workers = std::min<std::size_t>(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (std::size_t w = 0; w != n_workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += n_workers) {
        fn(i);
      }
    });
  }
  for (auto& t : pool) {
    t.join();
  }
}

}  // namespace railhaz
