#pragma once

#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "mbprei/rng.hpp"

namespace mbprei {

// Runs body(r, stream) for r = 0..reps-1, where stream is seeded from
// (master, r) regardless of which worker executes it.  The body must write
// only to its own replicate's slots; callers reduce afterwards in index
// order, so results are identical for any worker count.
template <typename Body>
void parallel_replicates(int reps, std::uint64_t master, int workers, Body&& body) {
  if (workers < 1) workers = 1;
  if (workers == 1 || reps < 2) {
    for (int r = 0; r < reps; ++r) {
      RngStream g = make_stream(master, static_cast<std::uint64_t>(r));
      body(r, g);
    }
    return;
  }

  if (workers > reps) workers = reps;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error;
  std::mutex error_mu;

  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      const std::int64_t lo = static_cast<std::int64_t>(reps) * w / workers;
      const std::int64_t hi = static_cast<std::int64_t>(reps) * (w + 1) / workers;
      try {
        for (std::int64_t r = lo; r < hi; ++r) {
          RngStream g = make_stream(master, static_cast<std::uint64_t>(r));
          body(static_cast<int>(r), g);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mbprei
