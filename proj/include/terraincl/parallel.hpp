#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace terraincl {

// Worker count: hardware concurrency capped by TERRAINCL_THREADS when set.
inline std::size_t worker_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("TERRAINCL_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) n = std::min(n, static_cast<std::size_t>(cap));
    } catch (...) {
    }
  }
  return n;
}

// Runs fn(chunk) for chunk in [0, num_chunks). Chunk boundaries are chosen by
// the caller and never depend on the worker count, so any reduction the caller
// performs over chunk results in index order is reproducible.
template <typename Fn>
void parallel_chunks(std::size_t num_chunks, Fn&& fn) {
  const std::size_t workers = std::min(worker_count(), num_chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < num_chunks; ++c) fn(c);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      for (std::size_t c = w; c < num_chunks; c += workers) {
        try {
          fn(c);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

struct ChunkRange {
  std::size_t begin;
  std::size_t end;
};

inline std::size_t chunk_count(std::size_t n, std::size_t chunk_size) {
  return (n + chunk_size - 1) / chunk_size;
}

inline ChunkRange chunk_range(std::size_t n, std::size_t chunk_size, std::size_t c) {
  const std::size_t b = c * chunk_size;
  return {b, std::min(n, b + chunk_size)};
}

}  // namespace terraincl
