#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace clm {

// Cooperative stop signal shared between a caller and a long computation.
// Either an explicit cancel() or an elapsed deadline stops the work.
class stop_token {
 public:
  stop_token() = default;

  void cancel() noexcept { cancelled_.store(true, std::memory_order_relaxed); }

  void set_deadline(std::chrono::steady_clock::time_point t) {
    deadline_ = t;
    has_deadline_ = true;
  }

  bool cancelled() const noexcept { return cancelled_.load(std::memory_order_relaxed); }

  bool deadline_passed() const {
    return has_deadline_ && std::chrono::steady_clock::now() >= deadline_;
  }

  bool stop_requested() const { return cancelled() || deadline_passed(); }

 private:
  std::atomic<bool> cancelled_{false};
  std::chrono::steady_clock::time_point deadline_{};
  bool has_deadline_ = false;
};

struct exec_options {
  unsigned threads = 0;  // 0 = hardware concurrency
  const stop_token* stop = nullptr;

  bool stop_requested() const { return stop != nullptr && stop->stop_requested(); }
};

inline unsigned default_thread_count() {
  if (const char* env = std::getenv("COUPLED_MAP_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

inline unsigned resolve_threads(unsigned requested) {
  return requested == 0 ? default_thread_count() : requested;
}

// Runs fn(i, worker) for i in [0, n). Indices are handed out dynamically so
// uneven rows balance; fn must only write to storage owned by index i or by
// its worker slot.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  unsigned t = std::max(1u, std::min<unsigned>(resolve_threads(threads), static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (t == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i, 0u);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(t);
  for (unsigned w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (;;) {
          std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
          if (i >= n) break;
          fn(i, w);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n, std::memory_order_relaxed);
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace clm
