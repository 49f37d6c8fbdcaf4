#include "ddc/threading.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ddc {

namespace {
std::atomic<int> g_max_threads{0};
thread_local bool t_inside_parallel = false;
}

void set_max_threads(int n) { g_max_threads.store(n < 0 ? 0 : n); }

int max_threads() {
  int n = g_max_threads.load();
  if (n > 0) return n;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::int64_t count, const std::function<void(std::int64_t)>& body) {
  if (count <= 0) return;
  int workers = t_inside_parallel ? 1 : max_threads();  // no nested pools
  if (workers > count) workers = static_cast<int>(count);
  if (workers <= 1) {
    bool saved = t_inside_parallel;
    t_inside_parallel = true;
    try {
      for (std::int64_t i = 0; i < count; ++i) body(i);
    } catch (...) {
      t_inside_parallel = saved;
      throw;
    }
    t_inside_parallel = saved;
    return;
  }

  std::atomic<std::int64_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;

  auto run = [&] {
    t_inside_parallel = true;
    for (;;) {
      std::int64_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  t_inside_parallel = false;
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace ddc
