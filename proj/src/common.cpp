#include "betawolff/common.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <thread>

namespace betawolff {

std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

int initial_cap() {
  if (const char* env = std::getenv("BETAWOLFF_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

std::atomic<int> g_cap{0};

}  // namespace

int thread_cap() {
  int c = g_cap.load(std::memory_order_relaxed);
  if (c == 0) {
    c = initial_cap();
    g_cap.store(c, std::memory_order_relaxed);
  }
  return c;
}

void set_thread_cap(int cap) {
  if (cap < 1) throw ValidationError("thread cap must be >= 1");
  g_cap.store(cap, std::memory_order_relaxed);
}

void for_chunks(std::size_t count, std::size_t chunk,
                const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
  if (count == 0) return;
  if (chunk == 0) chunk = 1;
  std::size_t nchunks = (count + chunk - 1) / chunk;
  std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_cap()), nchunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < nchunks; ++c)
      body(c, c * chunk, std::min(count, (c + 1) * chunk));
    return;
  }
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (;;) {
      std::size_t c = next.fetch_add(1, std::memory_order_relaxed);
      if (c >= nchunks) return;
      body(c, c * chunk, std::min(count, (c + 1) * chunk));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
}

}  // namespace betawolff
