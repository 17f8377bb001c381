#include "eventnet/parallel.hpp"

#include <memory>
#include <mutex>

namespace eventnet {

namespace {
std::mutex g_pool_mu;
std::unique_ptr<ThreadPool> g_pool;
int g_threads = 1;
}  // namespace

void set_num_threads(int n) {
  std::lock_guard<std::mutex> lk(g_pool_mu);
  if (n < 1) n = 1;
  if (g_pool && g_pool->size() == n) return;
  g_pool.reset();
  g_threads = n;
}

int num_threads() {
  std::lock_guard<std::mutex> lk(g_pool_mu);
  return g_threads;
}

ThreadPool& global_pool() {
  std::lock_guard<std::mutex> lk(g_pool_mu);
  if (!g_pool) g_pool = std::make_unique<ThreadPool>(g_threads);
  return *g_pool;
}

}  // namespace eventnet
