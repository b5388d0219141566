#include "gdpen/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace gdpen {

int worker_count() {
  int workers = omp_get_max_threads();
  if (const char* env = std::getenv("GDPEN_THREADS")) {
    try {
      const int requested = std::stoi(env);
      if (requested > 0) workers = requested;
    } catch (const std::exception&) {
      // Ignore malformed values.
    }
  }
  return workers < 1 ? 1 : workers;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t split_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(master);
  for (std::uint64_t p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

namespace detail {

void run_indexed(std::size_t n, int workers, void (*call)(void*, std::size_t), void* ctx) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) call(ctx, i);
    return;
  }
  const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (long long i = 0; i < count; ++i) call(ctx, static_cast<std::size_t>(i));
}

}  // namespace detail

}  // namespace gdpen
