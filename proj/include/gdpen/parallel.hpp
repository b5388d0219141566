#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <initializer_list>
#include <vector>

namespace gdpen {

enum class Execution { Serial, Parallel };

/// Worker count: the GDPEN_THREADS environment variable when it holds a
/// positive integer, OpenMP's default otherwise.
int worker_count();

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Order-independent seed for a task addressed by `path` under `master`.
std::uint64_t split_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

namespace detail {
void run_indexed(std::size_t n, int workers, void (*call)(void*, std::size_t), void* ctx);
}

/// Calls f(i) for i in [0, n). Each index must write only its own output slot;
/// the first exception (by index) is rethrown after all tasks finish.
template <class F>
void for_each_index(std::size_t n, Execution mode, F&& f) {
  std::vector<std::exception_ptr> errors(n);
  struct Ctx {
    F* f;
    std::vector<std::exception_ptr>* errors;
  } ctx{&f, &errors};
  auto call = [](void* c, std::size_t i) {
    auto* cx = static_cast<Ctx*>(c);
    try {
      (*cx->f)(i);
    } catch (...) {
      (*cx->errors)[i] = std::current_exception();
    }
  };
  detail::run_indexed(n, mode == Execution::Serial ? 1 : worker_count(), call, &ctx);
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace gdpen
