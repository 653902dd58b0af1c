#pragma once

#include <exception>
#include <mutex>

#include <omp.h>

namespace rfrel {

/// Thread count for an OpenMP region; non-positive requests mean "all".
inline int resolve_workers(int requested) {
  return requested > 0 ? requested : omp_get_max_threads();
}

/// Collects the first exception thrown inside a parallel region so it can
/// be rethrown on the calling thread after the region joins.
class ExceptionSlot {
 public:
  template <typename F>
  void run(F&& f) noexcept {
    try {
      f();
    } catch (...) {
      std::lock_guard lock(mutex_);
      if (!error_) error_ = std::current_exception();
    }
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::mutex mutex_;
  std::exception_ptr error_;
};

}  // namespace rfrel
