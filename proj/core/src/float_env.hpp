#pragma once

#if defined(__SSE2__)
#include <pmmintrin.h>
#include <xmmintrin.h>
#endif

namespace bytefam::detail {

/// Flushes denormal results and inputs to zero on the current thread while in
/// scope. Saturated LSTM gates and Adam moments otherwise drift into the
/// denormal range, where x86 arithmetic is many times slower.
class DenormalGuard {
 public:
#if defined(__SSE2__)
  DenormalGuard() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040); }
  ~DenormalGuard() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#else
  DenormalGuard() = default;
#endif

 public:
  DenormalGuard(const DenormalGuard&) = delete;
  DenormalGuard& operator=(const DenormalGuard&) = delete;
};

}  // namespace bytefam::detail
