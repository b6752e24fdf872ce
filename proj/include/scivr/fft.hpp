#pragma once

// Thin RAII wrapper over a 1D complex FFTW plan. Plan creation is serialised
// (FFTW's planner is not thread-safe); execution on a plan's own buffers is.

#include "scivr/types.hpp"

#include <fftw3.h>

#include <cstddef>
#include <mutex>
#include <stdexcept>

namespace scivr {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// Smallest n >= min_n whose only prime factors are 2, 3 and 5.
inline int fft_friendly_size(int min_n) {
  for (int n = std::max(min_n, 1);; ++n) {
    int r = n;
    for (int p : {2, 3, 5})
      while (r % p == 0) r /= p;
    if (r == 1) return n;
  }
}

/// out[m] = sum_k in[k] exp(+2 pi i m k / n)   (unnormalised backward transform).
class FftBackward {
 public:
  explicit FftBackward(int n) : n_(n) {
    if (n <= 0) throw std::invalid_argument("FFT length must be positive");
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    in_ = fftw_alloc_complex(static_cast<std::size_t>(n));
    out_ = fftw_alloc_complex(static_cast<std::size_t>(n));
    plan_ = fftw_plan_dft_1d(n, in_, out_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~FftBackward() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  FftBackward(const FftBackward&) = delete;
  FftBackward& operator=(const FftBackward&) = delete;

  int size() const { return n_; }
  cplx* input() { return reinterpret_cast<cplx*>(in_); }
  const cplx* output() const { return reinterpret_cast<const cplx*>(out_); }
  void execute() { fftw_execute(plan_); }

 private:
  int n_;
  fftw_complex* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace scivr
