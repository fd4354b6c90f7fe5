// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <vector>

namespace phonefix {

// FFTW's planner is not thread-safe; every plan create/destroy goes through
// this lock. Executing an existing plan on new arrays is thread-safe.
inline std::mutex& FftwPlannerMutex() {
  static std::mutex m;
  return m;
}

// Real-input FFT of size n with n/2+1 complex bins. Inverse is unnormalized
// (caller divides by n), matching FFTW conventions.
class RealFft {
 public:
  explicit RealFft(int n) : n_(n), in_(n), spec_(n / 2 + 1), out_(n) {
    std::lock_guard<std::mutex> lock(FftwPlannerMutex());
    forward_ = fftwf_plan_dft_r2c_1d(
        n, in_.data(), reinterpret_cast<fftwf_complex*>(spec_.data()),
        FFTW_ESTIMATE | FFTW_UNALIGNED);
    inverse_ = fftwf_plan_dft_c2r_1d(
        n, reinterpret_cast<fftwf_complex*>(spec_.data()), out_.data(),
        FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_DESTROY_INPUT);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() {
    std::lock_guard<std::mutex> lock(FftwPlannerMutex());
    fftwf_destroy_plan(forward_);
    fftwf_destroy_plan(inverse_);
  }

  int size() const { return n_; }
  int bins() const { return n_ / 2 + 1; }

  // in: n samples; out: n/2+1 bins.
  void Forward(const float* in, std::complex<float>* out) {
    std::copy(in, in + n_, in_.begin());
    fftwf_execute_dft_r2c(forward_, in_.data(),
                          reinterpret_cast<fftwf_complex*>(out));
  }

  // in: n/2+1 bins (left untouched); out: n samples scaled by n.
  void Inverse(const std::complex<float>* in, float* out) {
    std::copy(in, in + bins(), spec_.begin());
    fftwf_execute_dft_c2r(inverse_, reinterpret_cast<fftwf_complex*>(spec_.data()),
                          out);
  }

 private:
  int n_;
  std::vector<float> in_;
  std::vector<std::complex<float>> spec_;
  std::vector<float> out_;
  fftwf_plan forward_ = nullptr;
  fftwf_plan inverse_ = nullptr;
};

}  // namespace phonefix
