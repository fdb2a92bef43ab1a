#pragma once

#include <unsupported/Eigen/FFT>

#include <complex>
#include <vector>

namespace seld::detail {

// Eigen::FFT caches plans and scratch buffers, so one instance per thread.
template <typename Scalar>
Eigen::FFT<Scalar>& real_fft() {
  thread_local Eigen::FFT<Scalar> fft = [] {
    Eigen::FFT<Scalar> f;
    f.SetFlag(Eigen::FFT<Scalar>::HalfSpectrum);
    return f;
  }();
  return fft;
}

/// n/2 + 1 bins of the DFT of a real buffer of length n (n even).
template <typename Scalar>
void rfft(const Scalar* in, std::complex<Scalar>* out, Eigen::Index n) {
  real_fft<Scalar>().fwd(out, in, n);
}

/// Real inverse of a half spectrum; scaled by 1/n.
template <typename Scalar>
void irfft(const std::complex<Scalar>* in, Scalar* out, Eigen::Index n) {
  real_fft<Scalar>().inv(out, in, n);
}

inline Eigen::Index next_fast_size(Eigen::Index n) {
  // 2^a * 3^b * 5^c, even, multiple of 4 for the real-FFT fast path
  Eigen::Index best = 4;
  while (best < n) best *= 2;
  for (Eigen::Index p5 = 1; p5 < best; p5 *= 5) {
    for (Eigen::Index p35 = p5; p35 < best; p35 *= 3) {
      Eigen::Index v = p35 * 4;
      while (v < n) v *= 2;
      if (v < best) best = v;
    }
  }
  return best;
}

}  // namespace seld::detail
