#pragma once

#include "seld/core.hpp"
#include "seld/dsp.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <vector>

namespace seld {

/// One capsule of the four-channel tetrahedral selection on the rigid sphere.
struct MicPosition {
  int channel_label = 0;  // channel number on the 32-capsule sphere
  double azimuth = 0.0;   // radians
  double elevation = 0.0;
  double radius = 0.042;  // meters

  Doa direction() const { return Doa(azimuth, elevation); }
};

using MicGeometry = std::array<MicPosition, 4>;

/// Channels 6, 10, 26, 22 at (45, 35), (-45, -35), (135, -35), (-135, 35) degrees, radius 4.2 cm.
const MicGeometry& tetrahedral_geometry();

struct PhysicalConstants {
  double speed_of_sound = 343.0;
  int expansion_terms = 30;  // highest order n kept in the modal sum
};

inline constexpr double kMinResponseFrequency = 0.1;

// ---------------------------------------------------------------------------
// First-order Ambisonics (orthonormalized real spherical harmonics, ACN order W, Y, Z, X)

template <typename Scalar>
Eigen::Matrix<Scalar, 4, 1> foa_response(Scalar azimuth, Scalar elevation) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Scalar root3 = sqrt(Scalar(3));
  Eigen::Matrix<Scalar, 4, 1> h;
  h << Scalar(1), root3 * sin(azimuth) * cos(elevation), root3 * sin(elevation),
      root3 * cos(azimuth) * cos(elevation);
  return h;
}

inline Eigen::Vector4d foa_response(const Doa& doa) {
  return foa_response<double>(doa.azimuth(), doa.elevation());
}

// ---------------------------------------------------------------------------
// Legendre polynomials

/// P_0(x) .. P_nmax(x) by Bonnet's recurrence.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> legendre_all(int n_max, Scalar x) {
  using std::abs;
  if (n_max < 0) throw ValidationError("legendre: degree must be non-negative");
  if (abs(x) > Scalar(1)) throw ValidationError("legendre: |x| > 1");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> p(n_max + 1);
  p[0] = Scalar(1);
  if (n_max >= 1) p[1] = x;
  for (int n = 1; n < n_max; ++n) {
    p[n + 1] = (Scalar(2 * n + 1) * x * p[n] - Scalar(n) * p[n - 1]) / Scalar(n + 1);
  }
  return p;
}

template <typename Scalar>
Scalar legendre_p(int n, Scalar x) {
  if (n > 60) throw ValidationError("legendre: degree above 60 unsupported");
  return legendre_all<Scalar>(n, x)[n];
}

// ---------------------------------------------------------------------------
// Spherical Bessel functions

template <typename Scalar>
struct SphericalBessel {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> j;  // first kind, orders 0..n_max
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> y;  // second kind
};

/// j_n by Miller's downward recurrence normalized with sum_k (2k+1) j_k^2 = 1; y_n by upward
/// recurrence. Once y_n overflows the remaining orders are -inf.
template <typename Scalar>
SphericalBessel<Scalar> spherical_bessel(int n_max, Scalar x) {
  using std::abs;
  using std::cos;
  using std::isfinite;
  using std::sin;
  using std::sqrt;
  if (!(x > Scalar(0))) throw ValidationError("spherical bessel: argument must be positive");
  if (n_max < 0) throw ValidationError("spherical bessel: order must be non-negative");

  const int requested = n_max;
  n_max = std::max(n_max, 1);
  SphericalBessel<Scalar> out;
  out.j.setZero(n_max + 1);
  out.y.resize(n_max + 1);

  const Scalar sx = sin(x);
  const Scalar cx = cos(x);
  out.y[0] = -cx / x;
  out.y[1] = -cx / (x * x) - sx / x;
  for (int n = 1; n < n_max; ++n) {
    if (!isfinite(out.y[n])) {
      out.y[n + 1] = out.y[n];
      continue;
    }
    out.y[n + 1] = Scalar(2 * n + 1) / x * out.y[n] - out.y[n - 1];
    if (!isfinite(out.y[n + 1])) out.y[n + 1] = -std::numeric_limits<Scalar>::infinity();
  }

  const double xd = static_cast<double>(x);
  const int start = n_max + static_cast<int>(xd) + 20 + static_cast<int>(std::sqrt(40.0 * (n_max + xd + 1.0)));
  const Scalar big = Scalar(1e100);
  const Scalar shrink = Scalar(1e-100);
  Scalar upper = Scalar(0);
  Scalar current = Scalar(1e-30);
  Scalar norm_sum = Scalar(0);
  for (int k = start; k >= 0; --k) {
    if (k <= n_max) out.j[k] = current;
    norm_sum += Scalar(2 * k + 1) * current * current;
    if (k == 0) break;
    const Scalar lower = Scalar(2 * k + 1) / x * current - upper;
    upper = current;
    current = lower;
    if (abs(current) > big) {
      current *= shrink;
      upper *= shrink;
      norm_sum = norm_sum * shrink * shrink;
      for (int m = k; m <= n_max; ++m) out.j[m] *= shrink;
    }
  }
  Scalar scale = Scalar(1) / sqrt(norm_sum);
  // sign from whichever closed form is better conditioned
  const Scalar j0 = sx / x;
  const Scalar j1 = sx / (x * x) - cx / x;
  const bool use_j0 = abs(j0) >= abs(j1);
  if ((use_j0 ? out.j[0] * j0 : out.j[1] * j1) < Scalar(0)) scale = -scale;
  out.j *= scale;
  out.j.conservativeResize(requested + 1);
  out.y.conservativeResize(requested + 1);
  return out;
}

/// h_n^(2)(x) = j_n(x) - i y_n(x) for n = 0..n_max.
template <typename Scalar>
Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> sph_hankel2_all(int n_max, Scalar x) {
  const auto b = spherical_bessel<Scalar>(n_max, x);
  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> h(n_max + 1);
  for (int n = 0; n <= n_max; ++n) h[n] = std::complex<Scalar>(b.j[n], -b.y[n]);
  return h;
}

/// d/dx h_n^(2)(x) for n = 0..n_max via f_n' = f_{n-1} - (n+1)/x f_n and f_0' = -f_1.
template <typename Scalar>
Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> sph_hankel2_deriv_all(int n_max, Scalar x) {
  using std::isfinite;
  const int top = std::max(n_max, 1);
  const auto b = spherical_bessel<Scalar>(top, x);
  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> d(n_max + 1);
  for (int n = 0; n <= n_max; ++n) {
    Scalar dj, dy;
    if (n == 0) {
      dj = -b.j[1];
      dy = -b.y[1];
    } else {
      dj = b.j[n - 1] - Scalar(n + 1) / x * b.j[n];
      dy = isfinite(b.y[n]) ? b.y[n - 1] - Scalar(n + 1) / x * b.y[n] : std::numeric_limits<Scalar>::infinity();
    }
    d[n] = std::complex<Scalar>(dj, -dy);
  }
  return d;
}

template <typename Scalar>
std::complex<Scalar> sph_hankel2_deriv(int n, Scalar x) {
  if (n < 0 || n > 60) throw ValidationError("sph_hankel2_deriv: order outside [0, 60]");
  return sph_hankel2_deriv_all<Scalar>(n, x)[n];
}

// ---------------------------------------------------------------------------
// Rigid-sphere capsule response

/// Modal weights c_n = i^(n-1) (2n+1) / ((kR)^2 h_n'^(2)(kR)), n = 0..max_order, so that
/// H = sum_n c_n P_n(cos gamma).
template <typename Scalar>
Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> rigid_sphere_modal_weights(Scalar kr, int max_order) {
  using std::isfinite;
  using Complex = std::complex<Scalar>;
  const auto dh = sph_hankel2_deriv_all<Scalar>(max_order, kr);
  Eigen::Matrix<Complex, Eigen::Dynamic, 1> c(max_order + 1);
  // i^(n-1) cycles through -i, 1, i, -1
  const std::array<Complex, 4> phase = {Complex(0, -1), Complex(1, 0), Complex(0, 1), Complex(-1, 0)};
  for (int n = 0; n <= max_order; ++n) {
    if (!isfinite(dh[n].imag()) || !isfinite(dh[n].real())) {
      c[n] = Complex(0);
      continue;
    }
    c[n] = phase[static_cast<size_t>(n % 4)] * Scalar(2 * n + 1) / (kr * kr * dh[n]);
  }
  return c;
}

template <typename Scalar>
Scalar wavenumber_radius(Scalar freq_hz, Scalar radius, Scalar speed_of_sound) {
  return Scalar(2) * Scalar(kPi) * freq_hz * radius / speed_of_sound;
}

template <typename Scalar>
std::complex<Scalar> rigid_sphere_response(Scalar cos_gamma, Scalar freq_hz, Scalar radius = Scalar(0.042),
                                           const PhysicalConstants& constants = {}) {
  using std::clamp;
  if (!(freq_hz >= Scalar(kMinResponseFrequency))) {
    throw ValidationError("rigid_sphere_response: frequency below 0.1 Hz");
  }
  const Scalar kr = wavenumber_radius<Scalar>(freq_hz, radius, Scalar(constants.speed_of_sound));
  const auto c = rigid_sphere_modal_weights<Scalar>(kr, constants.expansion_terms);
  const auto p = legendre_all<Scalar>(constants.expansion_terms, clamp(cos_gamma, Scalar(-1), Scalar(1)));
  std::complex<Scalar> sum(0);
  for (int n = 0; n <= constants.expansion_terms; ++n) sum += c[n] * p[n];
  return sum;
}

std::complex<double> rigid_sphere_response(const MicPosition& mic, const Doa& doa, double freq_hz,
                                           const PhysicalConstants& constants = {});

/// Frequency-domain response of all capsules of a geometry over a fixed frequency grid; modal
/// weights are computed once per frequency.
class RigidSphereModel {
 public:
  explicit RigidSphereModel(std::vector<double> freqs_hz, const PhysicalConstants& constants = {},
                            double radius = 0.042);

  const std::vector<double>& frequencies() const { return freqs_; }
  /// F x (max_order + 1)
  const Eigen::MatrixXcd& modal_weights() const { return weights_; }
  /// Response over the grid for one capsule/source angle.
  Eigen::VectorXcd response(double cos_gamma) const;
  /// 4 x F
  Eigen::MatrixXcd steering(const MicGeometry& mics, const Doa& doa) const;

 private:
  std::vector<double> freqs_;
  PhysicalConstants constants_;
  Eigen::MatrixXcd weights_;
};

/// channels x frequencies. FOA rows are frequency independent; MIC rows follow the rigid sphere.
Eigen::MatrixXcd steering_vectors(AudioFormat format, const Doa& doa, const std::vector<double>& freqs_hz,
                                  const PhysicalConstants& constants = {});

/// Bin centre frequencies of an STFT grid, with bin 0 evaluated at kMinResponseFrequency.
std::vector<double> stft_bin_frequencies(const StftConfig& cfg);

// ---------------------------------------------------------------------------
// Measurement grid

/// 324 directions at 1 m (elevation -40..40) and 180 at 2 m (elevation -20..20), 10 degree steps.
const std::vector<Doa>& measurement_doa_grid();
std::optional<std::size_t> grid_index(const Doa& doa);

/// Steering vectors for every grid direction on an STFT bin grid, built once per (format, config).
class SteeringTable {
 public:
  SteeringTable(AudioFormat format, const StftConfig& cfg, const PhysicalConstants& constants = {});

  AudioFormat format() const { return format_; }
  /// 4 x F for grid entry `index`.
  const Eigen::MatrixXcd& at(std::size_t index) const { return table_.at(index); }
  /// Cached lookup or direct evaluation for directions off the grid.
  Eigen::MatrixXcd lookup(const Doa& doa) const;

  static const SteeringTable& shared(AudioFormat format);

 private:
  AudioFormat format_;
  StftConfig cfg_;
  PhysicalConstants constants_;
  std::vector<Eigen::MatrixXcd> table_;
};

}  // namespace seld
