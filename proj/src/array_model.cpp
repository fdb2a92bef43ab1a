#include "seld/array_model.hpp"

#include <cmath>
#include <memory>
#include <mutex>

namespace seld {

const MicGeometry& tetrahedral_geometry() {
  static const MicGeometry geometry = {{
      {6, 45.0 * kDegToRad, 35.0 * kDegToRad, 0.042},
      {10, -45.0 * kDegToRad, -35.0 * kDegToRad, 0.042},
      {26, 135.0 * kDegToRad, -35.0 * kDegToRad, 0.042},
      {22, -135.0 * kDegToRad, 35.0 * kDegToRad, 0.042},
  }};
  return geometry;
}

std::complex<double> rigid_sphere_response(const MicPosition& mic, const Doa& doa, double freq_hz,
                                           const PhysicalConstants& constants) {
  const double cos_gamma = mic.direction().unit_vector().dot(doa.unit_vector());
  return rigid_sphere_response<double>(cos_gamma, freq_hz, mic.radius, constants);
}

RigidSphereModel::RigidSphereModel(std::vector<double> freqs_hz, const PhysicalConstants& constants, double radius)
    : freqs_(std::move(freqs_hz)), constants_(constants) {
  const int orders = constants_.expansion_terms + 1;
  weights_.resize(static_cast<Eigen::Index>(freqs_.size()), orders);
  for (std::size_t f = 0; f < freqs_.size(); ++f) {
    if (!(freqs_[f] >= kMinResponseFrequency)) {
      throw ValidationError("rigid_sphere_response: frequency below 0.1 Hz");
    }
    const double kr = wavenumber_radius(freqs_[f], radius, constants_.speed_of_sound);
    weights_.row(static_cast<Eigen::Index>(f)) =
        rigid_sphere_modal_weights<double>(kr, constants_.expansion_terms).transpose();
  }
}

Eigen::VectorXcd RigidSphereModel::response(double cos_gamma) const {
  const Eigen::VectorXd p = legendre_all<double>(constants_.expansion_terms, std::clamp(cos_gamma, -1.0, 1.0));
  return weights_ * p.cast<std::complex<double>>();
}

Eigen::MatrixXcd RigidSphereModel::steering(const MicGeometry& mics, const Doa& doa) const {
  Eigen::MatrixXd legendre(constants_.expansion_terms + 1, 4);
  const Eigen::Vector3d source = doa.unit_vector();
  for (int m = 0; m < 4; ++m) {
    const double cos_gamma = std::clamp(mics[static_cast<size_t>(m)].direction().unit_vector().dot(source), -1.0, 1.0);
    legendre.col(m) = legendre_all<double>(constants_.expansion_terms, cos_gamma);
  }
  return (weights_ * legendre.cast<std::complex<double>>()).transpose();
}

Eigen::MatrixXcd steering_vectors(AudioFormat format, const Doa& doa, const std::vector<double>& freqs_hz,
                                  const PhysicalConstants& constants) {
  const auto cols = static_cast<Eigen::Index>(freqs_hz.size());
  if (format == AudioFormat::Foa) {
    const Eigen::Vector4cd gains = foa_response(doa).cast<std::complex<double>>();
    return gains.replicate(1, cols);
  }
  const MicGeometry& mics = tetrahedral_geometry();
  return RigidSphereModel(freqs_hz, constants, mics[0].radius).steering(mics, doa);
}

std::vector<double> stft_bin_frequencies(const StftConfig& cfg) {
  std::vector<double> freqs(static_cast<std::size_t>(cfg.num_bins()));
  for (int k = 0; k < cfg.num_bins(); ++k) {
    freqs[static_cast<std::size_t>(k)] = static_cast<double>(k) * cfg.sample_rate / cfg.dft_size;
  }
  freqs[0] = kMinResponseFrequency;
  return freqs;
}

const std::vector<Doa>& measurement_doa_grid() {
  static const std::vector<Doa> grid = [] {
    std::vector<Doa> g;
    g.reserve(504);
    const auto ring = [&g](int el_min, int el_max, double distance) {
      for (int el = el_min; el <= el_max; el += 10) {
        for (int az = -180; az < 180; az += 10) g.push_back(Doa::from_degrees(az, el, distance));
      }
    };
    ring(-40, 40, 1.0);
    ring(-20, 20, 2.0);
    return g;
  }();
  return grid;
}

std::optional<std::size_t> grid_index(const Doa& doa) {
  if (!doa.distance()) return std::nullopt;
  const double az = doa.azimuth_deg();
  const double el = doa.elevation_deg();
  const double az_r = std::round(az / 10.0) * 10.0;
  const double el_r = std::round(el / 10.0) * 10.0;
  const double dist = *doa.distance();
  if (std::abs(az - az_r) > 1e-6 || std::abs(el - el_r) > 1e-6) return std::nullopt;
  int az_i = static_cast<int>(az_r);
  if (az_i == 180) az_i = -180;
  const int el_i = static_cast<int>(el_r);
  const int az_slot = (az_i + 180) / 10;
  if (std::abs(dist - 1.0) < 1e-6 && std::abs(el_i) <= 40) {
    return static_cast<std::size_t>((el_i + 40) / 10 * 36 + az_slot);
  }
  if (std::abs(dist - 2.0) < 1e-6 && std::abs(el_i) <= 20) {
    return static_cast<std::size_t>(324 + (el_i + 20) / 10 * 36 + az_slot);
  }
  return std::nullopt;
}

SteeringTable::SteeringTable(AudioFormat format, const StftConfig& cfg, const PhysicalConstants& constants)
    : format_(format), cfg_(cfg), constants_(constants) {
  const auto freqs = stft_bin_frequencies(cfg);
  const auto& grid = measurement_doa_grid();
  table_.reserve(grid.size());
  if (format == AudioFormat::Foa) {
    for (const Doa& doa : grid) table_.push_back(steering_vectors(format, doa, freqs, constants));
    return;
  }
  const MicGeometry& mics = tetrahedral_geometry();
  const RigidSphereModel model(freqs, constants, mics[0].radius);
  for (const Doa& doa : grid) table_.push_back(model.steering(mics, doa));
}

Eigen::MatrixXcd SteeringTable::lookup(const Doa& doa) const {
  if (const auto idx = grid_index(doa)) return table_[*idx];
  return steering_vectors(format_, doa, stft_bin_frequencies(cfg_), constants_);
}

const SteeringTable& SteeringTable::shared(AudioFormat format) {
  static std::once_flag foa_once, mic_once;
  static std::unique_ptr<SteeringTable> foa, mic;
  if (format == AudioFormat::Foa) {
    std::call_once(foa_once, [] { foa = std::make_unique<SteeringTable>(AudioFormat::Foa, StftConfig{}); });
    return *foa;
  }
  std::call_once(mic_once, [] { mic = std::make_unique<SteeringTable>(AudioFormat::Mic, StftConfig{}); });
  return *mic;
}

}  // namespace seld
