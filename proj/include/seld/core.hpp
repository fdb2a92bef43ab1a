#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace seld {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;

/// Frame hop shared by features and metrics; one-second segments are 50 frames.
inline constexpr double kMetricFrameHop = 0.02;
inline constexpr int kDefaultNumClasses = 11;

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Wraps an angle into [-pi, pi). Values already in range are returned untouched.
double normalize_azimuth(double azimuth);

// Coordinate convention: right-handed, front = (az 0, el 0) along +x,
// left = (az pi/2, el 0) along +y, top = (el pi/2) along +z.
class Doa {
 public:
  Doa() = default;
  Doa(double azimuth, double elevation, std::optional<double> distance = std::nullopt);

  static Doa from_degrees(double azimuth_deg, double elevation_deg,
                          std::optional<double> distance = std::nullopt);
  static Doa from_unit_vector(const Eigen::Vector3d& v,
                              std::optional<double> distance = std::nullopt);

  double azimuth() const { return azimuth_; }
  double elevation() const { return elevation_; }
  const std::optional<double>& distance() const { return distance_; }
  double azimuth_deg() const { return azimuth_ * kRadToDeg; }
  double elevation_deg() const { return elevation_ * kRadToDeg; }

  Eigen::Vector3d unit_vector() const;

  friend bool operator==(const Doa&, const Doa&) = default;

 private:
  double azimuth_ = 0.0;
  double elevation_ = 0.0;
  std::optional<double> distance_;
};

struct EventInstance {
  int class_id = 0;
  double onset = 0.0;   // seconds
  double offset = 0.0;  // seconds
  Doa doa;
  std::string source_ref;

  friend bool operator==(const EventInstance&, const EventInstance&) = default;
};

struct AnnotationSet {
  std::string recording_id;
  std::vector<EventInstance> events;
  double duration = 60.0;
  double frame_hop = kMetricFrameHop;
  int num_classes = kDefaultNumClasses;
  std::optional<int> max_polyphony;

  /// Number of metric frames, ceil(duration / frame_hop).
  Eigen::Index num_frames() const;
  /// Throws ValidationError on a broken invariant.
  void validate() const;
  void sort_events();
};

/// Class-indexed frame activity: T x C bits plus one Doa per active cell.
class FrameWiseOutput {
 public:
  FrameWiseOutput(Eigen::Index frames, int classes);

  Eigen::Index num_frames() const { return activity_.rows(); }
  int num_classes() const { return static_cast<int>(activity_.cols()); }

  bool active(Eigen::Index frame, int cls) const { return activity_(frame, cls) != 0; }
  const std::optional<Doa>& doa(Eigen::Index frame, int cls) const;
  void set(Eigen::Index frame, int cls, const Doa& doa);

  const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& activity() const {
    return activity_;
  }
  int active_count(Eigen::Index frame) const;

 private:
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> activity_;
  std::vector<std::optional<Doa>> doas_;
};

/// Half-open frame range [first, last) touched by an event with positive overlap.
struct FrameSpan {
  Eigen::Index first = 0;
  Eigen::Index last = 0;
};
FrameSpan event_frame_span(const EventInstance& event, double frame_hop, Eigen::Index num_frames);

FrameWiseOutput events_to_frames(const AnnotationSet& ann);

/// Maximal runs of activity per class, converted back to events (Doa of the run's first frame).
std::vector<EventInstance> frames_to_events(const FrameWiseOutput& frames, double frame_hop);

// Annotation CSV: class,start_time_s,end_time_s,azimuth_deg,elevation_deg,distance_m
void write_annotation_csv(std::ostream& os, const AnnotationSet& ann);
void write_annotation_csv(const std::filesystem::path& path, const AnnotationSet& ann);
AnnotationSet read_annotation_csv(std::istream& is, std::string recording_id, double duration,
                                  int num_classes = kDefaultNumClasses);
AnnotationSet read_annotation_csv(const std::filesystem::path& path, double duration,
                                  int num_classes = kDefaultNumClasses);

}  // namespace seld
