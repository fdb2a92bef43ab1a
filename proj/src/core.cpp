#include "seld/core.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace seld {

namespace {

// Frame boundaries that coincide with event edges within this tolerance do not count as overlap.
constexpr double kTimeEps = 1e-9;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& text, const char* field, int line_no) {
  try {
    size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(fmt::format("annotation line {}: bad {} value '{}'", line_no, field, text));
  }
}

}  // namespace

double normalize_azimuth(double azimuth) {
  if (!std::isfinite(azimuth)) throw ValidationError("azimuth must be finite");
  if (azimuth >= -kPi && azimuth < kPi) return azimuth;
  double wrapped = std::fmod(azimuth + kPi, 2.0 * kPi);
  if (wrapped < 0.0) wrapped += 2.0 * kPi;
  wrapped -= kPi;
  if (wrapped >= kPi) wrapped = -kPi;
  return wrapped;
}

Doa::Doa(double azimuth, double elevation, std::optional<double> distance)
    : azimuth_(normalize_azimuth(azimuth)), elevation_(elevation), distance_(distance) {
  if (!std::isfinite(elevation) || std::abs(elevation) > kPi / 2.0 + 1e-12) {
    throw ValidationError(fmt::format("elevation {} rad outside [-pi/2, pi/2]", elevation));
  }
  elevation_ = std::clamp(elevation, -kPi / 2.0, kPi / 2.0);
  if (distance_ && !(std::isfinite(*distance_) && *distance_ > 0.0)) {
    throw ValidationError(fmt::format("distance {} must be positive and finite", *distance_));
  }
}

Doa Doa::from_degrees(double azimuth_deg, double elevation_deg, std::optional<double> distance) {
  return Doa(azimuth_deg * kDegToRad, elevation_deg * kDegToRad, distance);
}

Doa Doa::from_unit_vector(const Eigen::Vector3d& v, std::optional<double> distance) {
  const double norm = v.norm();
  if (!(norm > 0.0)) throw ValidationError("zero direction vector");
  const Eigen::Vector3d u = v / norm;
  return Doa(std::atan2(u.y(), u.x()), std::asin(std::clamp(u.z(), -1.0, 1.0)), distance);
}

Eigen::Vector3d Doa::unit_vector() const {
  const double ce = std::cos(elevation_);
  return {ce * std::cos(azimuth_), ce * std::sin(azimuth_), std::sin(elevation_)};
}

Eigen::Index AnnotationSet::num_frames() const {
  const double ratio = duration / frame_hop;
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) < 1e-9 * std::max(1.0, ratio)) return static_cast<Eigen::Index>(nearest);
  return static_cast<Eigen::Index>(std::ceil(ratio));
}

void AnnotationSet::validate() const {
  if (!(duration > 0.0)) throw ValidationError("duration must be positive");
  if (!(frame_hop > 0.0)) throw ValidationError("frame_hop must be positive");
  if (num_classes <= 0) throw ValidationError("num_classes must be positive");
  for (const auto& ev : events) {
    if (ev.class_id < 0 || ev.class_id >= num_classes) {
      throw ValidationError(fmt::format("{}: class {} outside [0, {})", recording_id, ev.class_id, num_classes));
    }
    if (!(ev.onset >= 0.0) || !(ev.offset > ev.onset)) {
      throw ValidationError(fmt::format("{}: event [{}, {}] has non-positive length", recording_id,
                                        ev.onset, ev.offset));
    }
    if (ev.offset > duration + kTimeEps) {
      throw ValidationError(fmt::format("{}: event ends at {} s beyond duration {} s", recording_id,
                                        ev.offset, duration));
    }
  }
  if (max_polyphony) {
    std::vector<std::pair<double, int>> edges;
    for (const auto& ev : events) {
      edges.emplace_back(ev.onset, +1);
      edges.emplace_back(ev.offset, -1);
    }
    // ends sort before starts at equal times: touching events do not overlap
    std::sort(edges.begin(), edges.end());
    int depth = 0;
    for (const auto& [t, delta] : edges) {
      depth += delta;
      if (depth > *max_polyphony) {
        throw ValidationError(fmt::format("{}: polyphony {} at {} s exceeds {}", recording_id, depth, t,
                                          *max_polyphony));
      }
    }
  }
}

void AnnotationSet::sort_events() {
  std::stable_sort(events.begin(), events.end(),
                   [](const EventInstance& a, const EventInstance& b) { return a.onset < b.onset; });
}

FrameWiseOutput::FrameWiseOutput(Eigen::Index frames, int classes)
    : activity_(Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(frames, classes)),
      doas_(static_cast<size_t>(frames * classes)) {}

const std::optional<Doa>& FrameWiseOutput::doa(Eigen::Index frame, int cls) const {
  return doas_[static_cast<size_t>(frame * num_classes() + cls)];
}

void FrameWiseOutput::set(Eigen::Index frame, int cls, const Doa& doa) {
  activity_(frame, cls) = 1;
  doas_[static_cast<size_t>(frame * num_classes() + cls)] = doa;
}

int FrameWiseOutput::active_count(Eigen::Index frame) const {
  return activity_.row(frame).cast<int>().sum();
}

FrameSpan event_frame_span(const EventInstance& event, double frame_hop, Eigen::Index num_frames) {
  // frame t covers [t*hop, (t+1)*hop); active iff t*hop < offset and (t+1)*hop > onset
  auto first = static_cast<Eigen::Index>(std::floor((event.onset + kTimeEps) / frame_hop));
  auto last = static_cast<Eigen::Index>(std::ceil((event.offset - kTimeEps) / frame_hop));
  first = std::clamp<Eigen::Index>(first, 0, num_frames);
  last = std::clamp<Eigen::Index>(last, first, num_frames);
  return {first, last};
}

FrameWiseOutput events_to_frames(const AnnotationSet& ann) {
  ann.validate();
  FrameWiseOutput out(ann.num_frames(), ann.num_classes);
  std::vector<const EventInstance*> ordered;
  for (const auto& ev : ann.events) ordered.push_back(&ev);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const EventInstance* a, const EventInstance* b) { return a->onset < b->onset; });
  for (const EventInstance* ev : ordered) {
    const auto span = event_frame_span(*ev, ann.frame_hop, out.num_frames());
    for (Eigen::Index t = span.first; t < span.last; ++t) {
      if (!out.active(t, ev->class_id)) out.set(t, ev->class_id, ev->doa);  // earlier onset keeps the slot
    }
  }
  return out;
}

std::vector<EventInstance> frames_to_events(const FrameWiseOutput& frames, double frame_hop) {
  std::vector<EventInstance> events;
  for (int c = 0; c < frames.num_classes(); ++c) {
    Eigen::Index t = 0;
    while (t < frames.num_frames()) {
      if (!frames.active(t, c)) {
        ++t;
        continue;
      }
      const Eigen::Index start = t;
      while (t < frames.num_frames() && frames.active(t, c)) ++t;
      EventInstance ev;
      ev.class_id = c;
      ev.onset = static_cast<double>(start) * frame_hop;
      ev.offset = static_cast<double>(t) * frame_hop;
      ev.doa = *frames.doa(start, c);
      events.push_back(std::move(ev));
    }
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const EventInstance& a, const EventInstance& b) { return a.onset < b.onset; });
  return events;
}

void write_annotation_csv(std::ostream& os, const AnnotationSet& ann) {
  os << "class,start_time_s,end_time_s,azimuth_deg,elevation_deg,distance_m\n";
  for (const auto& ev : ann.events) {
    os << fmt::format("{},{:.6f},{:.6f},{:.4f},{:.4f},", ev.class_id, ev.onset, ev.offset,
                      ev.doa.azimuth_deg(), ev.doa.elevation_deg());
    if (ev.doa.distance()) os << fmt::format("{:.4f}", *ev.doa.distance());
    os << '\n';
  }
}

void write_annotation_csv(const std::filesystem::path& path, const AnnotationSet& ann) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_annotation_csv(os, ann);
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

AnnotationSet read_annotation_csv(std::istream& is, std::string recording_id, double duration,
                                  int num_classes) {
  AnnotationSet ann;
  ann.recording_id = std::move(recording_id);
  ann.duration = duration;
  ann.num_classes = num_classes;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("class", 0) == 0) continue;
    }
    auto fields = split_csv_line(line);
    if (fields.size() < 5 || fields.size() > 6) {
      throw ValidationError(fmt::format("annotation line {}: expected 6 fields, got {}", line_no, fields.size()));
    }
    for (auto& f : fields) f = trim(f);
    EventInstance ev;
    const double cls = parse_double(fields[0], "class", line_no);
    if (cls != std::floor(cls)) throw ValidationError(fmt::format("annotation line {}: class not integral", line_no));
    ev.class_id = static_cast<int>(cls);
    ev.onset = parse_double(fields[1], "start_time_s", line_no);
    ev.offset = parse_double(fields[2], "end_time_s", line_no);
    std::optional<double> distance;
    if (fields.size() == 6 && !fields[5].empty()) distance = parse_double(fields[5], "distance_m", line_no);
    ev.doa = Doa::from_degrees(parse_double(fields[3], "azimuth_deg", line_no),
                               parse_double(fields[4], "elevation_deg", line_no), distance);
    ann.events.push_back(std::move(ev));
  }
  ann.sort_events();
  ann.validate();
  return ann;
}

AnnotationSet read_annotation_csv(const std::filesystem::path& path, double duration, int num_classes) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return read_annotation_csv(is, path.stem().string(), duration, num_classes);
}

}  // namespace seld
