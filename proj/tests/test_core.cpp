#include "seld/core.hpp"
#include "seld/random.hpp"

#include <Eigen/Geometry>
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace seld;

namespace {

EventInstance ev(int cls, double on, double off, double az_deg = 0.0, double el_deg = 0.0) {
  return {cls, on, off, Doa::from_degrees(az_deg, el_deg, 1.0), "clip"};
}

AnnotationSet make_set(std::vector<EventInstance> events, double duration = 2.0) {
  AnnotationSet a;
  a.recording_id = "r";
  a.events = std::move(events);
  a.duration = duration;
  return a;
}

}  // namespace

TEST_CASE("azimuth wraps into [-pi, pi)") {
  CHECK(normalize_azimuth(kPi) == doctest::Approx(-kPi));
  CHECK(normalize_azimuth(-kPi) == -kPi);
  CHECK(normalize_azimuth(3 * kPi / 2) == doctest::Approx(-kPi / 2));
  CHECK(normalize_azimuth(0.25) == 0.25);
  CHECK(normalize_azimuth(-7 * kPi) == doctest::Approx(-kPi));
}

TEST_CASE("azimuth normalization is idempotent") {
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const double a = (uniform01(rng) - 0.5) * 100.0;
    const double once = normalize_azimuth(a);
    CHECK(normalize_azimuth(once) == once);
    CHECK(once >= -kPi);
    CHECK(once < kPi);
  }
}

TEST_CASE("Doa validation") {
  CHECK_THROWS_AS(Doa(0.0, 2.0), ValidationError);
  CHECK_THROWS_AS(Doa(0.0, 0.0, 0.0), ValidationError);
  CHECK_THROWS_AS(Doa(0.0, 0.0, -1.0), ValidationError);
  CHECK_THROWS_AS(Doa(0.0, 0.0, INFINITY), ValidationError);
  CHECK_THROWS_AS(Doa(NAN, 0.0), ValidationError);
  CHECK_NOTHROW(Doa(0.0, kPi / 2, 2.0));
}

TEST_CASE("coordinate convention: front, left, top") {
  const auto front = Doa::from_degrees(0, 0).unit_vector();
  const auto left = Doa::from_degrees(90, 0).unit_vector();
  const auto top = Doa::from_degrees(0, 90).unit_vector();
  CHECK(front.isApprox(Eigen::Vector3d(1, 0, 0)));
  CHECK((left - Eigen::Vector3d(0, 1, 0)).norm() < 1e-15);
  CHECK((top - Eigen::Vector3d(0, 0, 1)).norm() < 1e-15);
  CHECK(front.cross(left).isApprox(top));  // right-handed
}

TEST_CASE("unit vector round trip") {
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const Doa d(2 * kPi * uniform01(rng) - kPi, (uniform01(rng) - 0.5) * 3.0);
    const Doa back = Doa::from_unit_vector(d.unit_vector() * 3.0);
    CHECK(std::abs(std::remainder(back.azimuth() - d.azimuth(), 2 * kPi)) < 1e-12);
    CHECK(back.elevation() == doctest::Approx(d.elevation()).epsilon(1e-12));
  }
}

TEST_CASE("event of 50 ms covers three 20 ms frames") {
  const auto frames = events_to_frames(make_set({ev(0, 0.0, 0.05)}));
  CHECK(frames.num_frames() == 100);
  CHECK(frames.active(0, 0));
  CHECK(frames.active(1, 0));
  CHECK(frames.active(2, 0));
  CHECK_FALSE(frames.active(3, 0));
}

TEST_CASE("empty annotation gives all-zero activity") {
  const auto frames = events_to_frames(make_set({}));
  CHECK(frames.activity().cast<int>().sum() == 0);
}

TEST_CASE("frame activity matches a per-frame overlap check") {
  const auto ann = make_set({ev(0, 0.0, 1.0), ev(3, 0.5, 1.5)});
  const auto frames = events_to_frames(ann);
  std::set<int> at30;
  for (int c = 0; c < ann.num_classes; ++c) {
    if (frames.active(30, c)) at30.insert(c);
  }
  CHECK(at30 == std::set<int>{0, 3});

  // brute force: frame t active for c iff [t*hop, (t+1)*hop) overlaps an event of c
  for (Eigen::Index t = 0; t < frames.num_frames(); ++t) {
    for (int c = 0; c < ann.num_classes; ++c) {
      bool expect = false;
      for (const auto& e : ann.events) {
        const double a = static_cast<double>(t) * ann.frame_hop, b = static_cast<double>(t + 1) * ann.frame_hop;
        if (e.class_id == c && std::min(b, e.offset) - std::max(a, e.onset) > 1e-9) expect = true;
      }
      CHECK(frames.active(t, c) == expect);
      CHECK(frames.doa(t, c).has_value() == expect);
    }
  }
}

TEST_CASE("frame count is ceil(duration / hop)") {
  AnnotationSet a;
  a.duration = 1.0;
  CHECK(a.num_frames() == 50);
  a.duration = 1.001;
  CHECK(a.num_frames() == 51);
  a.duration = 60.0;
  CHECK(a.num_frames() == 3000);
}

TEST_CASE("earlier onset wins the Doa slot for same-class overlap") {
  auto ann = make_set({ev(2, 0.1, 0.5, 30, 0), ev(2, 0.3, 0.9, -60, 10)});
  const auto frames = events_to_frames(ann);
  CHECK(frames.doa(20, 2)->azimuth_deg() == doctest::Approx(30));
  CHECK(frames.doa(40, 2)->azimuth_deg() == doctest::Approx(-60));
}

TEST_CASE("validation rejects broken annotations") {
  CHECK_THROWS_AS(make_set({ev(0, 1.5, 2.5)}).validate(), ValidationError);
  CHECK_THROWS_AS(make_set({ev(11, 0.0, 1.0)}).validate(), ValidationError);
  CHECK_THROWS_AS(make_set({ev(0, 1.0, 1.0)}).validate(), ValidationError);
  CHECK_THROWS_AS(events_to_frames(make_set({ev(0, 1.5, 2.5)})), ValidationError);
  auto poly = make_set({ev(0, 0.0, 1.0), ev(1, 0.5, 1.5), ev(2, 0.7, 0.8)});
  poly.max_polyphony = 2;
  CHECK_THROWS_AS(poly.validate(), ValidationError);
  auto touching = make_set({ev(0, 0.0, 1.0), ev(1, 1.0, 1.5)});
  touching.max_polyphony = 1;
  CHECK_NOTHROW(touching.validate());
}

TEST_CASE("re-segmenting frames reproduces events within one hop") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    AnnotationSet ann;
    ann.duration = 10.0;
    double t = 0.1;
    while (true) {
      const double len = 0.1 + 1.5 * uniform01(rng);
      if (t + len > ann.duration) break;
      ann.events.push_back(ev(static_cast<int>(uniform_index(rng, 11)), t, t + len));
      t += len + 0.05 + uniform01(rng);
    }
    const auto back = frames_to_events(events_to_frames(ann), ann.frame_hop);
    REQUIRE(back.size() == ann.events.size());
    for (size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].class_id == ann.events[i].class_id);
      CHECK(std::abs(back[i].onset - ann.events[i].onset) <= ann.frame_hop + 1e-9);
      CHECK(std::abs(back[i].offset - ann.events[i].offset) <= ann.frame_hop + 1e-9);
    }
  }
}

TEST_CASE("declared polyphony bounds per-frame active classes") {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    AnnotationSet ann;
    ann.duration = 20.0;
    ann.max_polyphony = 2;
    // two non-overlapping lanes, distinct classes per lane
    for (int lane = 0; lane < 2; ++lane) {
      double t = uniform01(rng);
      while (true) {
        const double len = 0.2 + uniform01(rng);
        if (t + len > ann.duration) break;
        ann.events.push_back(ev(lane * 5 + static_cast<int>(uniform_index(rng, 5)), t, t + len));
        t += len + 0.1 + uniform01(rng);
      }
    }
    ann.sort_events();
    ann.validate();
    const auto frames = events_to_frames(ann);
    for (Eigen::Index f = 0; f < frames.num_frames(); ++f) CHECK(frames.active_count(f) <= 2);
  }
}

TEST_CASE("annotation CSV round trip") {
  AnnotationSet ann = make_set({ev(4, 0.25, 1.125, -170, 30), ev(1, 0.5, 1.0, 40, -20)}, 2.0);
  ann.events[1].doa = Doa::from_degrees(40, -20);  // no distance
  ann.sort_events();
  std::stringstream ss;
  write_annotation_csv(ss, ann);
  const std::string text = ss.str();
  CHECK(text.rfind("class,start_time_s,end_time_s,azimuth_deg,elevation_deg,distance_m\n", 0) == 0);
  const AnnotationSet back = read_annotation_csv(ss, "r", 2.0);
  REQUIRE(back.events.size() == 2);
  CHECK(back.events[0].class_id == 4);
  CHECK(back.events[0].doa.azimuth_deg() == doctest::Approx(-170));
  CHECK(back.events[0].doa.distance() == 1.0);
  CHECK_FALSE(back.events[1].doa.distance().has_value());
  std::stringstream again;
  write_annotation_csv(again, back);
  CHECK(again.str() == text);
}

TEST_CASE("malformed CSV is a validation error") {
  std::stringstream bad("class,start_time_s,end_time_s,azimuth_deg,elevation_deg,distance_m\n1,0.1,x,0,0,\n");
  CHECK_THROWS_AS(read_annotation_csv(bad, "r", 2.0), ValidationError);
  std::stringstream out_of_range("class,start_time_s,end_time_s,azimuth_deg,elevation_deg,distance_m\n1,0.1,3.0,0,0,\n");
  CHECK_THROWS_AS(read_annotation_csv(out_of_range, "r", 2.0), ValidationError);
}
