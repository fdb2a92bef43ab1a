#include "seld/eval_harness.hpp"

#include "seld/random.hpp"

#include <doctest.h>
#include <fmt/format.h>

#include <algorithm>
#include <set>

using namespace seld;
namespace fs = std::filesystem;

namespace {

struct Workspace {
  fs::path root, ref, est;
  Manifest manifest;

  explicit Workspace(const std::string& name) : root(fs::temp_directory_path() / name) {
    fs::remove_all(root);
    ref = root / "ref";
    est = root / "est";
    fs::create_directories(ref);
    fs::create_directories(est);
  }
  ~Workspace() { fs::remove_all(root); }

  void add(const std::string& id, int split, const std::vector<EventInstance>& ref_events,
           const std::optional<std::vector<EventInstance>>& est_events, double duration = 10.0) {
    AnnotationSet a;
    a.recording_id = id;
    a.duration = duration;
    a.events = ref_events;
    write_annotation_csv(ref / (id + ".csv"), a);
    if (est_events) {
      a.events = *est_events;
      write_annotation_csv(est / (id + ".csv"), a);
    }
    ManifestEntry m;
    m.split = split;
    m.duration_s = duration;
    m.formats = {"foa"};
    manifest.emplace(id, m);
  }
};

EventInstance ev(int cls, double on, double off, double az = 0.0, double el = 0.0) {
  return {cls, on, off, Doa::from_degrees(az, el, 1.0), ""};
}

EvalOptions quiet(EvalMode mode = EvalMode::Pooled, int fold = 1) {
  EvalOptions o;
  o.mode = mode;
  o.fold = fold;
  o.warn = [](const std::string&) {};
  return o;
}

}  // namespace

TEST_CASE("fold rotation") {
  const auto& plan = fold_plan();
  CHECK(plan[0].test == 1);
  CHECK(plan[0].validation == 2);
  CHECK(plan[0].train == std::array<int, 2>{3, 4});
  CHECK(plan[3].validation == 1);
  std::multiset<int> tests, vals;
  for (const auto& f : plan) {
    tests.insert(f.test);
    vals.insert(f.validation);
    std::set<int> roles{f.train[0], f.train[1], f.validation, f.test};
    CHECK(roles == std::set<int>{1, 2, 3, 4});
  }
  CHECK(tests == std::multiset<int>{1, 2, 3, 4});
  CHECK(vals == std::multiset<int>{1, 2, 3, 4});
}

TEST_CASE("pooling sums statistics instead of averaging fold metrics") {
  Workspace ws("seld_eval_pool");
  // fold 1: N = 10 active segments, one deleted; fold 2: N = 5, three deleted
  ws.add("a", 1, {ev(0, 0.0, 10.0)}, std::vector{ev(0, 0.0, 8.9)});
  ws.add("b", 2, {ev(1, 0.0, 5.0)}, std::vector{ev(1, 0.0, 1.9)});
  const auto report = evaluate_cv(ws.est, ws.ref, ws.manifest, quiet());
  CHECK(report.per_fold.size() == 4);
  CHECK(report.per_fold[0].second.er == doctest::Approx(0.1));
  CHECK(report.per_fold[1].second.er == doctest::Approx(0.6));
  CHECK(report.pooled.raw.segments.n == 15);
  CHECK(report.pooled.er == doctest::Approx(4.0 / 15.0));
  CHECK(report.pooled.er != doctest::Approx(0.35));
}

TEST_CASE("self-evaluation is perfect") {
  Workspace ws("seld_eval_self");
  const std::vector<std::vector<EventInstance>> scenes = {
      {ev(0, 0.5, 3.0, 20, 10), ev(3, 2.0, 6.5, -170, -40)},
      {ev(10, 0.0, 10.0, 90, 50)},
      {ev(1, 1.0, 1.5, 0, 0), ev(1, 4.0, 9.0, 40, 0), ev(2, 4.5, 5.5, -30, 20)},
      {ev(5, 7.7, 9.9, 180, -10)},
  };
  for (int s = 1; s <= 4; ++s) {
    const auto& evs = scenes[static_cast<size_t>(s - 1)];
    ws.add(fmt::format("r{}", s), s, evs, evs);
  }
  const auto report = evaluate_cv(ws.est, ws.ref, ws.manifest, quiet());
  CHECK(report.pooled.er == 0.0);
  CHECK(report.pooled.f == 100.0);
  CHECK(report.pooled.doa_error == 0.0);
  CHECK(report.pooled.frame_recall == 100.0);
  CHECK(report.missing_estimates.empty());
  CHECK(report.recordings.size() == 4);
}

TEST_CASE("single recording: pooled equals the recording's own report") {
  Workspace ws("seld_eval_single");
  const std::vector<EventInstance> ref = {ev(0, 0.0, 4.0, 10, 0), ev(2, 3.0, 7.0, -60, 20)};
  const std::vector<EventInstance> est = {ev(0, 0.2, 3.5, 18, 5), ev(4, 5.0, 6.0, 100, 0)};
  ws.add("only", 3, ref, est);
  const auto report = evaluate_cv(ws.est, ws.ref, ws.manifest, quiet());
  AnnotationSet r, e;
  r.duration = e.duration = 10.0;
  r.events = ref;
  e.events = est;
  const auto direct = MetricsReport::from_statistics(evaluate_recording(r, e));
  CHECK(report.pooled.er == direct.er);
  CHECK(report.pooled.f == direct.f);
  CHECK(report.pooled.doa_error == direct.doa_error);
  CHECK(report.pooled.frame_recall == direct.frame_recall);
}

TEST_CASE("pooled metrics do not depend on processing order or worker count") {
  Workspace ws("seld_eval_perm");
  Rng rng(11);
  for (int k = 0; k < 12; ++k) {
    std::vector<EventInstance> ref, est;
    for (int n = 0; n < 4; ++n) {
      const double on = 8.0 * uniform01(rng);
      ref.push_back(ev(static_cast<int>(uniform_index(rng, 11)), on, on + 1.5, 360.0 * uniform01(rng) - 180.0, 0));
      est.push_back(ev(static_cast<int>(uniform_index(rng, 11)), on + 0.3, on + 1.2, 360.0 * uniform01(rng) - 180.0, 10));
    }
    ws.add(fmt::format("rec{:02}", k), k % 4 + 1, ref, est);
  }
  auto opt = quiet();
  const auto base = evaluate_cv(ws.est, ws.ref, ws.manifest, opt);
  opt.jobs = 5;
  const auto parallel = evaluate_cv(ws.est, ws.ref, ws.manifest, opt);
  CHECK(parallel.pooled.er == base.pooled.er);
  CHECK(parallel.pooled.doa_error == base.pooled.doa_error);

  std::vector<SeldStatistics> stats;
  for (const auto& r : base.recordings) stats.push_back(r.stats);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(stats.begin(), stats.end(), rng);
    const auto shuffled = pool_statistics(stats);
    CHECK(shuffled.er == doctest::Approx(base.pooled.er).epsilon(1e-12));
    CHECK(shuffled.f == doctest::Approx(base.pooled.f).epsilon(1e-12));
    CHECK(shuffled.doa_error == doctest::Approx(base.pooled.doa_error).epsilon(1e-12));
    CHECK(shuffled.frame_recall == doctest::Approx(base.pooled.frame_recall).epsilon(1e-12));
  }
}

TEST_CASE("missing estimate is scored as empty and reported") {
  Workspace ws("seld_eval_missing");
  ws.add("present", 1, {ev(0, 0.0, 2.0)}, std::vector{ev(0, 0.0, 2.0)});
  ws.add("absent", 2, {ev(0, 0.0, 3.0)}, std::nullopt);
  std::vector<std::string> warnings;
  auto opt = quiet();
  opt.warn = [&](const std::string& w) { warnings.push_back(w); };
  const auto report = evaluate_cv(ws.est, ws.ref, ws.manifest, opt);
  CHECK(report.missing_estimates == std::vector<std::string>{"absent"});
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("absent") != std::string::npos);
  CHECK(report.pooled.raw.segments.n == 5);
  CHECK(report.pooled.raw.segments.d == 3);
  CHECK(report.pooled.er == doctest::Approx(0.6));
  const auto j = to_json(report);
  CHECK(j["missing_estimates"] == nlohmann::json::array({"absent"}));
  CHECK(j["num_recordings"] == 2);
}

TEST_CASE("missing reference is an error") {
  Workspace ws("seld_eval_noref");
  ws.add("x", 1, {}, std::vector<EventInstance>{});
  fs::remove(ws.ref / "x.csv");
  CHECK_THROWS(evaluate_cv(ws.est, ws.ref, ws.manifest, quiet()));
}

TEST_CASE("modes select the right recordings") {
  Workspace ws("seld_eval_modes");
  for (int s = 1; s <= 4; ++s) {
    for (int k = 0; k < 2; ++k) ws.add(fmt::format("split{}_{}", s, k), s, {ev(0, 0, 1)}, std::vector{ev(0, 0, 1)});
  }
  ws.add("eval_1", kEvalSplit, {ev(1, 0, 1)}, std::vector{ev(2, 0, 1)});

  const auto pooled = evaluate_cv(ws.est, ws.ref, ws.manifest, quiet());
  CHECK(pooled.recordings.size() == 8);
  std::multiset<std::string> consumed;
  for (const auto& r : pooled.recordings) consumed.insert(r.recording_id);
  for (int s = 1; s <= 4; ++s) {
    for (int k = 0; k < 2; ++k) CHECK(consumed.count(fmt::format("split{}_{}", s, k)) == 1);
  }

  const auto fold3 = evaluate_cv(ws.est, ws.ref, ws.manifest, quiet(EvalMode::SingleFold, 3));
  REQUIRE(fold3.recordings.size() == 2);
  for (const auto& r : fold3.recordings) CHECK(r.split == 3);
  CHECK(fold3.per_fold.size() == 1);
  CHECK(fold3.per_fold[0].first == "fold3");

  const auto evalset = evaluate_cv(ws.est, ws.ref, ws.manifest, quiet(EvalMode::EvalSet));
  REQUIRE(evalset.recordings.size() == 1);
  CHECK(evalset.recordings[0].recording_id == "eval_1");
  CHECK(evalset.per_fold.empty());
  CHECK(evalset.pooled.er == doctest::Approx(1.0));  // wrong class in the only segment: one substitution
  CHECK_THROWS_AS(evaluate_cv(ws.est, ws.ref, ws.manifest, quiet(EvalMode::SingleFold, 5)), ValidationError);
}
