#include "seld/eval_harness.hpp"

#include <fmt/format.h>

#include <atomic>
#include <exception>
#include <iostream>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace seld {

namespace fs = std::filesystem;

const FoldPlan& fold_plan() {
  static const FoldPlan plan = {{
      {1, {3, 4}, 2, 1},
      {2, {4, 1}, 3, 2},
      {3, {1, 2}, 4, 3},
      {4, {2, 3}, 1, 4},
  }};
  return plan;
}

MetricsReport pool_statistics(const std::vector<SeldStatistics>& parts) {
  SeldStatistics total;
  for (const auto& p : parts) total += p;
  return MetricsReport::from_statistics(total);
}

CvReport evaluate_cv(const fs::path& est_dir, const fs::path& ref_dir, const Manifest& manifest,
                     const EvalOptions& options) {
  if (options.mode == EvalMode::SingleFold && (options.fold < 1 || options.fold > 4)) {
    throw ValidationError(fmt::format("fold must be in 1..4, got {}", options.fold));
  }
  if (options.jobs < 1) throw ValidationError("jobs must be >= 1");
  if (!fs::is_directory(ref_dir)) throw ValidationError("reference directory not found: " + ref_dir.string());

  std::vector<const Fold*> folds;
  if (options.mode == EvalMode::Pooled) {
    for (const auto& f : fold_plan()) folds.push_back(&f);
  } else if (options.mode == EvalMode::SingleFold) {
    folds.push_back(&fold_plan()[static_cast<size_t>(options.fold - 1)]);
  }
  const auto selected = [&](int split) {
    if (options.mode == EvalMode::EvalSet) return split == kEvalSplit;
    for (const Fold* f : folds) {
      if (f->test == split) return true;
    }
    return false;
  };

  std::vector<std::pair<std::string, const ManifestEntry*>> work;
  for (const auto& [id, entry] : manifest) {
    if (selected(entry.split)) work.emplace_back(id, &entry);
  }

  CvReport report;
  report.recordings.resize(work.size());
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto score = [&] {
    for (size_t i = next++; i < work.size(); i = next++) {
      try {
        const auto& [id, entry] = work[i];
        const fs::path ref_path = ref_dir / (id + ".csv");
        if (!fs::exists(ref_path)) throw std::runtime_error("missing reference annotation " + ref_path.string());
        const AnnotationSet ref = read_annotation_csv(ref_path, entry->duration_s, options.num_classes);
        const fs::path est_path = est_dir / (id + ".csv");
        RecordingScore& rs = report.recordings[i];
        rs.recording_id = id;
        rs.split = entry->split;
        AnnotationSet est;
        if (fs::exists(est_path)) {
          // estimates may overrun the recording; evaluate_recording trims them to the reference
          est = read_annotation_csv(est_path, std::numeric_limits<double>::max(), options.num_classes);
        } else {
          rs.missing_estimate = true;
          est.recording_id = id;
          est.duration = entry->duration_s;
          est.num_classes = options.num_classes;
        }
        rs.stats = evaluate_recording(ref, est);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> workers;
    const int n = std::max(1, std::min<int>(options.jobs, static_cast<int>(work.size())));
    for (int t = 1; t < n; ++t) workers.emplace_back(score);
    score();
  }
  if (error) std::rethrow_exception(error);

  // accumulation happens in manifest order so floating-point sums do not depend on scheduling
  std::vector<SeldStatistics> all;
  for (const auto& rs : report.recordings) {
    all.push_back(rs.stats);
    if (rs.missing_estimate) {
      report.missing_estimates.push_back(rs.recording_id);
      const auto msg = fmt::format("warning: no estimate for {}, scored as empty prediction", rs.recording_id);
      if (options.warn) {
        options.warn(msg);
      } else {
        std::cerr << msg << '\n';
      }
    }
  }
  report.pooled = pool_statistics(all);
  for (const Fold* f : folds) {
    std::vector<SeldStatistics> part;
    for (const auto& rs : report.recordings) {
      if (rs.split == f->test) part.push_back(rs.stats);
    }
    report.per_fold.emplace_back(fmt::format("fold{}", f->index), pool_statistics(part));
  }
  return report;
}

nlohmann::json to_json(const CvReport& report) {
  nlohmann::json folds = nlohmann::json::object();
  for (const auto& [name, r] : report.per_fold) folds[name] = to_json(r);
  return {{"pooled", to_json(report.pooled)},
          {"folds", folds},
          {"num_recordings", report.recordings.size()},
          {"missing_estimates", report.missing_estimates}};
}

}  // namespace seld
