#pragma once

#include "seld/manifest.hpp"
#include "seld/seld_metrics.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace seld {

struct Fold {
  int index = 1;
  std::array<int, 2> train{};
  int validation = 0;
  int test = 0;
};

using FoldPlan = std::array<Fold, 4>;

/// The fixed four-fold rotation over dev splits 1..4.
const FoldPlan& fold_plan();

enum class EvalMode { Pooled, SingleFold, EvalSet };

struct EvalOptions {
  EvalMode mode = EvalMode::Pooled;
  int fold = 1;  // used by SingleFold
  int num_classes = kDefaultNumClasses;
  int jobs = 1;
  std::function<void(const std::string&)> warn;  // defaults to stderr
};

struct RecordingScore {
  std::string recording_id;
  int split = 0;
  bool missing_estimate = false;
  SeldStatistics stats;
};

struct CvReport {
  MetricsReport pooled;
  std::vector<std::pair<std::string, MetricsReport>> per_fold;  // "fold1".. or empty in eval-set mode
  std::vector<std::string> missing_estimates;
  std::vector<RecordingScore> recordings;  // manifest order
};

/// Sums raw statistics, then computes the metrics once.
MetricsReport pool_statistics(const std::vector<SeldStatistics>& parts);

/// Scores `<est_dir>/<id>.csv` against `<ref_dir>/<id>.csv` for the manifest's test recordings.
CvReport evaluate_cv(const std::filesystem::path& est_dir, const std::filesystem::path& ref_dir,
                     const Manifest& manifest, const EvalOptions& options = {});

nlohmann::json to_json(const CvReport& report);

}  // namespace seld
