#pragma once

#include "seld/core.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace seld {

/// Great-circle angle in radians, elevation taken as latitude.
double spherical_distance(const Doa& a, const Doa& b);

struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (row, col), sorted by row
  double total_cost = 0.0;
};

/// Minimum-cost matching of min(R, E) pairs on a rectangular cost matrix.
Assignment hungarian_assign(const Eigen::Ref<const Eigen::MatrixXd>& cost);

/// Segment-level detection statistics, summed over one-second segments.
struct SegmentCounts {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  long long n = 0;  // active reference (segment, class) cells
  long long s = 0;
  long long d = 0;
  long long i = 0;

  SegmentCounts& operator+=(const SegmentCounts& o);
  friend SegmentCounts operator+(SegmentCounts a, const SegmentCounts& b) { return a += b; }
  friend bool operator==(const SegmentCounts&, const SegmentCounts&) = default;
};

struct DoaFrameLists {
  std::vector<std::vector<Doa>> reference;  // per frame
  std::vector<std::vector<Doa>> estimate;

  Eigen::Index num_frames() const { return static_cast<Eigen::Index>(reference.size()); }
};

/// All DOAs of all events overlapping each frame, for both sides.
DoaFrameLists doa_frame_lists(const AnnotationSet& ref, const AnnotationSet& est);

/// Raw localization statistics; merge is plain addition.
struct DoaAccumulator {
  double error_sum_deg = 0.0;  // sum over frames of the assignment cost
  long long estimate_count = 0;  // sum over frames of D_E
  long long recall_hits = 0;     // frames with D_R == D_E
  long long frames = 0;

  DoaAccumulator& operator+=(const DoaAccumulator& o);
  friend DoaAccumulator operator+(DoaAccumulator a, const DoaAccumulator& b) { return a += b; }
};

DoaAccumulator accumulate_doa(const DoaFrameLists& frames);

struct DoaErrorResult {
  double degrees = 0.0;
  bool defined = false;  // false when no estimate appears in any frame
};
DoaErrorResult doa_error(const DoaFrameLists& frames);
double frame_recall(const DoaFrameLists& frames);

SegmentCounts segment_sed_counts(const FrameWiseOutput& ref, const FrameWiseOutput& est, int segment_frames = 50);

struct ErFscore {
  double er = 0.0;
  bool er_defined = false;
  double f_percent = 0.0;
  bool f_defined = false;
};
ErFscore er_fscore(const SegmentCounts& counts);

/// Everything needed to score one or many recordings.
struct SeldStatistics {
  SegmentCounts segments;
  DoaAccumulator doa;

  SeldStatistics& operator+=(const SeldStatistics& o) {
    segments += o.segments;
    doa += o.doa;
    return *this;
  }
};

SeldStatistics evaluate_recording(const AnnotationSet& ref, const AnnotationSet& est, int segment_frames = 50);

struct MetricsReport {
  double er = 0.0;
  double f = 0.0;             // percent
  double doa_error = 0.0;     // degrees
  double frame_recall = 0.0;  // percent
  bool er_defined = false;
  bool f_defined = false;
  bool doa_error_defined = false;
  SeldStatistics raw;

  static MetricsReport from_statistics(const SeldStatistics& stats);
};

nlohmann::json to_json(const MetricsReport& report);
std::string format_table(const std::vector<std::pair<std::string, MetricsReport>>& rows);

struct Standing {
  std::string method_id;
  int position = 0;
  int rank_er = 0;
  int rank_f = 0;
  int rank_doa = 0;
  int rank_fr = 0;
  int rank_sum = 0;
};

/// Rank per metric (ties share the better rank), order by rank sum, then ER, then DOA error.
std::vector<Standing> rank_methods(const std::vector<std::pair<std::string, MetricsReport>>& entries);

}  // namespace seld
