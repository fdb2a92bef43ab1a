#include "seld/seld_metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace seld {

double spherical_distance(const Doa& a, const Doa& b) {
  // atan2 form of the central angle: well conditioned near 0 and pi, exactly 0 for equal inputs
  const double s1 = std::sin(a.elevation()), c1 = std::cos(a.elevation());
  const double s2 = std::sin(b.elevation()), c2 = std::cos(b.elevation());
  const double dl = a.azimuth() - b.azimuth();
  const double y1 = c2 * std::sin(dl);
  const double y2 = c1 * s2 - s1 * c2 * std::cos(dl);
  return std::atan2(std::hypot(y1, y2), s1 * s2 + c1 * c2 * std::cos(dl));
}

Assignment hungarian_assign(const Eigen::Ref<const Eigen::MatrixXd>& cost) {
  Assignment result;
  if (cost.rows() == 0 || cost.cols() == 0) return result;
  if (!cost.allFinite()) throw ValidationError("hungarian_assign: non-finite cost");

  const bool transposed = cost.rows() > cost.cols();
  const Eigen::MatrixXd a = transposed ? Eigen::MatrixXd(cost.transpose()) : Eigen::MatrixXd(cost);
  const Eigen::Index n = a.rows();  // n <= m
  const Eigen::Index m = a.cols();

  // Shortest augmenting path with row/column potentials; 1-based with a virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(n + 1), 0.0), v(static_cast<size_t>(m + 1), 0.0);
  std::vector<Eigen::Index> match(static_cast<size_t>(m + 1), 0), way(static_cast<size_t>(m + 1), 0);
  for (Eigen::Index i = 1; i <= n; ++i) {
    match[0] = i;
    Eigen::Index j0 = 0;
    std::vector<double> minv(static_cast<size_t>(m + 1), inf);
    std::vector<char> used(static_cast<size_t>(m + 1), 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const Eigen::Index i0 = match[static_cast<size_t>(j0)];
      double delta = inf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= m; ++j) {
        const auto js = static_cast<size_t>(j);
        if (used[js]) continue;
        const double reduced = a(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] - v[js];
        if (reduced < minv[js]) {
          minv[js] = reduced;
          way[js] = j0;
        }
        if (minv[js] < delta) {
          delta = minv[js];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= m; ++j) {
        const auto js = static_cast<size_t>(j);
        if (used[js]) {
          u[static_cast<size_t>(match[js])] += delta;
          v[js] -= delta;
        } else {
          minv[js] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<size_t>(j0)] != 0);
    do {
      const Eigen::Index j1 = way[static_cast<size_t>(j0)];
      match[static_cast<size_t>(j0)] = match[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  for (Eigen::Index j = 1; j <= m; ++j) {
    const Eigen::Index i = match[static_cast<size_t>(j)];
    if (i == 0) continue;
    const int row = static_cast<int>(i - 1);
    const int col = static_cast<int>(j - 1);
    if (transposed) {
      result.pairs.emplace_back(col, row);
    } else {
      result.pairs.emplace_back(row, col);
    }
    result.total_cost += a(i - 1, j - 1);
  }
  std::sort(result.pairs.begin(), result.pairs.end());
  return result;
}

SegmentCounts& SegmentCounts::operator+=(const SegmentCounts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  n += o.n;
  s += o.s;
  d += o.d;
  i += o.i;
  return *this;
}

DoaAccumulator& DoaAccumulator::operator+=(const DoaAccumulator& o) {
  error_sum_deg += o.error_sum_deg;
  estimate_count += o.estimate_count;
  recall_hits += o.recall_hits;
  frames += o.frames;
  return *this;
}

namespace {

std::vector<std::vector<Doa>> frame_doa_lists(const AnnotationSet& ann, Eigen::Index num_frames) {
  std::vector<std::vector<Doa>> lists(static_cast<size_t>(num_frames));
  for (const auto& ev : ann.events) {
    const auto span = event_frame_span(ev, ann.frame_hop, num_frames);
    for (Eigen::Index t = span.first; t < span.last; ++t) lists[static_cast<size_t>(t)].push_back(ev.doa);
  }
  return lists;
}

double assignment_cost_deg(const std::vector<Doa>& ref, const std::vector<Doa>& est) {
  if (ref.empty() || est.empty()) return 0.0;
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(ref.size()), static_cast<Eigen::Index>(est.size()));
  for (size_t r = 0; r < ref.size(); ++r) {
    for (size_t e = 0; e < est.size(); ++e) {
      cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(e)) = spherical_distance(ref[r], est[e]) * kRadToDeg;
    }
  }
  return hungarian_assign(cost).total_cost;
}

}  // namespace

DoaFrameLists doa_frame_lists(const AnnotationSet& ref, const AnnotationSet& est) {
  const Eigen::Index frames = ref.num_frames();
  return {frame_doa_lists(ref, frames), frame_doa_lists(est, frames)};
}

DoaAccumulator accumulate_doa(const DoaFrameLists& frames) {
  if (frames.reference.size() != frames.estimate.size()) {
    throw ValidationError("DOA frame lists: reference and estimate frame counts differ");
  }
  DoaAccumulator acc;
  for (size_t t = 0; t < frames.reference.size(); ++t) {
    const auto& ref = frames.reference[t];
    const auto& est = frames.estimate[t];
    acc.error_sum_deg += assignment_cost_deg(ref, est);
    acc.estimate_count += static_cast<long long>(est.size());
    acc.recall_hits += ref.size() == est.size() ? 1 : 0;
    acc.frames += 1;
  }
  return acc;
}

DoaErrorResult doa_error(const DoaFrameLists& frames) {
  const auto acc = accumulate_doa(frames);
  if (acc.estimate_count == 0) return {0.0, false};
  return {acc.error_sum_deg / static_cast<double>(acc.estimate_count), true};
}

double frame_recall(const DoaFrameLists& frames) {
  if (frames.num_frames() == 0) throw ValidationError("frame_recall: no frames");
  const auto acc = accumulate_doa(frames);
  return static_cast<double>(acc.recall_hits) / static_cast<double>(acc.frames);
}

SegmentCounts segment_sed_counts(const FrameWiseOutput& ref, const FrameWiseOutput& est, int segment_frames) {
  if (ref.num_frames() != est.num_frames() || ref.num_classes() != est.num_classes()) {
    throw ValidationError(fmt::format("segment_sed_counts: shape mismatch {}x{} vs {}x{}", ref.num_frames(),
                                      ref.num_classes(), est.num_frames(), est.num_classes()));
  }
  if (segment_frames <= 0) throw ValidationError("segment_sed_counts: segment length must be positive");
  SegmentCounts total;
  const Eigen::Index frames = ref.num_frames();
  for (Eigen::Index start = 0; start < frames; start += segment_frames) {
    const Eigen::Index len = std::min<Eigen::Index>(segment_frames, frames - start);
    const auto ref_seg = ref.activity().middleRows(start, len).colwise().maxCoeff().eval();
    const auto est_seg = est.activity().middleRows(start, len).colwise().maxCoeff().eval();
    long long tp = 0, fp = 0, fn = 0, n = 0;
    for (int c = 0; c < ref.num_classes(); ++c) {
      const bool r = ref_seg(c) != 0;
      const bool e = est_seg(c) != 0;
      tp += (r && e) ? 1 : 0;
      fp += (!r && e) ? 1 : 0;
      fn += (r && !e) ? 1 : 0;
      n += r ? 1 : 0;
    }
    total.tp += tp;
    total.fp += fp;
    total.fn += fn;
    total.n += n;
    total.s += std::min(fp, fn);
    total.d += std::max(0LL, fn - fp);
    total.i += std::max(0LL, fp - fn);
  }
  return total;
}

ErFscore er_fscore(const SegmentCounts& counts) {
  ErFscore out;
  if (counts.n > 0) {
    out.er = static_cast<double>(counts.s + counts.d + counts.i) / static_cast<double>(counts.n);
    out.er_defined = true;
  }
  const long long denom = 2 * counts.tp + counts.fp + counts.fn;
  if (denom > 0) {
    out.f_percent = 100.0 * 2.0 * static_cast<double>(counts.tp) / static_cast<double>(denom);
    out.f_defined = true;
  }
  return out;
}

SeldStatistics evaluate_recording(const AnnotationSet& ref, const AnnotationSet& est, int segment_frames) {
  AnnotationSet est_aligned = est;
  est_aligned.duration = ref.duration;
  est_aligned.frame_hop = ref.frame_hop;
  est_aligned.num_classes = ref.num_classes;
  est_aligned.max_polyphony.reset();
  // predictions running past the reference length are cut rather than rejected
  std::erase_if(est_aligned.events, [&](const EventInstance& ev) { return ev.onset >= ref.duration; });
  for (auto& ev : est_aligned.events) ev.offset = std::min(ev.offset, ref.duration);
  SeldStatistics stats;
  stats.segments = segment_sed_counts(events_to_frames(ref), events_to_frames(est_aligned), segment_frames);
  stats.doa = accumulate_doa(doa_frame_lists(ref, est_aligned));
  return stats;
}

MetricsReport MetricsReport::from_statistics(const SeldStatistics& stats) {
  MetricsReport r;
  r.raw = stats;
  const auto sed = er_fscore(stats.segments);
  r.er = sed.er;
  r.er_defined = sed.er_defined;
  r.f = sed.f_percent;
  r.f_defined = sed.f_defined;
  if (stats.doa.estimate_count > 0) {
    r.doa_error = stats.doa.error_sum_deg / static_cast<double>(stats.doa.estimate_count);
    r.doa_error_defined = true;
  }
  if (stats.doa.frames > 0) {
    r.frame_recall = 100.0 * static_cast<double>(stats.doa.recall_hits) / static_cast<double>(stats.doa.frames);
  }
  return r;
}

nlohmann::json to_json(const MetricsReport& report) {
  const auto value_or_null = [](bool defined, double v) { return defined ? nlohmann::json(v) : nlohmann::json(nullptr); };
  const auto& seg = report.raw.segments;
  const auto& doa = report.raw.doa;
  return nlohmann::json{
      {"er", value_or_null(report.er_defined, report.er)},
      {"f", value_or_null(report.f_defined, report.f)},
      {"doa_error_deg", value_or_null(report.doa_error_defined, report.doa_error)},
      {"frame_recall", report.frame_recall},
      {"raw",
       {{"tp", seg.tp},
        {"fp", seg.fp},
        {"fn", seg.fn},
        {"n", seg.n},
        {"s", seg.s},
        {"d", seg.d},
        {"i", seg.i},
        {"doa_num", doa.error_sum_deg},
        {"doa_den", doa.estimate_count},
        {"fr_hits", doa.recall_hits},
        {"frames", doa.frames}}}};
}

std::string format_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  const auto cell = [](bool defined, double v, const char* spec) {
    return defined ? fmt::format(fmt::runtime(spec), v) : std::string("n/a");
  };
  std::string out = fmt::format("{:<16} {:>8} {:>8} {:>10} {:>8}\n", "", "ER", "F", "DE", "FR");
  for (const auto& [name, r] : rows) {
    out += fmt::format("{:<16} {:>8} {:>8} {:>10} {:>8}\n", name, cell(r.er_defined, r.er, "{:.2f}"),
                       cell(r.f_defined, r.f, "{:.1f}"), cell(r.doa_error_defined, r.doa_error, "{:.1f}"),
                       fmt::format("{:.1f}", r.frame_recall));
  }
  return out;
}

namespace {

// Competition ranking ("1224"): equal values share the better rank.
std::vector<int> competition_ranks(const std::vector<double>& values, bool lower_is_better) {
  std::vector<int> ranks(values.size());
  for (size_t a = 0; a < values.size(); ++a) {
    int better = 0;
    for (size_t b = 0; b < values.size(); ++b) {
      if (lower_is_better ? values[b] < values[a] : values[b] > values[a]) ++better;
    }
    ranks[a] = better + 1;
  }
  return ranks;
}

}  // namespace

std::vector<Standing> rank_methods(const std::vector<std::pair<std::string, MetricsReport>>& entries) {
  if (entries.empty()) throw ValidationError("rank_methods: no entries");
  const double worst_low = std::numeric_limits<double>::infinity();
  std::vector<double> er, f, de, fr;
  for (const auto& [id, r] : entries) {
    er.push_back(r.er_defined ? r.er : worst_low);
    f.push_back(r.f_defined ? r.f : -1.0);
    de.push_back(r.doa_error_defined ? r.doa_error : worst_low);
    fr.push_back(r.frame_recall);
  }
  const auto rank_er = competition_ranks(er, true);
  const auto rank_f = competition_ranks(f, false);
  const auto rank_de = competition_ranks(de, true);
  const auto rank_fr = competition_ranks(fr, false);

  std::vector<Standing> standings;
  for (size_t k = 0; k < entries.size(); ++k) {
    Standing s;
    s.method_id = entries[k].first;
    s.rank_er = rank_er[k];
    s.rank_f = rank_f[k];
    s.rank_doa = rank_de[k];
    s.rank_fr = rank_fr[k];
    s.rank_sum = s.rank_er + s.rank_f + s.rank_doa + s.rank_fr;
    standings.push_back(s);
  }
  std::vector<size_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (standings[a].rank_sum != standings[b].rank_sum) return standings[a].rank_sum < standings[b].rank_sum;
    if (er[a] != er[b]) return er[a] < er[b];
    if (de[a] != de[b]) return de[a] < de[b];
    return entries[a].first < entries[b].first;
  });
  std::vector<Standing> ordered;
  for (size_t pos = 0; pos < order.size(); ++pos) {
    ordered.push_back(standings[order[pos]]);
    ordered.back().position = static_cast<int>(pos) + 1;
  }
  return ordered;
}

}  // namespace seld
