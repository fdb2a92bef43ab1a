#include "seld/cli.hpp"

#include "seld/array_model.hpp"
#include "seld/core.hpp"
#include "seld/dsp.hpp"
#include "seld/eval_harness.hpp"
#include "seld/scene_synth.hpp"
#include "seld/seld_metrics.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>

namespace seld::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kSequenceLength = 128;

struct Globals {
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool quiet = false;
};

class Logger {
 public:
  Logger(std::ostream& err, bool quiet) : err_(err), quiet_(quiet) {}
  void info(const std::string& msg) const {
    if (!quiet_) err_ << msg << std::endl;
  }
  void always(const std::string& msg) const { err_ << msg << std::endl; }

 private:
  std::ostream& err_;
  bool quiet_;
};

nlohmann::json load_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot read config " + path.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError("config " + path.string() + ": " + ex.what());
  }
}

StftConfig stft_from_config(const std::string& config_path) {
  StftConfig cfg;
  if (!config_path.empty()) {
    const auto j = load_json(config_path);
    if (j.contains("stft")) from_json(j.at("stft"), cfg);
  }
  cfg.validate();
  return cfg;
}

std::uint64_t resolve_seed(const Globals& g, const Logger& log) {
  std::uint64_t seed;
  if (g.seed) {
    seed = *g.seed;
  } else {
    std::random_device rd;
    seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
  log.always(fmt::format("seed: {}", seed));
  return seed;
}

std::vector<fs::path> wav_inputs(const fs::path& in) {
  std::vector<fs::path> files;
  if (fs::is_directory(in)) {
    for (const auto& e : fs::directory_iterator(in)) {
      if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(in)) {
    files.push_back(in);
  } else {
    throw ValidationError("input not found: " + in.string());
  }
  if (files.empty()) throw ValidationError("no .wav files in " + in.string());
  return files;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string config;
  std::string sources;
  std::string out;
  std::optional<int> n_dev, n_eval;
  std::optional<double> duration, snr_db;
  std::vector<std::string> formats;
  int procedural_classes = kDefaultNumClasses;
  int procedural_examples = 20;
};

int run_synth(const SynthArgs& a, const Globals& g, CLI::App& sub, const Logger& log, std::ostream& out) {
  DatasetConfig cfg;
  if (!a.config.empty()) from_json(load_json(a.config), cfg);
  if (a.n_dev) cfg.n_dev_recordings = *a.n_dev;
  if (a.n_eval) cfg.n_eval_recordings = *a.n_eval;
  if (a.duration) cfg.duration = *a.duration;
  if (a.snr_db) cfg.snr_db = *a.snr_db;
  if (!a.formats.empty()) {
    cfg.formats.clear();
    for (const auto& f : a.formats) cfg.formats.push_back(parse_audio_format(f));
  }
  if (sub.get_parent()->get_option("--jobs")->count() > 0) cfg.jobs = g.jobs;
  cfg.validate();
  const std::uint64_t seed = resolve_seed(g, log);

  const SourceBank bank =
      a.sources.empty() ? SourceBank::procedural(a.procedural_classes, a.procedural_examples, derive_seed(seed, "bank"))
                        : SourceBank::from_directory(a.sources);
  log.info(fmt::format("source bank: {} classes, longest clip {:.2f} s{}", bank.num_classes(),
                       bank.longest_clip_seconds(), a.sources.empty() ? " (procedural)" : ""));
  const auto manifest = generate_dataset(cfg, bank, seed, a.out);
  log.info(fmt::format("wrote {} recordings to {}", manifest.size(), a.out));
  out << fmt::format("{}\n", (fs::path(a.out) / "manifest.json").string());
  return kExitOk;
}

struct EvalArgs {
  std::string ref, est, manifest, out;
  std::optional<int> fold;
  bool pooled = false;
  bool eval_set = false;
  int classes = kDefaultNumClasses;
};

int run_eval(const EvalArgs& a, const Globals& g, const Logger& log, std::ostream& out) {
  EvalOptions opt;
  opt.num_classes = a.classes;
  opt.jobs = g.jobs;
  opt.warn = [&](const std::string& m) { log.always(m); };
  if (a.eval_set) {
    opt.mode = EvalMode::EvalSet;
  } else if (a.fold) {
    opt.mode = EvalMode::SingleFold;
    opt.fold = *a.fold;
  }
  const Manifest manifest = load_manifest(a.manifest);
  const CvReport report = evaluate_cv(a.est, a.ref, manifest, opt);

  std::vector<std::pair<std::string, MetricsReport>> rows = report.per_fold;
  rows.emplace_back(opt.mode == EvalMode::EvalSet ? "eval" : "pooled", report.pooled);
  const std::string table = format_table(rows);
  const std::string json = to_json(report).dump(2);
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    std::ofstream(fs::path(a.out) / "report.json") << json << '\n';
    std::ofstream(fs::path(a.out) / "report.txt") << table;
  }
  out << table << '\n' << json << '\n';
  return kExitOk;
}

struct ResponseArgs {
  std::string format = "foa";
  double az = 0.0, el = 0.0;
  std::vector<double> freqs;
};

int run_array_response(const ResponseArgs& a, std::ostream& out) {
  const AudioFormat format = parse_audio_format(a.format);
  const Doa doa = Doa::from_degrees(a.az, a.el);
  const std::vector<double> freqs = a.freqs.empty() ? std::vector<double>{1000.0} : a.freqs;
  const Eigen::MatrixXcd h = steering_vectors(format, doa, freqs);
  out << "format,channel,azimuth_deg,elevation_deg,freq_hz,real,imag\n";
  for (Eigen::Index f = 0; f < h.cols(); ++f) {
    for (Eigen::Index ch = 0; ch < h.rows(); ++ch) {
      out << fmt::format("{},{},{:g},{:g},{:g},{:.9g},{:.9g}\n", to_string(format), ch + 1, a.az, a.el,
                         freqs[static_cast<size_t>(f)], h(ch, f).real(), h(ch, f).imag());
    }
  }
  return kExitOk;
}

struct FeatureArgs {
  std::string in, out, config;
};

// Per file: float32 tensor [n_seq, 2K, 128, F] (magnitudes then phases), zero padded at the end.
int run_features(const FeatureArgs& a, const Logger& log) {
  const StftConfig cfg = stft_from_config(a.config);
  const auto files = wav_inputs(a.in);
  fs::create_directories(a.out);
  for (const auto& file : files) {
    const auto audio = read_wav(file);
    if (audio.sample_rate != cfg.sample_rate) {
      throw ValidationError(fmt::format("{}: sample rate {} differs from stft.sample_rate {}", file.string(),
                                        audio.sample_rate, cfg.sample_rate));
    }
    const auto k = audio.num_channels();
    const Eigen::Index bins = cfg.dft_size / 2;  // Nyquist bin dropped
    std::vector<Spectrogram<double>> specs;
    for (Eigen::Index ch = 0; ch < k; ++ch) specs.push_back(stft<double>(audio.samples.row(ch).transpose(), cfg));
    const Eigen::Index frames = specs.front().num_frames();
    const Eigen::Index n_seq = (frames + kSequenceLength - 1) / kSequenceLength;
    std::vector<float> tensor(static_cast<size_t>(n_seq * 2 * k * kSequenceLength * bins), 0.0f);
    for (Eigen::Index ch = 0; ch < k; ++ch) {
      for (Eigen::Index t = 0; t < frames; ++t) {
        const Eigen::Index s = t / kSequenceLength, tt = t % kSequenceLength;
        const auto mag_base = static_cast<size_t>(((s * 2 * k + ch) * kSequenceLength + tt) * bins);
        const auto phase_base = static_cast<size_t>(((s * 2 * k + k + ch) * kSequenceLength + tt) * bins);
        for (Eigen::Index f = 0; f < bins; ++f) {
          const auto v = specs[static_cast<size_t>(ch)].frames(t, f);
          tensor[mag_base + static_cast<size_t>(f)] = static_cast<float>(std::abs(v));
          tensor[phase_base + static_cast<size_t>(f)] = static_cast<float>(std::arg(v));
        }
      }
    }
    const fs::path bin_path = fs::path(a.out) / (file.stem().string() + ".bin");
    std::ofstream os(bin_path, std::ios::binary);
    os.write(reinterpret_cast<const char*>(tensor.data()), static_cast<std::streamsize>(tensor.size() * sizeof(float)));
    if (!os) throw std::runtime_error("write failed for " + bin_path.string());
    nlohmann::json side = {{"shape", {n_seq, 2 * k, kSequenceLength, bins}},
                           {"dtype", "float32"},
                           {"byte_order", "little"},
                           {"layout", "sequence,channel,frame,bin"},
                           {"channels", "magnitude 0..K-1, phase K..2K-1"},
                           {"valid_frames", frames},
                           {"format", to_string(audio.format)},
                           {"stft", cfg}};
    std::ofstream(fs::path(a.out) / (file.stem().string() + ".json")) << side.dump(2) << '\n';
    log.info(fmt::format("{}: {} frames -> {} sequences", file.filename().string(), frames, n_seq));
  }
  return kExitOk;
}

struct IrArgs {
  std::string reference, recording, out, config;
  std::optional<int> mls_order;
};

int run_estimate_ir(const IrArgs& a, const Logger& log) {
  const StftConfig cfg = stft_from_config(a.config);
  if (a.reference.empty() == !a.mls_order) throw ValidationError("give exactly one of --reference or --mls-order");
  Signal<double> reference;
  if (a.mls_order) {
    const auto mls = generate_mls(*a.mls_order);
    reference.resize(static_cast<Eigen::Index>(mls.size()));
    for (size_t i = 0; i < mls.size(); ++i) reference[static_cast<Eigen::Index>(i)] = mls[i];
  } else {
    const auto ref = read_wav(a.reference);
    if (ref.num_channels() != 1) throw ValidationError("reference must be mono");
    reference = ref.samples.row(0).transpose();
  }
  const auto rec = read_wav(a.recording);
  if (rec.sample_rate != cfg.sample_rate) throw ValidationError("recording sample rate differs from stft.sample_rate");

  MultichannelAudio<double> ir;
  ir.sample_rate = rec.sample_rate;
  ir.format = rec.format;
  ir.samples.resize(rec.num_channels(), cfg.dft_size);
  nlohmann::json report = {{"stft", cfg}, {"channels", nlohmann::json::array()}};
  for (Eigen::Index ch = 0; ch < rec.num_channels(); ++ch) {
    const auto est = estimate_ir_stft<double>(reference, rec.samples.row(ch).transpose(), cfg);
    const Signal<double> h = est.time_domain();
    ir.samples.row(ch) = h.transpose();
    Eigen::Index peak = 0;
    h.cwiseAbs().maxCoeff(&peak);
    report["channels"].push_back({{"channel", ch + 1}, {"peak_lag", peak}, {"peak_value", h[peak]},
                                  {"flagged_bins", est.flagged_bins}});
    log.info(fmt::format("channel {}: peak at lag {} ({:.4g}), {} flagged bins", ch + 1, peak, h[peak],
                         est.flagged_bins.size()));
  }
  fs::create_directories(a.out);
  write_wav(fs::path(a.out) / "ir.wav", ir);
  std::ofstream(fs::path(a.out) / "ir.json") << report.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sound-scene synthesis and SELD evaluation toolkit", "seld"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Master seed (random and printed when absent)");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", g.quiet, "Suppress progress messages");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a dataset");
  synth->add_option("--config", sa.config, "Dataset config JSON")->check(CLI::ExistingFile);
  synth->add_option("--sources", sa.sources, "Source clip directory (one sub-directory per class)")
      ->check(CLI::ExistingDirectory);
  synth->add_option("--out", sa.out, "Output directory")->required();
  synth->add_option("--n-dev", sa.n_dev, "Development recordings");
  synth->add_option("--n-eval", sa.n_eval, "Evaluation recordings");
  synth->add_option("--duration", sa.duration, "Recording length in seconds");
  synth->add_option("--snr", sa.snr_db, "Event-to-ambience SNR in dB");
  synth->add_option("--formats", sa.formats, "foa and/or mic");
  synth->add_option("--procedural-classes", sa.procedural_classes, "Classes of the procedural bank");
  synth->add_option("--procedural-examples", sa.procedural_examples, "Clips per class of the procedural bank");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Score estimates against references");
  eval->add_option("--ref", ea.ref, "Reference annotation directory")->required();
  eval->add_option("--est", ea.est, "Estimate annotation directory")->required();
  eval->add_option("--manifest", ea.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", ea.out, "Write report.json and report.txt here");
  eval->add_option("--classes", ea.classes, "Number of classes");
  auto* fold_opt = eval->add_option("--fold", ea.fold, "Score a single fold (1-4)");
  auto* pooled_opt = eval->add_flag("--pooled", ea.pooled, "Pool all four folds (default)");
  auto* evalset_opt = eval->add_flag("--eval-set", ea.eval_set, "Score evaluation-set recordings");
  fold_opt->excludes(pooled_opt)->excludes(evalset_opt);
  pooled_opt->excludes(evalset_opt);

  ResponseArgs ra;
  auto* resp = app.add_subcommand("array-response", "Print steering vectors as CSV");
  resp->add_option("--format", ra.format, "foa or mic");
  resp->add_option("--az", ra.az, "Azimuth in degrees");
  resp->add_option("--el", ra.el, "Elevation in degrees");
  resp->add_option("--freq", ra.freqs, "Frequencies in Hz (default 1000)");

  FeatureArgs fa;
  auto* feat = app.add_subcommand("features", "Magnitude/phase spectrogram sequences");
  feat->add_option("--in", fa.in, "WAV file or directory")->required();
  feat->add_option("--out", fa.out, "Output directory")->required();
  feat->add_option("--config", fa.config, "JSON with an \"stft\" object")->check(CLI::ExistingFile);

  IrArgs ia;
  auto* ir = app.add_subcommand("estimate-ir", "Least-squares STFT impulse response");
  ir->add_option("--reference", ia.reference, "Mono excitation WAV")->check(CLI::ExistingFile);
  ir->add_option("--mls-order", ia.mls_order, "Regenerate an MLS excitation of this order instead");
  ir->add_option("--recording", ia.recording, "Recorded response WAV")->required()->check(CLI::ExistingFile);
  ir->add_option("--out", ia.out, "Output directory")->required();
  ir->add_option("--config", ia.config, "JSON with an \"stft\" object")->check(CLI::ExistingFile);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  const Logger log(err, g.quiet);
  try {
    if (*synth) return run_synth(sa, g, *synth, log, out);
    if (*eval) return run_eval(ea, g, log, out);
    if (*resp) return run_array_response(ra, out);
    if (*feat) return run_features(fa, log);
    if (*ir) return run_estimate_ir(ia, log);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << std::endl;
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << std::endl;
    return kExitRuntime;
  }
  err << app.help();
  return kExitValidation;
}

}  // namespace seld::cli
