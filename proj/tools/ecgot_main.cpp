// ecgot: command-line front end for the ECG shape-metric augmentation
// toolkit. Subcommands follow the pipeline: synth/import -> preprocess ->
// segment -> features -> train/attack/eval, with distmat/augment/summary as
// side entries and `run` driving the whole experiment.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ecgot/augment.hpp"
#include "ecgot/eval.hpp"
#include "ecgot/experiment.hpp"
#include "ecgot/features.hpp"
#include "ecgot/io.hpp"
#include "ecgot/metric.hpp"
#include "ecgot/signal.hpp"

namespace {

using namespace ecgot;

struct CommonOpts {
  std::string config_path;
  std::string in_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_in = true,
                bool needs_out = true) {
  cmd->add_option("--config", opts.config_path, "run configuration file");
  auto* in = cmd->add_option("--in", opts.in_path, "input path");
  auto* out = cmd->add_option("--out", opts.out_path, "output path");
  if (needs_in) in->required();
  if (needs_out) out->required();
  cmd->add_option("--seed", opts.seed, "override the config seed");
}

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig config = opts.config_path.empty()
                         ? RunConfig{}
                         : RunConfig::load(opts.config_path);
  if (opts.seed) config.seed = *opts.seed;
  return config;
}

std::vector<long> parse_counts(const std::string& text) {
  std::vector<long> counts;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) counts.push_back(std::stol(tok));
  if (counts.empty()) throw CLI::ValidationError("--counts", "empty list");
  return counts;
}

void write_record_csv(const std::filesystem::path& path,
                      const RawRecord& record) {
  std::ostringstream out;
  out.precision(9);
  for (long t = 0; t < record.record_len; ++t) {
    for (int l = 0; l < record.n_leads; ++l)
      out << (l ? "," : "") << record.lead(l)[t];
    out << "\n";
  }
  detail::write_file_atomic(path, out.str());
}

std::vector<double> lead_to_double(const RawRecord& record, int lead) {
  const auto s = record.lead(lead);
  return {s.begin(), s.end()};
}

int run_cli(int argc, char** argv) {
  CLI::App app{"ECG augmentation along Wasserstein geodesics"};
  app.require_subcommand(1);

  // synth ---------------------------------------------------------------
  CommonOpts synth_opts;
  std::string synth_counts = "1000,100,100";
  int synth_patients = 20;
  double synth_noise = 0.05;
  std::string synth_kind = "beats";
  double synth_bpm = 75.0;
  auto* synth_cmd =
      app.add_subcommand("synth", "generate a synthetic labeled dataset");
  add_common(synth_cmd, synth_opts, /*needs_in=*/false);
  synth_cmd->add_option("--counts", synth_counts, "per-class beat counts");
  synth_cmd->add_option("--patients", synth_patients, "patients per class");
  synth_cmd->add_option("--noise", synth_noise, "white noise sigma");
  synth_cmd->add_option("--kind", synth_kind,
                        "what to write: beats (ECGB) or record (CSV)");
  synth_cmd->add_option("--bpm", synth_bpm, "heart rate for --kind record");

  // import ---------------------------------------------------------------
  CommonOpts import_opts;
  int import_leads = 12;
  double import_fs = 100.0;
  auto* import_cmd =
      app.add_subcommand("import", "validate and canonicalize a record CSV");
  add_common(import_cmd, import_opts);
  import_cmd->add_option("--leads", import_leads, "lead count");
  import_cmd->add_option("--fs", import_fs, "sample rate in Hz");

  // preprocess ------------------------------------------------------------
  CommonOpts pre_opts;
  int pre_leads = 12;
  double pre_fs = 100.0;
  auto* pre_cmd = app.add_subcommand(
      "preprocess", "window filtering plus powerline notch on a record CSV");
  add_common(pre_cmd, pre_opts);
  pre_cmd->add_option("--leads", pre_leads, "lead count");
  pre_cmd->add_option("--fs", pre_fs, "sample rate in Hz");

  // segment ---------------------------------------------------------------
  CommonOpts seg_opts;
  int seg_leads = 12;
  double seg_fs = 100.0;
  int seg_label = 0;
  int seg_detect_lead = -1;
  auto* seg_cmd = app.add_subcommand(
      "segment", "detect R peaks, slice beats, downsample to fs_out");
  add_common(seg_cmd, seg_opts);
  seg_cmd->add_option("--leads", seg_leads, "lead count");
  seg_cmd->add_option("--fs", seg_fs, "sample rate in Hz");
  seg_cmd->add_option("--label", seg_label, "class label for the beats");
  seg_cmd->add_option("--detect-lead", seg_detect_lead,
                      "lead used for R detection (default: lead 1 when present)");

  // features --------------------------------------------------------------
  CommonOpts feat_opts;
  auto* feat_cmd = app.add_subcommand(
      "features", "assemble per-beat feature vectors from a beats file");
  add_common(feat_cmd, feat_opts);

  // distmat ---------------------------------------------------------------
  CommonOpts dist_opts;
  std::string dist_in2;
  auto* dist_cmd = app.add_subcommand(
      "distmat", "pairwise beat-shape cost matrix with digest-checked cache");
  add_common(dist_cmd, dist_opts);
  dist_cmd->add_option("--in2", dist_in2,
                       "second beats file (default: self-pairing)");

  // augment ---------------------------------------------------------------
  CommonOpts aug_opts;
  int aug_source = 0, aug_target = 1, aug_n = 0;
  auto* aug_cmd = app.add_subcommand(
      "augment", "geodesic augmentation from one class toward another");
  add_common(aug_cmd, aug_opts);
  aug_cmd->add_option("--source-class", aug_source, "source class id");
  aug_cmd->add_option("--target-class", aug_target, "target class id");
  aug_cmd->add_option("--n", aug_n, "number of beats (default: config n_augment)");

  // train -----------------------------------------------------------------
  CommonOpts train_opts;
  auto* train_cmd =
      app.add_subcommand("train", "fit the softmax-linear classifier");
  add_common(train_cmd, train_opts);

  // eval ------------------------------------------------------------------
  CommonOpts eval_opts;
  std::string eval_model;
  auto* eval_cmd =
      app.add_subcommand("eval", "clean metrics report for a model");
  add_common(eval_cmd, eval_opts);
  eval_cmd->add_option("--model", eval_model, "model JSON")->required();

  // attack ----------------------------------------------------------------
  CommonOpts attack_opts;
  std::string attack_model;
  auto* attack_cmd = app.add_subcommand(
      "attack", "PGD robustness sweep over the configured epsilons");
  add_common(attack_cmd, attack_opts);
  attack_cmd->add_option("--model", attack_model, "model JSON")->required();

  // summary ---------------------------------------------------------------
  CommonOpts summary_opts;
  auto* summary_cmd =
      app.add_subcommand("summary", "per-class patient/beat statistics");
  add_common(summary_cmd, summary_opts, /*needs_in=*/true, /*needs_out=*/false);

  // run ---------------------------------------------------------------------
  CommonOpts run_opts;
  std::string run_mode = "none";
  auto* run_cmd = app.add_subcommand(
      "run", "full experiment: split, augment, train, evaluate, attack");
  add_common(run_cmd, run_opts);
  run_cmd
      ->add_option("--mode", run_mode,
                   "none|oversample|smote|mixup|geodesic")
      ->required();

  CLI11_PARSE(app, argc, argv);

  if (synth_cmd->parsed()) {
    const RunConfig config = resolve_config(synth_opts);
    if (synth_kind == "record") {
      SynthRecordParams params;
      params.bpm = synth_bpm;
      params.noise_sigma = synth_noise;
      params.seed = config.seed;
      params.record_id = "synth" + std::to_string(config.seed);
      const auto synth = synth_record(params);
      write_record_csv(synth_opts.out_path, synth.record);
      std::printf("wrote %s: %ld samples at %.0f Hz, %zu beats\n",
                  synth_opts.out_path.c_str(), synth.record.record_len,
                  params.sample_rate, synth.r_peaks.size());
    } else if (synth_kind == "beats") {
      SyntheticSpec spec;
      spec.class_counts = parse_counts(synth_counts);
      spec.patients_per_class = synth_patients;
      spec.noise_sigma = synth_noise;
      spec.seed = config.seed;
      const auto beats = make_synthetic_dataset(spec);
      save_beats(synth_opts.out_path, beats);
      std::printf("wrote %s: %zu beats, %zu classes\n",
                  synth_opts.out_path.c_str(), beats.size(),
                  spec.class_counts.size());
    } else {
      throw CLI::ValidationError("--kind", "expected beats or record");
    }
    return 0;
  }

  if (import_cmd->parsed()) {
    const auto records = import_csv(import_opts.in_path, import_leads,
                                    import_fs);
    write_record_csv(import_opts.out_path, records.front());
    std::printf("imported %s: %ld samples x %d leads at %.0f Hz\n",
                import_opts.in_path.c_str(), records.front().record_len,
                import_leads, import_fs);
    return 0;
  }

  if (pre_cmd->parsed()) {
    const RunConfig config = resolve_config(pre_opts);
    auto records = import_csv(pre_opts.in_path, pre_leads, pre_fs);
    RawRecord& record = records.front();
    for (int l = 0; l < record.n_leads; ++l) {
      auto lead = lead_to_double(record, l);
      lead = window_filter(lead, config.window_n);
      if (config.notch_hz > 0.0)
        lead = notch_filter(lead, {config.notch_hz, config.notch_q, pre_fs});
      std::copy(lead.begin(), lead.end(),
                record.samples.begin() +
                    static_cast<std::size_t>(l) * record.record_len);
    }
    write_record_csv(pre_opts.out_path, record);
    std::printf("preprocessed %s (window %d, notch %.1f Hz Q %.1f)\n",
                pre_opts.out_path.c_str(), config.window_n, config.notch_hz,
                config.notch_q);
    return 0;
  }

  if (seg_cmd->parsed()) {
    const RunConfig config = resolve_config(seg_opts);
    auto records = import_csv(seg_opts.in_path, seg_leads, seg_fs);
    const RawRecord& record = records.front();
    const int detect_lead =
        seg_detect_lead >= 0 ? seg_detect_lead
                             : std::min(1, record.n_leads - 1);
    const auto peaks =
        detect_r_peaks(record.lead(detect_lead), record.sample_rate);
    const int pre = static_cast<int>(std::lround(config.pre_s * seg_fs));
    const int post = static_cast<int>(std::lround(config.post_s * seg_fs));
    auto segmented = segment_beats(record, peaks, pre, post, seg_label);

    std::vector<BeatTensor> beats;
    for (const auto& beat : segmented.beats) {
      if (config.fs_out > 0.0 && config.fs_out < seg_fs) {
        BeatTensor down;
        down.n_leads = beat.n_leads;
        down.sample_rate = config.fs_out;
        down.label = beat.label;
        down.source_id = beat.source_id;
        for (int l = 0; l < beat.n_leads; ++l) {
          const auto lead = beat.lead(l);
          const auto y = downsample(std::vector<double>(lead.begin(), lead.end()),
                                    seg_fs, config.fs_out);
          down.beat_len = static_cast<int>(y.size());
          for (double v : y) down.samples.push_back(static_cast<float>(v));
        }
        beats.push_back(std::move(down));
      } else {
        beats.push_back(beat);
      }
    }
    save_beats(seg_opts.out_path, beats);
    std::printf("segmented %zu beats (%d dropped at borders), %d peaks\n",
                beats.size(), segmented.dropped,
                static_cast<int>(peaks.size()));
    return 0;
  }

  if (feat_cmd->parsed()) {
    const auto beats = load_beats(feat_opts.in_path);
    const auto data = build_features(beats);
    save_features(feat_opts.out_path, data.x, data.y);
    std::printf("wrote %s: %ld x %ld features\n", feat_opts.out_path.c_str(),
                static_cast<long>(data.x.rows()),
                static_cast<long>(data.x.cols()));
    return 0;
  }

  if (dist_cmd->parsed()) {
    const auto a = load_beats(dist_opts.in_path);
    const auto b = dist_in2.empty() ? a : load_beats(dist_in2);
    const auto digest = cost_cache_digest(a, b, "beat-shape");
    if (const auto cached = try_load_cost_cache(dist_opts.out_path, digest)) {
      std::printf("cache hit: %s is current (%ld x %ld)\n",
                  dist_opts.out_path.c_str(),
                  static_cast<long>(cached->m.rows()),
                  static_cast<long>(cached->m.cols()));
      return 0;
    }
    const auto cost = pairwise_cost(a, b);
    save_cost_cache(dist_opts.out_path, cost, digest);
    std::printf("wrote %s: %ld x %ld beat-shape costs\n",
                dist_opts.out_path.c_str(), static_cast<long>(cost.m.rows()),
                static_cast<long>(cost.m.cols()));
    return 0;
  }

  if (aug_cmd->parsed()) {
    const RunConfig config = resolve_config(aug_opts);
    const auto beats = load_beats(aug_opts.in_path);
    std::vector<BeatTensor> source, target;
    for (const auto& beat : beats) {
      if (beat.label == aug_source) source.push_back(beat);
      if (beat.label == aug_target) target.push_back(beat);
    }
    AugmentSpec spec;
    spec.source_class = aug_source;
    spec.target_class = aug_target;
    spec.alpha_min = config.alpha_min;
    spec.alpha_max = config.alpha_max;
    spec.batch_source = config.batch_source;
    spec.batch_target = config.batch_target;
    spec.n_augment = aug_n > 0 ? aug_n : std::max(1, config.n_augment);
    spec.sinkhorn.lambda = config.lambda;
    spec.seed = config.seed;
    const auto augmented = geodesic_augment(source, target, spec);
    save_beats(aug_opts.out_path, augmented);
    std::printf("wrote %s: %zu geodesic beats (class %d -> %d)\n",
                aug_opts.out_path.c_str(), augmented.size(), aug_source,
                aug_target);
    return 0;
  }

  if (train_cmd->parsed()) {
    const RunConfig config = resolve_config(train_opts);
    const auto [x, y] = load_features(train_opts.in_path);
    TrainParams params;
    params.lr = config.lr;
    params.l2 = config.l2;
    params.epochs = config.epochs;
    params.seed = config.seed;
    const auto trained = train_softmax(x, y, params);
    save_model(train_opts.out_path, trained.model);
    std::printf("trained on %ld rows: final loss %.6f -> %s\n",
                static_cast<long>(x.rows()), trained.loss_history.back(),
                train_opts.out_path.c_str());
    return 0;
  }

  if (eval_cmd->parsed()) {
    const auto [x, y] = load_features(eval_opts.in_path);
    const auto model = load_model(eval_model);
    const auto report = evaluate(model, x, y);
    detail::write_file_atomic(eval_opts.out_path,
                              metrics_to_json(report).dump(2) + "\n");
    std::printf("macro AUROC %.4f, macro F1 %.4f -> %s\n", report.auroc_macro,
                report.f1_macro, eval_opts.out_path.c_str());
    return 0;
  }

  if (attack_cmd->parsed()) {
    const RunConfig config = resolve_config(attack_opts);
    const auto [x, y] = load_features(attack_opts.in_path);
    const auto model = load_model(attack_model);
    const auto rows = robustness_sweep(model, x, y, config.epsilons);
    nlohmann::ordered_json j;
    j["robustness"] = robustness_to_json(rows);
    detail::write_file_atomic(attack_opts.out_path, j.dump(2) + "\n");
    for (const auto& row : rows)
      std::printf("epsilon %.4f: macro AUROC %.4f\n", row.epsilon,
                  row.auroc_macro);
    return 0;
  }

  if (summary_cmd->parsed()) {
    const auto beats = load_beats(summary_opts.in_path);
    const auto summary = dataset_summary(beats);
    std::fputs(format_summary(summary).c_str(), stdout);
    if (!summary_opts.out_path.empty()) {
      nlohmann::ordered_json j = nlohmann::ordered_json::array();
      for (const auto& row : summary.rows) {
        nlohmann::ordered_json r;
        r["label"] = row.label;
        r["name"] = row.name;
        r["patients"] = row.patients;
        r["patient_pct"] = row.patient_pct;
        r["beats"] = row.beats;
        r["beat_pct"] = row.beat_pct;
        j.push_back(std::move(r));
      }
      detail::write_file_atomic(summary_opts.out_path, j.dump(2) + "\n");
    }
    return 0;
  }

  if (run_cmd->parsed()) {
    const RunConfig config = resolve_config(run_opts);
    const auto beats = load_beats(run_opts.in_path);
    const auto mode = parse_augment_mode(run_mode);
    const auto result = run_experiment(config, beats, mode, run_opts.out_path);
    std::printf("mode %s: clean macro AUROC %.4f, macro F1 %.4f\n",
                augment_mode_name(result.mode), result.clean.auroc_macro,
                result.clean.f1_macro);
    for (const auto& row : result.robustness)
      std::printf("  epsilon %.4f: macro AUROC %.4f\n", row.epsilon,
                  row.auroc_macro);
    std::printf("report: %s\n", result.report_path.c_str());
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
