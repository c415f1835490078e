#pragma once

// End-to-end experiment driver: subject-disjoint splitting, per-mode
// training-set augmentation, feature assembly, training, clean evaluation,
// and the adversarial robustness sweep, with JSON reports on disk.

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ecgot/augment.hpp"
#include "ecgot/eval.hpp"
#include "ecgot/features.hpp"
#include "ecgot/io.hpp"
#include "ecgot/metric.hpp"
#include "ecgot/rng.hpp"
#include "ecgot/signal.hpp"

namespace ecgot {

enum class AugmentMode { kNone, kOversample, kSmote, kMixup, kGeodesic };

inline AugmentMode parse_augment_mode(const std::string& name) {
  if (name == "none") return AugmentMode::kNone;
  if (name == "oversample") return AugmentMode::kOversample;
  if (name == "smote") return AugmentMode::kSmote;
  if (name == "mixup") return AugmentMode::kMixup;
  if (name == "geodesic") return AugmentMode::kGeodesic;
  throw std::invalid_argument("unknown augmentation mode '" + name + "'");
}

inline const char* augment_mode_name(AugmentMode mode) {
  switch (mode) {
    case AugmentMode::kNone: return "none";
    case AugmentMode::kOversample: return "oversample";
    case AugmentMode::kSmote: return "smote";
    case AugmentMode::kMixup: return "mixup";
    case AugmentMode::kGeodesic: return "geodesic";
  }
  return "?";
}

// --- synthetic benchmark -----------------------------------------------------

struct SyntheticSpec {
  std::vector<long> class_counts{1000, 100, 100};
  int patients_per_class = 20;
  int beat_len = 50;
  double sample_rate = 50.0;
  double noise_sigma = 0.05;
  double center_jitter_s = 0.02;   // per-beat timing jitter
  double amp_jitter = 0.10;        // per-beat amplitude jitter
  double patient_shift_s = 0.025;  // systematic per-patient timing offset
  double patient_amp = 0.15;       // systematic per-patient amplitude factor
  std::uint64_t seed = 0;
};

/// Morphology templates for up to five synthetic classes: the QRS position,
/// amplitude, and T-wave shape separate the classes.
inline LeadMorphology synthetic_class_template(int cls) {
  switch (cls) {
    case 0: return {{0.12, 0.22, 0.05}, {1.00, 0.46, 0.045}, {0.25, 0.70, 0.080}};
    case 1: return {{0.10, 0.16, 0.05}, {0.85, 0.38, 0.050}, {0.40, 0.62, 0.090}};
    case 2: return {{0.15, 0.30, 0.05}, {1.10, 0.56, 0.040}, {0.15, 0.78, 0.070}};
    case 3: return {{0.08, 0.20, 0.04}, {0.95, 0.42, 0.060}, {0.30, 0.74, 0.085}};
    case 4: return {{0.18, 0.26, 0.06}, {1.05, 0.50, 0.035}, {0.22, 0.66, 0.075}};
    default:
      throw std::invalid_argument("synthetic benchmark supports 5 classes");
  }
}

/// Labeled single-lead benchmark beats with per-beat morphology jitter and
/// noise, spread over patients_per_class pseudo-subjects per class.
inline std::vector<BeatTensor> make_synthetic_dataset(
    const SyntheticSpec& spec) {
  if (spec.class_counts.empty() || spec.class_counts.size() > 5)
    throw std::invalid_argument("synthetic benchmark supports 1..5 classes");
  std::vector<BeatTensor> beats;
  for (int cls = 0; cls < static_cast<int>(spec.class_counts.size()); ++cls) {
    const auto base = synthetic_class_template(cls);
    const int n_patients = std::max(1, spec.patients_per_class);
    for (long i = 0; i < spec.class_counts[cls]; ++i) {
      const int patient = static_cast<int>(i % n_patients);
      // systematic per-patient morphology, shared by the patient's beats
      SplitMix64 patient_rng(substream_seed(
          spec.seed, 0x9A000000ULL |
                         (static_cast<std::uint64_t>(cls) << 16) |
                         static_cast<std::uint64_t>(patient)));
      const double patient_shift = spec.patient_shift_s * patient_rng.normal();
      const double patient_amp =
          std::max(0.4, 1.0 + spec.patient_amp * patient_rng.normal());
      const double patient_t_amp =
          std::max(0.2, 1.0 + spec.patient_amp * patient_rng.normal());

      SplitMix64 rng(substream_seed(
          spec.seed, (static_cast<std::uint64_t>(cls) << 32) |
                         static_cast<std::uint64_t>(i)));
      SynthBeatParams params;
      params.beat_len = spec.beat_len;
      params.sample_rate = spec.sample_rate;
      params.noise_sigma = spec.noise_sigma;
      params.seed = rng.next();
      params.label = cls;
      params.source_id = "c" + std::to_string(cls) + "p" +
                         std::to_string(patient);
      LeadMorphology morph = base;
      morph.qrs.amp *= patient_amp;
      morph.t.amp *= patient_t_amp;
      for (WaveBump* bump : {&morph.p, &morph.qrs, &morph.t}) {
        bump->center_s += patient_shift + spec.center_jitter_s * rng.normal();
        bump->center_s = std::clamp(bump->center_s, 0.05,
                                    spec.beat_len / spec.sample_rate - 0.05);
        bump->amp *= 1.0 + spec.amp_jitter * rng.normal();
        bump->width_s *= std::max(0.3, 1.0 + 0.08 * rng.normal());
      }
      params.leads = {morph};
      beats.push_back(synth_beat(params));
    }
  }
  return beats;
}

// --- subject-disjoint split ----------------------------------------------------

struct SplitResult {
  std::vector<BeatTensor> train;
  std::vector<BeatTensor> test;
};

/// Stratified subject-disjoint split: patients (distinct source ids,
/// stratified by their majority class) are shuffled deterministically and
/// ~test_fraction of each class's patients go to the test side, at least
/// one per class.
inline SplitResult subject_split(std::span<const BeatTensor> beats,
                                 double test_fraction, std::uint64_t seed) {
  if (beats.empty()) throw std::invalid_argument("split: empty dataset");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("split: test_fraction must be in (0,1)");

  std::map<std::string, std::map<int, long>> patient_labels;
  for (const auto& beat : beats) patient_labels[beat.source_id][beat.label]++;
  std::map<int, std::vector<std::string>> patients_by_class;
  for (const auto& [patient, labels] : patient_labels) {
    int majority = labels.begin()->first;
    long best = -1;
    for (const auto& [label, count] : labels)
      if (count > best) {
        best = count;
        majority = label;
      }
    patients_by_class[majority].push_back(patient);
  }

  std::set<std::string> test_patients;
  for (auto& [cls, patients] : patients_by_class) {
    std::sort(patients.begin(), patients.end());
    SplitMix64 rng(substream_seed(seed, 0x5017 + cls));
    for (std::size_t t = patients.size(); t > 1; --t)
      std::swap(patients[t - 1], patients[rng.below(t)]);
    std::size_t n_test = static_cast<std::size_t>(
        std::max(1.0, std::floor(test_fraction * patients.size() + 0.5)));
    if (n_test >= patients.size() && patients.size() > 1)
      n_test = patients.size() - 1;
    for (std::size_t i = 0; i < n_test && i < patients.size(); ++i)
      test_patients.insert(patients[i]);
  }

  SplitResult split;
  for (const auto& beat : beats)
    (test_patients.count(beat.source_id) ? split.test : split.train)
        .push_back(beat);
  if (split.train.empty() || split.test.empty())
    throw std::runtime_error("split: a side ended up empty");
  return split;
}

// --- feature assembly ----------------------------------------------------------

struct FeatureDataset {
  Eigen::MatrixXd x;
  std::vector<int> y;
};

inline FeatureDataset build_features(std::span<const BeatTensor> beats) {
  if (beats.empty()) throw std::invalid_argument("features: empty dataset");
  const FeatureConfig config{beats.front().n_leads, beats.front().beat_len};
  FeatureDataset data;
  data.x.resize(static_cast<Eigen::Index>(beats.size()), config.total_dim());
  data.y.resize(beats.size());
  for (std::size_t i = 0; i < beats.size(); ++i) {
    const auto fv = assemble_vector(beats[i], config);
    for (int j = 0; j < fv.size(); ++j)
      data.x(static_cast<Eigen::Index>(i), j) = fv.values[j];
    data.y[i] = beats[i].label;
  }
  return data;
}

// --- experiment driver -----------------------------------------------------------

struct ExperimentResult {
  AugmentMode mode = AugmentMode::kNone;
  MetricsReport clean;
  std::vector<RobustnessRow> robustness;
  std::string test_digest;
  std::map<int, long> train_counts;      // before augmentation
  std::map<int, long> augmented_counts;  // added beats per class
  std::filesystem::path report_path;
  std::filesystem::path augmented_path;  // empty for mode none
};

namespace detail {

inline std::map<int, long> label_counts(std::span<const BeatTensor> beats) {
  std::map<int, long> counts;
  for (const auto& beat : beats) counts[beat.label]++;
  return counts;
}

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string(stage) + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string(stage) + ": " + e.what());
  }
}

// new beats appended to the training set to reach per-class balance
inline std::vector<BeatTensor> augment_train(
    const std::vector<BeatTensor>& train, AugmentMode mode,
    const RunConfig& config) {
  std::vector<BeatTensor> added;
  if (mode == AugmentMode::kNone) return added;

  const auto counts = label_counts(train);
  int majority_class = counts.begin()->first;
  long majority = 0;
  for (const auto& [cls, count] : counts)
    if (count > majority) {
      majority = count;
      majority_class = cls;
    }

  std::vector<BeatTensor> majority_beats;
  for (const auto& beat : train)
    if (beat.label == majority_class) majority_beats.push_back(beat);

  for (const auto& [cls, count] : counts) {
    if (cls == majority_class) continue;
    const long need = config.n_augment > 0
                          ? config.n_augment
                          : majority - count;
    if (need <= 0) continue;

    std::vector<BeatTensor> class_beats;
    for (const auto& beat : train)
      if (beat.label == cls) class_beats.push_back(beat);

    switch (mode) {
      case AugmentMode::kOversample: {
        std::map<int, std::size_t> targets{
            {cls, static_cast<std::size_t>(count + need)}};
        auto grown = random_oversample(class_beats, targets,
                                       substream_seed(config.seed, cls));
        added.insert(added.end(), grown.begin() + class_beats.size(),
                     grown.end());
        break;
      }
      case AugmentMode::kSmote: {
        const int k = std::min<long>(5, count - 1);
        auto fresh = smote_like(class_beats, cls, std::max(1, k),
                                static_cast<int>(need),
                                substream_seed(config.seed, 0x20 + cls));
        added.insert(added.end(), fresh.begin(), fresh.end());
        break;
      }
      case AugmentMode::kMixup: {
        SplitMix64 rng(substream_seed(config.seed, 0x30 + cls));
        for (long i = 0; i < need; ++i) {
          const auto& src =
              majority_beats[rng.below(majority_beats.size())];
          const auto& tgt = class_beats[rng.below(class_beats.size())];
          const double alpha = rng.uniform(config.alpha_min, config.alpha_max);
          auto beat = linear_mixup(src, tgt, alpha);
          beat.label = cls;
          added.push_back(std::move(beat));
        }
        break;
      }
      case AugmentMode::kGeodesic: {
        AugmentSpec spec;
        spec.source_class = majority_class;
        spec.target_class = cls;
        spec.alpha_min = config.alpha_min;
        spec.alpha_max = config.alpha_max;
        spec.batch_source = config.batch_source;
        spec.batch_target = config.batch_target;
        spec.n_augment = static_cast<int>(need);
        spec.sinkhorn.lambda = config.lambda;
        spec.seed = substream_seed(config.seed, 0x40 + cls);
        const auto cost = pairwise_cost(majority_beats, class_beats);
        auto fresh = geodesic_augment(majority_beats, class_beats, spec, &cost);
        added.insert(added.end(), fresh.begin(), fresh.end());
        break;
      }
      case AugmentMode::kNone: break;
    }
  }
  return added;
}

}  // namespace detail

/// Full experiment: split by subject, augment the training side only, build
/// features, train the classifier, evaluate clean metrics, sweep PGD
/// epsilons, and write the JSON report (plus the augmented beats when any).
inline ExperimentResult run_experiment(const RunConfig& config,
                                       std::span<const BeatTensor> beats,
                                       AugmentMode mode,
                                       const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  const auto split = detail::run_stage(
      "split", [&] { return subject_split(beats, 0.2, config.seed); });

  ExperimentResult result;
  result.mode = mode;
  result.test_digest = beats_digest_hex(split.test);
  result.train_counts = detail::label_counts(split.train);

  const auto added = detail::run_stage("augment", [&] {
    return detail::augment_train(split.train, mode, config);
  });
  result.augmented_counts = detail::label_counts(added);

  std::vector<BeatTensor> train = split.train;
  train.insert(train.end(), added.begin(), added.end());

  const auto train_data =
      detail::run_stage("features", [&] { return build_features(train); });
  const auto test_data = detail::run_stage(
      "features", [&] { return build_features(split.test); });

  TrainParams train_params;
  train_params.lr = config.lr;
  train_params.l2 = config.l2;
  train_params.epochs = config.epochs;
  train_params.seed = config.seed;
  const auto trained = detail::run_stage("train", [&] {
    return train_softmax(train_data.x, train_data.y, train_params);
  });

  result.clean = detail::run_stage("eval", [&] {
    return evaluate(trained.model, test_data.x, test_data.y);
  });
  result.robustness = detail::run_stage("attack", [&] {
    return robustness_sweep(trained.model, test_data.x, test_data.y,
                            config.epsilons);
  });

  nlohmann::ordered_json report;
  report["mode"] = augment_mode_name(mode);
  report["seed"] = config.seed;
  report["config_hash"] = config.hash();
  report["test_digest"] = result.test_digest;
  report["train_counts"] = nlohmann::ordered_json::object();
  for (const auto& [cls, count] : result.train_counts)
    report["train_counts"][std::to_string(cls)] = count;
  report["augmented_counts"] = nlohmann::ordered_json::object();
  for (const auto& [cls, count] : result.augmented_counts)
    report["augmented_counts"][std::to_string(cls)] = count;
  report["clean"] = metrics_to_json(result.clean);
  report["robustness"] = robustness_to_json(result.robustness);

  result.report_path =
      out_dir / ("report_" + std::string(augment_mode_name(mode)) + ".json");
  detail::write_file_atomic(result.report_path, report.dump(2) + "\n");

  if (!added.empty()) {
    result.augmented_path =
        out_dir /
        ("augmented_" + std::string(augment_mode_name(mode)) + ".ecgb");
    save_beats(result.augmented_path, added);
  }
  return result;
}

}  // namespace ecgot
