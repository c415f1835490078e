#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ecgot {

// Diagnostic superclasses of the 12-lead ECG datasets this library targets.
// Synthetic datasets may use any other nonnegative label ids.
enum class EcgClass : int { kNorm = 0, kMi = 1, kSttc = 2, kCd = 3, kHyp = 4 };

inline std::string ecg_class_name(int label) {
  switch (label) {
    case 0: return "NORM";
    case 1: return "MI";
    case 2: return "STTC";
    case 3: return "CD";
    case 4: return "HYP";
    default: return "class_" + std::to_string(label);
  }
}

/// One segmented heartbeat: n_leads x beat_len samples in millivolts, stored
/// row-major by lead as float32 so the in-memory layout matches the on-disk
/// beats format bit for bit.
struct BeatTensor {
  std::vector<float> samples;
  int n_leads = 0;
  int beat_len = 0;
  int label = 0;
  double sample_rate = 0.0;
  std::string source_id;

  std::span<const float> lead(int l) const {
    return {samples.data() + static_cast<std::size_t>(l) * beat_len,
            static_cast<std::size_t>(beat_len)};
  }
  std::span<float> lead(int l) {
    return {samples.data() + static_cast<std::size_t>(l) * beat_len,
            static_cast<std::size_t>(beat_len)};
  }

  void validate() const {
    if (n_leads < 1) throw std::invalid_argument("beat: n_leads must be >= 1");
    if (beat_len < 8) throw std::invalid_argument("beat: beat_len must be >= 8");
    if (samples.size() !=
        static_cast<std::size_t>(n_leads) * static_cast<std::size_t>(beat_len))
      throw std::invalid_argument("beat: sample count does not match shape");
    for (float v : samples)
      if (!std::isfinite(v))
        throw std::invalid_argument("beat: non-finite sample");
  }
};

/// A raw multi-lead recording before segmentation (row-major by lead).
struct RawRecord {
  std::vector<double> samples;
  int n_leads = 0;
  long record_len = 0;
  double sample_rate = 0.0;
  std::string record_id;

  std::span<const double> lead(int l) const {
    return {samples.data() + static_cast<std::size_t>(l) * record_len,
            static_cast<std::size_t>(record_len)};
  }

  void validate() const {
    if (n_leads < 1 || record_len < 1)
      throw std::invalid_argument("record: empty shape");
    if (sample_rate <= 0)
      throw std::invalid_argument("record: sample_rate must be positive");
    if (samples.size() != static_cast<std::size_t>(n_leads) *
                              static_cast<std::size_t>(record_len))
      throw std::invalid_argument("record: sample count does not match shape");
    for (double v : samples)
      if (!std::isfinite(v))
        throw std::invalid_argument("record: non-finite sample");
  }
};

}  // namespace ecgot
