#pragma once

// Preprocessing pipeline: window filtering, zero-phase notch, spectrum,
// R-peak detection, beat segmentation, decimation, and synthetic
// ECG generators used as desk-scale ground truth.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ecgot/beat.hpp"
#include "ecgot/fft.hpp"
#include "ecgot/rng.hpp"

namespace ecgot {

struct NotchSpec {
  double center_hz = 50.0;
  double quality = 30.0;
  double sample_rate = 0.0;

  void validate() const {
    if (sample_rate <= 0.0)
      throw std::invalid_argument("notch: sample_rate must be positive");
    if (!(center_hz > 0.0) || center_hz >= 0.5 * sample_rate)
      throw std::invalid_argument("notch: center must lie below Nyquist");
    if (quality <= 0.0)
      throw std::invalid_argument("notch: quality must be positive");
  }
};

namespace detail {

inline long reflect_index(long i, long n) {
  // mirror without repeating the edge sample: -1 -> 1, n -> n-2
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

// Normalized biquad (a0 = 1), direct form II transposed.
struct Biquad {
  double b0, b1, b2, a1, a2;

  double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

inline Biquad biquad_notch(const NotchSpec& spec) {
  spec.validate();
  constexpr double pi = 3.14159265358979323846264338327950288;
  const double w0 = 2.0 * pi * spec.center_hz / spec.sample_rate;
  const double alpha = std::sin(w0) / (2.0 * spec.quality);
  const double a0 = 1.0 + alpha;
  return {1.0 / a0, -2.0 * std::cos(w0) / a0, 1.0 / a0,
          -2.0 * std::cos(w0) / a0, (1.0 - alpha) / a0};
}

inline Biquad biquad_lowpass(double fc, double fs, double q = 0.70710678) {
  constexpr double pi = 3.14159265358979323846264338327950288;
  const double w0 = 2.0 * pi * fc / fs;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double c = std::cos(w0);
  const double a0 = 1.0 + alpha;
  return {(1.0 - c) / (2.0 * a0), (1.0 - c) / a0, (1.0 - c) / (2.0 * a0),
          -2.0 * c / a0, (1.0 - alpha) / a0};
}

inline Biquad biquad_highpass(double fc, double fs, double q = 0.70710678) {
  constexpr double pi = 3.14159265358979323846264338327950288;
  const double w0 = 2.0 * pi * fc / fs;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double c = std::cos(w0);
  const double a0 = 1.0 + alpha;
  return {(1.0 + c) / (2.0 * a0), -(1.0 + c) / a0, (1.0 + c) / (2.0 * a0),
          -2.0 * c / a0, (1.0 - alpha) / a0};
}

inline std::vector<double> apply_biquad(const Biquad& f,
                                        std::span<const double> x) {
  // start from the steady state of a constant input x[0], so constants
  // pass through exactly
  const double g = f.dc_gain();
  double z1 = (g - f.b0) * x[0];
  double z2 = (f.b2 - f.a2 * g) * x[0];
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    const double out = f.b0 * v + z1;
    z1 = f.b1 * v - f.a1 * out + z2;
    z2 = f.b2 * v - f.a2 * out;
    y[i] = out;
  }
  return y;
}

// Forward-backward application for zero phase, with odd-reflection padding
// long enough for the filter transient to die out.
inline std::vector<double> filtfilt(const Biquad& f,
                                    std::span<const double> x) {
  const long n = static_cast<long>(x.size());
  const double radius = f.a2 > 0.0 ? std::sqrt(f.a2) : 0.0;
  const double ntau = radius > 0.0 && radius < 1.0 ? -1.0 / std::log(radius)
                                                   : 1.0;
  const long padlen =
      std::min<long>(n - 1, std::max<long>(9, static_cast<long>(
                                                  std::ceil(8.0 * ntau))));
  std::vector<double> ext;
  ext.reserve(n + 2 * padlen);
  for (long i = padlen; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (long i = 1; i <= padlen; ++i)
    ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  auto y = apply_biquad(f, ext);
  std::reverse(y.begin(), y.end());
  y = apply_biquad(f, y);
  std::reverse(y.begin(), y.end());
  return {y.begin() + padlen, y.begin() + padlen + n};
}

inline void check_finite(std::span<const double> x, const char* who) {
  for (double v : x)
    if (!std::isfinite(v))
      throw std::invalid_argument(std::string(who) + ": non-finite input");
}

}  // namespace detail

/// Centered moving average of odd width n with reflection padding.
inline std::vector<double> window_filter(std::span<const double> signal,
                                         int n) {
  if (n < 1 || n % 2 == 0)
    throw std::invalid_argument("window_filter: n must be odd and >= 1");
  const long len = static_cast<long>(signal.size());
  if (n > len)
    throw std::invalid_argument("window_filter: n exceeds signal length");
  detail::check_finite(signal, "window_filter");
  std::vector<double> out(len);
  const int half = n / 2;
  for (long i = 0; i < len; ++i) {
    double acc = 0.0;
    for (int k = -half; k <= half; ++k)
      acc += signal[detail::reflect_index(i + k, len)];
    out[i] = acc / n;
  }
  return out;
}

/// Second-order IIR notch (bandwidth = center/quality), applied forward and
/// backward for zero phase. DC gain is exactly 1.
inline std::vector<double> notch_filter(std::span<const double> signal,
                                        const NotchSpec& spec) {
  spec.validate();
  if (signal.size() < 16)
    throw std::invalid_argument("notch_filter: need at least 16 samples");
  detail::check_finite(signal, "notch_filter");
  return detail::filtfilt(detail::biquad_notch(spec), signal);
}

/// One-sided magnitude spectrum: N/2+1 bins, frequencies in Hz.
inline std::pair<std::vector<double>, std::vector<double>> fft_spectrum(
    std::span<const double> signal, double sample_rate) {
  if (signal.size() < 2)
    throw std::invalid_argument("fft_spectrum: need at least 2 samples");
  detail::check_finite(signal, "fft_spectrum");
  const std::size_t n = signal.size();
  const auto spectrum = fft_real(std::vector<double>(signal.begin(), signal.end()));
  const std::size_t bins = n / 2 + 1;
  std::vector<double> freqs(bins), mags(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    freqs[k] = sample_rate * static_cast<double>(k) / static_cast<double>(n);
    mags[k] = std::abs(spectrum[k]);
  }
  return {std::move(freqs), std::move(mags)};
}

/// Pan-Tompkins style R-peak detector: zero-phase 5-15 Hz band-pass,
/// derivative, squaring, 150 ms moving-window integration, adaptive
/// signal/noise thresholds, 200 ms refractory. Peaks are finally localized
/// on the raw lead. Needs at least 2 s of signal.
inline std::vector<long> detect_r_peaks(std::span<const double> lead,
                                        double sample_rate) {
  const long n = static_cast<long>(lead.size());
  if (sample_rate <= 0.0)
    throw std::invalid_argument("detect_r_peaks: bad sample rate");
  if (n < 2 * sample_rate)
    throw std::invalid_argument("detect_r_peaks: signal shorter than 2 s");
  detail::check_finite(lead, "detect_r_peaks");

  auto bp = detail::filtfilt(detail::biquad_highpass(5.0, sample_rate), lead);
  bp = detail::filtfilt(detail::biquad_lowpass(15.0, sample_rate), bp);

  std::vector<double> energy(n);
  for (long i = 0; i < n; ++i) {
    const double d = 0.5 * (bp[detail::reflect_index(i + 1, n)] -
                            bp[detail::reflect_index(i - 1, n)]);
    energy[i] = d * d;
  }
  int mwi_w = static_cast<int>(std::lround(0.15 * sample_rate));
  if (mwi_w % 2 == 0) ++mwi_w;
  mwi_w = std::max(mwi_w, 3);
  const auto mwi = window_filter(energy, std::min<long>(mwi_w, n));

  std::vector<long> candidates;
  for (long i = 1; i + 1 < n; ++i)
    if (mwi[i] > mwi[i - 1] && mwi[i] >= mwi[i + 1]) candidates.push_back(i);

  const long init_span = std::min<long>(n, static_cast<long>(2 * sample_rate));
  double init_max = 0.0, init_mean = 0.0;
  for (long i = 0; i < init_span; ++i) {
    init_max = std::max(init_max, mwi[i]);
    init_mean += mwi[i];
  }
  init_mean /= static_cast<double>(init_span);
  double spk = 0.5 * init_max;
  double npk = 0.5 * init_mean;
  double thr = npk + 0.25 * (spk - npk);

  const long refractory = static_cast<long>(std::lround(0.2 * sample_rate));
  std::vector<long> accepted;
  for (long c : candidates) {
    if (!accepted.empty() && c - accepted.back() < refractory) {
      if (mwi[c] > mwi[accepted.back()]) accepted.back() = c;
      continue;
    }
    if (mwi[c] > thr) {
      accepted.push_back(c);
      spk = 0.125 * mwi[c] + 0.875 * spk;
    } else {
      npk = 0.125 * mwi[c] + 0.875 * npk;
    }
    thr = npk + 0.25 * (spk - npk);
  }

  // localize each detection as the raw-signal maximum within +-100 ms
  const long search = static_cast<long>(std::lround(0.1 * sample_rate));
  std::vector<long> peaks;
  for (long c : accepted) {
    const long lo = std::max<long>(0, c - search);
    const long hi = std::min<long>(n - 1, c + search);
    long best = lo;
    for (long i = lo + 1; i <= hi; ++i)
      if (lead[i] > lead[best]) best = i;
    peaks.push_back(best);
  }
  std::sort(peaks.begin(), peaks.end());
  std::vector<long> unique_peaks;
  for (long p : peaks) {
    if (!unique_peaks.empty() && p - unique_peaks.back() < refractory) {
      if (lead[p] > lead[unique_peaks.back()]) unique_peaks.back() = p;
    } else {
      unique_peaks.push_back(p);
    }
  }
  return unique_peaks;
}

struct SegmentResult {
  std::vector<BeatTensor> beats;
  int dropped = 0;  // peaks whose window did not fit inside the record
};

/// Slices one beat of pre+post samples around each R peak; windows that do
/// not fit fully inside the record are dropped and counted.
inline SegmentResult segment_beats(const RawRecord& record,
                                   std::span<const long> r_peaks, int pre,
                                   int post, int label = 0) {
  if (pre < 1 || post < 1)
    throw std::invalid_argument("segment_beats: pre and post must be >= 1");
  record.validate();
  SegmentResult result;
  for (long p : r_peaks) {
    const long start = p - pre;
    const long end = p + post;  // window [start, end); sample at p+post
                                // must itself lie inside the record
    if (start < 0 || end >= record.record_len) {
      ++result.dropped;
      continue;
    }
    BeatTensor beat;
    beat.n_leads = record.n_leads;
    beat.beat_len = pre + post;
    beat.sample_rate = record.sample_rate;
    beat.label = label;
    beat.source_id = record.record_id;
    beat.samples.resize(static_cast<std::size_t>(record.n_leads) *
                        (pre + post));
    for (int l = 0; l < record.n_leads; ++l) {
      const auto lead = record.lead(l);
      for (int t = 0; t < pre + post; ++t)
        beat.samples[static_cast<std::size_t>(l) * (pre + post) + t] =
            static_cast<float>(lead[start + t]);
    }
    result.beats.push_back(std::move(beat));
  }
  return result;
}

/// Anti-aliased decimation: windowed-sinc low-pass at 0.45*fs_out, then
/// keep every (fs_in/fs_out)-th sample. The rate ratio must be an integer.
inline std::vector<double> downsample(std::span<const double> signal,
                                      double fs_in, double fs_out) {
  if (fs_in <= 0.0 || fs_out <= 0.0 || fs_out > fs_in)
    throw std::invalid_argument("downsample: bad rates");
  const double ratio = fs_in / fs_out;
  const long k = std::lround(ratio);
  if (std::abs(ratio - static_cast<double>(k)) > 1e-9)
    throw std::invalid_argument("downsample: fs_in/fs_out must be an integer");
  detail::check_finite(signal, "downsample");
  const long n = static_cast<long>(signal.size());
  if (k == 1) return {signal.begin(), signal.end()};

  const double nf = 0.45 / static_cast<double>(k);  // cutoff / fs_in
  const int taps = static_cast<int>(16 * k + 1);
  const int mid = taps / 2;
  std::vector<double> h(taps);
  double sum = 0.0;
  constexpr double pi = 3.14159265358979323846264338327950288;
  for (int i = 0; i < taps; ++i) {
    const double t = i - mid;
    const double sinc =
        t == 0.0 ? 2.0 * nf : std::sin(2.0 * pi * nf * t) / (pi * t);
    const double window = 0.54 - 0.46 * std::cos(2.0 * pi * i / (taps - 1));
    h[i] = sinc * window;
    sum += h[i];
  }
  for (double& v : h) v /= sum;  // exact unit DC gain

  std::vector<double> out;
  out.reserve((n + k - 1) / k);
  for (long j = 0; j * k < n; ++j) {
    const long center = j * k;
    double acc = 0.0;
    for (int i = 0; i < taps; ++i)
      acc += h[i] * signal[detail::reflect_index(center + i - mid, n)];
    out.push_back(acc);
  }
  return out;
}

// --- synthetic generators -------------------------------------------------

struct WaveBump {
  double amp = 0.0;
  double center_s = 0.0;  // seconds from beat start (or from the R peak for
                          // records)
  double width_s = 0.0;
};

struct LeadMorphology {
  WaveBump p, qrs, t;
};

inline LeadMorphology default_morphology() {
  return {{0.15, -0.18, 0.03}, {1.0, 0.0, 0.02}, {0.30, 0.22, 0.06}};
}

struct SynthBeatParams {
  std::vector<LeadMorphology> leads;  // bump centers relative to beat start
  int beat_len = 100;
  double sample_rate = 100.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  int label = 0;
  std::string source_id;
};

/// Deterministic synthetic beat: per lead, the sum of P/QRS/T Gaussian
/// bumps plus white noise. The ground-truth R index is the QRS center.
inline BeatTensor synth_beat(const SynthBeatParams& params) {
  if (params.leads.empty())
    throw std::invalid_argument("synth_beat: no lead morphology");
  if (params.beat_len < 2 || params.sample_rate <= 0.0)
    throw std::invalid_argument("synth_beat: bad shape");
  const double duration = params.beat_len / params.sample_rate;
  for (const auto& lead : params.leads)
    for (const WaveBump* b : {&lead.p, &lead.qrs, &lead.t}) {
      if (b->amp != 0.0 && (b->center_s < 0.0 || b->center_s > duration))
        throw std::invalid_argument("synth_beat: bump center outside beat");
      if (b->amp != 0.0 && b->width_s <= 0.0)
        throw std::invalid_argument("synth_beat: bump width must be positive");
    }

  BeatTensor beat;
  beat.n_leads = static_cast<int>(params.leads.size());
  beat.beat_len = params.beat_len;
  beat.sample_rate = params.sample_rate;
  beat.label = params.label;
  beat.source_id = params.source_id;
  beat.samples.resize(static_cast<std::size_t>(beat.n_leads) *
                      params.beat_len);
  for (int l = 0; l < beat.n_leads; ++l) {
    SplitMix64 rng(substream_seed(params.seed, static_cast<std::uint64_t>(l)));
    const auto& m = params.leads[l];
    for (int t = 0; t < params.beat_len; ++t) {
      const double ts = t / params.sample_rate;
      double v = 0.0;
      for (const WaveBump* b : {&m.p, &m.qrs, &m.t})
        if (b->amp != 0.0)
          v += b->amp * std::exp(-0.5 * (ts - b->center_s) *
                                 (ts - b->center_s) /
                                 (b->width_s * b->width_s));
      if (params.noise_sigma > 0.0) v += params.noise_sigma * rng.normal();
      beat.samples[static_cast<std::size_t>(l) * params.beat_len + t] =
          static_cast<float>(v);
    }
  }
  return beat;
}

/// Ground-truth R index for a beat produced by synth_beat.
inline long synth_beat_r_index(const SynthBeatParams& params) {
  return std::lround(params.leads.front().qrs.center_s * params.sample_rate);
}

struct SynthRecordParams {
  double duration_s = 10.0;
  double sample_rate = 100.0;
  double bpm = 75.0;
  double rr_jitter_s = 0.02;
  double noise_sigma = 0.05;
  int n_leads = 1;
  LeadMorphology morphology = default_morphology();  // centers relative to R
  std::uint64_t seed = 0;
  std::string record_id = "synth";
};

struct SynthRecord {
  RawRecord record;
  std::vector<long> r_peaks;  // ground truth sample indices
};

/// Synthetic multi-beat recording with known R positions: beats at roughly
/// 60/bpm spacing with jittered RR intervals, plus white noise.
inline SynthRecord synth_record(const SynthRecordParams& params) {
  if (params.duration_s < 2.0 || params.sample_rate <= 0.0 ||
      params.bpm <= 0.0 || params.n_leads < 1)
    throw std::invalid_argument("synth_record: bad parameters");
  const long n =
      static_cast<long>(std::lround(params.duration_s * params.sample_rate));
  SplitMix64 rr_rng(substream_seed(params.seed, 0xBEA7));

  std::vector<double> r_times;
  double t = 0.5;
  const double rr = 60.0 / params.bpm;
  while (t < params.duration_s - 0.5) {
    r_times.push_back(t);
    t += std::max(0.3, rr + params.rr_jitter_s * rr_rng.normal());
  }

  SynthRecord result;
  result.record.n_leads = params.n_leads;
  result.record.record_len = n;
  result.record.sample_rate = params.sample_rate;
  result.record.record_id = params.record_id;
  result.record.samples.assign(
      static_cast<std::size_t>(params.n_leads) * n, 0.0);
  for (double rt : r_times)
    result.r_peaks.push_back(std::lround(rt * params.sample_rate));

  for (int l = 0; l < params.n_leads; ++l) {
    SplitMix64 noise_rng(
        substream_seed(params.seed, 0x1000 + static_cast<std::uint64_t>(l)));
    double* lead = result.record.samples.data() +
                   static_cast<std::size_t>(l) * n;
    for (long i = 0; i < n; ++i) {
      const double ts = i / params.sample_rate;
      double v = 0.0;
      for (double rt : r_times) {
        if (std::abs(ts - rt) > 0.5) continue;
        for (const WaveBump* b :
             {&params.morphology.p, &params.morphology.qrs,
              &params.morphology.t}) {
          const double c = rt + b->center_s;
          if (b->amp != 0.0)
            v += b->amp *
                 std::exp(-0.5 * (ts - c) * (ts - c) / (b->width_s * b->width_s));
        }
      }
      if (params.noise_sigma > 0.0) v += params.noise_sigma * noise_rng.normal();
      lead[i] = v;
    }
  }
  return result;
}

}  // namespace ecgot
