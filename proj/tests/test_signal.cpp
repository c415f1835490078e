#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "ecgot/signal.hpp"
#include "helpers.hpp"

using namespace ecgot;

namespace {

std::vector<double> sine(double hz, double fs, long n, double amp = 1.0) {
  std::vector<double> x(n);
  constexpr double two_pi = 6.283185307179586476925286766559;
  for (long i = 0; i < n; ++i) x[i] = amp * std::sin(two_pi * hz * i / fs);
  return x;
}

double rms(std::span<const double> x, long lo, long hi) {
  double acc = 0.0;
  for (long i = lo; i < hi; ++i) acc += x[i] * x[i];
  return std::sqrt(acc / static_cast<double>(hi - lo));
}

}  // namespace

TEST_CASE("window_filter: n=1 is the identity", "[signal]") {
  std::vector<double> x{1.0, -2.0, 3.5, 0.25};
  CHECK(window_filter(x, 1) == x);
}

TEST_CASE("window_filter: constants unchanged", "[signal]") {
  std::vector<double> x(40, 3.25);
  for (int n : {3, 5, 9}) {
    const auto y = window_filter(x, n);
    for (double v : y) CHECK(v == Catch::Approx(3.25).margin(1e-14));
  }
}

TEST_CASE("window_filter: impulse spreads to n equal samples", "[signal]") {
  std::vector<double> x(11, 0.0);
  x[5] = 1.0;
  const auto y = window_filter(x, 5);
  for (int i = 0; i < 11; ++i) {
    const double expect = (i >= 3 && i <= 7) ? 0.2 : 0.0;
    CHECK(y[i] == Catch::Approx(expect).margin(1e-15));
  }
}

TEST_CASE("window_filter rejects even or oversized windows", "[signal]") {
  std::vector<double> x(10, 0.0);
  CHECK_THROWS_AS(window_filter(x, 4), std::invalid_argument);
  CHECK_THROWS_AS(window_filter(x, 11), std::invalid_argument);
}

TEST_CASE("notch_filter: 50 Hz tone attenuated by at least 30 dB",
          "[signal]") {
  const double fs = 500.0;
  const long n = 5000;
  const auto x = sine(50.0, fs, n);
  const auto y = notch_filter(x, {50.0, 30.0, fs});
  const double in_rms = rms(x, n / 5, 4 * n / 5);
  const double out_rms = rms(y, n / 5, 4 * n / 5);
  CHECK(20.0 * std::log10(out_rms / in_rms) <= -30.0);
}

TEST_CASE("notch_filter: unit DC gain", "[signal]") {
  std::vector<double> x(64, 1.7);
  const auto y = notch_filter(x, {50.0, 30.0, 500.0});
  for (double v : y) CHECK(v == Catch::Approx(1.7).margin(1e-6));
}

TEST_CASE("notch_filter: 5 Hz passband within 1 percent", "[signal]") {
  const double fs = 500.0;
  const long n = 5000;
  const auto x = sine(5.0, fs, n);
  const auto y = notch_filter(x, {50.0, 30.0, fs});
  const double ratio = rms(y, n / 5, 4 * n / 5) / rms(x, n / 5, 4 * n / 5);
  CHECK(ratio == Catch::Approx(1.0).margin(0.01));
}

TEST_CASE("notch_filter is zero phase below the notch band", "[signal]") {
  const double fs = 500.0;
  const long n = 4000;
  const auto x = sine(3.0, fs, n);
  const auto y = notch_filter(x, {50.0, 30.0, fs});
  double best = -1.0;
  int best_lag = -99;
  for (int lag = -5; lag <= 5; ++lag) {
    double corr = 0.0;
    for (long i = 200; i < n - 200; ++i) corr += x[i] * y[i + lag];
    if (corr > best) {
      best = corr;
      best_lag = lag;
    }
  }
  CHECK(best_lag == 0);
}

TEST_CASE("notch_filter rejects a center at or above Nyquist", "[signal]") {
  std::vector<double> x(64, 0.0);
  CHECK_THROWS_AS(notch_filter(x, {50.0, 30.0, 100.0}), std::invalid_argument);
}

TEST_CASE("fft_spectrum: constant has only a DC bin", "[signal]") {
  std::vector<double> x(8, 2.0);
  const auto [freqs, mags] = fft_spectrum(x, 8.0);
  REQUIRE(mags.size() == 5);
  CHECK(mags[0] > 0.0);
  CHECK(freqs[0] == 0.0);
  for (std::size_t k = 1; k < mags.size(); ++k)
    CHECK(mags[k] == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("fft_spectrum: on-bin sinusoid concentrates in one bin",
          "[signal]") {
  const long n = 64;
  const double fs = 64.0;
  const auto x = sine(6.0, fs, n);  // exactly bin 6
  const auto [freqs, mags] = fft_spectrum(x, fs);
  std::size_t argmax = 0;
  for (std::size_t k = 1; k < mags.size(); ++k)
    if (mags[k] > mags[argmax]) argmax = k;
  CHECK(argmax == 6);
  CHECK(freqs[6] == Catch::Approx(6.0));
  for (std::size_t k = 0; k < mags.size(); ++k)
    if (k != 6) CHECK(mags[k] == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("fft_spectrum satisfies Parseval", "[signal]") {
  SplitMix64 rng(17);
  for (long n : {64L, 63L}) {  // power of two and Bluestein path
    std::vector<double> x(n);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    const auto [freqs, mags] = fft_spectrum(x, 100.0);
    double time_energy = 0.0;
    for (double v : x) time_energy += v * v;
    double spec_energy = mags[0] * mags[0];
    const bool even = n % 2 == 0;
    for (std::size_t k = 1; k < mags.size(); ++k) {
      const bool nyquist = even && k + 1 == mags.size();
      spec_energy += (nyquist ? 1.0 : 2.0) * mags[k] * mags[k];
    }
    spec_energy /= static_cast<double>(n);
    CHECK(spec_energy == Catch::Approx(time_energy).epsilon(1e-6));
  }
}

TEST_CASE("detect_r_peaks: flat signal yields nothing", "[signal]") {
  std::vector<double> x(1000, 0.0);
  CHECK(detect_r_peaks(x, 100.0).empty());
}

TEST_CASE("detect_r_peaks finds all beats of a synthetic record", "[signal]") {
  SynthRecordParams params;
  params.bpm = 75.0;
  params.noise_sigma = 0.05;
  params.seed = 12345;
  const auto synth = synth_record(params);
  const auto peaks = detect_r_peaks(synth.record.lead(0), 100.0);

  REQUIRE(peaks.size() == synth.r_peaks.size());
  for (std::size_t i = 0; i < peaks.size(); ++i)
    CHECK(std::abs(peaks[i] - synth.r_peaks[i]) <= 3);

  // strictly increasing with the refractory gap enforced
  for (std::size_t i = 1; i < peaks.size(); ++i)
    CHECK(peaks[i] - peaks[i - 1] >= 20);
}

TEST_CASE("detect_r_peaks: single beat", "[signal]") {
  SynthRecordParams params;
  params.duration_s = 2.5;
  params.bpm = 40.0;
  params.rr_jitter_s = 0.0;
  params.noise_sigma = 0.02;
  params.seed = 7;
  const auto synth = synth_record(params);
  REQUIRE(synth.r_peaks.size() == 1);
  const auto peaks = detect_r_peaks(synth.record.lead(0), 100.0);
  REQUIRE(peaks.size() == 1);
  CHECK(std::abs(peaks[0] - synth.r_peaks[0]) <= 3);
}

TEST_CASE("detect_r_peaks rejects too-short signals", "[signal]") {
  std::vector<double> x(150, 0.0);
  CHECK_THROWS_AS(detect_r_peaks(x, 100.0), std::invalid_argument);
}

TEST_CASE("segment_beats drops windows that leave the record", "[signal]") {
  RawRecord rec;
  rec.n_leads = 1;
  rec.record_len = 300;
  rec.sample_rate = 100.0;
  rec.record_id = "r0";
  rec.samples.resize(300);
  for (int i = 0; i < 300; ++i) rec.samples[i] = i;

  const std::vector<long> peaks{50, 150, 250};
  const auto result = segment_beats(rec, peaks, 50, 50);
  REQUIRE(result.beats.size() == 2);
  CHECK(result.dropped == 1);
  CHECK(result.beats[0].samples[0] == 0.0f);    // window [0, 100)
  CHECK(result.beats[1].samples[0] == 100.0f);  // window [100, 200)
  CHECK(result.beats[0].beat_len == 100);
  CHECK(result.beats.size() + result.dropped == peaks.size());
}

TEST_CASE("segment_beats: empty peak list", "[signal]") {
  RawRecord rec;
  rec.n_leads = 1;
  rec.record_len = 100;
  rec.sample_rate = 100.0;
  rec.samples.assign(100, 0.0);
  const auto result = segment_beats(rec, {}, 10, 10);
  CHECK(result.beats.empty());
  CHECK(result.dropped == 0);
}

TEST_CASE("segment_beats keeps all interior peaks", "[signal]") {
  RawRecord rec;
  rec.n_leads = 2;
  rec.record_len = 500;
  rec.sample_rate = 100.0;
  rec.samples.assign(1000, 1.0);
  const std::vector<long> peaks{100, 200, 300, 400};
  const auto result = segment_beats(rec, peaks, 30, 30, 3);
  REQUIRE(result.beats.size() == 4);
  CHECK(result.dropped == 0);
  for (const auto& b : result.beats) {
    CHECK(b.beat_len == 60);
    CHECK(b.n_leads == 2);
    CHECK(b.label == 3);
  }
}

TEST_CASE("downsample: constant signal, exact half length", "[signal]") {
  std::vector<double> x(100, 0.7);
  const auto y = downsample(x, 100.0, 50.0);
  REQUIRE(y.size() == 50);
  for (double v : y) CHECK(v == Catch::Approx(0.7).margin(1e-12));
}

TEST_CASE("downsample preserves a 10 Hz tone", "[signal]") {
  const auto x = sine(10.0, 100.0, 400);
  const auto y = downsample(x, 100.0, 50.0);
  REQUIRE(y.size() == 200);
  const auto [freqs, mags] = fft_spectrum(y, 50.0);
  std::size_t argmax = 1;
  for (std::size_t k = 1; k < mags.size(); ++k)
    if (mags[k] > mags[argmax]) argmax = k;
  CHECK(freqs[argmax] == Catch::Approx(10.0).margin(0.3));
}

TEST_CASE("downsample rejects non-integer ratios", "[signal]") {
  std::vector<double> x(100, 0.0);
  CHECK_THROWS_AS(downsample(x, 100.0, 40.0), std::invalid_argument);
}

TEST_CASE("synth_beat: QRS center is the argmax without noise", "[signal]") {
  SynthBeatParams params;
  params.leads = {{{0.0, 0.0, 0.0}, {1.0, 0.47, 0.03}, {0.0, 0.0, 0.0}}};
  params.beat_len = 100;
  params.sample_rate = 100.0;
  const auto beat = synth_beat(params);
  const auto lead = testutil::lead_as_doubles(beat);
  const long argmax =
      std::max_element(lead.begin(), lead.end()) - lead.begin();
  CHECK(argmax == synth_beat_r_index(params));
}

TEST_CASE("synth_beat is deterministic and linear in amplitude", "[signal]") {
  SynthBeatParams params;
  params.leads = {default_morphology()};
  params.leads[0].p.center_s = 0.25;
  params.leads[0].qrs.center_s = 0.5;
  params.leads[0].t.center_s = 0.72;
  params.noise_sigma = 0.05;
  params.seed = 99;
  const auto a = synth_beat(params);
  const auto b = synth_beat(params);
  CHECK(a.samples == b.samples);

  params.noise_sigma = 0.0;
  const auto base = synth_beat(params);
  auto doubled_params = params;
  doubled_params.leads[0].p.amp *= 2.0;
  doubled_params.leads[0].qrs.amp *= 2.0;
  doubled_params.leads[0].t.amp *= 2.0;
  const auto doubled = synth_beat(doubled_params);
  for (std::size_t i = 0; i < base.samples.size(); ++i)
    CHECK(doubled.samples[i] == Catch::Approx(2.0 * base.samples[i]).margin(1e-6));
}

TEST_CASE("synth_beat rejects invalid bump parameters", "[signal]") {
  SynthBeatParams params;
  params.leads = {default_morphology()};
  params.leads[0].qrs.center_s = 5.0;  // outside a 1 s beat
  CHECK_THROWS_AS(synth_beat(params), std::invalid_argument);
  params.leads[0].qrs.center_s = 0.5;
  params.leads[0].qrs.width_s = 0.0;
  CHECK_THROWS_AS(synth_beat(params), std::invalid_argument);
}
