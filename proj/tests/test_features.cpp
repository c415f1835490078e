#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ecgot/features.hpp"
#include "ecgot/rng.hpp"
#include "helpers.hpp"

using namespace ecgot;

namespace {
enum TimeIdx {
  kMax = 0,
  kMin,
  kRange,
  kMean,
  kMedian,
  kMode,
  kStd,
  kRms,
  kMeanSquare,
  kSkew,
  kKurt,
  kWaveform,
  kPulse
};
}

TEST_CASE("time_features: constant input conventions", "[features]") {
  const std::vector<double> x(4, 3.0);
  const auto t = time_features(x);
  REQUIRE(t.size() == kTimeFeatureCount);
  CHECK(t[kMax] == 3.0);
  CHECK(t[kMin] == 3.0);
  CHECK(t[kRange] == 0.0);
  CHECK(t[kMean] == Catch::Approx(3.0));
  CHECK(t[kMedian] == Catch::Approx(3.0));
  CHECK(t[kMode] == Catch::Approx(3.0));
  CHECK(t[kStd] == 0.0);
  CHECK(t[kRms] == Catch::Approx(3.0));
  CHECK(t[kMeanSquare] == Catch::Approx(9.0));
  CHECK(t[kSkew] == 0.0);
  CHECK(t[kKurt] == 0.0);
}

TEST_CASE("time_features: hand-computed values for [1,2,3]", "[features]") {
  const std::vector<double> x{1.0, 2.0, 3.0};
  const auto t = time_features(x);
  CHECK(t[kMean] == Catch::Approx(2.0));
  CHECK(t[kStd] == Catch::Approx(std::sqrt(2.0 / 3.0)));
  CHECK(t[kRms] == Catch::Approx(std::sqrt(14.0 / 3.0)));
  CHECK(t[kRange] == Catch::Approx(2.0));
  CHECK(t[kMedian] == Catch::Approx(2.0));
}

TEST_CASE("time_features: alternating unit signal", "[features]") {
  const std::vector<double> x{-1.0, 1.0, -1.0, 1.0};
  const auto t = time_features(x);
  CHECK(t[kMean] == Catch::Approx(0.0).margin(1e-15));
  CHECK(t[kRms] == Catch::Approx(1.0));
  CHECK(t[kWaveform] == Catch::Approx(1.0));
  CHECK(t[kPulse] == Catch::Approx(1.0));
}

TEST_CASE("time_features: zero signal zeroes the factor features",
          "[features]") {
  const std::vector<double> x(8, 0.0);
  const auto t = time_features(x);
  CHECK(t[kWaveform] == 0.0);
  CHECK(t[kPulse] == 0.0);
}

TEST_CASE("time_features: scale equivariance", "[features]") {
  SplitMix64 rng(404);
  std::vector<double> x(50);
  for (double& v : x) v = rng.uniform(-2.0, 2.0);
  const double a = 3.7;
  std::vector<double> ax(x);
  for (double& v : ax) v *= a;
  const auto t1 = time_features(x);
  const auto t2 = time_features(ax);
  for (int idx : {kMax, kMin, kRange, kMean, kMedian, kMode, kStd, kRms})
    CHECK(t2[idx] == Catch::Approx(a * t1[idx]).margin(1e-9));
  CHECK(t2[kMeanSquare] == Catch::Approx(a * a * t1[kMeanSquare]));
  CHECK(t2[kWaveform] == Catch::Approx(t1[kWaveform]));
  CHECK(t2[kPulse] == Catch::Approx(t1[kPulse]));
}

TEST_CASE("freq_features: constant spectrum conventions", "[features]") {
  SpectrumView spec;
  spec.magnitudes.assign(10, 2.5);
  spec.freqs_hz.resize(10);
  for (int k = 0; k < 10; ++k) spec.freqs_hz[k] = k;
  const auto z = freq_features(spec);
  REQUIRE(z.size() == kFreqFeatureCount);
  CHECK(z[0] == Catch::Approx(2.5));                  // Z1
  CHECK(z[1] == Catch::Approx(0.0).margin(1e-12));    // Z2
  CHECK(z[3] == Catch::Approx(6.25));                 // Z4
  CHECK(z[4] == 0.0);                                 // Z5
  CHECK(z[5] == 0.0);                                 // Z6
}

TEST_CASE("freq_features: uniform spectrum entropy is log2 N", "[features]") {
  for (int n : {8, 26}) {
    SpectrumView spec;
    spec.magnitudes.assign(n, 0.3);
    spec.freqs_hz.assign(n, 0.0);
    const auto z = freq_features(spec);
    CHECK(z[2] == Catch::Approx(std::log2(static_cast<double>(n))));
  }
}

TEST_CASE("freq_features: hand-evaluated two-bin spectrum", "[features]") {
  SpectrumView spec;
  spec.magnitudes = {1.0, 3.0};
  spec.freqs_hz = {0.0, 1.0};
  const auto z = freq_features(spec, true);
  REQUIRE(z.size() == kFreqFeatureCount + 1);
  CHECK(z[0] == Catch::Approx(2.0));   // Z1
  CHECK(z[1] == Catch::Approx(2.0));   // Z2 with the 1/(N-1) denominator
  CHECK(z[3] == Catch::Approx(5.0));   // Z4
  CHECK(z[4] == Catch::Approx(0.0).margin(1e-12));  // Z5: symmetric
  CHECK(z[5] == Catch::Approx(0.25));  // Z6
  // shape statistics as printed, mixing f(k) and F(k)
  CHECK(z[6] == Catch::Approx(-0.75));                      // Z7
  CHECK(z[7] == Catch::Approx(std::sqrt(1.75 / 4.0)));      // Z8 uses Z6
  CHECK(z[8] == Catch::Approx(-6.25));                      // Z9
  CHECK(z[9] == Catch::Approx((1.0 + 16.0 * 3.0) / 4.0));   // Z10
}

TEST_CASE("freq_features: entropy is maximized by the uniform spectrum",
          "[features]") {
  SplitMix64 rng(1234);
  const int n = 26;
  SpectrumView uniform;
  uniform.magnitudes.assign(n, 1.0);
  uniform.freqs_hz.assign(n, 0.0);
  const double max_entropy = freq_features(uniform)[2];
  for (int rep = 0; rep < 25; ++rep) {
    SpectrumView spec;
    spec.magnitudes.resize(n);
    spec.freqs_hz.assign(n, 0.0);
    for (double& v : spec.magnitudes) v = rng.uniform(0.0, 1.0);
    CHECK(freq_features(spec)[2] <= max_entropy + 1e-12);
  }
}

TEST_CASE("freq_features: zero spectrum conventions", "[features]") {
  SpectrumView spec;
  spec.magnitudes.assign(6, 0.0);
  spec.freqs_hz = {0, 1, 2, 3, 4, 5};
  const auto z = freq_features(spec);
  for (int i : {0, 1, 2, 3, 4, 5, 6, 7, 8})
    CHECK(z[i] == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("assemble_vector: paper shape is 864 = 600 + 156 + 108",
          "[features]") {
  BeatTensor beat;
  beat.n_leads = 12;
  beat.beat_len = 50;
  beat.sample_rate = 50.0;
  beat.samples.resize(600);
  SplitMix64 rng(555);
  for (auto& v : beat.samples) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  const auto fv = assemble_vector(beat, {12, 50});
  CHECK(fv.size() == 864);
  CHECK(fv.dims[0] == 600);
  CHECK(fv.dims[1] == 156);
  CHECK(fv.dims[2] == 108);
}

TEST_CASE("assemble_vector: single lead gives 72 dims", "[features]") {
  const auto beat = testutil::bump_beat(50, 50.0, {{1.0, 0.5, 0.06}});
  const auto fv = assemble_vector(beat, {1, 50});
  CHECK(fv.size() == 72);
  // raw block is the lead itself
  for (int i = 0; i < 50; ++i)
    CHECK(fv.values[i] == Catch::Approx(beat.samples[i]));
}

TEST_CASE("assemble_vector: zero beat uses degenerate conventions",
          "[features]") {
  BeatTensor beat;
  beat.n_leads = 1;
  beat.beat_len = 50;
  beat.sample_rate = 50.0;
  beat.samples.assign(50, 0.0f);
  const auto fv = assemble_vector(beat, {1, 50});
  for (int i = 0; i < 50; ++i) CHECK(fv.values[i] == 0.0);
  for (int i = 50; i < 72; ++i)
    CHECK(fv.values[i] == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("assemble_vector: layout is stable across runs", "[features]") {
  const auto beat = testutil::bump_beat(50, 50.0, {{1.0, 0.4, 0.05}}, 0.1, 88);
  const auto a = assemble_vector(beat, {1, 50});
  const auto b = assemble_vector(beat, {1, 50});
  CHECK(a.values == b.values);
}

TEST_CASE("assemble_vector rejects shape mismatches", "[features]") {
  const auto beat = testutil::bump_beat(50, 50.0, {{1.0, 0.4, 0.05}});
  CHECK_THROWS_AS(assemble_vector(beat, {2, 50}), std::invalid_argument);
  CHECK_THROWS_AS(assemble_vector(beat, {1, 60}), std::invalid_argument);
}
