#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "uwdbn/channel.hpp"
#include "uwdbn/fft.hpp"
#include "uwdbn/modulation.hpp"

using namespace uwdbn;
constexpr double pi = std::numbers::pi;

namespace {

Waveform tone(double freq_hz, double fs_hz, size_t n) {
  Waveform w;
  w.sample_rate_hz = fs_hz;
  w.samples.resize(n);
  for (size_t i = 0; i < n; ++i) w.samples[i] = std::cos(2.0 * pi * freq_hz * i / fs_hz);
  return w;
}

double rms_diff(const std::vector<double>& a, const std::vector<double>& b,
                size_t lo, size_t hi) {
  double s = 0.0;
  for (size_t i = lo; i < hi; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s / double(hi - lo));
}

double peak_freq_hz(const Waveform& w) {
  std::vector<std::complex<double>> x(w.samples.begin(), w.samples.end());
  auto S = fft(x);
  size_t best = 0;
  double bm = -1.0;
  for (size_t b = 1; b < S.size() / 2; ++b)
    if (std::abs(S[b]) > bm) { bm = std::abs(S[b]); best = b; }
  return double(best) * w.sample_rate_hz / double(S.size());
}

double norm_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)); }
double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * pi); }

// mean of clamp(N(mu, sigma^2), a, b)
double clamped_normal_mean(double mu, double sigma, double a, double b) {
  const double al = (a - mu) / sigma, be = (b - mu) / sigma;
  return a * norm_cdf(al) + b * (1.0 - norm_cdf(be)) +
         mu * (norm_cdf(be) - norm_cdf(al)) - sigma * (norm_pdf(be) - norm_pdf(al));
}

}  // namespace

TEST_CASE("awgn calibration and passthrough") {
  Waveform x;
  x.sample_rate_hz = 40000.0;
  x.samples.assign(1000, 0.5);

  Rng rng(1);
  Waveform clean = apply_awgn(x, 300.0, 2.0, rng);
  CHECK(clean.samples == x.samples);  // >= 200 dB is exact passthrough
  Waveform edge = apply_awgn(x, 200.0, 2.0, rng);
  CHECK(edge.samples == x.samples);

  // law of large numbers on the per-sample variance
  Waveform zeros;
  zeros.sample_rate_hz = 40000.0;
  zeros.samples.assign(1000000, 0.0);
  const double eb = 2.0, ebno = 3.0;
  const double expected_var = eb / (2.0 * std::pow(10.0, ebno / 10.0));
  Rng rng2(2);
  Waveform noisy = apply_awgn(zeros, ebno, eb, rng2);
  REQUIRE(noisy.size() == zeros.size());
  double var = 0.0;
  for (double s : noisy.samples) var += s * s;
  var /= double(noisy.size());
  CHECK(std::abs(var - expected_var) <= 0.05 * expected_var);

  // determinism: same seed, same noise
  Rng ra(7), rb(7);
  Waveform na = apply_awgn(x, 5.0, 1.0, ra);
  Waveform nb = apply_awgn(x, 5.0, 1.0, rb);
  CHECK(na.samples == nb.samples);

  CHECK_THROWS_AS(apply_awgn(x, 5.0, -1.0, rng), input_error);
}

TEST_CASE("doppler time scaling moves a tone between bins") {
  Waveform t2k = tone(2000.0, 40000.0, 4000);

  Waveform same = apply_doppler(t2k, 1.0);
  CHECK(same.samples == t2k.samples);  // alpha == 1 is exact

  Waveform slow = apply_doppler(t2k, 0.5);
  CHECK(slow.size() == 8000);
  const double bin_hz = 40000.0 / 8000.0;
  CHECK(std::abs(peak_freq_hz(slow) - 1000.0) <= bin_hz + 1e-9);

  Waveform fast = apply_doppler(t2k, 1.5);
  CHECK(fast.size() == size_t(std::llround(4000.0 / 1.5)));
  const double bin_fast = 40000.0 / double(fast.size());
  CHECK(std::abs(peak_freq_hz(fast) - 3000.0) <= bin_fast + 1e-9);

  CHECK_THROWS_AS(apply_doppler(t2k, 0.4), input_error);
  CHECK_THROWS_AS(apply_doppler(t2k, 1.6), input_error);
  CHECK_THROWS_AS(apply_doppler(t2k, 0.0), input_error);
}

TEST_CASE("received carrier shift formula") {
  CHECK(doppler_shifted_fc(2000.0, 0.0, 1500.0) == 2000.0);
  CHECK(doppler_shifted_fc(2000.0, 15.0, 1500.0) == 2020.0);
  CHECK(doppler_shifted_fc(2000.0, -15.0, 1500.0) == 1980.0);
  CHECK_THROWS_AS(doppler_shifted_fc(2000.0, 1.0, 0.0), input_error);
}

TEST_CASE("multipath transparent and inverted paths") {
  Waveform x = tone(2000.0, 40000.0, 4000);  // whole cycles: clean analytic form

  PathParams clear;  // amp 1, phase 0, delay 0
  Waveform y = apply_multipath(x, std::vector<PathParams>{clear}, 2000.0);
  REQUIRE(y.size() == x.size());
  CHECK(rms_diff(y.samples, x.samples, 0, x.size()) <= 1e-6);

  PathParams inv;
  inv.phase_traj = {pi};
  Waveform z = apply_multipath(x, std::vector<PathParams>{inv}, 2000.0);
  std::vector<double> neg(x.samples);
  for (auto& v : neg) v = -v;
  CHECK(rms_diff(z.samples, neg, 200, x.size() - 200) <= 1e-3);

  CHECK_THROWS_AS(apply_multipath(x, std::vector<PathParams>{}, 2000.0), input_error);
  PathParams bad;
  bad.amp = 1.5;
  CHECK_THROWS_AS(apply_multipath(x, std::vector<PathParams>{bad}, 2000.0), input_error);
  PathParams fast;
  fast.doppler_alpha = 2.0;
  CHECK_THROWS_AS(apply_multipath(x, std::vector<PathParams>{fast}, 2000.0), input_error);
}

TEST_CASE("two equal rays half a period apart cancel") {
  Waveform x = tone(2000.0, 40000.0, 4000);
  PathParams direct;
  PathParams echo;
  echo.delay_samples = 10;  // half of the 20-sample carrier period
  Waveform y = apply_multipath(x, std::vector<PathParams>{direct, echo}, 2000.0);
  REQUIRE(y.size() == x.size() + 10);

  double interior = 0.0;
  for (size_t i = 10; i < x.size(); ++i) interior += y.samples[i] * y.samples[i];
  interior = std::sqrt(interior / double(x.size() - 10));
  const double in_rms = 1.0 / std::numbers::sqrt2;
  CHECK(interior <= 0.01 * in_rms);
}

TEST_CASE("combined channel: identity, tone scaling, determinism") {
  ModSpec mod;
  Rng brng(21);
  Waveform x = modulate(random_bits(64, brng), mod);

  ChannelParams ident;  // defaults: one transparent path, noiseless
  Rng r0(3);
  Waveform y = apply_channel(x, ident, r0);
  REQUIRE(y.size() == x.size());
  CHECK(rms_diff(y.samples, x.samples, 0, x.size()) <= 1e-6);

  // half-speed path turns the 2 kHz tone into 1 kHz, scaled by amp
  Waveform t2k = tone(2000.0, 40000.0, 4000);
  ChannelParams half;
  half.paths[0].doppler_alpha = 0.5;
  half.paths[0].amp = 0.8;
  Rng r1(4);
  Waveform h = apply_channel(t2k, half, r1);
  CHECK(h.size() == 8000);
  const double bin_hz = 40000.0 / 8000.0;
  CHECK(std::abs(peak_freq_hz(h) - 1000.0) <= bin_hz + 1e-9);
  double peak = 0.0;
  for (size_t i = 500; i + 500 < h.size(); ++i) peak = std::max(peak, std::abs(h.samples[i]));
  CHECK(peak == doctest::Approx(0.8).epsilon(0.02));

  // fixed seed reproduces a noisy multi-path draw bit-exactly
  DistributionSpec spec;
  spec.alpha_random = true;
  spec.ebno_db = 10.0;
  Rng d1(99), d2(99);
  ChannelParams p1 = sample_channel_params(spec, d1);
  ChannelParams p2 = sample_channel_params(spec, d2);
  Rng n1(100), n2(100);
  Waveform o1 = apply_channel(x, p1, n1);
  Waveform o2 = apply_channel(x, p2, n2);
  CHECK(o1.samples == o2.samples);
}

TEST_CASE("noiseless channel is linear in the input") {
  ModSpec mod;
  Rng brng(22);
  Waveform x1 = modulate(random_bits(32, brng), mod);
  Waveform x2 = modulate(random_bits(32, brng), mod);
  Waveform sum = x1;
  for (size_t i = 0; i < sum.size(); ++i) sum.samples[i] += x2.samples[i];

  ChannelParams p;
  p.paths.clear();
  PathParams a;
  a.amp = 0.9;
  a.phase_traj = {0.3, 2.1, 4.4};
  PathParams b;
  b.amp = 0.45;
  b.delay_samples = 33;
  b.phase_traj = {1.0, 5.5};
  p.paths = {a, b};

  Rng r1(5), r2(6), r3(7);
  Waveform ys = apply_channel(sum, p, r1, 1.0);
  Waveform y1 = apply_channel(x1, p, r2, 1.0);
  Waveform y2 = apply_channel(x2, p, r3, 1.0);
  REQUIRE(ys.size() == y1.size());
  std::vector<double> y12(y1.samples);
  for (size_t i = 0; i < y12.size(); ++i) y12[i] += y2.samples[i];
  CHECK(rms_diff(ys.samples, y12, 0, ys.size()) <= 1e-9);
}

TEST_CASE("noiseless single-path energy never exceeds amp^2") {
  ModSpec mod;
  Rng brng(23);
  Waveform x = modulate(random_bits(64, brng), mod);
  const double ex = signal_energy(x);

  ChannelParams p;
  p.paths[0].amp = 0.7;
  p.paths[0].delay_samples = 7;
  p.paths[0].phase_traj = {0.7};
  Rng rng(8);
  Waveform y = apply_channel(x, p, rng, 1.0);
  CHECK(signal_energy(y) <= ex * 0.7 * 0.7 * (1.0 + 1e-9));
}

TEST_CASE("degenerate distribution yields the means") {
  DistributionSpec spec;
  spec.amp = {0.75, 0.0};
  spec.phase = {pi, 0.0};
  spec.alpha = {1.0, 0.0};
  spec.alpha_random = true;
  spec.path_count_probs = {1.0};  // always the direct path alone
  Rng rng(1);
  ChannelParams p = sample_channel_params(spec, rng);
  REQUIRE(p.paths.size() == 1);
  CHECK(p.paths[0].amp == 0.75);
  CHECK(p.paths[0].doppler_alpha == 1.0);
  CHECK(p.paths[0].delay_samples == 0);
  for (double th : p.paths[0].phase_traj) CHECK(th == doctest::Approx(pi).epsilon(1e-12));
}

TEST_CASE("sampled parameters respect their distributions") {
  DistributionSpec spec;
  spec.alpha_random = true;
  Rng rng(42);

  const size_t ndraw = 100000;
  double amp_sum = 0.0;
  size_t amp_count = 0;
  size_t count_hist[3] = {0, 0, 0};
  for (size_t i = 0; i < ndraw; ++i) {
    ChannelParams p = sample_channel_params(spec, rng);
    REQUIRE(p.paths.size() >= 1);
    REQUIRE(p.paths.size() <= 3);
    ++count_hist[p.paths.size() - 1];
    CHECK(p.paths[0].delay_samples == 0);
    for (size_t k = 1; k < p.paths.size(); ++k) {
      CHECK(p.paths[k].delay_samples >= p.paths[k - 1].delay_samples);
      CHECK(p.paths[k].delay_samples <= 200);
    }
    for (const auto& path : p.paths) {
      CHECK(path.amp > 0.0);
      CHECK(path.amp <= 1.0);
      CHECK(path.doppler_alpha >= 0.5);
      CHECK(path.doppler_alpha <= 1.5);
      amp_sum += path.amp;
      ++amp_count;
    }
  }

  // clamped-Gaussian analytic mean, N(0.75, 0.25^2) clamped to (0, 1]
  const double expect_amp = clamped_normal_mean(0.75, 0.25, 0.0, 1.0);
  CHECK(std::abs(amp_sum / double(amp_count) - expect_amp) <= 0.01);

  const double probs[3] = {0.4, 0.3, 0.3};
  for (int k = 0; k < 3; ++k)
    CHECK(std::abs(double(count_hist[k]) / double(ndraw) - probs[k]) <= 0.01);
}

TEST_CASE("channel spec JSON round-trip") {
  DistributionSpec spec;
  spec.amp = {0.6, 0.1};
  spec.alpha_random = true;
  spec.path_count_probs = {0.5, 0.5};
  spec.ebno_db = 12.5;
  spec.f_delta_hz = 1000.0;

  DistributionSpec back = channel_spec_from_json(channel_spec_to_json(spec));
  CHECK(back.amp.mu == spec.amp.mu);
  CHECK(back.amp.sigma == spec.amp.sigma);
  CHECK(back.alpha_random == spec.alpha_random);
  CHECK(back.path_count_probs == spec.path_count_probs);
  CHECK(back.ebno_db == spec.ebno_db);
  CHECK(back.f_delta_hz == spec.f_delta_hz);

  CHECK_THROWS_AS(channel_spec_from_json("{nope"), config_error);
  CHECK_THROWS_AS(channel_spec_from_json(R"({"amp": {"mu": "x"}})"), config_error);

  DistributionSpec bad;
  bad.path_count_probs = {0.5, 0.4};  // does not sum to 1
  Rng rng(1);
  CHECK_THROWS_AS(sample_channel_params(bad, rng), config_error);
}
