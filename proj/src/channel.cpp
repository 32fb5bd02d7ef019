#include "uwdbn/channel.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "uwdbn/fft.hpp"
#include "uwdbn/resample.hpp"

namespace uwdbn {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

double wrap_phase(double th) {
  th = std::fmod(th, two_pi);
  return th < 0.0 ? th + two_pi : th;
}

void validate_paths(std::span<const PathParams> paths) {
  if (paths.empty()) throw input_error("channel: at least one path required");
  for (const auto& p : paths) {
    if (!(p.amp > 0.0) || p.amp > 1.0)
      throw input_error("channel: path amp must be in (0, 1]");
    if (!(p.doppler_alpha >= 0.5 && p.doppler_alpha <= 1.5))
      throw input_error("channel: path alpha outside [0.5, 1.5]");
    if (p.phase_traj.empty())
      throw input_error("channel: path needs a non-empty phase trajectory");
  }
}

}  // namespace

ChannelParams sample_channel_params(const DistributionSpec& spec, Rng& rng) {
  if (spec.path_count_probs.empty())
    throw config_error("channel spec: path_count_probs is empty");
  double psum = 0.0;
  for (double p : spec.path_count_probs) {
    if (p < 0.0) throw config_error("channel spec: negative path probability");
    psum += p;
  }
  if (std::abs(psum - 1.0) > 1e-9)
    throw config_error("channel spec: path_count_probs must sum to 1");
  if (!(spec.fs_hz > 0.0) || !(spec.f_delta_hz > 0.0) || !(spec.tau_divisor > 0.0))
    throw config_error("channel spec: fs, f_delta and tau_divisor must be positive");

  ChannelParams out;
  out.ebno_db = spec.ebno_db;
  out.f_delta_hz = spec.f_delta_hz;
  out.rb_bits_per_s = spec.rb_bits_per_s;

  const size_t npaths = rng.categorical(spec.path_count_probs) + 1;

  std::vector<size_t> delays(npaths, 0);
  const double tau_max = spec.fs_hz / 2.0 / spec.tau_divisor;
  for (size_t i = 1; i < npaths; ++i)
    delays[i] = static_cast<size_t>(std::llround(rng.uniform(0.0, tau_max)));
  std::sort(delays.begin() + 1, delays.end());

  const auto traj_len = static_cast<size_t>(
      std::ceil(spec.duration_hint_s * spec.f_delta_hz)) + 2;

  out.paths.clear();
  for (size_t i = 0; i < npaths; ++i) {
    PathParams p;
    p.amp = std::clamp(rng.gaussian(spec.amp.mu, spec.amp.sigma), 1e-12, 1.0);
    p.doppler_alpha =
        spec.alpha_random
            ? std::clamp(rng.gaussian(spec.alpha.mu, spec.alpha.sigma), 0.5, 1.5)
            : spec.alpha.mu;
    p.delay_samples = delays[i];
    p.phase_traj.resize(traj_len);
    for (auto& th : p.phase_traj)
      th = wrap_phase(rng.gaussian(spec.phase.mu, spec.phase.sigma));
    out.paths.push_back(std::move(p));
  }
  return out;
}

Waveform apply_doppler(const Waveform& x, double alpha) {
  if (!(alpha >= 0.5 && alpha <= 1.5))  // model validity bound
    throw input_error("apply_doppler: alpha outside [0.5, 1.5]");
  if (alpha == 1.0) return x;
  Waveform y;
  y.sample_rate_hz = x.sample_rate_hz;
  const auto out_len = static_cast<size_t>(
      std::llround(static_cast<double>(x.size()) / alpha));
  y.samples = resample_time_scale(x.samples, alpha, out_len);
  return y;
}

double doppler_shifted_fc(double fc_hz, double delta_rt, double delta_s) {
  if (delta_s == 0.0)
    throw input_error("doppler_shifted_fc: source-path delta must be nonzero");
  return (1.0 + delta_rt / delta_s) * fc_hz;
}

Waveform apply_multipath(const Waveform& x, std::span<const PathParams> paths,
                         double f_delta_hz) {
  validate_paths(paths);
  if (!(f_delta_hz > 0.0)) throw input_error("apply_multipath: f_delta must be positive");
  if (x.size() == 0) throw input_error("apply_multipath: empty input");

  const auto period = static_cast<size_t>(
      std::max<long long>(1, std::llround(x.sample_rate_hz / f_delta_hz)));

  size_t out_len = 0;
  for (const auto& p : paths)
    out_len = std::max(out_len, x.size() + p.delay_samples);

  const auto xa = analytic_signal(x.samples);

  Waveform out;
  out.sample_rate_hz = x.sample_rate_hz;
  out.samples.assign(out_len, 0.0);
  for (const auto& p : paths) {
    const size_t nseg = p.phase_traj.size();
    for (size_t n = 0; n < x.size(); ++n) {
      const size_t m = n + p.delay_samples;
      const double th = p.phase_traj[(m / period) % nseg];
      // Re[xa * e^{-j th}]
      out.samples[m] +=
          p.amp * (xa[n].real() * std::cos(th) + xa[n].imag() * std::sin(th));
    }
  }
  return out;
}

Waveform apply_awgn(const Waveform& x, double ebno_db, double eb_per_bit, Rng& rng) {
  if (!(eb_per_bit >= 0.0) || !std::isfinite(eb_per_bit))
    throw input_error("apply_awgn: eb must be non-negative and finite");
  if (ebno_db >= 200.0) return x;
  const double sigma = std::sqrt(eb_per_bit / (2.0 * std::pow(10.0, ebno_db / 10.0)));
  Waveform y = x;
  for (auto& s : y.samples) s += sigma * rng.gaussian();
  return y;
}

Waveform apply_channel(const Waveform& x, const ChannelParams& p, Rng& rng,
                       double eb_per_bit) {
  validate_paths(p.paths);
  if (x.size() == 0) throw input_error("apply_channel: empty input");
  if (eb_per_bit < 0.0) eb_per_bit = measure_eb(x, p.rb_bits_per_s);

  const auto period = static_cast<size_t>(
      std::max<long long>(1, std::llround(x.sample_rate_hz / p.f_delta_hz)));

  // per-path lengths after time scaling plus delay
  size_t out_len = 0;
  std::vector<size_t> scaled_len(p.paths.size());
  for (size_t i = 0; i < p.paths.size(); ++i) {
    const auto& path = p.paths[i];
    scaled_len[i] = path.doppler_alpha == 1.0
                        ? x.size()
                        : static_cast<size_t>(std::llround(
                              static_cast<double>(x.size()) / path.doppler_alpha));
    out_len = std::max(out_len, scaled_len[i] + path.delay_samples);
  }

  Waveform out;
  out.sample_rate_hz = x.sample_rate_hz;
  out.samples.assign(out_len, 0.0);

  std::vector<std::complex<double>> shared_xa;  // analytic(x), alpha == 1 paths
  for (size_t i = 0; i < p.paths.size(); ++i) {
    const auto& path = p.paths[i];
    std::vector<std::complex<double>> xa;
    if (path.doppler_alpha == 1.0) {
      if (shared_xa.empty()) shared_xa = analytic_signal(x.samples);
      xa = shared_xa;
    } else {
      xa = analytic_signal(
          resample_time_scale(x.samples, path.doppler_alpha, scaled_len[i]));
    }
    const size_t nseg = path.phase_traj.size();
    for (size_t n = 0; n < xa.size(); ++n) {
      const size_t m = n + path.delay_samples;
      const double th = path.phase_traj[(m / period) % nseg];
      out.samples[m] +=
          path.amp * (xa[n].real() * std::cos(th) + xa[n].imag() * std::sin(th));
    }
  }
  return apply_awgn(out, p.ebno_db, eb_per_bit, rng);
}

DistributionSpec channel_spec_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("channel spec: bad JSON: ") + e.what());
  }
  DistributionSpec s;
  try {
    auto dist = [&j](const char* key, ParamDist fallback) {
      if (!j.contains(key)) return fallback;
      return ParamDist{j[key].at("mu").get<double>(), j[key].at("sigma").get<double>()};
    };
    s.fs_hz = j.value("fs_hz", s.fs_hz);
    s.amp = dist("amp", s.amp);
    s.phase = dist("phase", s.phase);
    s.alpha = dist("alpha", s.alpha);
    s.alpha_random = j.value("alpha_random", s.alpha_random);
    if (j.contains("path_count_probs"))
      s.path_count_probs = j["path_count_probs"].get<std::vector<double>>();
    s.tau_divisor = j.value("tau_divisor", s.tau_divisor);
    s.f_delta_hz = j.value("f_delta_hz", s.f_delta_hz);
    s.ebno_db = j.value("ebno_db", s.ebno_db);
    s.rb_bits_per_s = j.value("rb_bits_per_s", s.rb_bits_per_s);
    s.duration_hint_s = j.value("duration_hint_s", s.duration_hint_s);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("channel spec: ") + e.what());
  }
  return s;
}

std::string channel_spec_to_json(const DistributionSpec& spec) {
  nlohmann::json j;
  j["fs_hz"] = spec.fs_hz;
  j["amp"] = {{"mu", spec.amp.mu}, {"sigma", spec.amp.sigma}};
  j["phase"] = {{"mu", spec.phase.mu}, {"sigma", spec.phase.sigma}};
  j["alpha"] = {{"mu", spec.alpha.mu}, {"sigma", spec.alpha.sigma}};
  j["alpha_random"] = spec.alpha_random;
  j["path_count_probs"] = spec.path_count_probs;
  j["tau_divisor"] = spec.tau_divisor;
  j["f_delta_hz"] = spec.f_delta_hz;
  j["ebno_db"] = spec.ebno_db;
  j["rb_bits_per_s"] = spec.rb_bits_per_s;
  j["duration_hint_s"] = spec.duration_hint_s;
  return j.dump(2);
}

}  // namespace uwdbn
