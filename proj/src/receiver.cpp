#include "uwdbn/receiver.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "uwdbn/channel.hpp"
#include "uwdbn/fft.hpp"
#include "uwdbn/kernels.hpp"
#include "uwdbn/resample.hpp"

namespace uwdbn {

namespace {

struct PilotGeometry {
  double fs = 0.0;
  double s0 = 0.0;       // transmitted up->down spacing, samples
  double c = 0.0;        // sweep-induced spacing bias, samples
  double k = 0.0;        // period slope of the sweeps, dimensionless
  double a_dn = 0.0;     // 1/f1, seconds
  bool has_band = false;
};

PilotGeometry pilot_geometry(const FrameLayout& layout) {
  if (layout.pilot_up.samples.empty() || layout.pilot_down.samples.empty())
    throw input_error("detect: layout has empty pilots");
  PilotGeometry g;
  g.fs = layout.pilot_up.sample_rate_hz;
  if (g.fs <= 0) throw input_error("detect: pilot sample rate must be positive");
  g.s0 = static_cast<double>(layout.pilot_spacing_samples());
  if (layout.hfm_f0_hz > 0 && layout.hfm_f1_hz > layout.hfm_f0_hz) {
    const double a_up = 1.0 / layout.hfm_f0_hz;
    g.a_dn = 1.0 / layout.hfm_f1_hz;
    const double t = static_cast<double>(layout.pilot_up.size()) / g.fs;
    g.k = (a_up - g.a_dn) / t;
    g.c = g.fs * (a_up + g.a_dn) / g.k;
    g.has_band = true;
  }
  return g;
}

// Correlation-peak spacing produced by time scale alpha.
double spacing_at(const PilotGeometry& g, double alpha) {
  return (g.s0 - g.c) / alpha + g.c;
}

// How far the down-sweep peak moves at time scale alpha, in samples.
double down_shift_samples(const PilotGeometry& g, double alpha) {
  if (!g.has_band) return 0.0;
  return g.fs * g.a_dn * (alpha - 1.0) / (alpha * g.k);
}

// Envelope of the normalized cross-correlation of s against the analytic
// extension of t, for every lag. Clamped into [0, 1].
std::vector<double> envelope_correlation(std::span<const double> s,
                                         std::span<const double> t_re,
                                         std::span<const double> t_im,
                                         double t_norm,
                                         std::span<const double> energy_prefix) {
  const size_t n = t_re.size();
  const size_t lags = s.size() - n + 1;
  std::vector<double> c(lags);
  for (size_t k = 0; k < lags; ++k) {
    const double win = energy_prefix[k + n] - energy_prefix[k];
    if (win <= 0.0) {
      c[k] = 0.0;
      continue;
    }
    const double re = kernels::dot(s.data() + k, t_re.data(), n);
    const double im = kernels::dot(s.data() + k, t_im.data(), n);
    c[k] = std::min(1.0, std::sqrt(re * re + im * im) /
                             (std::sqrt(win) * t_norm));
  }
  return c;
}

// Sub-sample apex of a sampled peak via the fitted parabola.
double refine_peak(std::span<const double> c, size_t i) {
  if (i == 0 || i + 1 >= c.size()) return static_cast<double>(i);
  const double denom = c[i - 1] - 2.0 * c[i] + c[i + 1];
  if (denom >= -1e-30) return static_cast<double>(i);
  const double d = std::clamp(0.5 * (c[i - 1] - c[i + 1]) / denom, -0.5, 0.5);
  return static_cast<double>(i) + d;
}

std::vector<double> slice_padded(std::span<const double> x, int64_t start,
                                 size_t len) {
  std::vector<double> out(len, 0.0);
  for (size_t i = 0; i < len; ++i) {
    const int64_t j = start + static_cast<int64_t>(i);
    if (j >= 0 && j < static_cast<int64_t>(x.size())) out[i] = x[j];
  }
  return out;
}

double mean_square(std::span<const double> x, int64_t start, int64_t len) {
  const int64_t lo = std::max<int64_t>(0, start);
  const int64_t hi = std::min<int64_t>(static_cast<int64_t>(x.size()), start + len);
  if (hi <= lo) return 0.0;
  return kernels::sumsq(x.data() + lo, static_cast<size_t>(hi - lo)) /
         static_cast<double>(hi - lo);
}

}  // namespace

PilotDetection detect_pilot(const Waveform& s, const FrameLayout& layout,
                            double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw input_error("detect: threshold must lie in (0, 1)");
  const auto geom = pilot_geometry(layout);
  if (s.size() <= layout.preamble_samples())
    throw input_error("detect: signal shorter than the frame preamble");

  const auto& up = layout.pilot_up.samples;
  const auto& dn = layout.pilot_down.samples;

  // Analytic templates make the correlation an envelope: smooth under the
  // carrier and invariant to the channel's phase rotations.
  auto up_a = analytic_signal(up);
  auto dn_a = analytic_signal(dn);
  std::vector<double> up_re(up.size()), up_im(up.size());
  std::vector<double> dn_re(dn.size()), dn_im(dn.size());
  for (size_t i = 0; i < up.size(); ++i) {
    up_re[i] = up_a[i].real();
    up_im[i] = up_a[i].imag();
  }
  for (size_t i = 0; i < dn.size(); ++i) {
    dn_re[i] = dn_a[i].real();
    dn_im[i] = dn_a[i].imag();
  }

  std::vector<double> prefix(s.size() + 1, 0.0);
  for (size_t i = 0; i < s.size(); ++i)
    prefix[i + 1] = prefix[i] + s.samples[i] * s.samples[i];

  const double up_norm = std::sqrt(kernels::sumsq(up.data(), up.size()));
  const double dn_norm = std::sqrt(kernels::sumsq(dn.data(), dn.size()));
  if (up_norm <= 0 || dn_norm <= 0)
    throw input_error("detect: zero-energy pilot template");

  const auto c_up =
      envelope_correlation(s.samples, up_re, up_im, up_norm, prefix);
  const auto c_dn =
      envelope_correlation(s.samples, dn_re, dn_im, dn_norm, prefix);

  // Peak spacings reachable by time scales in [0.5, 1.5], padded for noise.
  const double d_a = spacing_at(geom, 0.5);
  const double d_b = spacing_at(geom, 1.5);
  constexpr int64_t kPad = 16;
  const auto d_min = std::max<int64_t>(
      1, static_cast<int64_t>(std::floor(std::min(d_a, d_b))) - kPad);
  const auto d_max =
      static_cast<int64_t>(std::ceil(std::max(d_a, d_b))) + kPad;

  double best = -1.0;
  size_t best_k = 0;
  int64_t best_d = d_min;
  for (size_t k = 0; k < c_up.size(); ++k) {
    const int64_t hi =
        std::min<int64_t>(d_max, static_cast<int64_t>(c_dn.size()) - 1 -
                                     static_cast<int64_t>(k));
    for (int64_t d = d_min; d <= hi; ++d) {
      const double v = c_up[k] + c_dn[k + static_cast<size_t>(d)];
      if (v > best) {
        best = v;
        best_k = k;
        best_d = d;
      }
    }
  }
  if (best < 0.0) throw detection_error("detect: no admissible peak spacing");

  const size_t dn_k = best_k + static_cast<size_t>(best_d);
  PilotDetection det;
  det.up_corr = c_up[best_k];
  det.down_corr = c_dn[dn_k];
  if (det.up_corr < threshold || det.down_corr < threshold)
    throw detection_error("detect: pilot correlation below threshold");

  det.up_peak = refine_peak(c_up, best_k);
  det.down_peak = refine_peak(c_dn, dn_k);

  // Best-estimate payload position: undo the sweep-induced peak shift, then
  // step over the scaled down pilot and guard.
  double alpha = 1.0;
  const double spacing = det.down_peak - det.up_peak;
  if (geom.has_band && std::abs(geom.s0 - geom.c) > 1e-9 &&
      std::abs(spacing - geom.c) > 1e-9) {
    const double a = (geom.s0 - geom.c) / (spacing - geom.c);
    if (std::isfinite(a)) alpha = std::clamp(a, 0.5, 1.5);
  } else if (!geom.has_band && spacing > 0) {
    alpha = std::clamp(geom.s0 / spacing, 0.5, 1.5);
  }
  det.payload_offset =
      det.down_peak - down_shift_samples(geom, alpha) +
      static_cast<double>(dn.size() + layout.guard_samples) / alpha;
  return det;
}

double estimate_doppler(const PilotDetection& d, const FrameLayout& layout) {
  const auto geom = pilot_geometry(layout);
  const double spacing = d.down_peak - d.up_peak;
  if (spacing <= 0.0)
    throw detection_error("doppler: measured pilot spacing must be positive");
  if (std::abs(geom.s0 - geom.c) < 1e-9)
    throw input_error("doppler: pilot geometry cannot resolve the time scale");
  const double denom = spacing - geom.c;
  if (std::abs(denom) < 1e-12)
    throw detection_error("doppler: measured spacing is degenerate");
  const double alpha = (geom.s0 - geom.c) / denom;
  if (!std::isfinite(alpha) || alpha <= 0.0)
    throw detection_error("doppler: time-scale estimate out of range");
  return alpha;
}

Waveform compensate_doppler(const Waveform& s, double alpha_hat) {
  if (!(alpha_hat >= 0.5 && alpha_hat <= 1.5))
    throw input_error("compensate: time scale outside [0.5, 1.5]");
  Waveform out;
  out.sample_rate_hz = s.sample_rate_hz;
  const auto out_len = static_cast<size_t>(
      std::llround(static_cast<double>(s.size()) * alpha_hat));
  out.samples = resample_time_scale(s.samples, 1.0 / alpha_hat, out_len);
  return out;
}

BitSequence mle_demodulate(const Waveform& s, const ModSpec& spec,
                           std::vector<std::vector<double>>* posteriors) {
  spec.validate();
  const size_t sps = spec.samples_per_symbol();
  if (s.size() == 0 || s.size() % sps != 0)
    throw input_error("demodulate: length is not a whole number of symbols");
  const size_t nsym = s.size() / sps;
  const size_t bps = spec.bits_per_symbol();
  const unsigned nvals = 1u << bps;

  // With whole carrier cycles per symbol every template is position
  // independent; otherwise rebuild them per symbol.
  const double cycles = spec.fc_hz * static_cast<double>(sps) / spec.fs_hz;
  const bool stationary = std::abs(cycles - std::round(cycles)) < 1e-9;
  const double w = 2.0 * std::numbers::pi * spec.fc_hz / spec.fs_hz;

  std::vector<std::vector<double>> tmpl(nvals, std::vector<double>(sps));
  auto fill_templates = [&](size_t global_start) {
    for (unsigned v = 0; v < nvals; ++v) {
      const double phase = symbol_phase(spec.scheme, v);
      for (size_t j = 0; j < sps; ++j)
        tmpl[v][j] =
            std::cos(w * static_cast<double>(global_start + j) + phase);
    }
  };
  fill_templates(0);
  std::vector<double> t_norm(nvals);
  for (unsigned v = 0; v < nvals; ++v)
    t_norm[v] = std::sqrt(kernels::sumsq(tmpl[v].data(), sps));

  BitSequence bits;
  bits.reserve(nsym * bps);
  if (posteriors) {
    posteriors->clear();
    posteriors->reserve(nsym);
  }
  std::vector<double> scores(nvals);
  for (size_t i = 0; i < nsym; ++i) {
    if (!stationary && i > 0) fill_templates(i * sps);
    const double* seg = s.samples.data() + i * sps;
    unsigned best_v = 0;
    for (unsigned v = 0; v < nvals; ++v) {
      scores[v] = kernels::dot(seg, tmpl[v].data(), sps);
      if (scores[v] > scores[best_v]) best_v = v;
    }
    if (bps == 1) {
      bits.push_back(static_cast<uint8_t>(best_v));
    } else {
      bits.push_back(static_cast<uint8_t>((best_v >> 1) & 1u));
      bits.push_back(static_cast<uint8_t>(best_v & 1u));
    }
    if (posteriors) {
      // Indicative confidence only: softmax of the cosine similarities.
      const double seg_norm = std::sqrt(kernels::sumsq(seg, sps));
      std::vector<double> p(nvals);
      double zmax = -std::numeric_limits<double>::infinity();
      for (unsigned v = 0; v < nvals; ++v) {
        p[v] = seg_norm > 0 ? 8.0 * scores[v] / (seg_norm * t_norm[v]) : 0.0;
        zmax = std::max(zmax, p[v]);
      }
      double zsum = 0.0;
      for (auto& x : p) {
        x = std::exp(x - zmax);
        zsum += x;
      }
      for (auto& x : p) x /= zsum;
      posteriors->push_back(std::move(p));
    }
  }
  return bits;
}

const char* method_name(RxMethod m) {
  switch (m) {
    case RxMethod::mle: return "mle";
    case RxMethod::mle_doppler: return "mle-doppler";
    case RxMethod::dbn_denoise_mle: return "dbn-denoise-mle";
    case RxMethod::dbn_full: return "dbn-full";
  }
  throw input_error("unknown receive method");
}

RxMethod method_from_name(const std::string& name) {
  if (name == "mle") return RxMethod::mle;
  if (name == "mle-doppler") return RxMethod::mle_doppler;
  if (name == "dbn-denoise-mle") return RxMethod::dbn_denoise_mle;
  if (name == "dbn-full") return RxMethod::dbn_full;
  throw input_error("unknown receive method: " + name);
}

void RxConfig::validate() const {
  mod.validate();
  if (!(detect_threshold > 0.0 && detect_threshold < 1.0))
    throw config_error("receive: detection threshold must lie in (0, 1)");
  if (layout.pilot_up.samples.empty() || layout.pilot_down.samples.empty())
    throw config_error("receive: frame layout has empty pilots");
  if (layout.payload_bits == 0 ||
      layout.payload_bits % mod.bits_per_symbol() != 0)
    throw config_error("receive: payload bits must fill whole symbols");
}

RxReport receive(const Waveform& s, const RxConfig& cfg, const RxModels& models) {
  cfg.validate();
  const bool is_dbn = cfg.method == RxMethod::dbn_denoise_mle ||
                      cfg.method == RxMethod::dbn_full;
  if (is_dbn && models.denoise == nullptr)
    throw config_error("receive: method needs a de-noising model");
  if (cfg.method == RxMethod::dbn_full && models.classifier == nullptr)
    throw config_error("receive: method needs a classifier model");

  RxReport rep;
  rep.detection = detect_pilot(s, cfg.layout, cfg.detect_threshold);

  double alpha = 1.0;
  try {
    alpha = estimate_doppler(rep.detection, cfg.layout);
  } catch (const detection_error&) {
    alpha = 1.0;  // keep the frame; decode at nominal time scale
  }
  alpha = std::clamp(alpha, 0.5, 1.5);
  rep.alpha_hat = alpha;

  const size_t sps = cfg.mod.samples_per_symbol();
  const size_t nsym = cfg.layout.payload_bits / cfg.mod.bits_per_symbol();
  const size_t payload_len = nsym * sps;
  const auto n_dn = static_cast<int64_t>(cfg.layout.pilot_down.size());
  const auto guard = static_cast<int64_t>(cfg.layout.guard_samples);
  const auto geom = pilot_geometry(cfg.layout);

  const bool compensate =
      cfg.method == RxMethod::mle_doppler || (is_dbn && cfg.dbn_compensate);

  Waveform work;
  int64_t start = 0;
  if (compensate) {
    work = compensate_doppler(s, alpha);
    start = static_cast<int64_t>(std::llround(
                (rep.detection.down_peak - down_shift_samples(geom, alpha)) *
                alpha)) +
            n_dn + guard;
  } else {
    work.sample_rate_hz = s.sample_rate_hz;
    work.samples = s.samples;
    start = static_cast<int64_t>(std::llround(rep.detection.down_peak)) +
            n_dn + guard;
  }

  Waveform payload;
  payload.sample_rate_hz = cfg.mod.fs_hz;
  payload.samples = slice_padded(work.samples, start, payload_len);

  if (!is_dbn) {
    rep.bits = mle_demodulate(payload, cfg.mod, &rep.posteriors);
  } else {
    const auto& dm = *models.denoise;
    if (dm.frame_len != sps)
      throw config_error(
          "receive: de-noising model frame length does not match the symbol");
    std::vector<double> clean;
    clean.reserve(payload_len);
    std::vector<std::vector<double>> denoised(nsym);
    for (size_t i = 0; i < nsym; ++i) {
      std::span<const double> seg(payload.samples.data() + i * sps, sps);
      std::vector<double> u;
      const auto [lo, hi] = std::minmax_element(seg.begin(), seg.end());
      if (*hi - *lo > 0) {
        u = normalize_minmax(seg);
      } else {
        u.assign(sps, 0.5);  // degenerate segment: no scale to recover
      }
      const auto fs_frames = multi_resolution(u, dm.resolutions);
      denoised[i] = denoise(dm, fs_frames);
    }
    if (cfg.method == RxMethod::dbn_denoise_mle) {
      Waveform z;
      z.sample_rate_hz = cfg.mod.fs_hz;
      for (const auto& d : denoised)
        z.samples.insert(z.samples.end(), d.begin(), d.end());
      rep.bits = mle_demodulate(z, cfg.mod, &rep.posteriors);
    } else {
      const auto& cm = *models.classifier;
      if (cm.base.input_dim() != sps)
        throw config_error(
            "receive: classifier input does not match the symbol length");
      if (cm.label_arity != (1u << cfg.mod.bits_per_symbol()))
        throw config_error(
            "receive: classifier arity does not match the modulation");
      rep.posteriors.reserve(nsym);
      for (size_t i = 0; i < nsym; ++i) {
        // the classifier stack is trained on unit-interval inputs
        std::vector<double> u01(sps);
        for (size_t n = 0; n < sps; ++n)
          u01[n] = 0.5 * (denoised[i][n] + 1.0);
        auto r = classify(cm, u01);
        if (cfg.mod.bits_per_symbol() == 1) {
          rep.bits.push_back(static_cast<uint8_t>(r.label));
        } else {
          rep.bits.push_back(static_cast<uint8_t>((r.label >> 1) & 1u));
          rep.bits.push_back(static_cast<uint8_t>(r.label & 1u));
        }
        rep.posteriors.push_back(std::move(r.posterior));
      }
    }
  }

  // Indicative SNR: payload power against the noise floor of the guard
  // between the down sweep and the payload (transmitted silence).
  {
    const double inv_a = 1.0 / alpha;
    const auto gstart = static_cast<int64_t>(std::llround(
        rep.detection.down_peak + (static_cast<double>(n_dn) + 0.1 * guard) * inv_a));
    const auto glen =
        std::max<int64_t>(1, static_cast<int64_t>(std::llround(0.8 * guard * inv_a)));
    const double p_noise = mean_square(s.samples, gstart, glen);
    const auto pstart =
        static_cast<int64_t>(std::llround(rep.detection.payload_offset));
    const auto plen = static_cast<int64_t>(
        std::llround(static_cast<double>(payload_len) * inv_a));
    const double p_sig = mean_square(s.samples, pstart, plen);
    if (p_noise <= 1e-15) {
      rep.snr_est_db = 100.0;
    } else {
      const double snr = std::max(p_sig - p_noise, 0.0) / p_noise;
      rep.snr_est_db = 10.0 * std::log10(std::max(snr, 1e-10));
    }
  }
  return rep;
}

}  // namespace uwdbn
