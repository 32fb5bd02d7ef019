#pragma once

#include <string>
#include <vector>

#include "uwdbn/dbn.hpp"
#include "uwdbn/framing.hpp"
#include "uwdbn/modulation.hpp"

namespace uwdbn {

struct PilotDetection {
  double up_peak = 0.0;    // sample offset of the up-sweep envelope peak
  double down_peak = 0.0;  // sample offset of the down-sweep envelope peak
  double up_corr = 0.0;    // normalized correlations in [0, 1]
  double down_corr = 0.0;
  double payload_offset = 0.0;  // first payload sample (time-scale corrected)
};

// Envelope cross-correlation against both pilot sweeps, jointly maximized
// over the peak spacings a time scale in [0.5, 1.5] can produce. Both peaks
// must reach `threshold`, else detection_error. Sub-sample peak positions
// come from parabolic interpolation.
//
// The normalized correlation of a pilot buried in noise falls with the noise
// power (the window norm includes the noise), so thresholds are operating
// points, not constants: ~0.5 verifies a clean pilot, ~0.1 is the floor that
// keeps misses negligible at 0 dB Eb/No while still rejecting pure noise at
// the spacing test below.
PilotDetection detect_pilot(const Waveform& s, const FrameLayout& layout,
                            double threshold);

// Time-scale estimate from the measured peak spacing. Hyperbolic sweeps keep
// their period slope under s(t) = x(alpha*t), so each correlation peak also
// shifts by its band edge period: up by a*(1-alpha)/(alpha*k) seconds and
// down by a'*(alpha-1)/(alpha*k), with a = 1/f0, a' = 1/f1 and period slope
// k = (1/f0 - 1/f1)/T. The measured spacing is then
//   D(alpha) = (S0 - C)/alpha + C,   C = fs*(a + a')/k,
// S0 the transmitted spacing, which inverts to alpha = (S0-C)/(D-C). When the
// layout has no sweep band, C = 0 and this reduces to the plain ratio S0/D.
double estimate_doppler(const PilotDetection& d, const FrameLayout& layout);

// Band-limited resample by 1/alpha_hat; inverts apply_doppler up to edge
// effects. Output length = round(len * alpha_hat).
Waveform compensate_doppler(const Waveform& s, double alpha_hat);

// Coherent matched filter, symbol by symbol: correlate each symbol-length
// slice against every candidate symbol waveform and take the argmax (ties
// break toward the smaller symbol value). Length must be a whole number of
// symbols. Optionally reports softmax posteriors of the normalized scores.
BitSequence mle_demodulate(const Waveform& s, const ModSpec& spec,
                           std::vector<std::vector<double>>* posteriors = nullptr);

enum class RxMethod { mle, mle_doppler, dbn_denoise_mle, dbn_full };

const char* method_name(RxMethod m);
RxMethod method_from_name(const std::string& name);

struct RxConfig {
  ModSpec mod;
  FrameLayout layout;
  double detect_threshold = 0.1;
  RxMethod method = RxMethod::mle;
  // Doppler-compensate before the DBN path (the MLE+sync path always does).
  bool dbn_compensate = false;
  std::string denoise_model_path;
  std::string classifier_model_path;

  void validate() const;
};

// Frozen models for the DBN methods, owned by the caller.
struct RxModels {
  const DenoiseModel* denoise = nullptr;
  const ClassifierModel* classifier = nullptr;
};

struct RxReport {
  BitSequence bits;  // exactly layout.payload_bits entries
  double alpha_hat = 1.0;
  double snr_est_db = 0.0;
  std::vector<std::vector<double>> posteriors;  // one per symbol
  PilotDetection detection;
};

// Full receive chain: detect pilots, estimate the time scale, optionally
// compensate, slice the payload, and demodulate with the configured method.
// Detection failures propagate as detection_error.
RxReport receive(const Waveform& s, const RxConfig& cfg, const RxModels& models);

}  // namespace uwdbn
