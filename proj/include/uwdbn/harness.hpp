#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "uwdbn/channel.hpp"
#include "uwdbn/dbn.hpp"
#include "uwdbn/modulation.hpp"
#include "uwdbn/pixelize.hpp"
#include "uwdbn/receiver.hpp"

namespace uwdbn {

enum class ExperimentKind {
  awgn_denoise,
  multipath_denoise,
  doppler_denoise,
  classify_awgn,
  overall,
};

const char* kind_name(ExperimentKind k);
ExperimentKind kind_from_name(const std::string& name);

// hidden layer sizes behind a named preset; the visible size comes from the
// data. Unknown names raise config_error.
std::vector<size_t> preset_hidden_sizes(const std::string& name);

// Everything an experiment run depends on, in one JSON-serializable bundle.
// Fields that don't change results (thread count) are excluded from the hash.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::awgn_denoise;
  ModSpec mod;
  DistributionSpec channel;    // ebno_db here is the *training* operating point
  double train_ebno_db = 0.0;  // EbNo the dataset and models are built at
  size_t dataset_symbols = 5000;
  std::array<double, 3> split{0.5, 0.2, 0.3};  // train / val / test
  size_t block_symbols = 52;  // symbols sharing one channel realization
  std::vector<Resolution> resolutions{{15, 1}, {10, 2}, {5, 4}, {5, 8}};
  std::string denoise_preset = "desk-denoise";
  std::string classify_preset = "desk-classify";
  TrainConfig pretrain;     // greedy layer-wise stage
  FineTuneConfig finetune;  // supervised head stage
  double quantile = 0.8;    // relative-activity cut for noise nodes
  bool per_node_neutral = false;

  // receive/sweep side
  std::vector<std::string> methods{"mle"};
  std::vector<double> ebno_grid_db{0.0};
  double detect_threshold = 0.1;
  bool dbn_compensate = false;
  size_t min_bits = 20000;   // per grid point, before the CI test may stop
  size_t max_bits = 1000000; // hard cap per grid point
  double ci_rel = 0.3;       // stop when the 95% CI half-width is within
  double ci_abs = 5e-3;      // max(ci_rel * ber, ci_abs)
  // (weight, f_delta_hz) mixture; empty means channel.f_delta_hz throughout
  std::vector<std::pair<double, double>> f_delta_mix;
  uint32_t threads = 0;  // sweep concurrency; 0 = hardware, never affects RNG

  // structure search
  std::vector<std::vector<size_t>> search_structures{{64, 16}, {128, 32}};
  std::vector<uint32_t> search_epochs{50, 200};
  std::vector<uint64_t> search_seeds{1, 2, 3};

  uint64_t master_seed = 1;

  void validate() const;  // throws config_error
};

// defaults wired for the given experiment (channel shape, methods, grid)
ExperimentConfig default_experiment(ExperimentKind kind);

// Partial JSON overlays onto default_experiment(json["kind"]).
ExperimentConfig experiment_from_json(const std::string& json_text);
std::string experiment_to_json(const ExperimentConfig& cfg);

uint64_t fnv1a64(std::string_view bytes);
uint64_t config_hash(const ExperimentConfig& cfg);

// Aligned per-symbol views of one split: the transmitted (clean) waveform,
// the channel output re-aligned to it via the direct path's true time scale,
// the rasterized forms of both, and the symbol value.
struct SymbolDataset {
  std::vector<FrameSet> clean_frames, noisy_frames;
  std::vector<std::vector<double>> clean_wave, noisy_wave;
  std::vector<uint8_t> labels;

  size_t size() const { return labels.size(); }
};

struct Dataset {
  SymbolDataset train, val, test;
};

// Blocks of cfg.block_symbols share one channel draw; every block gets its
// own derived RNG stream, disjoint across splits, so any prefix of the
// dataset is stable under size changes.
Dataset generate_dataset(const ExperimentConfig& cfg);

// dir/{train,val,test}/{clean.frames,noisy.frames,clean.f32,noisy.f32,
// labels.u8} plus dir/meta.json
void write_dataset(const Dataset& ds, const std::string& dir,
                   const ExperimentConfig& cfg);
Dataset load_dataset(const std::string& dir);

DenoiseModel train_denoise(const Dataset& ds, const ExperimentConfig& cfg);
ClassifierModel train_classifier(const Dataset& ds, const DenoiseModel& dm,
                                 const ExperimentConfig& cfg);
// same, with the hidden sizes given explicitly (structure search)
ClassifierModel train_classifier(const Dataset& ds, const DenoiseModel& dm,
                                 const ExperimentConfig& cfg,
                                 std::span<const size_t> hidden_sizes);

struct DenoiseEval {
  double denoised_rms = 0.0;  // mean over symbols of RMS(denoised - clean)
  double noisy_rms = 0.0;     // mean over symbols of RMS(noisy - clean)
};
DenoiseEval evaluate_denoise(const SymbolDataset& data, const DenoiseModel& dm);

// bit error rates on aligned dataset symbols (no detection in the loop)
double classifier_ber(const SymbolDataset& data, const DenoiseModel& dm,
                      const ClassifierModel& cm, const ModSpec& mod);
double mle_ber(const SymbolDataset& data, const ModSpec& mod);

struct BerRecord {
  std::string method;
  double ebno_db = 0.0;
  uint64_t bits = 0;
  uint64_t errors = 0;
  double ber = 0.0;
  uint64_t seed = 0;  // the sweep's master seed
  double wall_ms = 0.0;
};

// Monte-Carlo frames through the full chain (frame build, channel, receive)
// for every (method, EbNo) grid point. Each frame draws its own RNG stream
// from (point, trial), so results do not depend on the thread count. Points
// extend past min_bits until the CI rule in ExperimentConfig is met or
// max_bits is hit. Frames the receiver cannot detect count half their bits
// as errors. Rows come back sorted by (method, ebno).
std::vector<BerRecord> run_ber_sweep(const ExperimentConfig& cfg,
                                     const RxModels& models);

// header `method,ebno_db,bits,errors,ber,seed,wall_ms`, one row per record,
// then a `# config_hash=... git_rev=...` comment. wall_ms is honest wall
// time, so byte-level reproducibility claims must skip that column.
void write_ber_csv(std::span<const BerRecord> rows, const std::string& path,
                   const ExperimentConfig& cfg);

struct StructureRecord {
  std::string structure;  // hidden sizes, e.g. "128x32"
  uint32_t epochs = 0;
  uint64_t seed = 0;
  double ber = 0.0;       // classifier BER on the test split
  double wall_ms = 0.0;   // training time for this cell
};

// Classifier capacity/schedule grid: per seed, one dataset and one de-noiser
// are shared across all (structure, epochs) cells; the epoch budget drives
// both pretraining and fine-tuning. Rows sorted by (structure, epochs, seed).
std::vector<StructureRecord> run_structure_search(const ExperimentConfig& cfg);
void write_structure_csv(std::span<const StructureRecord> rows,
                         const std::string& path, const ExperimentConfig& cfg);

std::string git_revision();

}  // namespace uwdbn
