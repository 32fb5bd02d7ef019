#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uwdbn/pixelize.hpp"
#include "uwdbn/rbm.hpp"

namespace uwdbn {

// Stack of RBMs; layer k's hidden size equals layer k+1's visible size.
struct DbnModel {
  std::vector<RbmParams> layers;

  std::vector<size_t> layer_sizes() const;  // visible size, then each hidden
  size_t input_dim() const;
  size_t top_dim() const;
  void validate() const;  // chaining + non-empty
};

struct GreedyReport {
  std::vector<TrainReport> per_layer;
};

// Greedy layer-wise pretraining: layer 0 on the raw data, layer k on the
// mean-field activations of layer k-1. Layer k draws from Rng::derive(seed, k),
// so a single-layer stack reproduces plain train_rbm bit for bit.
DbnModel train_greedy(std::span<const size_t> layer_sizes,
                      const std::vector<std::vector<double>>& data,
                      const TrainConfig& cfg, GreedyReport* report = nullptr);

// Mean-field passes, no sampling. upward returns one activation vector per
// level, [0] being the input itself; downward maps a top-level activation
// back to a visible-space reconstruction.
std::vector<std::vector<double>> upward_pass(const DbnModel& m,
                                             std::span<const double> v);
std::vector<double> downward_pass(const DbnModel& m,
                                  std::span<const double> top);

// Per top-layer node, the mean |activation(noisy) - activation(clean)| over
// the given pairs. High scores mark nodes that track the corruption.
std::vector<double> compute_relative_activity(
    const DbnModel& m, const std::vector<std::vector<double>>& clean,
    const std::vector<std::vector<double>>& noisy);

struct DenoiseModel {
  DbnModel base;
  std::vector<uint32_t> noise_nodes;    // top-layer indices, ascending
  std::vector<double> neutral_values;   // one per noise node
  std::vector<double> activity_scores;  // all top-layer nodes
  std::vector<Resolution> resolutions;  // layout of the flattened input
  size_t frame_len = 0;                 // samples per frame before pixelization
  uint64_t config_hash = 0;
  uint64_t seed = 0;
};

// Threshold = nearest-rank quantile of the scores (ascending order statistic
// at rank ceil(q*n)); noise nodes are those strictly above it. Neutral value
// is the mean activation of the noise nodes over the clean corpus — one
// shared scalar by default, per-node means when per_node_neutral is set.
DenoiseModel build_denoise_model(DbnModel m, std::span<const double> scores,
                                 double quantile,
                                 const std::vector<std::vector<double>>& clean_corpus,
                                 bool per_node_neutral = false);

// Upward pass, clamp noise nodes to their neutral values, downward pass,
// then read the finest-resolution frame of the reconstruction back out as a
// waveform segment in [-1, 1] (frame_len samples).
std::vector<double> denoise(const DenoiseModel& dm, const FrameSet& fs);

// Same, starting from an already-flattened input vector.
std::vector<double> denoise_flat(const DenoiseModel& dm,
                                 std::span<const double> x);

struct ClassifierModel {
  DbnModel base;
  Matrix head_w;               // label_arity x top_dim
  std::vector<double> head_b;  // label_arity
  uint32_t label_arity = 2;
  double val_accuracy = 0.0;
  uint64_t config_hash = 0;
  uint64_t seed = 0;
};

struct FineTuneConfig {
  double learning_rate = 0.01;
  uint32_t epochs = 50;
  uint32_t batch_size = 32;
  uint32_t patience = 8;  // epochs without validation improvement
  uint64_t seed = 0;
};

// Attaches a small random head (N(0, 0.01^2) weights, zero bias).
ClassifierModel init_classifier(DbnModel m, uint32_t label_arity, Rng& rng);

struct LabeledSet {
  std::vector<std::vector<double>> inputs;
  std::vector<uint32_t> labels;
};

// Cross-entropy backprop through head and sigmoid stack. Keeps the
// best-validation-accuracy parameters; stops early after cfg.patience epochs
// without improvement. Zero epochs leaves the stack untouched.
void fine_tune_classifier(ClassifierModel& cm, const LabeledSet& train,
                          const LabeledSet& val, const FineTuneConfig& cfg);

struct ClassifyResult {
  uint32_t label = 0;
  std::vector<double> posterior;
};

ClassifyResult classify(const ClassifierModel& cm, std::span<const double> x);

double classifier_loss(const ClassifierModel& cm, std::span<const double> x,
                       uint32_t label);

struct StackGradient {
  Matrix d_head_w;
  std::vector<double> d_head_b;
  std::vector<Matrix> d_w;               // per layer
  std::vector<std::vector<double>> d_c;  // per layer (upward biases)
};

StackGradient classifier_gradient(const ClassifierModel& cm,
                                  std::span<const double> x, uint32_t label);

double classifier_accuracy(const ClassifierModel& cm, const LabeledSet& data);

// Container files: magic, RBM blobs, JSON metadata trailer.
void save_denoise_model(const DenoiseModel& dm, const std::string& path);
DenoiseModel load_denoise_model(const std::string& path);
void save_classifier_model(const ClassifierModel& cm, const std::string& path);
ClassifierModel load_classifier_model(const std::string& path);

}  // namespace uwdbn
