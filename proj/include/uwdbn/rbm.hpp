#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uwdbn/common.hpp"
#include "uwdbn/rng.hpp"

namespace uwdbn {

// One restricted Boltzmann machine: W is hidden x visible, b biases the
// visible units, c the hidden units.
struct RbmParams {
  Matrix w;               // n_hidden x n_visible
  std::vector<double> b;  // visible bias
  std::vector<double> c;  // hidden bias

  size_t n_visible() const { return b.size(); }
  size_t n_hidden() const { return c.size(); }
};

struct TrainConfig {
  double learning_rate = 0.05;
  uint32_t batch_size = 32;
  uint32_t epochs = 1000;
  uint32_t cd_steps = 1;
  double momentum = 0.5;
  double weight_decay = 1e-4;
  uint64_t seed = 0;
};

// Weights ~ N(0, 0.01^2), biases zero.
RbmParams init_rbm(size_t n_visible, size_t n_hidden, Rng& rng);

// Sets each visible bias to the log-odds of that unit's mean over the data
// (clamped away from 0/1). Without this, data with strongly skewed pixel
// means drags every weight the same way until the hidden layer saturates
// and learning stalls at a constant reconstruction.
void init_visible_bias_from_data(RbmParams& p,
                                 const std::vector<std::vector<double>>& data);

// E(v,h) = -h^T W v - b^T v - c^T h. Inputs must be hard binary.
double energy(const RbmParams& p, std::span<const double> v,
              std::span<const double> h);

// F(v) = -b^T v - sum_k softplus(c_k + W_k . v); exp(-F(v)) is the
// unnormalized visible marginal.
double free_energy(const RbmParams& p, std::span<const double> v);

// Factorized conditionals: sigmoid(c + W v) and sigmoid(b + W^T h).
std::vector<double> prob_h_given_v(const RbmParams& p, std::span<const double> v);
std::vector<double> prob_v_given_h(const RbmParams& p, std::span<const double> h);

std::vector<double> sample_bernoulli(std::span<const double> probs, Rng& rng);

struct GibbsResult {
  std::vector<double> h_sample;  // binary
  std::vector<double> v_next;    // binary
  std::vector<double> h_probs;
  std::vector<double> v_probs;
};

GibbsResult gibbs_step(const RbmParams& p, std::span<const double> v, Rng& rng);

// Exact quantities by enumeration; only for n_visible + n_hidden <= 20.
double log_partition_function_exact(const RbmParams& p);
double partition_function_exact(const RbmParams& p);
double joint_prob_exact(const RbmParams& p, std::span<const double> v,
                        std::span<const double> h);

// Mean negative log marginal likelihood of the visible data:
// (1/m) sum_j F(v_j) + log Q.
double nll_exact(const RbmParams& p, const std::vector<std::vector<double>>& data);

struct RbmGradient {
  Matrix dw;
  std::vector<double> db;
  std::vector<double> dc;
};

// Analytic gradient of nll_exact (model expectation minus data expectation).
RbmGradient exact_gradient(const RbmParams& p,
                           const std::vector<std::vector<double>>& data);

// CD-k estimate of the *descent* direction (data phase minus model phase),
// i.e. approximately -exact_gradient. Hiddens are sampled binary, visible
// reconstructions stay soft.
RbmGradient cd_gradient(const RbmParams& p,
                        const std::vector<std::vector<double>>& batch,
                        uint32_t cd_steps, Rng& rng,
                        double* recon_error = nullptr);

// Velocity buffers carried between cd_update calls for momentum.
struct CdState {
  Matrix vel_w;
  std::vector<double> vel_b;
  std::vector<double> vel_c;
};

CdState make_cd_state(const RbmParams& p);

// One gradient step on a mini-batch; returns the per-pixel mean squared
// reconstruction error. Weight decay applies to W only.
double cd_update(RbmParams& p, const std::vector<std::vector<double>>& batch,
                 const TrainConfig& cfg, Rng& rng, CdState& state);

struct TrainReport {
  std::vector<double> epoch_recon_error;  // one entry per epoch
};

// Full training loop: deterministic shuffle each epoch, mini-batches of
// cfg.batch_size. p must already be initialized with matching dimensions.
TrainReport train_rbm(RbmParams& p, const std::vector<std::vector<double>>& data,
                      const TrainConfig& cfg, Rng& rng);

// Binary blob: magic "RBM1", u32 n_visible, u32 n_hidden, f64 W row-major,
// f64 b, f64 c. Stream variants compose into container formats.
void write_rbm(std::ostream& os, const RbmParams& p);
RbmParams read_rbm(std::istream& is);
void save_rbm(const RbmParams& p, const std::string& path);
RbmParams load_rbm(const std::string& path);

}  // namespace uwdbn
