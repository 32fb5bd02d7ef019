#include "uwdbn/rbm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include "uwdbn/kernels.hpp"

namespace uwdbn {

namespace {

constexpr size_t kEnumLimit = 20;

void check_dims(const RbmParams& p) {
  if (p.w.rows != p.c.size() || p.w.cols != p.b.size())
    throw input_error("rbm: weight matrix does not match bias dimensions");
}

void check_visible(const RbmParams& p, std::span<const double> v) {
  check_dims(p);
  if (v.size() != p.n_visible())
    throw input_error("rbm: visible vector has wrong length");
}

void check_hidden(const RbmParams& p, std::span<const double> h) {
  check_dims(p);
  if (h.size() != p.n_hidden())
    throw input_error("rbm: hidden vector has wrong length");
}

void require_enumerable(const RbmParams& p) {
  if (p.n_visible() + p.n_hidden() > kEnumLimit)
    throw capability_error("rbm: model too large for exact enumeration");
}

// Writes the bits of `code` into out (out[0] = least significant bit).
void index_to_bits(uint32_t code, std::span<double> out) {
  for (size_t i = 0; i < out.size(); ++i) out[i] = (code >> i) & 1u;
}

double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

}  // namespace

RbmParams init_rbm(size_t n_visible, size_t n_hidden, Rng& rng) {
  if (n_visible == 0 || n_hidden == 0)
    throw input_error("rbm: layer sizes must be positive");
  RbmParams p;
  p.w = Matrix(n_hidden, n_visible);
  for (auto& x : p.w.d) x = 0.01 * rng.gaussian();
  p.b.assign(n_visible, 0.0);
  p.c.assign(n_hidden, 0.0);
  return p;
}

void init_visible_bias_from_data(RbmParams& p,
                                 const std::vector<std::vector<double>>& data) {
  if (data.empty()) throw input_error("rbm: empty dataset");
  const size_t nv = p.n_visible();
  std::vector<double> mean(nv, 0.0);
  for (const auto& v : data) {
    if (v.size() != nv) throw input_error("rbm: visible vector has wrong length");
    for (size_t j = 0; j < nv; ++j) mean[j] += v[j];
  }
  const double inv_m = 1.0 / static_cast<double>(data.size());
  for (size_t j = 0; j < nv; ++j) {
    const double m = std::clamp(mean[j] * inv_m, 1e-3, 1.0 - 1e-3);
    p.b[j] = std::log(m / (1.0 - m));
  }
}

double energy(const RbmParams& p, std::span<const double> v,
              std::span<const double> h) {
  check_visible(p, v);
  check_hidden(p, h);
  double e = -kernels::dot(p.b.data(), v.data(), v.size()) -
             kernels::dot(p.c.data(), h.data(), h.size());
  for (size_t k = 0; k < p.n_hidden(); ++k)
    e -= h[k] * kernels::dot(p.w.row(k), v.data(), v.size());
  return e;
}

double free_energy(const RbmParams& p, std::span<const double> v) {
  check_visible(p, v);
  double f = -kernels::dot(p.b.data(), v.data(), v.size());
  for (size_t k = 0; k < p.n_hidden(); ++k)
    f -= softplus(p.c[k] + kernels::dot(p.w.row(k), v.data(), v.size()));
  return f;
}

std::vector<double> prob_h_given_v(const RbmParams& p, std::span<const double> v) {
  check_visible(p, v);
  std::vector<double> out(p.n_hidden());
  kernels::matvec(p.w.d.data(), p.w.rows, p.w.cols, v.data(), out.data());
  for (size_t k = 0; k < out.size(); ++k) out[k] = sigmoid(out[k] + p.c[k]);
  return out;
}

std::vector<double> prob_v_given_h(const RbmParams& p, std::span<const double> h) {
  check_hidden(p, h);
  std::vector<double> out(p.n_visible());
  kernels::matvec_t(p.w.d.data(), p.w.rows, p.w.cols, h.data(), out.data());
  for (size_t j = 0; j < out.size(); ++j) out[j] = sigmoid(out[j] + p.b[j]);
  return out;
}

std::vector<double> sample_bernoulli(std::span<const double> probs, Rng& rng) {
  std::vector<double> out(probs.size());
  for (size_t i = 0; i < probs.size(); ++i)
    out[i] = rng.uniform() < probs[i] ? 1.0 : 0.0;
  return out;
}

GibbsResult gibbs_step(const RbmParams& p, std::span<const double> v, Rng& rng) {
  GibbsResult r;
  r.h_probs = prob_h_given_v(p, v);
  r.h_sample = sample_bernoulli(r.h_probs, rng);
  r.v_probs = prob_v_given_h(p, r.h_sample);
  r.v_next = sample_bernoulli(r.v_probs, rng);
  return r;
}

double log_partition_function_exact(const RbmParams& p) {
  check_dims(p);
  require_enumerable(p);
  const size_t nv = p.n_visible();
  std::vector<double> v(nv);
  std::vector<double> neg_f;
  neg_f.reserve(size_t(1) << nv);
  for (uint32_t code = 0; code < (1u << nv); ++code) {
    index_to_bits(code, v);
    neg_f.push_back(-free_energy(p, v));
  }
  return log_sum_exp(neg_f);
}

double partition_function_exact(const RbmParams& p) {
  return std::exp(log_partition_function_exact(p));
}

double joint_prob_exact(const RbmParams& p, std::span<const double> v,
                        std::span<const double> h) {
  require_enumerable(p);
  return std::exp(-energy(p, v, h) - log_partition_function_exact(p));
}

double nll_exact(const RbmParams& p, const std::vector<std::vector<double>>& data) {
  if (data.empty()) throw input_error("rbm: empty dataset");
  const double log_q = log_partition_function_exact(p);
  double acc = 0.0;
  for (const auto& v : data) acc += free_energy(p, v);
  return acc / static_cast<double>(data.size()) + log_q;
}

RbmGradient exact_gradient(const RbmParams& p,
                           const std::vector<std::vector<double>>& data) {
  if (data.empty()) throw input_error("rbm: empty dataset");
  check_dims(p);
  require_enumerable(p);
  const size_t nv = p.n_visible();
  const size_t nh = p.n_hidden();

  RbmGradient g;
  g.dw = Matrix(nh, nv);
  g.db.assign(nv, 0.0);
  g.dc.assign(nh, 0.0);

  // Data phase: expectations of (h v^T, v, h) under the data with h
  // marginalized analytically.
  const double inv_m = 1.0 / static_cast<double>(data.size());
  for (const auto& v : data) {
    check_visible(p, v);
    const auto ph = prob_h_given_v(p, v);
    for (size_t k = 0; k < nh; ++k)
      kernels::axpy(-inv_m * ph[k], v.data(), g.dw.row(k), nv);
    kernels::axpy(-inv_m, v.data(), g.db.data(), nv);
    kernels::axpy(-inv_m, ph.data(), g.dc.data(), nh);
  }

  // Model phase: enumerate visibles, weight by exp(-F(v))/Q.
  const double log_q = log_partition_function_exact(p);
  std::vector<double> v(nv);
  for (uint32_t code = 0; code < (1u << nv); ++code) {
    index_to_bits(code, v);
    const double w = std::exp(-free_energy(p, v) - log_q);
    const auto ph = prob_h_given_v(p, v);
    for (size_t k = 0; k < nh; ++k)
      kernels::axpy(w * ph[k], v.data(), g.dw.row(k), nv);
    kernels::axpy(w, v.data(), g.db.data(), nv);
    kernels::axpy(w, ph.data(), g.dc.data(), nh);
  }
  return g;
}

RbmGradient cd_gradient(const RbmParams& p,
                        const std::vector<std::vector<double>>& batch,
                        uint32_t cd_steps, Rng& rng, double* recon_error) {
  if (batch.empty()) throw input_error("rbm: empty batch");
  if (cd_steps == 0) throw input_error("rbm: cd_steps must be positive");
  check_dims(p);
  const size_t nv = p.n_visible();
  const size_t nh = p.n_hidden();

  RbmGradient g;
  g.dw = Matrix(nh, nv);
  g.db.assign(nv, 0.0);
  g.dc.assign(nh, 0.0);

  const double inv_m = 1.0 / static_cast<double>(batch.size());
  double err_acc = 0.0;
  for (const auto& v0 : batch) {
    check_visible(p, v0);
    const auto ph0 = prob_h_given_v(p, v0);

    // Negative chain: binary hidden samples, soft visible reconstructions.
    std::vector<double> vk(v0.begin(), v0.end());
    std::vector<double> ph = ph0;
    for (uint32_t s = 0; s < cd_steps; ++s) {
      const auto hs = sample_bernoulli(ph, rng);
      vk = prob_v_given_h(p, hs);
      ph = prob_h_given_v(p, vk);
    }

    for (size_t k = 0; k < nh; ++k) {
      kernels::axpy(inv_m * ph0[k], v0.data(), g.dw.row(k), nv);
      kernels::axpy(-inv_m * ph[k], vk.data(), g.dw.row(k), nv);
    }
    kernels::axpy(inv_m, v0.data(), g.db.data(), nv);
    kernels::axpy(-inv_m, vk.data(), g.db.data(), nv);
    kernels::axpy(inv_m, ph0.data(), g.dc.data(), nh);
    kernels::axpy(-inv_m, ph.data(), g.dc.data(), nh);

    for (size_t j = 0; j < nv; ++j) {
      const double d = v0[j] - vk[j];
      err_acc += d * d;
    }
  }
  if (recon_error)
    *recon_error = err_acc / (static_cast<double>(batch.size()) * nv);
  return g;
}

CdState make_cd_state(const RbmParams& p) {
  CdState s;
  s.vel_w = Matrix(p.n_hidden(), p.n_visible());
  s.vel_b.assign(p.n_visible(), 0.0);
  s.vel_c.assign(p.n_hidden(), 0.0);
  return s;
}

double cd_update(RbmParams& p, const std::vector<std::vector<double>>& batch,
                 const TrainConfig& cfg, Rng& rng, CdState& state) {
  if (cfg.learning_rate < 0 || cfg.momentum < 0 || cfg.momentum >= 1 ||
      cfg.weight_decay < 0)
    throw config_error("rbm: invalid training hyperparameters");
  if (state.vel_w.d.size() != p.w.d.size())
    throw input_error("rbm: momentum state does not match model");
  double err = 0.0;
  const auto g = cd_gradient(p, batch, cfg.cd_steps, rng, &err);
  const size_t n = p.w.d.size();
  for (size_t i = 0; i < n; ++i) {
    state.vel_w.d[i] = cfg.momentum * state.vel_w.d[i] +
                       cfg.learning_rate * (g.dw.d[i] - cfg.weight_decay * p.w.d[i]);
    p.w.d[i] += state.vel_w.d[i];
  }
  for (size_t j = 0; j < p.b.size(); ++j) {
    state.vel_b[j] = cfg.momentum * state.vel_b[j] + cfg.learning_rate * g.db[j];
    p.b[j] += state.vel_b[j];
  }
  for (size_t k = 0; k < p.c.size(); ++k) {
    state.vel_c[k] = cfg.momentum * state.vel_c[k] + cfg.learning_rate * g.dc[k];
    p.c[k] += state.vel_c[k];
  }
  return err;
}

TrainReport train_rbm(RbmParams& p, const std::vector<std::vector<double>>& data,
                      const TrainConfig& cfg, Rng& rng) {
  if (data.empty()) throw input_error("rbm: empty dataset");
  if (cfg.batch_size == 0 || cfg.epochs == 0)
    throw config_error("rbm: batch size and epochs must be positive");
  check_dims(p);

  auto state = make_cd_state(p);
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});

  TrainReport report;
  report.epoch_recon_error.reserve(cfg.epochs);
  std::vector<std::vector<double>> batch;
  for (uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double err_sum = 0.0;
    size_t batches = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t stop = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (size_t i = start; i < stop; ++i) batch.push_back(data[order[i]]);
      err_sum += cd_update(p, batch, cfg, rng, state);
      ++batches;
    }
    report.epoch_recon_error.push_back(err_sum / static_cast<double>(batches));
  }
  return report;
}

namespace {

constexpr char kMagic[4] = {'R', 'B', 'M', '1'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw input_error("rbm file: truncated");
  return v;
}

}  // namespace

void write_rbm(std::ostream& os, const RbmParams& p) {
  check_dims(p);
  os.write(kMagic, 4);
  put<uint32_t>(os, static_cast<uint32_t>(p.n_visible()));
  put<uint32_t>(os, static_cast<uint32_t>(p.n_hidden()));
  os.write(reinterpret_cast<const char*>(p.w.d.data()),
           static_cast<std::streamsize>(p.w.d.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(p.b.data()),
           static_cast<std::streamsize>(p.b.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(p.c.data()),
           static_cast<std::streamsize>(p.c.size() * sizeof(double)));
}

RbmParams read_rbm(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw input_error("rbm file: bad magic");
  const auto nv = get<uint32_t>(is);
  const auto nh = get<uint32_t>(is);
  if (nv == 0 || nh == 0 || size_t(nv) * nh > (size_t(1) << 30))
    throw input_error("rbm file: implausible dimensions");
  RbmParams p;
  p.w = Matrix(nh, nv);
  p.b.resize(nv);
  p.c.resize(nh);
  is.read(reinterpret_cast<char*>(p.w.d.data()),
          static_cast<std::streamsize>(p.w.d.size() * sizeof(double)));
  is.read(reinterpret_cast<char*>(p.b.data()),
          static_cast<std::streamsize>(p.b.size() * sizeof(double)));
  is.read(reinterpret_cast<char*>(p.c.data()),
          static_cast<std::streamsize>(p.c.size() * sizeof(double)));
  if (!is) throw input_error("rbm file: truncated");
  return p;
}

void save_rbm(const RbmParams& p, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw input_error("cannot open for write: " + path);
  write_rbm(os, p);
  if (!os) throw input_error("short write: " + path);
}

RbmParams load_rbm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw input_error("cannot open: " + path);
  return read_rbm(is);
}

}  // namespace uwdbn
