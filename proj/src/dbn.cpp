#include "uwdbn/dbn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "uwdbn/kernels.hpp"

namespace uwdbn {

std::vector<size_t> DbnModel::layer_sizes() const {
  std::vector<size_t> s;
  if (layers.empty()) return s;
  s.push_back(layers.front().n_visible());
  for (const auto& l : layers) s.push_back(l.n_hidden());
  return s;
}

size_t DbnModel::input_dim() const {
  return layers.empty() ? 0 : layers.front().n_visible();
}

size_t DbnModel::top_dim() const {
  return layers.empty() ? 0 : layers.back().n_hidden();
}

void DbnModel::validate() const {
  if (layers.empty()) throw input_error("dbn: at least one layer required");
  for (size_t k = 0; k + 1 < layers.size(); ++k)
    if (layers[k].n_hidden() != layers[k + 1].n_visible())
      throw input_error("dbn: adjacent layer dimensions do not chain");
}

DbnModel train_greedy(std::span<const size_t> layer_sizes,
                      const std::vector<std::vector<double>>& data,
                      const TrainConfig& cfg, GreedyReport* report) {
  if (layer_sizes.size() < 2)
    throw input_error("dbn: need at least [visible, hidden] sizes");
  for (size_t s : layer_sizes)
    if (s == 0) throw input_error("dbn: zero layer size");
  if (data.empty()) throw input_error("dbn: empty dataset");
  if (data.front().size() != layer_sizes[0])
    throw input_error("dbn: data dimension does not match first layer");

  DbnModel m;
  std::vector<std::vector<double>> acts = data;
  for (size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
    Rng rng = Rng::derive(cfg.seed, k);
    RbmParams p = init_rbm(layer_sizes[k], layer_sizes[k + 1], rng);
    init_visible_bias_from_data(p, acts);
    // epochs == 0 means "stack the initialized layers untrained"; useful as
    // the chance-level baseline in structure searches.
    TrainReport r;
    if (cfg.epochs > 0) r = train_rbm(p, acts, cfg, rng);
    if (report) report->per_layer.push_back(std::move(r));
    if (k + 2 < layer_sizes.size())
      for (auto& a : acts) a = prob_h_given_v(p, a);
    m.layers.push_back(std::move(p));
  }
  m.validate();
  return m;
}

std::vector<std::vector<double>> upward_pass(const DbnModel& m,
                                             std::span<const double> v) {
  m.validate();
  if (v.size() != m.input_dim())
    throw input_error("dbn: input dimension mismatch");
  std::vector<std::vector<double>> acts;
  acts.reserve(m.layers.size() + 1);
  acts.emplace_back(v.begin(), v.end());
  for (const auto& l : m.layers) acts.push_back(prob_h_given_v(l, acts.back()));
  return acts;
}

std::vector<double> downward_pass(const DbnModel& m,
                                  std::span<const double> top) {
  m.validate();
  if (top.size() != m.top_dim())
    throw input_error("dbn: top-layer dimension mismatch");
  std::vector<double> a(top.begin(), top.end());
  for (size_t k = m.layers.size(); k-- > 0;)
    a = prob_v_given_h(m.layers[k], a);
  return a;
}

std::vector<double> compute_relative_activity(
    const DbnModel& m, const std::vector<std::vector<double>>& clean,
    const std::vector<std::vector<double>>& noisy) {
  if (clean.empty() || clean.size() != noisy.size())
    throw input_error("relative activity: need matching non-empty pair sets");
  std::vector<double> scores(m.top_dim(), 0.0);
  for (size_t i = 0; i < clean.size(); ++i) {
    const auto ac = upward_pass(m, clean[i]).back();
    const auto an = upward_pass(m, noisy[i]).back();
    for (size_t k = 0; k < scores.size(); ++k)
      scores[k] += std::abs(an[k] - ac[k]);
  }
  for (auto& s : scores) s /= static_cast<double>(clean.size());
  return scores;
}

DenoiseModel build_denoise_model(DbnModel m, std::span<const double> scores,
                                 double quantile,
                                 const std::vector<std::vector<double>>& clean_corpus,
                                 bool per_node_neutral) {
  m.validate();
  if (scores.size() != m.top_dim())
    throw input_error("denoise: score vector does not match top layer");
  if (!(quantile > 0.0 && quantile <= 1.0))
    throw input_error("denoise: quantile must lie in (0, 1]");

  // Nearest-rank threshold; strictly-above keeps all-equal score sets empty.
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const auto rank = static_cast<size_t>(
      std::ceil(quantile * static_cast<double>(sorted.size())));
  const double thr = sorted[std::min(sorted.size(), std::max<size_t>(rank, 1)) - 1];

  DenoiseModel dm;
  dm.activity_scores.assign(scores.begin(), scores.end());
  for (uint32_t k = 0; k < scores.size(); ++k)
    if (scores[k] > thr) dm.noise_nodes.push_back(k);

  dm.neutral_values.assign(dm.noise_nodes.size(), 0.0);
  if (!dm.noise_nodes.empty()) {
    if (clean_corpus.empty())
      throw input_error("denoise: clean corpus required to set neutral values");
    // Mean activation of each noise node over the clean corpus.
    std::vector<double> means(dm.noise_nodes.size(), 0.0);
    for (const auto& v : clean_corpus) {
      const auto top = upward_pass(m, v).back();
      for (size_t i = 0; i < dm.noise_nodes.size(); ++i)
        means[i] += top[dm.noise_nodes[i]];
    }
    for (auto& x : means) x /= static_cast<double>(clean_corpus.size());
    if (per_node_neutral) {
      dm.neutral_values = means;
    } else {
      const double shared =
          std::accumulate(means.begin(), means.end(), 0.0) /
          static_cast<double>(means.size());
      dm.neutral_values.assign(dm.noise_nodes.size(), shared);
    }
  }
  dm.base = std::move(m);
  return dm;
}

namespace {

// Index and offset of the finest frame (smallest decimation, then most
// levels) in the flattened layout.
struct FinestSlice {
  size_t offset;
  uint32_t pix;
  size_t cols;
};

FinestSlice finest_slice(const DenoiseModel& dm) {
  if (dm.resolutions.empty() || dm.frame_len == 0)
    throw input_error("denoise: model is missing its frame layout");
  size_t best = 0;
  for (size_t i = 1; i < dm.resolutions.size(); ++i) {
    const auto& r = dm.resolutions[i];
    const auto& b = dm.resolutions[best];
    if (r.decim < b.decim || (r.decim == b.decim && r.pix > b.pix)) best = i;
  }
  FinestSlice s{0, dm.resolutions[best].pix, 0};
  for (size_t i = 0; i < best; ++i) {
    const auto& r = dm.resolutions[i];
    s.offset += size_t(r.pix) * ((dm.frame_len + r.decim - 1) / r.decim);
  }
  s.cols = (dm.frame_len + dm.resolutions[best].decim - 1) /
           dm.resolutions[best].decim;
  return s;
}

}  // namespace

std::vector<double> denoise_flat(const DenoiseModel& dm,
                                 std::span<const double> x) {
  auto acts = upward_pass(dm.base, x);
  auto& top = acts.back();
  for (size_t i = 0; i < dm.noise_nodes.size(); ++i)
    top[dm.noise_nodes[i]] = dm.neutral_values[i];
  const auto recon = downward_pass(dm.base, top);

  const auto slice = finest_slice(dm);
  if (slice.offset + size_t(slice.pix) * slice.cols > recon.size())
    throw input_error("denoise: reconstruction shorter than frame layout");
  const auto u = depixelize_soft(
      std::span<const double>(recon.data() + slice.offset,
                              size_t(slice.pix) * slice.cols),
      slice.pix, static_cast<uint32_t>(slice.cols));

  std::vector<double> z(u.size());
  for (size_t i = 0; i < u.size(); ++i) z[i] = 2.0 * u[i] - 1.0;
  return z;
}

std::vector<double> denoise(const DenoiseModel& dm, const FrameSet& fs) {
  return denoise_flat(dm, flatten(fs));
}

ClassifierModel init_classifier(DbnModel m, uint32_t label_arity, Rng& rng) {
  m.validate();
  if (label_arity < 2) throw input_error("classifier: need at least 2 labels");
  ClassifierModel cm;
  cm.label_arity = label_arity;
  cm.head_w = Matrix(label_arity, m.top_dim());
  for (auto& x : cm.head_w.d) x = 0.01 * rng.gaussian();
  cm.head_b.assign(label_arity, 0.0);
  cm.base = std::move(m);
  return cm;
}

namespace {

std::vector<double> head_logits(const ClassifierModel& cm,
                                std::span<const double> top) {
  std::vector<double> logits(cm.label_arity);
  kernels::matvec(cm.head_w.d.data(), cm.head_w.rows, cm.head_w.cols, top.data(), logits.data());
  for (size_t i = 0; i < logits.size(); ++i) logits[i] += cm.head_b[i];
  return logits;
}

std::vector<double> softmax(std::vector<double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (auto& x : logits) {
    x = std::exp(x - m);
    z += x;
  }
  for (auto& x : logits) x /= z;
  return logits;
}

}  // namespace

ClassifyResult classify(const ClassifierModel& cm, std::span<const double> x) {
  const auto acts = upward_pass(cm.base, x);
  ClassifyResult r;
  r.posterior = softmax(head_logits(cm, acts.back()));
  r.label = static_cast<uint32_t>(
      std::max_element(r.posterior.begin(), r.posterior.end()) -
      r.posterior.begin());
  return r;
}

double classifier_loss(const ClassifierModel& cm, std::span<const double> x,
                       uint32_t label) {
  if (label >= cm.label_arity) throw input_error("classifier: label out of range");
  const auto acts = upward_pass(cm.base, x);
  auto logits = head_logits(cm, acts.back());
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  return -(logits[label] - m - std::log(z));
}

StackGradient classifier_gradient(const ClassifierModel& cm,
                                  std::span<const double> x, uint32_t label) {
  if (label >= cm.label_arity) throw input_error("classifier: label out of range");
  const auto acts = upward_pass(cm.base, x);
  const auto& top = acts.back();
  auto p = softmax(head_logits(cm, top));

  StackGradient g;
  g.d_head_w = Matrix(cm.label_arity, cm.base.top_dim());
  g.d_head_b.resize(cm.label_arity);
  std::vector<double> dlogits = std::move(p);
  dlogits[label] -= 1.0;
  for (size_t i = 0; i < dlogits.size(); ++i) {
    g.d_head_b[i] = dlogits[i];
    kernels::axpy(dlogits[i], top.data(), g.d_head_w.row(i), top.size());
  }

  std::vector<double> da(cm.base.top_dim());
  kernels::matvec_t(cm.head_w.d.data(), cm.head_w.rows, cm.head_w.cols, dlogits.data(), da.data());

  const size_t nl = cm.base.layers.size();
  g.d_w.resize(nl);
  g.d_c.resize(nl);
  for (size_t k = nl; k-- > 0;) {
    const auto& layer = cm.base.layers[k];
    const auto& a_out = acts[k + 1];
    const auto& a_in = acts[k];
    std::vector<double> dz(a_out.size());
    for (size_t i = 0; i < dz.size(); ++i)
      dz[i] = da[i] * a_out[i] * (1.0 - a_out[i]);
    g.d_w[k] = Matrix(layer.n_hidden(), layer.n_visible());
    for (size_t i = 0; i < dz.size(); ++i)
      kernels::axpy(dz[i], a_in.data(), g.d_w[k].row(i), a_in.size());
    g.d_c[k] = dz;
    if (k > 0) {
      da.assign(a_in.size(), 0.0);
      kernels::matvec_t(layer.w.d.data(), layer.w.rows, layer.w.cols, dz.data(), da.data());
    }
  }
  return g;
}

double classifier_accuracy(const ClassifierModel& cm, const LabeledSet& data) {
  if (data.inputs.empty()) throw input_error("classifier: empty evaluation set");
  if (data.inputs.size() != data.labels.size())
    throw input_error("classifier: inputs and labels differ in length");
  size_t hits = 0;
  for (size_t i = 0; i < data.inputs.size(); ++i)
    if (classify(cm, data.inputs[i]).label == data.labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(data.inputs.size());
}

void fine_tune_classifier(ClassifierModel& cm, const LabeledSet& train,
                          const LabeledSet& val, const FineTuneConfig& cfg) {
  if (train.inputs.size() != train.labels.size())
    throw input_error("classifier: inputs and labels differ in length");
  if (cfg.learning_rate <= 0 || cfg.batch_size == 0)
    throw config_error("classifier: invalid fine-tune hyperparameters");
  if (cfg.epochs == 0 || train.inputs.empty()) return;
  for (uint32_t y : train.labels)
    if (y >= cm.label_arity) throw input_error("classifier: label out of range");

  Rng rng(cfg.seed);
  std::vector<size_t> order(train.inputs.size());
  std::iota(order.begin(), order.end(), size_t{0});

  const bool has_val = !val.inputs.empty();
  ClassifierModel best = cm;
  double best_acc = has_val ? classifier_accuracy(cm, val) : 0.0;
  uint32_t stale = 0;

  for (uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t stop = std::min(order.size(), start + cfg.batch_size);
      const double scale = -cfg.learning_rate / static_cast<double>(stop - start);
      for (size_t i = start; i < stop; ++i) {
        const auto g = classifier_gradient(cm, train.inputs[order[i]],
                                           train.labels[order[i]]);
        kernels::axpy(scale, g.d_head_w.d.data(), cm.head_w.d.data(),
                      cm.head_w.d.size());
        kernels::axpy(scale, g.d_head_b.data(), cm.head_b.data(),
                      cm.head_b.size());
        for (size_t k = 0; k < cm.base.layers.size(); ++k) {
          kernels::axpy(scale, g.d_w[k].d.data(), cm.base.layers[k].w.d.data(),
                        g.d_w[k].d.size());
          kernels::axpy(scale, g.d_c[k].data(), cm.base.layers[k].c.data(),
                        g.d_c[k].size());
        }
      }
    }
    if (has_val) {
      const double acc = classifier_accuracy(cm, val);
      if (acc > best_acc) {
        best_acc = acc;
        best = cm;
        stale = 0;
      } else if (++stale >= cfg.patience) {
        break;
      }
    }
  }
  if (has_val) {
    cm = std::move(best);
    cm.val_accuracy = best_acc;
  }
}

namespace {

constexpr char kStackMagic[4] = {'D', 'B', 'N', '1'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw input_error("model file: truncated");
  return v;
}

void write_container(std::ostream& os, const DbnModel& m,
                     const nlohmann::json& meta) {
  os.write(kStackMagic, 4);
  put<uint32_t>(os, static_cast<uint32_t>(m.layers.size()));
  for (const auto& l : m.layers) write_rbm(os, l);
  const std::string j = meta.dump();
  put<uint64_t>(os, j.size());
  os.write(j.data(), static_cast<std::streamsize>(j.size()));
}

DbnModel read_container(std::istream& is, nlohmann::json& meta) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kStackMagic, 4) != 0)
    throw input_error("model file: bad magic");
  const auto n = get<uint32_t>(is);
  if (n == 0 || n > 64) throw input_error("model file: implausible layer count");
  DbnModel m;
  for (uint32_t i = 0; i < n; ++i) m.layers.push_back(read_rbm(is));
  const auto jlen = get<uint64_t>(is);
  if (jlen > (1u << 26)) throw input_error("model file: implausible metadata");
  std::string j(jlen, '\0');
  is.read(j.data(), static_cast<std::streamsize>(jlen));
  if (!is) throw input_error("model file: truncated");
  try {
    meta = nlohmann::json::parse(j);
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("model file: bad metadata: ") + e.what());
  }
  m.validate();
  return m;
}

nlohmann::json sizes_json(const DbnModel& m) {
  auto sizes = m.layer_sizes();
  return nlohmann::json(sizes);
}

}  // namespace

void save_denoise_model(const DenoiseModel& dm, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw input_error("cannot open for write: " + path);
  nlohmann::json meta;
  meta["kind"] = "denoise";
  meta["layer_sizes"] = sizes_json(dm.base);
  meta["noise_nodes"] = dm.noise_nodes;
  meta["neutral_values"] = dm.neutral_values;
  meta["activity_scores"] = dm.activity_scores;
  nlohmann::json res = nlohmann::json::array();
  for (const auto& r : dm.resolutions) res.push_back({r.pix, r.decim});
  meta["resolutions"] = res;
  meta["frame_len"] = dm.frame_len;
  meta["config_hash"] = dm.config_hash;
  meta["seed"] = dm.seed;
  write_container(os, dm.base, meta);
  if (!os) throw input_error("short write: " + path);
}

DenoiseModel load_denoise_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw input_error("cannot open: " + path);
  nlohmann::json meta;
  DenoiseModel dm;
  dm.base = read_container(is, meta);
  try {
    if (meta.at("kind") != "denoise")
      throw input_error("model file: not a de-noising model");
    dm.noise_nodes = meta.at("noise_nodes").get<std::vector<uint32_t>>();
    dm.neutral_values = meta.at("neutral_values").get<std::vector<double>>();
    dm.activity_scores = meta.at("activity_scores").get<std::vector<double>>();
    for (const auto& r : meta.at("resolutions"))
      dm.resolutions.push_back({r.at(0).get<uint32_t>(), r.at(1).get<uint32_t>()});
    dm.frame_len = meta.at("frame_len").get<size_t>();
    dm.config_hash = meta.value("config_hash", uint64_t{0});
    dm.seed = meta.value("seed", uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("model file: bad metadata: ") + e.what());
  }
  if (dm.noise_nodes.size() != dm.neutral_values.size())
    throw input_error("model file: noise nodes and neutral values mismatch");
  for (uint32_t k : dm.noise_nodes)
    if (k >= dm.base.top_dim())
      throw input_error("model file: noise node out of range");
  return dm;
}

void save_classifier_model(const ClassifierModel& cm, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw input_error("cannot open for write: " + path);
  nlohmann::json meta;
  meta["kind"] = "classifier";
  meta["layer_sizes"] = sizes_json(cm.base);
  meta["label_arity"] = cm.label_arity;
  meta["head_w"] = cm.head_w.d;
  meta["head_b"] = cm.head_b;
  meta["val_accuracy"] = cm.val_accuracy;
  meta["config_hash"] = cm.config_hash;
  meta["seed"] = cm.seed;
  write_container(os, cm.base, meta);
  if (!os) throw input_error("short write: " + path);
}

ClassifierModel load_classifier_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw input_error("cannot open: " + path);
  nlohmann::json meta;
  ClassifierModel cm;
  cm.base = read_container(is, meta);
  try {
    if (meta.at("kind") != "classifier")
      throw input_error("model file: not a classifier model");
    cm.label_arity = meta.at("label_arity").get<uint32_t>();
    cm.head_w = Matrix(cm.label_arity, cm.base.top_dim());
    const auto w = meta.at("head_w").get<std::vector<double>>();
    if (w.size() != cm.head_w.d.size())
      throw input_error("model file: head weight size mismatch");
    cm.head_w.d = w;
    cm.head_b = meta.at("head_b").get<std::vector<double>>();
    if (cm.head_b.size() != cm.label_arity)
      throw input_error("model file: head bias size mismatch");
    cm.val_accuracy = meta.value("val_accuracy", 0.0);
    cm.config_hash = meta.value("config_hash", uint64_t{0});
    cm.seed = meta.value("seed", uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("model file: bad metadata: ") + e.what());
  }
  return cm;
}

}  // namespace uwdbn
