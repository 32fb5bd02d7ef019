#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <vector>

#include "uwdbn/rbm.hpp"

using namespace uwdbn;

namespace {

std::vector<std::vector<double>> all_configs(size_t n) {
  std::vector<std::vector<double>> out;
  out.reserve(size_t(1) << n);
  for (uint32_t code = 0; code < (1u << n); ++code) {
    std::vector<double> v(n);
    for (size_t i = 0; i < n; ++i) v[i] = (code >> i) & 1u;
    out.push_back(std::move(v));
  }
  return out;
}

RbmParams random_model(size_t nv, size_t nh, Rng& rng, double scale = 0.5) {
  RbmParams p;
  p.w = Matrix(nh, nv);
  for (auto& x : p.w.d) x = scale * rng.gaussian();
  p.b.resize(nv);
  p.c.resize(nh);
  for (auto& x : p.b) x = scale * rng.gaussian();
  for (auto& x : p.c) x = scale * rng.gaussian();
  return p;
}

// Brute-force partition sum straight off the energy, independent of
// free_energy / log-sum-exp plumbing.
double brute_q(const RbmParams& p) {
  double q = 0.0;
  for (const auto& v : all_configs(p.n_visible()))
    for (const auto& h : all_configs(p.n_hidden()))
      q += std::exp(-energy(p, v, h));
  return q;
}

double dot_all(const RbmGradient& g, const RbmGradient& o) {
  double acc = 0.0;
  for (size_t i = 0; i < g.dw.d.size(); ++i) acc += g.dw.d[i] * o.dw.d[i];
  for (size_t i = 0; i < g.db.size(); ++i) acc += g.db[i] * o.db[i];
  for (size_t i = 0; i < g.dc.size(); ++i) acc += g.dc[i] * o.dc[i];
  return acc;
}

double norm_all(const RbmGradient& g) { return std::sqrt(dot_all(g, g)); }

}  // namespace

TEST_CASE("energy: zero parameters give zero energy") {
  Rng rng(1);
  auto p = random_model(3, 2, rng, 0.0);
  std::vector<double> v{1, 0, 1}, h{1, 1};
  CHECK(energy(p, v, h) == 0.0);
}

TEST_CASE("energy: hand-evaluated 2x1 example") {
  RbmParams p;
  p.w = Matrix(1, 2);
  p.w.d = {0.5, -0.2};
  p.b = {0.1, 0.3};
  p.c = {-0.4};
  std::vector<double> v{1, 0}, h{1};
  CHECK(energy(p, v, h) == doctest::Approx(-0.2).epsilon(1e-12));
}

TEST_CASE("energy: zero visible vector leaves only the hidden bias term") {
  Rng rng(2);
  auto p = random_model(4, 3, rng);
  std::vector<double> v(4, 0.0), h{1, 0, 1};
  double expect = -(p.c[0] + p.c[2]);
  CHECK(energy(p, v, h) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("energy: dimension mismatch throws") {
  Rng rng(3);
  auto p = random_model(3, 2, rng);
  std::vector<double> v{1, 0}, h{1, 0};
  CHECK_THROWS_AS(energy(p, v, h), input_error);
}

TEST_CASE("free_energy: zero model with three hidden units") {
  Rng rng(4);
  auto p = random_model(2, 3, rng, 0.0);
  std::vector<double> v{0, 0};
  CHECK(free_energy(p, v) == doctest::Approx(-3.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("free_energy: exp(-F)/Q equals the visible marginal") {
  Rng rng(5);
  for (int trial = 0; trial < 8; ++trial) {
    auto p = random_model(3, 2, rng);
    const double q = partition_function_exact(p);
    for (const auto& v : all_configs(3)) {
      double marg = 0.0;
      for (const auto& h : all_configs(2)) marg += joint_prob_exact(p, v, h);
      CHECK(std::exp(-free_energy(p, v)) / q == doctest::Approx(marg).epsilon(1e-9));
    }
  }
}

TEST_CASE("free_energy: huge hidden bias stays finite") {
  RbmParams p;
  p.w = Matrix(1, 2);
  p.w.d = {0.0, 0.0};
  p.b = {0.0, 0.0};
  p.c = {1000.0};
  std::vector<double> v{1, 1};
  const double f = free_energy(p, v);
  CHECK(std::isfinite(f));
  CHECK(f == doctest::Approx(-1000.0).epsilon(1e-9));
}

TEST_CASE("conditionals: zero weights and biases give probability one half") {
  Rng rng(6);
  auto p = random_model(4, 3, rng, 0.0);
  std::vector<double> v{1, 0, 1, 0};
  for (double q : prob_h_given_v(p, v)) CHECK(q == 0.5);
  std::vector<double> h{0, 1, 1};
  for (double q : prob_v_given_h(p, h)) CHECK(q == 0.5);
}

TEST_CASE("conditionals: saturated bias pins the probability at one") {
  RbmParams p;
  p.w = Matrix(1, 2);
  p.w.d = {0.0, 0.0};
  p.b = {0.0, 0.0};
  p.c = {50.0};
  std::vector<double> v{0, 1};
  CHECK(prob_h_given_v(p, v)[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("conditionals: factorized P(h|v) matches the enumerated joint") {
  Rng rng(7);
  for (int trial = 0; trial < 6; ++trial) {
    auto p = random_model(3, 2, rng);
    for (const auto& v : all_configs(3)) {
      const auto ph = prob_h_given_v(p, v);
      double pv = 0.0;
      for (const auto& h : all_configs(2)) pv += joint_prob_exact(p, v, h);
      for (const auto& h : all_configs(2)) {
        double factored = 1.0;
        for (size_t k = 0; k < h.size(); ++k)
          factored *= h[k] > 0.5 ? ph[k] : 1.0 - ph[k];
        const double cond = joint_prob_exact(p, v, h) / pv;
        CHECK(factored == doctest::Approx(cond).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("conditionals: factorized P(v|h) matches the enumerated joint") {
  Rng rng(8);
  auto p = random_model(3, 2, rng);
  for (const auto& h : all_configs(2)) {
    const auto pv = prob_v_given_h(p, h);
    double ph_marg = 0.0;
    for (const auto& v : all_configs(3)) ph_marg += joint_prob_exact(p, v, h);
    for (const auto& v : all_configs(3)) {
      double factored = 1.0;
      for (size_t j = 0; j < v.size(); ++j)
        factored *= v[j] > 0.5 ? pv[j] : 1.0 - pv[j];
      const double cond = joint_prob_exact(p, v, h) / ph_marg;
      CHECK(factored == doctest::Approx(cond).epsilon(1e-9));
    }
  }
}

TEST_CASE("gibbs_step: saturated model reproduces its probabilities exactly") {
  RbmParams p;
  p.w = Matrix(2, 2);
  p.w.d = {0, 0, 0, 0};
  p.b = {40.0, -40.0};
  p.c = {40.0, -40.0};
  Rng rng(9);
  std::vector<double> v{1, 0};
  for (int i = 0; i < 20; ++i) {
    auto r = gibbs_step(p, v, rng);
    CHECK(r.h_sample[0] == 1.0);
    CHECK(r.h_sample[1] == 0.0);
    CHECK(r.v_next[0] == 1.0);
    CHECK(r.v_next[1] == 0.0);
  }
}

TEST_CASE("gibbs_step: fixed seed reproduces the chain") {
  Rng rng_model(10);
  auto p = random_model(4, 3, rng_model);
  std::vector<double> v0{1, 0, 1, 1};
  for (int rep = 0; rep < 2; ++rep) {
    Rng a(11), b(11);
    auto va = v0, vb = v0;
    for (int i = 0; i < 50; ++i) {
      va = gibbs_step(p, va, a).v_next;
      vb = gibbs_step(p, vb, b).v_next;
      REQUIRE(va == vb);
    }
  }
}

TEST_CASE("gibbs_step: long chain matches the exact visible marginal") {
  Rng rng_model(12);
  auto p = random_model(3, 2, rng_model, 0.4);
  const double q = partition_function_exact(p);
  std::vector<double> exact(8);
  auto configs = all_configs(3);
  for (size_t i = 0; i < configs.size(); ++i)
    exact[i] = std::exp(-free_energy(p, configs[i])) / q;

  Rng rng(13);
  std::vector<double> v{0, 0, 0};
  std::vector<double> counts(8, 0.0);
  const int burn = 10000, keep = 1000000;
  for (int i = 0; i < burn; ++i) v = gibbs_step(p, v, rng).v_next;
  for (int i = 0; i < keep; ++i) {
    v = gibbs_step(p, v, rng).v_next;
    size_t code = 0;
    for (size_t j = 0; j < 3; ++j) code |= (v[j] > 0.5 ? 1u : 0u) << j;
    counts[code] += 1.0;
  }
  double tv = 0.0;
  for (size_t i = 0; i < 8; ++i) tv += std::abs(counts[i] / keep - exact[i]);
  CHECK(tv / 2.0 < 0.02);
}

TEST_CASE("partition function: zero-parameter 2x1 model is uniform over 8 states") {
  Rng rng(14);
  auto p = random_model(2, 1, rng, 0.0);
  CHECK(partition_function_exact(p) == doctest::Approx(8.0).epsilon(1e-12));
  for (const auto& v : all_configs(2))
    for (const auto& h : all_configs(1))
      CHECK(joint_prob_exact(p, v, h) == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("partition function: matches the direct energy sum") {
  RbmParams p;
  p.w = Matrix(1, 2);
  p.w.d = {0.5, -0.2};
  p.b = {0.1, 0.3};
  p.c = {-0.4};
  CHECK(partition_function_exact(p) == doctest::Approx(brute_q(p)).epsilon(1e-12));
}

TEST_CASE("partition function: joint probabilities sum to one") {
  Rng rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = random_model(2 + trial % 3, 1 + trial % 3, rng);
    double total = 0.0;
    for (const auto& v : all_configs(p.n_visible()))
      for (const auto& h : all_configs(p.n_hidden()))
        total += joint_prob_exact(p, v, h);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("partition function: oversized model raises a capability error") {
  Rng rng(16);
  auto p = random_model(12, 9, rng, 0.01);
  CHECK_THROWS_AS(partition_function_exact(p), capability_error);
  CHECK_THROWS_AS(nll_exact(p, {std::vector<double>(12, 0.0)}), capability_error);
}

TEST_CASE("nll_exact: zero-parameter model yields log 4 on any 2-visible data") {
  Rng rng(17);
  auto p = random_model(2, 1, rng, 0.0);
  std::vector<std::vector<double>> data{{0, 0}, {1, 1}, {1, 0}};
  CHECK(nll_exact(p, data) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("nll_exact: equals brute-force mean negative log marginal") {
  Rng rng(18);
  auto p = random_model(3, 2, rng);
  std::vector<std::vector<double>> data{{1, 0, 1}, {0, 0, 1}, {1, 1, 1}, {0, 0, 0}};
  double acc = 0.0;
  for (const auto& v : data) {
    double marg = 0.0;
    for (const auto& h : all_configs(2)) marg += joint_prob_exact(p, v, h);
    acc -= std::log(marg);
  }
  CHECK(nll_exact(p, data) == doctest::Approx(acc / data.size()).epsilon(1e-10));
}

TEST_CASE("nll_exact: decreases along the exact gradient") {
  Rng rng(19);
  auto p = random_model(3, 2, rng, 0.3);
  std::vector<std::vector<double>> data{{1, 0, 1}, {1, 0, 0}, {0, 1, 1}, {1, 0, 1}};
  double prev = nll_exact(p, data);
  const double lr = 0.05;
  for (int it = 0; it < 50; ++it) {
    auto g = exact_gradient(p, data);
    for (size_t i = 0; i < p.w.d.size(); ++i) p.w.d[i] -= lr * g.dw.d[i];
    for (size_t j = 0; j < p.b.size(); ++j) p.b[j] -= lr * g.db[j];
    for (size_t k = 0; k < p.c.size(); ++k) p.c[k] -= lr * g.dc[k];
    const double now = nll_exact(p, data);
    CHECK(now <= prev + 1e-10);
    prev = now;
  }
}

TEST_CASE("exact_gradient: uniform data on a zero model is a stationary point") {
  Rng rng(20);
  auto p = random_model(3, 2, rng, 0.0);
  auto g = exact_gradient(p, all_configs(3));
  for (double x : g.dw.d) CHECK(std::abs(x) < 1e-10);
  for (double x : g.db) CHECK(std::abs(x) < 1e-10);
  for (double x : g.dc) CHECK(std::abs(x) < 1e-10);
}

TEST_CASE("exact_gradient: shapes follow the parameter blocks") {
  Rng rng(21);
  auto p = random_model(4, 3, rng);
  auto g = exact_gradient(p, {{1, 0, 0, 1}});
  CHECK(g.dw.rows == 3);
  CHECK(g.dw.cols == 4);
  CHECK(g.db.size() == 4);
  CHECK(g.dc.size() == 3);
}

TEST_CASE("exact_gradient: agrees with central finite differences") {
  Rng rng(22);
  const double step = 1e-5;
  for (auto [nv, nh] : {std::pair<size_t, size_t>{3, 2}, {4, 3}}) {
    auto p = random_model(nv, nh, rng);
    std::vector<std::vector<double>> data;
    for (int i = 0; i < 5; ++i) {
      std::vector<double> v(nv);
      for (auto& x : v) x = rng.uniform() < 0.5 ? 0.0 : 1.0;
      data.push_back(std::move(v));
    }
    const auto g = exact_gradient(p, data);
    auto check_one = [&](double& slot, double analytic) {
      const double keep = slot;
      slot = keep + step;
      const double hi = nll_exact(p, data);
      slot = keep - step;
      const double lo = nll_exact(p, data);
      slot = keep;
      const double fd = (hi - lo) / (2.0 * step);
      CHECK(std::abs(fd - analytic) <= 1e-6 * std::max(1.0, std::abs(analytic)));
    };
    for (size_t i = 0; i < p.w.d.size(); ++i) check_one(p.w.d[i], g.dw.d[i]);
    for (size_t j = 0; j < p.b.size(); ++j) check_one(p.b[j], g.db[j]);
    for (size_t k = 0; k < p.c.size(); ++k) check_one(p.c[k], g.dc[k]);
  }
}

TEST_CASE("cd_update: zero learning rate leaves parameters bit-identical") {
  Rng rng(23);
  auto p = random_model(5, 3, rng);
  auto copy = p;
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.0;
  auto state = make_cd_state(p);
  Rng train_rng(24);
  cd_update(p, {{1, 0, 1, 0, 1}, {0, 0, 1, 1, 0}}, cfg, train_rng, state);
  CHECK(p.w.d == copy.w.d);
  CHECK(p.b == copy.b);
  CHECK(p.c == copy.c);
}

TEST_CASE("cd_gradient: long-chain estimate points along the exact descent direction") {
  // The CD estimate approximates the likelihood-ascent direction, i.e. the
  // negated NLL gradient. Averaged over models, k=500 should land well
  // inside a 15 degree cone.
  Rng rng(25);
  double angle_sum = 0.0;
  const int models = 10;
  for (int m = 0; m < models; ++m) {
    auto p = random_model(3, 2, rng, 0.4);
    std::vector<std::vector<double>> base;
    for (int i = 0; i < 6; ++i) {
      std::vector<double> v(3);
      for (auto& x : v) x = rng.uniform() < 0.5 ? 0.0 : 1.0;
      base.push_back(std::move(v));
    }
    std::vector<std::vector<double>> batch;
    for (int rep = 0; rep < 40; ++rep)
      for (const auto& v : base) batch.push_back(v);

    auto exact = exact_gradient(p, base);
    // flip sign: cd estimates ascent
    for (auto& x : exact.dw.d) x = -x;
    for (auto& x : exact.db) x = -x;
    for (auto& x : exact.dc) x = -x;

    Rng chain(100 + m);
    auto cd = cd_gradient(p, batch, 500, chain, nullptr);
    const double cosang =
        dot_all(cd, exact) / (norm_all(cd) * norm_all(exact));
    angle_sum += std::acos(std::min(1.0, std::max(-1.0, cosang)));
  }
  const double mean_deg = angle_sum / models * 180.0 / std::numbers::pi;
  CHECK(mean_deg < 15.0);
}

TEST_CASE("train_rbm: memorizes four repeated patterns") {
  Rng pat_rng(26);
  std::vector<std::vector<double>> patterns;
  for (int i = 0; i < 4; ++i) {
    std::vector<double> v(16);
    for (auto& x : v) x = pat_rng.uniform() < 0.5 ? 0.0 : 1.0;
    patterns.push_back(std::move(v));
  }
  std::vector<std::vector<double>> data;
  for (int rep = 0; rep < 8; ++rep)
    for (const auto& v : patterns) data.push_back(v);

  for (uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed);
    auto p = init_rbm(16, 8, rng);
    init_visible_bias_from_data(p, data);
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.batch_size = 8;
    auto rep = train_rbm(p, data, cfg, rng);
    REQUIRE(rep.epoch_recon_error.size() == 200);
    CHECK(rep.epoch_recon_error.back() < 0.05);
  }
}

TEST_CASE("train_rbm: fixed seed reproduces parameters bit for bit") {
  std::vector<std::vector<double>> data{{1, 0, 1, 0}, {0, 1, 0, 1}, {1, 1, 0, 0}};
  TrainConfig cfg;
  cfg.epochs = 20;
  Rng a(31), b(31);
  auto pa = init_rbm(4, 3, a);
  auto pb = init_rbm(4, 3, b);
  train_rbm(pa, data, cfg, a);
  train_rbm(pb, data, cfg, b);
  CHECK(pa.w.d == pb.w.d);
  CHECK(pa.b == pb.b);
  CHECK(pa.c == pb.c);
}

TEST_CASE("serialization: round trip is bit exact") {
  Rng rng(32);
  auto p = random_model(7, 5, rng);
  std::stringstream ss;
  write_rbm(ss, p);
  auto q = read_rbm(ss);
  CHECK(p.w.d == q.w.d);
  CHECK(p.b == q.b);
  CHECK(p.c == q.c);
}

TEST_CASE("serialization: bad magic and truncation are rejected") {
  std::stringstream bad("XXXX????");
  CHECK_THROWS_AS(read_rbm(bad), input_error);
  Rng rng(33);
  auto p = random_model(4, 2, rng);
  std::stringstream ss;
  write_rbm(ss, p);
  std::string blob = ss.str();
  std::stringstream cut(blob.substr(0, blob.size() / 2));
  CHECK_THROWS_AS(read_rbm(cut), input_error);
}
