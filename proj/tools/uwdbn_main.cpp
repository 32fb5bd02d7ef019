// Command-line front end: dataset generation, model training, single-shot
// receive, BER sweeps, and the classifier structure search. Exit codes:
// 0 success, 2 usage/configuration problems, 1 runtime failures.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "uwdbn/harness.hpp"
#include "uwdbn/kernels.hpp"

namespace {

using namespace uwdbn;

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw input_error("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ExperimentConfig load_config(const std::string& path,
                             std::optional<uint64_t> seed,
                             std::optional<uint32_t> threads) {
  ExperimentConfig cfg = path.empty()
                             ? default_experiment(ExperimentKind::awgn_denoise)
                             : experiment_from_json(read_text(path));
  if (seed) cfg.master_seed = *seed;
  if (threads) cfg.threads = *threads;
  cfg.validate();
  return cfg;
}

void apply_kernel_choice(const std::string& name) {
  if (name.empty()) return;
  if (name == "scalar") {
    kernels::force_backend(kernels::Backend::scalar);
  } else if (name == "avx2") {
    kernels::force_backend(kernels::Backend::avx2);
  } else {
    throw config_error("unknown kernel backend: " + name);
  }
}

std::string bits_to_hex(const BitSequence& bits) {
  std::string out;
  out.reserve((bits.size() + 3) / 4);
  for (size_t i = 0; i < bits.size(); i += 4) {
    unsigned v = 0;
    for (size_t j = 0; j < 4 && i + j < bits.size(); ++j)
      v |= static_cast<unsigned>(bits[i + j] & 1u) << (3 - j);
    out += "0123456789abcdef"[v];
  }
  return out;
}

struct ModelArgs {
  std::string denoise_path, classifier_path;
};

struct LoadedModels {
  std::optional<DenoiseModel> denoise;
  std::optional<ClassifierModel> classifier;
  RxModels view;
};

LoadedModels load_models(const ModelArgs& args, RxMethod method) {
  LoadedModels out;
  const bool needs_denoise = method == RxMethod::dbn_denoise_mle ||
                             method == RxMethod::dbn_full;
  const bool needs_classifier = method == RxMethod::dbn_full;
  if (needs_denoise && args.denoise_path.empty())
    throw config_error("method " + std::string(method_name(method)) +
                       " requires --denoise-model");
  if (needs_classifier && args.classifier_path.empty())
    throw config_error("method " + std::string(method_name(method)) +
                       " requires --classifier-model");
  if (!args.denoise_path.empty()) {
    out.denoise = load_denoise_model(args.denoise_path);
    out.view.denoise = &*out.denoise;
  }
  if (!args.classifier_path.empty()) {
    out.classifier = load_classifier_model(args.classifier_path);
    out.view.classifier = &*out.classifier;
  }
  return out;
}

LoadedModels load_models_for_sweep(const ModelArgs& args,
                                   const ExperimentConfig& cfg) {
  // strictest method in the list decides what has to be present
  RxMethod need = RxMethod::mle;
  for (const auto& name : cfg.methods) {
    const RxMethod m = method_from_name(name);
    if (m == RxMethod::dbn_full) need = m;
    if (m == RxMethod::dbn_denoise_mle && need != RxMethod::dbn_full) need = m;
  }
  return load_models(args, need);
}

int run(int argc, char** argv) {
  CLI::App app{"Underwater acoustic PSK link: simulator, DBN receiver, benchmarks"};
  app.require_subcommand(1);
  std::string kernel_choice;
  app.add_option("--kernels", kernel_choice,
                 "force the compute backend (scalar or avx2)");

  std::string config_path, out_path, dataset_dir;
  std::optional<uint64_t> seed;
  std::optional<uint32_t> threads;
  ModelArgs models;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* opt = cmd->add_option("--config", config_path, "experiment JSON");
    if (needs_config) opt->required();
    cmd->add_option("--seed", seed, "override master_seed");
  };

  auto* gen = app.add_subcommand("generate", "build an aligned symbol dataset");
  add_common(gen, true);
  gen->add_option("--out", out_path, "dataset directory")->required();

  auto* tden = app.add_subcommand("train-denoise", "train the de-noising stack");
  add_common(tden, true);
  tden->add_option("--dataset", dataset_dir, "dataset directory")->required();
  tden->add_option("--out", out_path, "model file")->required();

  auto* tcls = app.add_subcommand("train-classify", "train the classifier stack");
  add_common(tcls, true);
  tcls->add_option("--dataset", dataset_dir, "dataset directory")->required();
  tcls->add_option("--denoise-model", models.denoise_path, "trained de-noiser")
      ->required();
  tcls->add_option("--out", out_path, "model file")->required();

  std::string input_path, method_name_arg;
  auto* rx = app.add_subcommand("receive", "demodulate one recorded frame");
  add_common(rx, true);
  rx->add_option("--input", input_path, "waveform .f32 (with .json sidecar)")
      ->required();
  rx->add_option("--method", method_name_arg, "receive method");
  rx->add_option("--denoise-model", models.denoise_path, "trained de-noiser");
  rx->add_option("--classifier-model", models.classifier_path,
                 "trained classifier");
  rx->add_option("--out", out_path, "report JSON (stdout when omitted)");

  auto* sweep = app.add_subcommand("sweep", "Monte-Carlo BER over the EbNo grid");
  add_common(sweep, true);
  sweep->add_option("--threads", threads, "worker threads (0 = hardware)");
  sweep->add_option("--denoise-model", models.denoise_path, "trained de-noiser");
  sweep->add_option("--classifier-model", models.classifier_path,
                    "trained classifier");
  sweep->add_option("--out", out_path, "CSV path")->required();

  auto* search = app.add_subcommand("structure-search",
                                    "classifier size/schedule grid");
  add_common(search, true);
  search->add_option("--out", out_path, "CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // --help returns 0, real parse errors exit 2
  }

  apply_kernel_choice(kernel_choice);

  if (gen->parsed()) {
    const ExperimentConfig cfg = load_config(config_path, seed, threads);
    const Dataset ds = generate_dataset(cfg);
    write_dataset(ds, out_path, cfg);
    std::printf("dataset: %zu/%zu/%zu symbols -> %s\n", ds.train.size(),
                ds.val.size(), ds.test.size(), out_path.c_str());
    return 0;
  }
  if (tden->parsed()) {
    const ExperimentConfig cfg = load_config(config_path, seed, threads);
    const Dataset ds = load_dataset(dataset_dir);
    const DenoiseModel dm = train_denoise(ds, cfg);
    save_denoise_model(dm, out_path);
    std::printf("de-noiser: %zu noise nodes of %zu -> %s\n",
                dm.noise_nodes.size(), dm.base.top_dim(), out_path.c_str());
    return 0;
  }
  if (tcls->parsed()) {
    const ExperimentConfig cfg = load_config(config_path, seed, threads);
    const Dataset ds = load_dataset(dataset_dir);
    const DenoiseModel dm = load_denoise_model(models.denoise_path);
    const ClassifierModel cm = train_classifier(ds, dm, cfg);
    save_classifier_model(cm, out_path);
    std::printf("classifier: val accuracy %.4f -> %s\n", cm.val_accuracy,
                out_path.c_str());
    return 0;
  }
  if (rx->parsed()) {
    const ExperimentConfig cfg = load_config(config_path, seed, threads);
    RxConfig rxc;
    rxc.mod = cfg.mod;
    rxc.layout = default_frame_layout(cfg.mod.fs_hz);
    rxc.detect_threshold = cfg.detect_threshold;
    rxc.dbn_compensate = cfg.dbn_compensate;
    rxc.method = method_from_name(
        method_name_arg.empty() ? cfg.methods.front() : method_name_arg);
    const LoadedModels lm = load_models(models, rxc.method);
    const Waveform sig = read_waveform(input_path);
    const RxReport rep = receive(sig, rxc, lm.view);
    nlohmann::json j;
    j["method"] = method_name(rxc.method);
    j["bits_hex"] = bits_to_hex(rep.bits);
    j["bit_count"] = rep.bits.size();
    j["alpha_hat"] = rep.alpha_hat;
    j["snr_est_db"] = rep.snr_est_db;
    j["detection"] = {{"up_peak", rep.detection.up_peak},
                      {"down_peak", rep.detection.down_peak},
                      {"up_corr", rep.detection.up_corr},
                      {"down_corr", rep.detection.down_corr},
                      {"payload_offset", rep.detection.payload_offset}};
    const std::string text = j.dump(2) + "\n";
    if (out_path.empty()) {
      std::fputs(text.c_str(), stdout);
    } else {
      std::ofstream os(out_path, std::ios::binary);
      if (!os) throw input_error("cannot write " + out_path);
      os << text;
    }
    return 0;
  }
  if (sweep->parsed()) {
    const ExperimentConfig cfg = load_config(config_path, seed, threads);
    const LoadedModels lm = load_models_for_sweep(models, cfg);
    const auto rows = run_ber_sweep(cfg, lm.view);
    write_ber_csv(rows, out_path, cfg);
    for (const auto& r : rows)
      std::printf("%s @ %g dB: %llu/%llu errors, ber %.3e\n", r.method.c_str(),
                  r.ebno_db, static_cast<unsigned long long>(r.errors),
                  static_cast<unsigned long long>(r.bits), r.ber);
    std::printf("-> %s\n", out_path.c_str());
    return 0;
  }
  if (search->parsed()) {
    const ExperimentConfig cfg = load_config(config_path, seed, threads);
    const auto rows = run_structure_search(cfg);
    write_structure_csv(rows, out_path, cfg);
    for (const auto& r : rows)
      std::printf("%s epochs=%u seed=%llu: ber %.3e (%.0f ms)\n",
                  r.structure.c_str(), r.epochs,
                  static_cast<unsigned long long>(r.seed), r.ber, r.wall_ms);
    std::printf("-> %s\n", out_path.c_str());
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const config_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const input_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
