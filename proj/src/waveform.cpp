#include "uwdbn/waveform.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "uwdbn/kernels.hpp"

namespace uwdbn {

namespace {

std::string sidecar_path(const std::string& f32_path) {
  auto dot = f32_path.find_last_of('.');
  auto slash = f32_path.find_last_of('/');
  std::string base = (dot == std::string::npos || (slash != std::string::npos && dot < slash))
                         ? f32_path
                         : f32_path.substr(0, dot);
  return base + ".json";
}

}  // namespace

void write_waveform(const Waveform& w, const std::string& f32_path) {
  std::ofstream f(f32_path, std::ios::binary);
  if (!f) throw input_error("cannot open for write: " + f32_path);
  for (double s : w.samples) {
    float v = static_cast<float>(s);
    f.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  if (!f) throw input_error("short write: " + f32_path);

  nlohmann::json meta;
  meta["sample_rate_hz"] = w.sample_rate_hz;
  meta["length"] = w.samples.size();
  std::ofstream m(sidecar_path(f32_path));
  if (!m) throw input_error("cannot open for write: " + sidecar_path(f32_path));
  m << meta.dump(2) << "\n";
}

Waveform read_waveform(const std::string& f32_path) {
  std::ifstream m(sidecar_path(f32_path));
  if (!m) throw input_error("missing waveform sidecar: " + sidecar_path(f32_path));
  nlohmann::json meta;
  try {
    m >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw input_error("bad waveform sidecar " + sidecar_path(f32_path) + ": " + e.what());
  }

  Waveform w;
  w.sample_rate_hz = meta.at("sample_rate_hz").get<double>();
  const size_t len = meta.at("length").get<size_t>();

  std::ifstream f(f32_path, std::ios::binary);
  if (!f) throw input_error("cannot open: " + f32_path);
  w.samples.resize(len);
  for (size_t i = 0; i < len; ++i) {
    float v = 0.0f;
    f.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!f) throw input_error("waveform shorter than sidecar length: " + f32_path);
    w.samples[i] = v;
  }
  return w;
}

double signal_energy(const Waveform& w) {
  return kernels::sumsq(w.samples.data(), w.samples.size());
}

double measure_eb(const Waveform& payload, double rb_bits_per_s) {
  if (payload.sample_rate_hz <= 0.0) throw input_error("measure_eb: sample rate must be positive");
  if (rb_bits_per_s <= 0.0) throw input_error("measure_eb: bit rate must be positive");
  const double nbits = payload.duration_s() * rb_bits_per_s;
  if (nbits <= 0.0) throw input_error("measure_eb: waveform is empty");
  return signal_energy(payload) / nbits;
}

}  // namespace uwdbn
