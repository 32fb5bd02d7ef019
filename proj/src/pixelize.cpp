#include "uwdbn/pixelize.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

static_assert(std::endian::native == std::endian::little,
              "frame files are little-endian; byte-swapping is not implemented");

namespace uwdbn {

std::vector<double> normalize_minmax(std::span<const double> s) {
  if (s.empty()) throw input_error("normalize: empty signal");
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
  const double range = *hi - *lo;
  if (range == 0.0)
    throw input_error("normalize: constant signal has no min-max scale");
  std::vector<double> out(s.size());
  for (size_t i = 0; i < s.size(); ++i) out[i] = (s[i] - *lo) / range;
  return out;
}

PixelFrame pixelize(std::span<const double> s_norm, uint32_t pix_levels) {
  if (pix_levels < 2) throw input_error("pixelize: need at least 2 levels");
  if (s_norm.empty()) throw input_error("pixelize: empty signal");
  for (double v : s_norm)
    if (!(v >= -1e-9) || !(v <= 1.0 + 1e-9))
      throw input_error("pixelize: signal not normalized to [0, 1]");

  PixelFrame f;
  f.rows = pix_levels;
  f.cols = static_cast<uint32_t>(s_norm.size());
  f.cells.assign(size_t(f.rows) * f.cols, 1);
  for (uint32_t c = 0; c < f.cols; ++c) {
    const double v = std::clamp(s_norm[c], 0.0, 1.0);
    const auto r = static_cast<uint32_t>(std::llround((1.0 - v) * (pix_levels - 1)));
    f.cells[size_t(r) * f.cols + c] = 0;
  }
  return f;
}

std::vector<double> depixelize(const PixelFrame& f) {
  if (f.rows < 2 || f.cols == 0 || f.cells.size() != size_t(f.rows) * f.cols)
    throw input_error("depixelize: malformed frame");
  std::vector<double> cells(f.cells.begin(), f.cells.end());
  return depixelize_soft(cells, f.rows, f.cols);
}

std::vector<double> depixelize_soft(std::span<const double> cells, uint32_t rows,
                                    uint32_t cols) {
  if (rows < 2 || cols == 0 || cells.size() != size_t(rows) * cols)
    throw input_error("depixelize: malformed frame");
  std::vector<double> out(cols);
  for (uint32_t c = 0; c < cols; ++c) {
    uint32_t best = 0;
    double best_v = cells[c];
    for (uint32_t r = 1; r < rows; ++r) {
      const double v = cells[size_t(r) * cols + c];
      if (v < best_v) {
        best_v = v;
        best = r;
      }
    }
    out[c] = 1.0 - static_cast<double>(best) / (rows - 1);
  }
  return out;
}

std::vector<double> block_mean_decimate(std::span<const double> s, uint32_t factor) {
  if (factor == 0) throw input_error("decimate: factor must be positive");
  if (s.empty()) throw input_error("decimate: empty signal");
  if (factor > s.size())
    throw input_error("decimate: factor exceeds signal length");
  const size_t blocks = (s.size() + factor - 1) / factor;
  std::vector<double> out(blocks);
  for (size_t b = 0; b < blocks; ++b) {
    const size_t lo = b * factor;
    const size_t hi = std::min(s.size(), lo + factor);
    double acc = 0.0;
    for (size_t i = lo; i < hi; ++i) acc += s[i];
    out[b] = acc / static_cast<double>(hi - lo);
  }
  return out;
}

FrameSet multi_resolution(std::span<const double> s_norm,
                          std::span<const Resolution> res) {
  if (res.empty()) throw input_error("multi_resolution: no resolutions given");
  FrameSet fs;
  fs.frames.reserve(res.size());
  for (const auto& r : res) {
    if (r.decim == 1) {
      fs.frames.push_back(pixelize(s_norm, r.pix));
    } else {
      fs.frames.push_back(pixelize(block_mean_decimate(s_norm, r.decim), r.pix));
    }
  }
  return fs;
}

std::vector<double> flatten(const FrameSet& fs) {
  std::vector<double> out;
  size_t total = 0;
  for (const auto& f : fs.frames) total += f.cells.size();
  out.reserve(total);
  for (const auto& f : fs.frames)
    out.insert(out.end(), f.cells.begin(), f.cells.end());
  return out;
}

size_t flattened_dim(std::span<const Resolution> res, size_t frame_len) {
  size_t total = 0;
  for (const auto& r : res) {
    if (r.decim == 0) throw input_error("flattened_dim: zero decimation");
    total += size_t(r.pix) * ((frame_len + r.decim - 1) / r.decim);
  }
  return total;
}

Segmented segment(std::span<const double> s, size_t frame_len) {
  if (frame_len == 0) throw input_error("segment: frame length must be positive");
  if (s.empty()) throw input_error("segment: empty signal");
  Segmented out;
  const size_t n = (s.size() + frame_len - 1) / frame_len;
  out.frames.reserve(n);
  for (size_t f = 0; f < n; ++f) {
    std::vector<double> w(frame_len, 0.0);
    const size_t lo = f * frame_len;
    const size_t hi = std::min(s.size(), lo + frame_len);
    std::copy(s.begin() + lo, s.begin() + hi, w.begin());
    out.frames.push_back(std::move(w));
  }
  out.last_padded = s.size() % frame_len != 0;
  return out;
}

namespace {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw input_error("frame file: truncated");
  return v;
}

}  // namespace

void write_pixelframe(std::ostream& os, const PixelFrame& f) {
  if (f.cells.size() != size_t(f.rows) * f.cols)
    throw input_error("write_pixelframe: malformed frame");
  put<uint32_t>(os, f.rows);
  put<uint32_t>(os, f.cols);
  const size_t nbytes = (f.cells.size() + 7) / 8;
  std::vector<uint8_t> packed(nbytes, 0);
  for (size_t i = 0; i < f.cells.size(); ++i)
    if (f.cells[i]) packed[i / 8] |= uint8_t(1u << (i % 8));
  os.write(reinterpret_cast<const char*>(packed.data()),
           static_cast<std::streamsize>(nbytes));
}

PixelFrame read_pixelframe(std::istream& is) {
  PixelFrame f;
  f.rows = get<uint32_t>(is);
  f.cols = get<uint32_t>(is);
  const size_t ncells = size_t(f.rows) * f.cols;
  if (f.rows == 0 || f.cols == 0 || ncells > (1u << 28))
    throw input_error("frame file: implausible dimensions");
  const size_t nbytes = (ncells + 7) / 8;
  std::vector<uint8_t> packed(nbytes);
  is.read(reinterpret_cast<char*>(packed.data()),
          static_cast<std::streamsize>(nbytes));
  if (!is) throw input_error("frame file: truncated");
  f.cells.resize(ncells);
  for (size_t i = 0; i < ncells; ++i)
    f.cells[i] = (packed[i / 8] >> (i % 8)) & 1u;
  return f;
}

void write_frameset(const FrameSet& fs, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw input_error("cannot open for write: " + path);
  put<uint32_t>(os, static_cast<uint32_t>(fs.frames.size()));
  for (const auto& f : fs.frames) write_pixelframe(os, f);
  if (!os) throw input_error("short write: " + path);
}

FrameSet read_frameset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw input_error("cannot open: " + path);
  FrameSet fs;
  const auto n = get<uint32_t>(is);
  fs.frames.reserve(n);
  for (uint32_t i = 0; i < n; ++i) fs.frames.push_back(read_pixelframe(is));
  return fs;
}

void write_framesets(std::span<const FrameSet> sets, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw input_error("cannot open for write: " + path);
  put<uint32_t>(os, static_cast<uint32_t>(sets.size()));
  for (const auto& fs : sets) {
    put<uint32_t>(os, static_cast<uint32_t>(fs.frames.size()));
    for (const auto& f : fs.frames) write_pixelframe(os, f);
  }
  if (!os) throw input_error("short write: " + path);
}

std::vector<FrameSet> read_framesets(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw input_error("cannot open: " + path);
  const auto nsets = get<uint32_t>(is);
  std::vector<FrameSet> out;
  out.reserve(nsets);
  for (uint32_t s = 0; s < nsets; ++s) {
    FrameSet fs;
    const auto n = get<uint32_t>(is);
    fs.frames.reserve(n);
    for (uint32_t i = 0; i < n; ++i) fs.frames.push_back(read_pixelframe(is));
    out.push_back(std::move(fs));
  }
  return out;
}

}  // namespace uwdbn
