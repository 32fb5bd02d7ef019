#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "uwdbn/common.hpp"

namespace uwdbn {

// Binary raster of a normalized signal: cell value 0 marks the trace, 1 is
// background, exactly one 0 per column. Row 0 is the top (amplitude 1.0).
struct PixelFrame {
  uint32_t rows = 0, cols = 0;
  std::vector<uint8_t> cells;  // row-major

  uint8_t at(uint32_t r, uint32_t c) const { return cells[size_t(r) * cols + c]; }
};

struct FrameSet {
  std::vector<PixelFrame> frames;
};

struct Resolution {
  uint32_t pix = 15;    // vertical levels
  uint32_t decim = 1;   // block-mean decimation factor
};

// scale to [0, 1]; constant input has no scale and is rejected
std::vector<double> normalize_minmax(std::span<const double> s);

// column i gets its 0 at row round((1 - s[i]) * (pix - 1))
PixelFrame pixelize(std::span<const double> s_norm, uint32_t pix_levels);

// per-column trace row -> 1 - row/(rows-1). Works on hard frames and, via
// the soft overload, on real-valued reconstructions (argmin per column,
// lowest row index wins ties).
std::vector<double> depixelize(const PixelFrame& f);
std::vector<double> depixelize_soft(std::span<const double> cells, uint32_t rows,
                                    uint32_t cols);

// block means; a short final block averages what remains
std::vector<double> block_mean_decimate(std::span<const double> s, uint32_t factor);

FrameSet multi_resolution(std::span<const double> s_norm,
                          std::span<const Resolution> res);

// frames concatenated in order, each row-major, as 0/1 doubles
std::vector<double> flatten(const FrameSet& fs);
size_t flattened_dim(std::span<const Resolution> res, size_t frame_len);

struct Segmented {
  std::vector<std::vector<double>> frames;
  bool last_padded = false;
};
// fixed-length windows; the tail is zero-padded to a full window
Segmented segment(std::span<const double> s, size_t frame_len);

// binary i/o: u32 rows, u32 cols (little endian), then row-major bit-packed
// cells padded to a whole byte. A FrameSet is a u32 count plus that many
// frames; *_many files hold a u32 count of FrameSets.
void write_pixelframe(std::ostream& os, const PixelFrame& f);
PixelFrame read_pixelframe(std::istream& is);
void write_frameset(const FrameSet& fs, const std::string& path);
FrameSet read_frameset(const std::string& path);
void write_framesets(std::span<const FrameSet> sets, const std::string& path);
std::vector<FrameSet> read_framesets(const std::string& path);

}  // namespace uwdbn
