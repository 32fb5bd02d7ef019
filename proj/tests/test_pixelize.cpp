#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "uwdbn/pixelize.hpp"
#include "uwdbn/rng.hpp"

using namespace uwdbn;

namespace {

uint32_t trace_row(const PixelFrame& f, uint32_t col) {
  for (uint32_t r = 0; r < f.rows; ++r)
    if (f.at(r, col) == 0) return r;
  return f.rows;  // no trace
}

void check_one_trace_per_column(const PixelFrame& f) {
  for (uint32_t c = 0; c < f.cols; ++c) {
    int zeros = 0;
    for (uint32_t r = 0; r < f.rows; ++r) zeros += f.at(r, c) == 0;
    CHECK(zeros == 1);
  }
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("min-max normalization") {
  std::vector<double> s{-1.0, 0.0, 1.0};
  auto n = normalize_minmax(s);
  CHECK(n == std::vector<double>{0.0, 0.5, 1.0});

  std::vector<double> already{0.0, 0.25, 1.0};
  CHECK(normalize_minmax(already) == already);

  std::vector<double> flat{5.0, 5.0, 5.0};
  CHECK_THROWS_AS(normalize_minmax(flat), input_error);
  CHECK_THROWS_AS(normalize_minmax(std::vector<double>{}), input_error);
}

TEST_CASE("pixel placement by amplitude") {
  // top of range lands on the top row
  auto top = pixelize(std::vector<double>{1.0, 1.0}, 4);
  CHECK(top.rows == 4);
  CHECK(top.cols == 2);
  CHECK(trace_row(top, 0) == 0);
  CHECK(trace_row(top, 1) == 0);

  auto bottom = pixelize(std::vector<double>{0.0}, 4);
  CHECK(trace_row(bottom, 0) == 3);

  auto mid = pixelize(std::vector<double>{0.5}, 5);
  CHECK(trace_row(mid, 0) == 2);

  CHECK_THROWS_AS(pixelize(std::vector<double>{0.5}, 1), input_error);
  CHECK_THROWS_AS(pixelize(std::vector<double>{1.5}, 4), input_error);
  CHECK_THROWS_AS(pixelize(std::vector<double>{-0.5}, 4), input_error);
  CHECK_THROWS_AS(pixelize(std::vector<double>{}, 4), input_error);
}

TEST_CASE("depixelize inverts pixelize within quantization") {
  auto one = pixelize(std::vector<double>{1.0}, 4);
  CHECK(depixelize(one)[0] == 1.0);

  Rng rng(31);
  std::vector<double> x(40);
  for (auto& v : x) v = rng.uniform();
  auto fine = pixelize(x, 101);
  auto back = depixelize(fine);
  for (size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back[i] - x[i]) <= 0.005);
}

TEST_CASE("round-trip bound holds on random signals") {
  Rng rng(32);
  for (int trial = 0; trial < 1000; ++trial) {
    const uint32_t pix = trial % 2 == 0 ? 15 : 5;
    const size_t len = 5 + size_t(rng.below(60));
    std::vector<double> x(len);
    for (auto& v : x) v = rng.uniform();
    auto f = pixelize(x, pix);
    check_one_trace_per_column(f);
    auto back = depixelize(f);
    const double bound = 1.0 / (2.0 * (pix - 1)) + 1e-12;
    for (size_t i = 0; i < len; ++i) CHECK(std::abs(back[i] - x[i]) <= bound);
  }
}

TEST_CASE("larger samples sit no lower in the raster") {
  Rng rng(33);
  const uint32_t pix = 15;
  std::vector<double> x(100);
  for (auto& v : x) v = rng.uniform();
  auto f = pixelize(x, pix);
  const double step = 1.0 / (pix - 1);
  for (size_t i = 0; i < x.size(); ++i)
    for (size_t j = 0; j < x.size(); ++j) {
      if (x[i] > x[j]) CHECK(trace_row(f, i) <= trace_row(f, j) + 0u);
      if (x[i] > x[j] + step) CHECK(trace_row(f, i) < trace_row(f, j));
    }
}

TEST_CASE("soft reconstructions resolve by per-column argmin") {
  // real-valued cells; ties must go to the topmost (lowest index) row
  const uint32_t rows = 4, cols = 3;
  std::vector<double> cells(rows * cols, 1.0);
  cells[1 * cols + 0] = 0.2;   // col 0: min at row 1
  cells[3 * cols + 1] = 0.05;  // col 1: min at row 3
  cells[0 * cols + 2] = 0.3;   // col 2: tie between rows 0 and 2
  cells[2 * cols + 2] = 0.3;
  auto out = depixelize_soft(cells, rows, cols);
  CHECK(out[0] == doctest::Approx(1.0 - 1.0 / 3.0));
  CHECK(out[1] == doctest::Approx(0.0));
  CHECK(out[2] == doctest::Approx(1.0));  // topmost tie wins

  // agree with an exhaustive scan on random soft frames
  Rng rng(34);
  std::vector<double> soft(rows * cols);
  for (auto& v : soft) v = rng.uniform();
  auto got = depixelize_soft(soft, rows, cols);
  for (uint32_t c = 0; c < cols; ++c) {
    uint32_t best = 0;
    for (uint32_t r = 1; r < rows; ++r)
      if (soft[r * cols + c] < soft[best * cols + c]) best = r;
    CHECK(got[c] == 1.0 - double(best) / (rows - 1));
  }

  CHECK_THROWS_AS(depixelize_soft(soft, 0, cols), input_error);
}

TEST_CASE("block-mean decimation") {
  std::vector<double> s{1.0, 2.0, 3.0, 4.0};
  CHECK(block_mean_decimate(s, 2) == std::vector<double>{1.5, 3.5});

  std::vector<double> odd{1.0, 2.0, 3.0};
  CHECK(block_mean_decimate(odd, 2) == std::vector<double>{1.5, 3.0});

  CHECK(block_mean_decimate(s, 1) == s);
  CHECK_THROWS_AS(block_mean_decimate(s, 0), input_error);
  CHECK_THROWS_AS(block_mean_decimate(s, 5), input_error);
}

TEST_CASE("segmentation into fixed windows") {
  std::vector<double> s(120);
  for (size_t i = 0; i < s.size(); ++i) s[i] = double(i);

  auto full = segment(s, 40);
  CHECK(full.frames.size() == 3);
  CHECK_FALSE(full.last_padded);

  std::vector<double> rebuilt;
  for (const auto& f : full.frames) rebuilt.insert(rebuilt.end(), f.begin(), f.end());
  CHECK(rebuilt == s);

  std::vector<double> short_s(100, 1.0);
  auto padded = segment(short_s, 40);
  CHECK(padded.frames.size() == 3);
  CHECK(padded.last_padded);
  CHECK(padded.frames.back().size() == 40);
  for (size_t i = 20; i < 40; ++i) CHECK(padded.frames.back()[i] == 0.0);

  CHECK_THROWS_AS(segment(s, 0), input_error);
}

TEST_CASE("multi-resolution frame sets") {
  Rng rng(35);
  std::vector<double> x(40);
  for (auto& v : x) v = rng.uniform();

  // identity resolution reproduces plain pixelize
  const Resolution ident[] = {{15, 1}};
  auto one = multi_resolution(x, ident);
  REQUIRE(one.frames.size() == 1);
  CHECK(one.frames[0].cells == pixelize(x, 15).cells);

  // every frame equals the pixelized block means of its own resolution
  const Resolution quad[] = {{15, 1}, {10, 2}, {5, 4}, {5, 8}};
  auto fs = multi_resolution(x, quad);
  REQUIRE(fs.frames.size() == 4);
  for (size_t k = 0; k < 4; ++k) {
    auto expect = pixelize(block_mean_decimate(x, quad[k].decim), quad[k].pix);
    CHECK(fs.frames[k].cells == expect.cells);
    check_one_trace_per_column(fs.frames[k]);
  }

  // flattened width: 15*40 + 10*20 + 5*10 + 5*5
  auto flat = flatten(fs);
  CHECK(flat.size() == 875);
  CHECK(flattened_dim(quad, 40) == 875);
  for (double v : flat) CHECK((v == 0.0 || v == 1.0));

  // flat midline input: every frame is one constant row
  std::vector<double> mid(40, 0.5);
  auto flat_fs = multi_resolution(mid, quad);
  for (const auto& f : flat_fs.frames) {
    const uint32_t r0 = trace_row(f, 0);
    for (uint32_t c = 0; c < f.cols; ++c) CHECK(trace_row(f, c) == r0);
    CHECK(std::abs(depixelize(f)[0] - 0.5) <= 1.0 / (2.0 * (f.rows - 1)) + 1e-12);
  }

  const Resolution toobig[] = {{5, 64}};
  CHECK_THROWS_AS(multi_resolution(x, toobig), input_error);
  CHECK_THROWS_AS(multi_resolution(x, std::span<const Resolution>{}), input_error);
}

TEST_CASE("frame serialization round-trips") {
  Rng rng(36);
  FrameSet fs;
  for (uint32_t k = 0; k < 3; ++k) {
    std::vector<double> x(17 + 5 * k);
    for (auto& v : x) v = rng.uniform();
    fs.frames.push_back(pixelize(x, 7 + k));
  }

  const std::string path = temp_path("uwdbn_test_frames.bin");
  write_frameset(fs, path);
  FrameSet back = read_frameset(path);
  REQUIRE(back.frames.size() == fs.frames.size());
  for (size_t k = 0; k < fs.frames.size(); ++k) {
    CHECK(back.frames[k].rows == fs.frames[k].rows);
    CHECK(back.frames[k].cols == fs.frames[k].cols);
    CHECK(back.frames[k].cells == fs.frames[k].cells);
  }

  // a list of FrameSets in one file
  std::vector<FrameSet> sets{fs, fs};
  write_framesets(sets, path);
  auto rsets = read_framesets(path);
  REQUIRE(rsets.size() == 2);
  CHECK(rsets[1].frames[0].cells == fs.frames[0].cells);

  // bit-packing: u32 count + per frame (8-byte header + ceil(cells/8))
  {
    std::ofstream os(path, std::ios::binary);
    write_pixelframe(os, fs.frames[0]);
  }
  const auto expected = 8 + (size_t(fs.frames[0].rows) * fs.frames[0].cols + 7) / 8;
  CHECK(std::filesystem::file_size(path) == expected);

  // truncation is detected
  std::filesystem::resize_file(path, expected - 3);
  {
    std::ifstream is(path, std::ios::binary);
    CHECK_THROWS_AS(read_pixelframe(is), input_error);
  }
  std::istringstream empty;
  CHECK_THROWS_AS(read_pixelframe(empty), input_error);
  CHECK_THROWS_AS(read_frameset(temp_path("uwdbn_no_such_frames.bin")), input_error);
  std::filesystem::remove(path);
}
