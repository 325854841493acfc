// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fed/png.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "fed/error.hpp"

namespace fed {

std::uint8_t score_to_gray(double score) {
  const double level = std::floor(std::clamp(score, 0.0, 1.0) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(level);
}

std::vector<std::uint8_t> score_to_gray(const Tensor& scores) {
  std::vector<std::uint8_t> out(scores.size());
  std::transform(scores.data.begin(), scores.data.end(), out.begin(),
                 [](double s) { return score_to_gray(s); });
  return out;
}

void write_score_png(const std::filesystem::path& path, const Tensor& scores) {
  if (scores.rank() != 2) throw ShapeError("score map must be H x W, got " + shape_string(scores.shape));
  const auto height = static_cast<png_uint_32>(scores.dim(0));
  const auto width = static_cast<png_uint_32>(scores.dim(1));
  std::vector<std::uint8_t> pixels = score_to_gray(scores);

  const std::filesystem::path tmp = path.string() + ".tmp";
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(tmp.c_str(), "wb"), &std::fclose);
  if (!file) throw IoError("cannot open " + tmp.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (png_uint_32 y = 0; y < height; ++y) png_write_row(png, pixels.data() + std::size_t{y} * width);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) throw IoError("cannot write " + tmp.string());
  file.reset();
  std::filesystem::rename(tmp, path);
}

}  // namespace fed
