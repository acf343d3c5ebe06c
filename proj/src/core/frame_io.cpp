// SPDX-License-Identifier: Apache-2.0

#include "osdvsr/core/frame_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <regex>
#include <vector>

namespace osdvsr::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

}  // namespace

Frame read_png(const std::filesystem::path& path, int frame_index) {
  FilePtr file = open_file(path, "rb");
  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    throw IoError("not a PNG file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  if (bit_depth == 16) png_set_swap(png);
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  const int depth = png_get_bit_depth(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<png_byte> buffer(row_bytes * static_cast<std::size_t>(height));
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = buffer.data() + row_bytes * y;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  if (channels != 1 && channels != 3) throw IoError("unsupported PNG channel layout: " + path.string());
  Grid pixels(channels, height, width);
  const double max_value = depth == 16 ? 65535.0 : 255.0;
  for (int y = 0; y < height; ++y) {
    const png_byte* row = rows[static_cast<std::size_t>(y)];
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t k = static_cast<std::size_t>(x) * channels + c;
        double v;
        if (depth == 16) {
          std::uint16_t s;
          std::memcpy(&s, row + 2 * k, 2);
          v = s;
        } else {
          v = row[k];
        }
        pixels.at(c, y, x) = v / max_value;
      }
    }
  }
  return Frame(std::move(pixels), frame_index);
}

void write_png(const std::filesystem::path& path, const Grid& image, int bit_depth) {
  require(bit_depth == 8 || bit_depth == 16, "write_png: bit depth must be 8 or 16");
  require(image.channels() == 1 || image.channels() == 3, "write_png: channel count must be 1 or 3");
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG write failed: " + path.string());
  }
  png_init_io(png, file.get());
  const int channels = image.channels();
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()), static_cast<png_uint_32>(image.height()),
               bit_depth, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);

  const double max_value = bit_depth == 16 ? 65535.0 : 255.0;
  const std::size_t bytes_per_sample = bit_depth / 8;
  std::vector<png_byte> row(static_cast<std::size_t>(image.width()) * channels * bytes_per_sample);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < channels; ++c) {
        const double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
        const auto q = static_cast<std::uint16_t>(std::lround(v * max_value));
        const std::size_t k = static_cast<std::size_t>(x) * channels + c;
        if (bit_depth == 16) {
          std::memcpy(row.data() + 2 * k, &q, 2);
        } else {
          row[k] = static_cast<png_byte>(q);
        }
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_png(const std::filesystem::path& path, const Frame& frame, int bit_depth) {
  write_png(path, frame.pixels(), bit_depth);
}

std::string frame_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06d.png", index + 1);
  return buf;
}

VideoClip read_clip_dir(const std::filesystem::path& dir, ScaleTag tag) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  static const std::regex pattern(R"(frame_(\d+)\.png)");
  std::vector<std::pair<long, std::filesystem::path>> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && std::regex_match(name, m, pattern)) files.emplace_back(std::stol(m[1]), entry.path());
  }
  if (files.empty()) throw IoError("no frame_NNNNNN.png files in " + dir.string());
  std::sort(files.begin(), files.end());
  std::vector<Frame> frames;
  frames.reserve(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) frames.push_back(read_png(files[i].second, static_cast<int>(i)));
  for (const Frame& f : frames) {
    if (!f.pixels().same_shape(frames.front().pixels())) throw IoError("frames differ in size in " + dir.string());
  }
  return VideoClip(std::move(frames), tag);
}

void write_clip_dir(const std::filesystem::path& dir, const VideoClip& clip, int bit_depth) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < clip.size(); ++i) {
    write_png(dir / frame_file_name(static_cast<int>(i)), clip[i], bit_depth);
  }
}

}  // namespace osdvsr::io
