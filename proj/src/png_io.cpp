#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <set>

#include "synthlabel/data.hpp"
#include "synthlabel/error.hpp"

namespace synthlabel {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Tensor read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialisation failed");
  }
  std::vector<png_bytep> rows;
  std::vector<unsigned char> pixels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("unreadable PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const std::size_t w = png_get_image_width(png, info);
  const std::size_t h = png_get_image_height(png, info);
  const std::size_t channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path.string() + ": unsupported channel count " + std::to_string(channels));
  }
  pixels.resize(w * h * channels);
  rows.resize(h);
  for (std::size_t y = 0; y < h; ++y) rows[y] = pixels.data() + y * w * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Tensor image({channels, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < channels; ++c)
        image[(c * h + y) * w + x] = pixels[(y * w + x) * channels + c] / 255.0;
  return image;
}

void write_png(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
    throw DimensionError("write_png expects a 1xHxW or 3xHxW image");
  }
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  std::vector<unsigned char> pixels(c * h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch)
        pixels[(y * w + x) * c + ch] = static_cast<unsigned char>(
            std::lround(std::clamp(image[(ch * h + y) * w + x], 0.0, 1.0) * 255.0));

  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialisation failed");
  }
  std::vector<png_bytep> rows(h);
  for (std::size_t y = 0; y < h; ++y) rows[y] = pixels.data() + y * w * c;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

SampleSet load_image_dir(const std::filesystem::path& dir,
                         const std::optional<std::filesystem::path>& labels_csv,
                         std::vector<std::string> class_names) {
  if (!std::filesystem::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<std::string> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      files.push_back(entry.path().filename().string());
    }
  }
  std::sort(files.begin(), files.end());

  std::map<std::string, std::string> csv_labels;
  if (labels_csv) {
    std::ifstream in(*labels_csv);
    if (!in) throw IoError("cannot open " + labels_csv->string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("filename,label", 0) != 0) {
      throw IoError(labels_csv->string() + ": header 'filename,label' required");
    }
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw IoError(labels_csv->string() + ": malformed row '" + line + "'");
      const auto name = line.substr(0, comma);
      if (!csv_labels.emplace(name, line.substr(comma + 1)).second) {
        throw IoError(labels_csv->string() + ": duplicate filename '" + name + "'");
      }
      if (!std::binary_search(files.begin(), files.end(), name)) {
        throw IoError(labels_csv->string() + ": '" + name + "' not found in " + dir.string());
      }
    }
  }
  if (class_names.empty()) {
    std::set<std::string> names;
    for (const auto& [f, l] : csv_labels) names.insert(l);
    class_names.assign(names.begin(), names.end());
  }

  std::vector<Sample> samples;
  for (const auto& f : files) {
    Sample s{f, read_png(dir / f), std::nullopt};
    if (const auto it = csv_labels.find(f); it != csv_labels.end()) {
      const auto pos = std::find(class_names.begin(), class_names.end(), it->second);
      if (pos == class_names.end()) throw IoError("unknown label '" + it->second + "' for " + f);
      s.label = static_cast<int>(pos - class_names.begin());
    }
    samples.push_back(std::move(s));
  }
  if (!samples.empty()) {
    // Group offenders by shape so the error names every mismatched file.
    std::map<Shape, std::vector<std::string>> by_shape;
    for (const auto& s : samples) by_shape[s.image.shape()].push_back(s.id);
    if (by_shape.size() > 1) {
      const Shape& reference = samples.front().image.shape();
      std::string msg = "images differ in size (expected " + shape_str(reference) + "):";
      for (const auto& [shape, names] : by_shape) {
        if (shape == reference) continue;
        for (const auto& n : names) msg += " " + n + " " + shape_str(shape);
      }
      throw DimensionError(msg);
    }
  }
  return SampleSet(std::move(samples), std::move(class_names));
}

}  // namespace synthlabel
