// Copyright 2026 The S2M Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <png.h>

#include <array>
#include <bit>
#include <cctype>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "s2m/core.hpp"

/// File formats.
///
///  * Score maps and logit stacks: NPY v1.0, dtype '<f4', C order, shape
///    (H, W) or (C, H, W). Score maps may also be stored as little-endian
///    grayscale PFM ("Pf").
///  * Label and binary masks: 8-bit single-channel PNG or binary PGM (P5).
///    Binary masks are written as 0/255 and read back from {0, 1, 255}.
///  * RGB images: 8-bit PNG (binary PPM (P6) is accepted on read).
namespace s2m {

namespace fs = std::filesystem;

namespace detail {

inline std::vector<unsigned char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error("read failure on " + path.string());
  return bytes;
}

inline void write_file(const fs::path& path, std::string_view header, std::span<const unsigned char> payload) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  out.flush();
  if (!out) throw Error("write failure on " + path.string());
}

inline float load_f32_le(const unsigned char* p) noexcept {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

inline void store_f32_le(float v, unsigned char* p) noexcept {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  p[0] = static_cast<unsigned char>(bits & 0xFFu);
  p[1] = static_cast<unsigned char>((bits >> 8) & 0xFFu);
  p[2] = static_cast<unsigned char>((bits >> 16) & 0xFFu);
  p[3] = static_cast<unsigned char>((bits >> 24) & 0xFFu);
}

inline bool has_prefix(std::span<const unsigned char> bytes, std::string_view magic) {
  return bytes.size() >= magic.size() && std::memcmp(bytes.data(), magic.data(), magic.size()) == 0;
}

inline std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext;
}

// Largest payload accepted from a header, in elements.
inline constexpr std::size_t kMaxElements = std::size_t{1} << 32;

inline std::size_t checked_product(std::span<const std::size_t> dims, const fs::path& path) {
  std::size_t n = 1;
  for (auto d : dims) {
    if (d == 0) throw Error(path.string() + ": zero-length dimension");
    if (d > kMaxElements / n) throw Error(path.string() + ": dimension overflow");
    n *= d;
  }
  return n;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// NPY

struct NpyArray {
  std::vector<std::size_t> shape;
  std::vector<float> data;
};

namespace detail {

// Parses the python-literal header dict written by numpy.save.
class NpyHeaderParser {
 public:
  NpyHeaderParser(std::string_view text, const fs::path& path) : text_(text), path_(path) {}

  void parse(std::string& descr, bool& fortran, std::vector<std::size_t>& shape) {
    bool seen_descr = false, seen_fortran = false, seen_shape = false;
    skip_ws();
    expect('{');
    while (true) {
      skip_ws();
      if (peek() == '}') break;
      const std::string key = parse_string();
      skip_ws();
      expect(':');
      skip_ws();
      if (key == "descr") {
        descr = parse_string();
        seen_descr = true;
      } else if (key == "fortran_order") {
        fortran = parse_bool();
        seen_fortran = true;
      } else if (key == "shape") {
        shape = parse_shape();
        seen_shape = true;
      } else {
        fail("unexpected key '" + key + "'");
      }
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      skip_ws();
      if (peek() != '}') fail("expected ',' or '}'");
    }
    if (!seen_descr || !seen_fortran || !seen_shape) fail("missing descr, fortran_order or shape");
  }

 private:
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(path_.string() + ": malformed NPY header: " + what);
  }
  std::string parse_string() {
    const char quote = peek();
    if (quote != '\'' && quote != '"') fail("expected quoted string");
    ++pos_;
    const auto end = text_.find(quote, pos_);
    if (end == std::string_view::npos) fail("unterminated string");
    std::string s(text_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return s;
  }
  bool parse_bool() {
    if (text_.substr(pos_, 4) == "True") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "False") {
      pos_ += 5;
      return false;
    }
    fail("expected True or False");
  }
  std::vector<std::size_t> parse_shape() {
    std::vector<std::size_t> dims;
    expect('(');
    while (true) {
      skip_ws();
      if (peek() == ')') {
        ++pos_;
        break;
      }
      if (!std::isdigit(static_cast<unsigned char>(peek()))) fail("expected dimension");
      std::size_t v = 0;
      while (std::isdigit(static_cast<unsigned char>(peek()))) {
        const std::size_t digit = static_cast<std::size_t>(peek() - '0');
        if (v > (kMaxElements - digit) / 10) fail("dimension overflow");
        v = v * 10 + digit;
        ++pos_;
      }
      dims.push_back(v);
      skip_ws();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ')') {
        fail("expected ',' or ')' in shape");
      }
    }
    return dims;
  }

  std::string_view text_;
  const fs::path& path_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline NpyArray read_npy(const fs::path& path) {
  const auto bytes = detail::read_file(path);
  constexpr std::string_view kMagic("\x93NUMPY", 6);
  if (!detail::has_prefix(bytes, kMagic) || bytes.size() < 10) {
    throw Error(path.string() + ": malformed header: not an NPY file");
  }
  if (bytes[6] != 1 || bytes[7] != 0) {
    throw Error(path.string() + ": malformed header: only NPY format version 1.0 is supported");
  }
  const std::size_t header_len = static_cast<std::size_t>(bytes[8]) | (static_cast<std::size_t>(bytes[9]) << 8);
  if (10 + header_len > bytes.size()) throw Error(path.string() + ": malformed header: truncated");
  const std::string_view header(reinterpret_cast<const char*>(bytes.data()) + 10, header_len);

  std::string descr;
  bool fortran = false;
  NpyArray array;
  detail::NpyHeaderParser(header, path).parse(descr, fortran, array.shape);
  if (descr != "<f4") throw Error(path.string() + ": malformed header: dtype '" + descr + "' is not '<f4'");
  if (fortran) throw Error(path.string() + ": malformed header: Fortran order is not supported");
  if (array.shape.empty()) throw Error(path.string() + ": malformed header: scalar arrays are not supported");

  const std::size_t count = detail::checked_product(array.shape, path);
  const std::size_t payload = bytes.size() - 10 - header_len;
  if (payload != count * 4) {
    throw Error(path.string() + ": payload is " + std::to_string(payload) + " bytes, header implies " +
                std::to_string(count * 4));
  }
  array.data.resize(count);
  const unsigned char* p = bytes.data() + 10 + header_len;
  for (std::size_t i = 0; i < count; ++i) array.data[i] = detail::load_f32_le(p + 4 * i);
  return array;
}

inline void write_npy(const fs::path& path, std::span<const std::size_t> shape, std::span<const float> data) {
  std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) dict += ", ";
    dict += std::to_string(shape[i]);
  }
  dict += shape.size() == 1 ? ",), }" : "), }";
  // Pad with spaces so the payload starts on a 64-byte boundary; the header ends in '\n'.
  std::size_t total = 10 + dict.size() + 1;
  dict.append((64 - total % 64) % 64, ' ');
  dict += '\n';

  std::string header("\x93NUMPY\x01\x00", 8);
  header += static_cast<char>(dict.size() & 0xFFu);
  header += static_cast<char>((dict.size() >> 8) & 0xFFu);
  header += dict;

  std::vector<unsigned char> payload(data.size() * 4);
  for (std::size_t i = 0; i < data.size(); ++i) detail::store_f32_le(data[i], payload.data() + 4 * i);
  detail::write_file(path, header, payload);
}

// ---------------------------------------------------------------------------
// PFM (grayscale float)

namespace detail {

inline ScoreMap read_pfm(const fs::path& path, const std::vector<unsigned char>& bytes) {
  std::size_t pos = 0;
  int fields = 0;
  // Magic, width, height and scale, separated by whitespace.
  std::string tokens[4];
  while (fields < 4 && pos < bytes.size()) {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) tokens[fields] += static_cast<char>(bytes[pos++]);
    ++fields;
  }
  if (fields < 4 || pos >= bytes.size() || tokens[0] != "Pf") throw Error(path.string() + ": malformed PFM header");
  ++pos;  // single whitespace before the payload
  long long w = 0, h = 0;
  double scale = 0;
  try {
    w = std::stoll(tokens[1]);
    h = std::stoll(tokens[2]);
    scale = std::stod(tokens[3]);
  } catch (const std::exception&) {
    throw Error(path.string() + ": malformed PFM header");
  }
  if (w < 1 || h < 1) throw Error(path.string() + ": malformed PFM header: bad dimensions");
  if (scale >= 0) throw Error(path.string() + ": only little-endian PFM (negative scale) is supported");
  const std::array<std::size_t, 2> dims{static_cast<std::size_t>(h), static_cast<std::size_t>(w)};
  const std::size_t count = checked_product(dims, path);
  if (bytes.size() - pos != count * 4) throw Error(path.string() + ": PFM payload size mismatch");
  std::vector<float> values(count);
  // PFM rows run bottom to top.
  for (std::size_t y = 0; y < dims[0]; ++y) {
    const std::size_t src_row = dims[0] - 1 - y;
    for (std::size_t x = 0; x < dims[1]; ++x) {
      values[y * dims[1] + x] = load_f32_le(bytes.data() + pos + 4 * (src_row * dims[1] + x));
    }
  }
  return ScoreMap(static_cast<int>(w), static_cast<int>(h), std::move(values));
}

inline void write_pfm(const ScoreMap& map, const fs::path& path) {
  const std::string header =
      "Pf\n" + std::to_string(map.width()) + " " + std::to_string(map.height()) + "\n-1.0\n";
  const auto w = static_cast<std::size_t>(map.width());
  const auto h = static_cast<std::size_t>(map.height());
  std::vector<unsigned char> payload(map.size() * 4);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      store_f32_le(map[(h - 1 - y) * w + x], payload.data() + 4 * (y * w + x));
    }
  }
  write_file(path, header, payload);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// 8-bit rasters: PNG via libpng's simplified API, PGM/PPM by hand.

struct Raw8 {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;
};

namespace detail {

inline Raw8 read_png(const fs::path& path, int channels) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw Error(path.string() + ": " + image.message);
  }
  const auto source_format = image.format;
  if (channels == 1 && (source_format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_ALPHA | PNG_FORMAT_FLAG_LINEAR))) {
    png_image_free(&image);
    throw Error(path.string() + ": expected an 8-bit single-channel PNG");
  }
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Raw8 raw;
  raw.width = static_cast<int>(image.width);
  raw.height = static_cast<int>(image.height);
  raw.channels = channels;
  raw.data.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, raw.data.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    throw Error(path.string() + ": " + message);
  }
  return raw;
}

inline void write_png(const fs::path& path, const Raw8& raw) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(raw.width);
  image.height = static_cast<png_uint_32>(raw.height);
  image.format = raw.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, raw.data.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    throw Error(path.string() + ": " + message);
  }
}

// Netpbm P5/P6 with maxval <= 255.
inline Raw8 read_pnm(const fs::path& path, const std::vector<unsigned char>& bytes, int channels) {
  std::size_t pos = 2;
  auto next_token = [&]() -> long long {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) tok += static_cast<char>(bytes[pos++]);
    if (tok.empty() || tok.size() > 9) throw Error(path.string() + ": malformed PNM header");
    return std::stoll(tok);
  };
  Raw8 raw;
  const long long w = next_token(), h = next_token(), maxval = next_token();
  if (w < 1 || h < 1 || maxval < 1 || maxval > 255) throw Error(path.string() + ": unsupported PNM header");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw Error(path.string() + ": malformed PNM header");
  ++pos;
  const std::array<std::size_t, 3> dims{static_cast<std::size_t>(w), static_cast<std::size_t>(h),
                                        static_cast<std::size_t>(channels)};
  const std::size_t count = checked_product(dims, path);
  if (bytes.size() - pos != count) throw Error(path.string() + ": PNM payload size mismatch");
  raw.width = static_cast<int>(w);
  raw.height = static_cast<int>(h);
  raw.channels = channels;
  raw.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return raw;
}

inline void write_pnm(const fs::path& path, const Raw8& raw) {
  const std::string header = std::string(raw.channels == 1 ? "P5\n" : "P6\n") + std::to_string(raw.width) + " " +
                             std::to_string(raw.height) + "\n255\n";
  write_file(path, header, raw.data);
}

inline Raw8 read_raw8(const fs::path& path, int channels) {
  const auto bytes = read_file(path);
  if (has_prefix(bytes, "\x89PNG")) return read_png(path, channels);
  if (has_prefix(bytes, channels == 1 ? "P5" : "P6")) return read_pnm(path, bytes, channels);
  throw Error(path.string() + ": unrecognized image format");
}

inline void write_raw8(const fs::path& path, const Raw8& raw) {
  const auto ext = lower_extension(path);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
    write_pnm(path, raw);
  } else {
    write_png(path, raw);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Typed readers and writers

inline ScoreMap read_scoremap(const fs::path& path) {
  const auto bytes = detail::read_file(path);
  if (detail::has_prefix(bytes, "Pf")) return detail::read_pfm(path, bytes);
  auto array = read_npy(path);
  if (array.shape.size() != 2) throw Error(path.string() + ": score map must have shape (H, W)");
  if (array.shape[0] > std::numeric_limits<int>::max() || array.shape[1] > std::numeric_limits<int>::max()) {
    throw Error(path.string() + ": dimension overflow");
  }
  try {
    return ScoreMap(static_cast<int>(array.shape[1]), static_cast<int>(array.shape[0]), std::move(array.data));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

/// Writes NPY unless the extension is ".pfm".
inline void write_scoremap(const ScoreMap& map, const fs::path& path) {
  if (detail::lower_extension(path) == ".pfm") {
    detail::write_pfm(map, path);
    return;
  }
  const std::array<std::size_t, 2> shape{static_cast<std::size_t>(map.height()),
                                         static_cast<std::size_t>(map.width())};
  write_npy(path, shape, map.values());
}

inline void write_confidence_map(const ConfidenceMap& map, const fs::path& path) {
  const std::array<std::size_t, 2> shape{static_cast<std::size_t>(map.height()),
                                         static_cast<std::size_t>(map.width())};
  write_npy(path, shape, map.values());
}

inline LogitStack read_logits(const fs::path& path) {
  auto array = read_npy(path);
  if (array.shape.size() != 3) throw Error(path.string() + ": logits must have shape (C, H, W)");
  for (auto d : array.shape) {
    if (d > static_cast<std::size_t>(std::numeric_limits<int>::max())) throw Error(path.string() + ": dimension overflow");
  }
  try {
    return LogitStack(static_cast<int>(array.shape[0]), static_cast<int>(array.shape[2]),
                      static_cast<int>(array.shape[1]), std::move(array.data));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

inline void write_logits(const LogitStack& logits, const fs::path& path) {
  const std::array<std::size_t, 3> shape{static_cast<std::size_t>(logits.classes()),
                                         static_cast<std::size_t>(logits.height()),
                                         static_cast<std::size_t>(logits.width())};
  write_npy(path, shape, logits.values());
}

inline LabelMask read_labelmask(const fs::path& path) {
  auto raw = detail::read_raw8(path, 1);
  try {
    return LabelMask(raw.width, raw.height, std::move(raw.data));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

inline void write_labelmask(const LabelMask& mask, const fs::path& path) {
  detail::write_raw8(path, {mask.width(), mask.height(), 1, {mask.values().begin(), mask.values().end()}});
}

inline BinaryMask read_binarymask(const fs::path& path) {
  auto raw = detail::read_raw8(path, 1);
  for (std::size_t i = 0; i < raw.data.size(); ++i) {
    auto& v = raw.data[i];
    if (v != 0 && v != 1 && v != 255) {
      throw Error(path.string() + ": binary mask value " + std::to_string(v) + " at index " + std::to_string(i) +
                  " not in {0,1,255}");
    }
    v = v != 0 ? 1 : 0;
  }
  return BinaryMask(raw.width, raw.height, std::move(raw.data));
}

inline void write_binarymask(const BinaryMask& mask, const fs::path& path) {
  Raw8 raw{mask.width(), mask.height(), 1, {}};
  raw.data.reserve(mask.size());
  for (auto v : mask.values()) raw.data.push_back(v ? 255 : 0);
  detail::write_raw8(path, raw);
}

inline RgbImage read_image(const fs::path& path) {
  const auto raw = detail::read_raw8(path, 3);
  std::vector<Rgb> pixels(static_cast<std::size_t>(raw.width) * static_cast<std::size_t>(raw.height));
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = {raw.data[3 * i], raw.data[3 * i + 1], raw.data[3 * i + 2]};
  }
  return RgbImage(raw.width, raw.height, std::move(pixels));
}

inline void write_image(const RgbImage& image, const fs::path& path) {
  Raw8 raw{image.width(), image.height(), 3, {}};
  raw.data.reserve(image.size() * 3);
  for (const auto& p : image.values()) {
    raw.data.push_back(p.r);
    raw.data.push_back(p.g);
    raw.data.push_back(p.b);
  }
  detail::write_raw8(path, raw);
}

/// Writes an arbitrary 8-bit grayscale raster (visualizations).
inline void write_gray8(const Raster<std::uint8_t>& gray, const fs::path& path) {
  detail::write_raw8(path, {gray.width(), gray.height(), 1, {gray.values().begin(), gray.values().end()}});
}

}  // namespace s2m
