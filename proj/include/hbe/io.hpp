#pragma once

// PGM (binary P5, 8/16-bit big-endian) and PFM (grayscale "Pf", float32,
// endianness from the sign of the scale field, scanlines bottom-to-top).
//
// PGM samples are read and written as raw integer values (no rescaling by
// maxval). Writing rounds to the nearest integer and clamps to [0, maxval].

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "hbe/image.hpp"

namespace hbe {

using Bytes = std::vector<unsigned char>;

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open '" + path.string() + "' for reading");
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ArgumentError("failed writing '" + path.string() + "'");
}

namespace detail {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  std::size_t pos() const { return pos_; }

  void skip_space_and_comments(bool comments) {
    while (pos_ < bytes_.size()) {
      const unsigned char ch = bytes_[pos_];
      if (comments && ch == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(ch)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string token(bool comments) {
    skip_space_and_comments(comments);
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#') ++pos_;
    if (start == pos_) throw ParseError("unexpected end of header", start);
    return std::string(reinterpret_cast<const char*>(bytes_.data()) + start, pos_ - start);
  }

  long integer(bool comments, long lo, long hi, const char* what) {
    const std::size_t at = pos_;
    std::string t = token(comments);
    long v = 0;
    for (char ch : t) {
      if (ch < '0' || ch > '9') throw ParseError(std::string("invalid ") + what, at);
      v = v * 10 + (ch - '0');
      if (v > hi) throw ParseError(std::string(what) + " out of range", at);
    }
    if (v < lo) throw ParseError(std::string(what) + " out of range", at);
    return v;
  }

  double real() {
    const std::size_t at = pos_;
    std::string t = token(false);
    try {
      std::size_t used = 0;
      double v = std::stod(t, &used);
      if (used != t.size()) throw ParseError("invalid scale", at);
      return v;
    } catch (const std::logic_error&) {
      throw ParseError("invalid scale", at);
    }
  }

  /// Exactly one whitespace byte separates the header from the raster.
  void single_whitespace() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
      throw ParseError("missing whitespace after header", pos_);
    ++pos_;
  }

 private:
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

struct PgmImage {
  ImageGrid image;
  int maxval = 255;
};

inline PgmImage parse_pgm(std::span<const unsigned char> bytes) {
  detail::HeaderReader hr(bytes);
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw ParseError("not a binary PGM (P5)", 0);
  hr.token(false);
  const long w = hr.integer(true, 1, 1 << 20, "width");
  const long h = hr.integer(true, 1, 1 << 20, "height");
  const long maxval = hr.integer(true, 1, 65535, "maxval");
  hr.single_whitespace();
  const std::size_t bpp = maxval < 256 ? 1 : 2;
  const std::size_t start = hr.pos();
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * bpp;
  if (bytes.size() - start < need)
    throw ParseError("truncated raster: expected " + std::to_string(need) + " bytes", bytes.size());
  PgmImage out{ImageGrid(static_cast<int>(w), static_cast<int>(h)), static_cast<int>(maxval)};
  for (std::size_t i = 0; i < out.image.size(); ++i) {
    const unsigned char* p = bytes.data() + start + i * bpp;
    out.image.data[i] = bpp == 1 ? p[0] : static_cast<double>((p[0] << 8) | p[1]);
  }
  return out;
}

inline Bytes encode_pgm(const ImageGrid& img, int bits = 16) {
  if (bits != 8 && bits != 16) throw ArgumentError("encode_pgm: bit depth must be 8 or 16");
  const int maxval = bits == 8 ? 255 : 65535;
  std::string header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n" +
                       std::to_string(maxval) + "\n";
  Bytes out(header.begin(), header.end());
  for (double v : img.data) {
    if (!std::isfinite(v)) throw ArgumentError("encode_pgm: non-finite sample");
    const long q = std::clamp(std::lround(v), 0L, static_cast<long>(maxval));
    if (bits == 16) out.push_back(static_cast<unsigned char>(q >> 8));
    out.push_back(static_cast<unsigned char>(q & 0xff));
  }
  return out;
}

inline ImageGrid parse_pfm(std::span<const unsigned char> bytes) {
  detail::HeaderReader hr(bytes);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != 'f' && bytes[1] != 'F'))
    throw ParseError("not a PFM file", 0);
  if (bytes[1] == 'F') throw ParseError("color PFM is not supported", 1);
  hr.token(false);
  const long w = hr.integer(false, 1, 1 << 20, "width");
  const long h = hr.integer(false, 1, 1 << 20, "height");
  const std::size_t scale_at = hr.pos();
  const double scale = hr.real();
  if (scale == 0.0 || !std::isfinite(scale)) throw ParseError("PFM scale must be non-zero", scale_at);
  hr.single_whitespace();
  const bool little = scale < 0.0;
  const std::size_t start = hr.pos();
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 4;
  if (bytes.size() - start < need)
    throw ParseError("truncated raster: expected " + std::to_string(need) + " bytes", bytes.size());
  ImageGrid img(static_cast<int>(w), static_cast<int>(h));
  const unsigned char* p = bytes.data() + start;
  for (int r = 0; r < img.height; ++r) {
    const int row = img.height - 1 - r;  // bottom-to-top
    for (int c = 0; c < img.width; ++c, p += 4) {
      std::uint32_t u = little ? (std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
                                  std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24)
                               : (std::uint32_t(p[3]) | std::uint32_t(p[2]) << 8 |
                                  std::uint32_t(p[1]) << 16 | std::uint32_t(p[0]) << 24);
      img.at(row, c) = static_cast<double>(std::bit_cast<float>(u));
    }
  }
  return img;
}

/// Little-endian PFM (scale -1).
inline Bytes encode_pfm(const ImageGrid& img) {
  std::string header = "Pf\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n-1.0\n";
  Bytes out(header.begin(), header.end());
  out.reserve(out.size() + img.size() * 4);
  for (int r = img.height - 1; r >= 0; --r)
    for (int c = 0; c < img.width; ++c) {
      const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(img.at(r, c)));
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>((u >> (8 * b)) & 0xff));
    }
  return out;
}

/// Dispatches on the magic number (P5 or Pf).
inline ImageGrid read_image(const std::filesystem::path& path) {
  Bytes bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return parse_pgm(bytes).image;
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == 'f' || bytes[1] == 'F')) return parse_pfm(bytes);
  throw ParseError("unrecognized image format in '" + path.string() + "'", 0);
}

/// Dispatches on the extension: .pfm (float32) or .pgm (`pgm_bits` deep).
inline void write_image(const std::filesystem::path& path, const ImageGrid& img, int pgm_bits = 16) {
  const std::string ext = path.extension().string();
  if (ext == ".pfm") {
    write_file(path, encode_pfm(img));
  } else if (ext == ".pgm") {
    write_file(path, encode_pgm(img, pgm_bits));
  } else {
    throw ArgumentError("write_image: unsupported extension '" + ext + "' (use .pgm or .pfm)");
  }
}

/// Masks are stored as 8-bit PGM (0 / 255); reading normalizes by maxval.
inline ImageGrid read_mask(const std::filesystem::path& path) {
  Bytes bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') {
    PgmImage pgm = parse_pgm(bytes);
    for (double& v : pgm.image.data) v /= pgm.maxval;
    return pgm.image;
  }
  return parse_pfm(bytes);
}

inline void write_mask(const std::filesystem::path& path, const ImageGrid& mask) {
  if (path.extension() == ".pfm") return write_file(path, encode_pfm(mask));
  ImageGrid scaled = mask;
  for (double& v : scaled.data) v *= 255.0;
  write_file(path, encode_pgm(scaled, 8));
}

/// Rounds every sample to float32, the precision of PFM files.
inline ImageGrid to_float_precision(ImageGrid img) {
  for (double& v : img.data) v = static_cast<double>(static_cast<float>(v));
  return img;
}

}  // namespace hbe
