#include <openssl/evp.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vtfuse/io.hpp"

namespace vtf::io {
namespace fs = std::filesystem;
namespace {

// Minimal cursor over a binary header: whitespace-separated ASCII tokens,
// then a single whitespace byte before the payload.
struct HeaderReader {
  std::string_view bytes;
  size_t pos = 0;

  std::string token() {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw IoError("truncated image header");
    return std::string(bytes.substr(start, pos - start));
  }
  int integer() {
    const std::string t = token();
    int v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size() || v < 0) throw IoError("bad integer '" + t + "' in image header");
    return v;
  }
  std::string_view payload(size_t n) {
    if (pos >= bytes.size()) throw IoError("image payload missing");
    ++pos;  // single whitespace separator
    if (bytes.size() - pos < n) throw IoError("image payload truncated");
    return bytes.substr(pos, n);
  }
};

std::string netpbm_header(const char* magic, int w, int h) {
  return std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("SHA-256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

std::string encode_pfm(const ImageD& img) {
  std::string out = "Pf\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n-1.0\n";
  const size_t header = out.size();
  out.resize(header + img.size() * 4);
  char* dst = out.data() + header;
  for (int y = img.height() - 1; y >= 0; --y)
    for (int x = 0; x < img.width(); ++x) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(img(x, y)));
      for (int b = 0; b < 4; ++b) *dst++ = static_cast<char>((bits >> (8 * b)) & 0xFF);
    }
  return out;
}

ImageD decode_pfm(std::string_view bytes) {
  HeaderReader hr{bytes};
  if (hr.token() != "Pf") throw IoError("not a grayscale PFM file");
  const int w = hr.integer();
  const int h = hr.integer();
  const std::string scale_tok = hr.token();
  const double scale = std::stod(scale_tok);
  const bool little = scale < 0.0;
  const std::string_view data = hr.payload(static_cast<size_t>(w) * h * 4);
  ImageD img(w, h);
  size_t k = 0;
  for (int y = h - 1; y >= 0; --y)
    for (int x = 0; x < w; ++x, k += 4) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        const auto byte = static_cast<std::uint32_t>(static_cast<unsigned char>(data[k + b]));
        bits |= little ? byte << (8 * b) : byte << (8 * (3 - b));
      }
      img(x, y) = std::bit_cast<float>(bits);
    }
  return img;
}

void write_pfm(const fs::path& path, const ImageD& img) { write_file_atomic(path, encode_pfm(img)); }
ImageD read_pfm(const fs::path& path) { return decode_pfm(read_file(path)); }

void write_pgm(const fs::path& path, const Mask& img) {
  std::string out = netpbm_header("P5", img.width(), img.height());
  out.append(reinterpret_cast<const char*>(img.pixels().data()), img.size());
  write_file_atomic(path, out);
}

Mask read_pgm(const fs::path& path) {
  const std::string bytes = read_file(path);
  HeaderReader hr{bytes};
  if (hr.token() != "P5") throw IoError(path.string() + ": not a binary PGM file");
  const int w = hr.integer();
  const int h = hr.integer();
  if (hr.integer() != 255) throw IoError(path.string() + ": only 8-bit PGM is supported");
  const std::string_view data = hr.payload(static_cast<size_t>(w) * h);
  Mask img(w, h);
  std::memcpy(img.pixels().data(), data.data(), data.size());
  return img;
}

void write_ppm(const fs::path& path, const ImageRgb& img) {
  std::string out = netpbm_header("P6", img.width(), img.height());
  for (size_t i = 0; i < img.size(); ++i)
    for (int c = 0; c < 3; ++c) out.push_back(static_cast<char>(to_byte(img[i][c])));
  write_file_atomic(path, out);
}

ImageRgb read_ppm(const fs::path& path) {
  const std::string bytes = read_file(path);
  HeaderReader hr{bytes};
  if (hr.token() != "P6") throw IoError(path.string() + ": not a binary PPM file");
  const int w = hr.integer();
  const int h = hr.integer();
  if (hr.integer() != 255) throw IoError(path.string() + ": only 8-bit PPM is supported");
  const std::string_view data = hr.payload(static_cast<size_t>(w) * h * 3);
  ImageRgb img(w, h);
  for (size_t i = 0; i < img.size(); ++i)
    for (int c = 0; c < 3; ++c) img[i][c] = static_cast<unsigned char>(data[3 * i + c]) / 255.0;
  return img;
}

}  // namespace vtf::io
