#include "spidereval/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "spidereval/csv.hpp"
#include "spidereval/error.hpp"

namespace spidereval {

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string token;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c)) {
    token.push_back(static_cast<char>(c));
    c = in.get();
  }
  // `c` is the single whitespace byte that terminates the header field.
  if (token.empty()) throw ValidationError("truncated image header");
  return token;
}

std::size_t positive_dimension(const std::string& token, const char* what) {
  const auto v = csv::parse_int(token);
  if (!v || *v <= 0) throw ValidationError(std::string("invalid ") + what + " '" + token + "'");
  return static_cast<std::size_t>(*v);
}

std::uint32_t byteswap32(std::uint32_t v) {
  return ((v & 0xffu) << 24u) | ((v & 0xff00u) << 8u) | ((v >> 8u) & 0xff00u) | (v >> 24u);
}

}  // namespace

FloatGrid::FloatGrid(std::size_t w, std::size_t h, std::vector<double> v)
    : width(w), height(h), values(std::move(v)) {
  if (w == 0 || h == 0) throw ValidationError("grid dimensions must be positive");
  if (values.size() != w * h) {
    throw ValidationError("grid has " + std::to_string(values.size()) + " values, expected " +
                          std::to_string(w * h));
  }
  for (const double x : values) {
    if (!std::isfinite(x)) throw ValidationError("grid contains a non-finite value");
  }
}

BinaryMask::BinaryMask(std::size_t w, std::size_t h, std::vector<std::uint8_t> b)
    : width(w), height(h), bits(std::move(b)) {
  if (w == 0 || h == 0) throw ValidationError("mask dimensions must be positive");
  if (bits.size() != w * h) {
    throw ValidationError("mask has " + std::to_string(bits.size()) + " pixels, expected " +
                          std::to_string(w * h));
  }
  for (auto& bit : bits) bit = bit ? 1 : 0;
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

FloatGrid read_pfm(std::istream& in) {
  const auto magic = header_token(in);
  if (magic != "Pf") {
    throw ValidationError(magic == "PF" ? "colour PFM ('PF') not supported; expected 'Pf'"
                                        : "bad PFM magic '" + magic + "'");
  }
  const auto width = positive_dimension(header_token(in), "PFM width");
  const auto height = positive_dimension(header_token(in), "PFM height");
  const auto scale = csv::parse_double(header_token(in));
  if (!scale || *scale == 0.0 || !std::isfinite(*scale)) throw ValidationError("bad PFM scale");
  const bool little_endian = *scale < 0.0;

  const std::size_t count = width * height;
  std::vector<std::uint32_t> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * 4));
  if (static_cast<std::size_t>(in.gcount()) != count * 4) {
    throw ValidationError("PFM payload shorter than declared " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
  if (in.peek() != EOF) throw ValidationError("PFM payload longer than declared size");

  const bool host_little = std::endian::native == std::endian::little;
  std::vector<double> values(count);
  for (std::size_t row = 0; row < height; ++row) {
    const std::size_t dst_row = height - 1 - row;
    for (std::size_t x = 0; x < width; ++x) {
      std::uint32_t bits = raw[row * width + x];
      if (little_endian != host_little) bits = byteswap32(bits);
      const float f = std::bit_cast<float>(bits);
      if (!std::isfinite(f)) throw ValidationError("PFM contains a non-finite value");
      values[dst_row * width + x] = f;
    }
  }
  return FloatGrid(width, height, std::move(values));
}

FloatGrid load_float_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'", path.string());
  try {
    return read_pfm(in);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what(), path.string());
  }
}

void write_pfm(std::ostream& out, const FloatGrid& grid) {
  out << "Pf\n" << grid.width << ' ' << grid.height << "\n-1.0\n";
  const bool host_little = std::endian::native == std::endian::little;
  std::vector<std::uint32_t> raw(grid.width * grid.height);
  for (std::size_t row = 0; row < grid.height; ++row) {
    const std::size_t src_row = grid.height - 1 - row;
    for (std::size_t x = 0; x < grid.width; ++x) {
      auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(grid.at(x, src_row)));
      if (!host_little) bits = byteswap32(bits);
      raw[row * grid.width + x] = bits;
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * 4));
}

void save_float_grid(const std::filesystem::path& path, const FloatGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'", path.string());
  write_pfm(out, grid);
}

BinaryMask read_pgm_mask(std::istream& in) {
  const auto magic = header_token(in);
  if (magic != "P5") throw ValidationError("bad PGM magic '" + magic + "' (expected P5)");
  const auto width = positive_dimension(header_token(in), "PGM width");
  const auto height = positive_dimension(header_token(in), "PGM height");
  const auto maxval = csv::parse_int(header_token(in));
  if (!maxval || *maxval != 255) throw ValidationError("PGM maxval must be 255");

  const std::size_t count = width * height;
  std::vector<std::uint8_t> bytes(count);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count) {
    throw ValidationError("PGM payload shorter than declared " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
  if (in.peek() != EOF) throw ValidationError("PGM payload longer than declared size");
  for (auto& b : bytes) b = b >= 128 ? 1 : 0;
  return BinaryMask(width, height, std::move(bytes));
}

BinaryMask load_mask(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'", path.string());
  try {
    return read_pgm_mask(in);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what(), path.string());
  }
}

void write_pgm_mask(std::ostream& out, const BinaryMask& mask) {
  out << "P5\n" << mask.width << ' ' << mask.height << "\n255\n";
  std::vector<char> bytes(mask.bits.size());
  std::transform(mask.bits.begin(), mask.bits.end(), bytes.begin(),
                 [](std::uint8_t b) { return static_cast<char>(b ? 0xff : 0x00); });
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void save_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'", path.string());
  write_pgm_mask(out, mask);
}

}  // namespace spidereval
