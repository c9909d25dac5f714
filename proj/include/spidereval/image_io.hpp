#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace spidereval {

/// Dense 2-D activation map, row-major, top row first.
struct FloatGrid {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;

  FloatGrid() = default;
  FloatGrid(std::size_t w, std::size_t h, std::vector<double> v);

  double at(std::size_t x, std::size_t y) const { return values[y * width + x]; }
};

/// Pixel mask, row-major, top row first; true marks a spider pixel.
struct BinaryMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> bits;  // 0 or 1

  BinaryMask() = default;
  BinaryMask(std::size_t w, std::size_t h, std::vector<std::uint8_t> b);

  std::size_t count() const;
};

/// Grayscale PFM ("Pf"). A negative scale means little-endian samples; PFM
/// stores rows bottom-to-top, which is flipped to top-down on read.
FloatGrid read_pfm(std::istream& in);
FloatGrid load_float_grid(const std::filesystem::path& path);
/// Canonical encoding: "Pf\n<w> <h>\n-1.0\n" followed by little-endian
/// float32 rows, bottom row first.
void write_pfm(std::ostream& out, const FloatGrid& grid);
void save_float_grid(const std::filesystem::path& path, const FloatGrid& grid);

/// Binary PGM ("P5", maxval 255); values >= 128 become true.
BinaryMask read_pgm_mask(std::istream& in);
BinaryMask load_mask(const std::filesystem::path& path);
/// Canonical encoding: "P5\n<w> <h>\n255\n" with bytes 0 / 255.
void write_pgm_mask(std::ostream& out, const BinaryMask& mask);
void save_mask(const std::filesystem::path& path, const BinaryMask& mask);

}  // namespace spidereval
