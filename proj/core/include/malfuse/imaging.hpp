#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "malfuse/corpus.hpp"
#include "malfuse/feature_block.hpp"

namespace malfuse {

// Row-major grayscale image.  Pixels are doubles so resampling can keep full
// precision; values are nominally in [0, 255].
struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  double at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
  double& at(std::size_t r, std::size_t c) { return pixels[r * width + c]; }
};

// Image width bucket for a byte sequence of length n: longer files get wider
// images so aspect ratios stay manageable.
std::size_t image_width_for(std::size_t n_bytes);

// Renders bytes as a grayscale image: one byte per pixel, row-major, width
// from image_width_for (or `width` when nonzero), height = ceil(n/width),
// zero-padded tail.  Undefined bytes render as 0.
GrayImage bytes_to_image(const std::vector<std::uint8_t>& bytes,
                         std::size_t width = 0);
GrayImage bytes_to_image(const HexDump& dump, std::size_t width = 0);

// Lanczos-3 resampling with the standard convention: output pixel i samples
// around input coordinate (i + 0.5) * (in/out); on downscale the kernel is
// stretched by the scale factor; windows are clipped at the borders and the
// weights renormalized.  Separable (horizontal pass, then vertical).
GrayImage resize_lanczos(const GrayImage& src, std::size_t out_height,
                         std::size_t out_width);

// Rounds to the nearest integer and clamps to [0, 255].
std::vector<std::uint8_t> quantize_u8(const GrayImage& img);

// Binary PGM (P5) export for eyeballing images.
void write_pgm(const GrayImage& img, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Texture features
// ---------------------------------------------------------------------------

struct HaralickParams {
  // Gray levels after quantization (level = pixel * levels / 256).
  int levels = 32;
  // (row, col) displacement per co-occurrence direction; features are
  // averaged over all offsets.
  std::vector<std::pair<int, int>> offsets = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
};

// The 13 classic co-occurrence statistics, averaged over the offsets:
// energy, contrast, correlation, variance, homogeneity, sum average,
// sum variance (about the sum average), sum entropy, entropy, difference
// variance, difference entropy, IMC1, IMC2.  GLCMs are symmetrized and
// normalized; entropies use log2; degenerate denominators yield 0.
std::vector<double> haralick_features(const GrayImage& img,
                                      const HaralickParams& params = {});

// 256-bin histogram of 8-neighbor local binary patterns (radius 1).
// Neighbors are compared clockwise from the top-left; the first comparison
// is the most significant bit; bit=1 when neighbor >= center.  Computed over
// interior pixels and normalized to sum 1.  Images smaller than 3x3 yield
// all zeros.
std::vector<double> lbp_histogram(const GrayImage& img);

// Feature-block wrappers over the byte image of a dump.
FeatureBlock byte_haralick(const HexDump& dump,
                           const HaralickParams& params = {});
FeatureBlock byte_lbp(const HexDump& dump);

// ASM_PIXEL: the first `count` raw bytes of a listing file interpreted as
// pixel intensities, zero-padded when the file is shorter.
FeatureBlock asm_pixels(const std::filesystem::path& asm_path,
                        std::size_t count = 800);

}  // namespace malfuse
