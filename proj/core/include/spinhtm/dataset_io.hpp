#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spinhtm::dataset {

/// Row-major grey-level image. Every pixel lies in [0, 2^bit_depth - 1].
struct Image {
  int width = 0;
  int height = 0;
  int bit_depth = 8;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int depth = 8);

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  int max_value() const { return (1 << bit_depth) - 1; }

  bool operator==(const Image&) const = default;
};

/// One object moving smoothly across the visual field.
struct TrainingSequence {
  std::vector<Image> frames;
  std::optional<int> label;
  std::uint64_t source_id = 0;
};

struct ScanParams {
  int max_shift = 2;
  int shift_step = 1;
  double rotation_range_deg = 10.0;
  double rotation_step_deg = 5.0;
  std::vector<double> scale_levels{0.9, 1.0, 1.1};

  void validate() const;
};

/// Position of a frame inside the scan grid; each axis is an index.
struct ScanCoordinate {
  int scale = 0;
  int rotation = 0;
  int shift_y = 0;
  int shift_x = 0;

  bool operator==(const ScanCoordinate&) const = default;
};

// --- IDX -------------------------------------------------------------------

inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;

std::vector<Image> parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> serialize_idx_images(std::span<const Image> images);
std::vector<std::uint8_t> serialize_idx_labels(std::span<const std::uint8_t> labels);

/// Reads a file, inflating it when it carries a gzip header.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> bytes);

struct LabeledImages {
  std::vector<Image> images;
  std::vector<std::uint8_t> labels;
};

LabeledImages load_idx_pair(const std::filesystem::path& images, const std::filesystem::path& labels);

// --- image ops ---------------------------------------------------------------

/// Area-weighted resampling. Exact for identity, preserves constant fields.
Image scale_image(const Image& img, int target_w, int target_h);

/// Keeps the top `bits` bits: q(x) = x >> (depth - bits). For bits = 1 this is
/// a threshold at the midpoint of the source range.
Image quantize_image(const Image& img, int bits);

/// Scale to the visual field and binarize, as used for the character data.
Image prepare_character(const Image& raw, int field_w, int field_h);

// --- scans -------------------------------------------------------------------

int shift_positions(const ScanParams& p);
int rotation_positions(const ScanParams& p);

/// Scan order over (scale, rotation, shift_y, shift_x). A reflected mixed-radix
/// Gray code: every axis sweeps back and forth, so adjacent frames differ in
/// exactly one coordinate by one step.
std::vector<ScanCoordinate> scan_order(const ScanParams& p);

/// Renders one frame: scale and rotate about the field centre, then shift.
/// Binary images are resampled nearest-neighbour, grey images bilinearly;
/// out-of-field samples read as 0.
Image transform_image(const Image& img, double scale, double rotation_deg, int dx, int dy);

TrainingSequence generate_training_sequence(const Image& img, const ScanParams& p,
                                            std::optional<int> label = std::nullopt,
                                            std::uint64_t source_id = 0);

}  // namespace spinhtm::dataset
