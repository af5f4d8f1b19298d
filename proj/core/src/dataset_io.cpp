#include "spinhtm/dataset_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>

#include "spinhtm/error.hpp"

namespace spinhtm::dataset {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

// Returns the dimension fields after validating magic and header length.
std::vector<std::uint32_t> read_idx_header(std::span<const std::uint8_t> bytes,
                                           std::uint32_t expected_magic) {
  if (bytes.size() < 4) throw Error(ErrorKind::TruncatedFile, "IDX: missing magic number");
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != expected_magic) {
    throw Error(ErrorKind::BadMagic, "IDX: unexpected magic number " + std::to_string(magic) +
                                         " (expected " + std::to_string(expected_magic) + ")");
  }
  const std::size_t ndims = magic & 0xFFu;
  if (bytes.size() < 4 + 4 * ndims) throw Error(ErrorKind::TruncatedFile, "IDX: truncated header");
  std::vector<std::uint32_t> dims(ndims);
  for (std::size_t i = 0; i < ndims; ++i) dims[i] = read_be32(bytes, 4 + 4 * i);
  return dims;
}

std::size_t checked_payload(const std::vector<std::uint32_t>& dims) {
  std::size_t total = 1;
  for (auto d : dims) {
    if (d != 0 && total > std::numeric_limits<std::size_t>::max() / d) {
      throw Error(ErrorKind::DimensionOverflow, "IDX: dimension product overflows");
    }
    total *= d;
  }
  return total;
}

void check_exact_size(std::span<const std::uint8_t> bytes, std::size_t header, std::size_t payload) {
  if (bytes.size() - header < payload) {
    throw Error(ErrorKind::TruncatedFile, "IDX: declared " + std::to_string(payload) +
                                              " payload bytes, found " +
                                              std::to_string(bytes.size() - header));
  }
  if (bytes.size() - header > payload) {
    throw Error(ErrorKind::TrailingData, "IDX: unexpected bytes after payload");
  }
}

}  // namespace

Image::Image(int w, int h, int depth)
    : width(w), height(h), bit_depth(depth), pixels(static_cast<std::size_t>(w) * h, 0) {}

void ScanParams::validate() const {
  if (max_shift < 0) throw Error(ErrorKind::InvalidArgument, "scan: max_shift must be >= 0");
  if (shift_step < 1) throw Error(ErrorKind::InvalidArgument, "scan: shift_step must be >= 1");
  if (rotation_range_deg < 0) throw Error(ErrorKind::InvalidArgument, "scan: rotation_range must be >= 0");
  if (!(rotation_step_deg > 0)) throw Error(ErrorKind::InvalidArgument, "scan: rotation_step must be > 0");
  if (scale_levels.empty()) throw Error(ErrorKind::InvalidArgument, "scan: need at least one scale level");
  for (double s : scale_levels) {
    if (!(s > 0)) throw Error(ErrorKind::InvalidArgument, "scan: scale factors must be > 0");
  }
}

// --- IDX -------------------------------------------------------------------

std::vector<Image> parse_idx_images(std::span<const std::uint8_t> bytes) {
  const auto dims = read_idx_header(bytes, kIdxImageMagic);
  const std::uint32_t count = dims[0], rows = dims[1], cols = dims[2];
  if (rows > 0x7FFF || cols > 0x7FFF) {
    throw Error(ErrorKind::DimensionOverflow, "IDX: image dimensions too large");
  }
  const std::size_t header = 4 + 4 * dims.size();
  const std::size_t payload = checked_payload(dims);
  check_exact_size(bytes, header, payload);

  std::vector<Image> images;
  images.reserve(count);
  const std::size_t stride = std::size_t{rows} * cols;
  for (std::size_t n = 0; n < count; ++n) {
    Image img(static_cast<int>(cols), static_cast<int>(rows), 8);
    const auto first = bytes.begin() + static_cast<std::ptrdiff_t>(header + n * stride);
    std::copy(first, first + static_cast<std::ptrdiff_t>(stride), img.pixels.begin());
    images.push_back(std::move(img));
  }
  return images;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  const auto dims = read_idx_header(bytes, kIdxLabelMagic);
  const std::size_t header = 4 + 4 * dims.size();
  check_exact_size(bytes, header, checked_payload(dims));
  std::vector<std::uint8_t> labels(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  for (auto l : labels) {
    if (l > 9) throw Error(ErrorKind::InvalidLabel, "IDX: label " + std::to_string(l) + " outside [0, 9]");
  }
  return labels;
}

std::vector<std::uint8_t> serialize_idx_images(std::span<const Image> images) {
  const int w = images.empty() ? 0 : images.front().width;
  const int h = images.empty() ? 0 : images.front().height;
  std::vector<std::uint8_t> out;
  out.reserve(16 + images.size() * static_cast<std::size_t>(w) * h);
  write_be32(out, kIdxImageMagic);
  write_be32(out, static_cast<std::uint32_t>(images.size()));
  write_be32(out, static_cast<std::uint32_t>(h));
  write_be32(out, static_cast<std::uint32_t>(w));
  for (const auto& img : images) {
    if (img.width != w || img.height != h) {
      throw Error(ErrorKind::InvalidArgument, "IDX: all images must share dimensions");
    }
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  }
  return out;
}

std::vector<std::uint8_t> serialize_idx_labels(std::span<const std::uint8_t> labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.size());
  write_be32(out, kIdxLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  // 16 + MAX_WBITS: expect a gzip wrapper.
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw Error(ErrorKind::Io, "gzip: inflateInit failed");
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());

  std::vector<std::uint8_t> out;
  std::uint8_t chunk[1 << 16];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk;
    zs.avail_out = sizeof(chunk);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw Error(ErrorKind::TruncatedFile, "gzip: corrupt or truncated stream");
    }
    out.insert(out.end(), chunk, chunk + (sizeof(chunk) - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw Error(ErrorKind::TruncatedFile, "gzip: stream ended early");
    }
  }
  inflateEnd(&zs);
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) return gunzip(bytes);
  return bytes;
}

LabeledImages load_idx_pair(const std::filesystem::path& images, const std::filesystem::path& labels) {
  LabeledImages out;
  out.images = parse_idx_images(read_file_bytes(images));
  out.labels = parse_idx_labels(read_file_bytes(labels));
  if (out.images.size() != out.labels.size()) {
    throw Error(ErrorKind::InvalidArgument, "IDX: image/label count mismatch between " +
                                                images.string() + " and " + labels.string());
  }
  return out;
}

// --- image ops ---------------------------------------------------------------

namespace {

struct Tap {
  int index;
  double weight;
};

// Overlap of output cell [o, o+1) * (src/dst) with each source cell.
std::vector<std::vector<Tap>> area_taps(int src, int dst) {
  std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(dst));
  const double ratio = static_cast<double>(src) / dst;
  for (int o = 0; o < dst; ++o) {
    const double lo = o * ratio, hi = (o + 1) * ratio;
    for (int s = static_cast<int>(std::floor(lo)); s < src && s < hi; ++s) {
      const double w = std::min<double>(hi, s + 1) - std::max<double>(lo, s);
      if (w > 1e-12) taps[o].push_back({s, w});
    }
  }
  return taps;
}

}  // namespace

Image scale_image(const Image& img, int target_w, int target_h) {
  if (target_w < 1 || target_h < 1) throw Error(ErrorKind::InvalidArgument, "scale_image: target dims must be >= 1");
  if (target_w == img.width && target_h == img.height) return img;
  const auto tx = area_taps(img.width, target_w);
  const auto ty = area_taps(img.height, target_h);
  Image out(target_w, target_h, img.bit_depth);
  for (int oy = 0; oy < target_h; ++oy) {
    for (int ox = 0; ox < target_w; ++ox) {
      double acc = 0, area = 0;
      for (const auto& [sy, wy] : ty[oy]) {
        for (const auto& [sx, wx] : tx[ox]) {
          acc += wx * wy * img.at(sx, sy);
          area += wx * wy;
        }
      }
      const long v = std::lround(acc / area);
      out.at(ox, oy) = static_cast<std::uint8_t>(std::clamp<long>(v, 0, img.max_value()));
    }
  }
  return out;
}

Image quantize_image(const Image& img, int bits) {
  if (bits < 1 || bits > img.bit_depth) {
    throw Error(ErrorKind::InvalidArgument, "quantize_image: bits must be in [1, source depth]");
  }
  Image out = img;
  out.bit_depth = bits;
  const int shift = img.bit_depth - bits;
  for (auto& p : out.pixels) p = static_cast<std::uint8_t>(p >> shift);
  return out;
}

Image prepare_character(const Image& raw, int field_w, int field_h) {
  return quantize_image(scale_image(raw, field_w, field_h), 1);
}

// --- scans -------------------------------------------------------------------

int shift_positions(const ScanParams& p) { return 2 * (p.max_shift / p.shift_step) + 1; }

int rotation_positions(const ScanParams& p) {
  if (p.rotation_range_deg == 0) return 1;
  return 2 * static_cast<int>(std::floor(p.rotation_range_deg / p.rotation_step_deg + 1e-9)) + 1;
}

std::vector<ScanCoordinate> scan_order(const ScanParams& p) {
  p.validate();
  const int radix[4] = {static_cast<int>(p.scale_levels.size()), rotation_positions(p),
                        shift_positions(p), shift_positions(p)};
  const std::size_t total = std::size_t(radix[0]) * radix[1] * radix[2] * radix[3];

  int digit[4] = {0, 0, 0, 0};
  int dir[4] = {1, 1, 1, 1};
  std::vector<ScanCoordinate> order;
  order.reserve(total);
  order.push_back({0, 0, 0, 0});
  for (std::size_t step = 1; step < total; ++step) {
    int k = 3;
    while (digit[k] + dir[k] < 0 || digit[k] + dir[k] >= radix[k]) {
      dir[k] = -dir[k];
      --k;
    }
    digit[k] += dir[k];
    order.push_back({digit[0], digit[1], digit[2], digit[3]});
  }
  return order;
}

Image transform_image(const Image& img, double scale, double rotation_deg, int dx, int dy) {
  Image out(img.width, img.height, img.bit_depth);
  const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;
  const double theta = rotation_deg * std::numbers::pi / 180.0;
  const double c = rotation_deg == 0 ? 1.0 : std::cos(theta);
  const double s = rotation_deg == 0 ? 0.0 : std::sin(theta);
  const bool nearest = img.bit_depth == 1;

  auto sample = [&](int x, int y) -> double {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return 0.0;
    return img.at(x, y);
  };

  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double u = x - dx - cx, v = y - dy - cy;
      const double sx = (c * u + s * v) / scale + cx;
      const double sy = (-s * u + c * v) / scale + cy;
      double value;
      if (nearest) {
        value = sample(static_cast<int>(std::lround(sx)), static_cast<int>(std::lround(sy)));
      } else {
        const double fx = std::floor(sx), fy = std::floor(sy);
        const double ax = sx - fx, ay = sy - fy;
        const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
        value = (1 - ax) * (1 - ay) * sample(x0, y0) + ax * (1 - ay) * sample(x0 + 1, y0) +
                (1 - ax) * ay * sample(x0, y0 + 1) + ax * ay * sample(x0 + 1, y0 + 1);
      }
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp<long>(std::lround(value), 0, img.max_value()));
    }
  }
  return out;
}

TrainingSequence generate_training_sequence(const Image& img, const ScanParams& p,
                                            std::optional<int> label, std::uint64_t source_id) {
  const auto order = scan_order(p);
  const int half_shift = p.max_shift / p.shift_step;
  const int half_rot = rotation_positions(p) / 2;

  TrainingSequence seq;
  seq.label = label;
  seq.source_id = source_id;
  seq.frames.reserve(order.size());
  for (const auto& at : order) {
    const double scale = p.scale_levels[static_cast<std::size_t>(at.scale)];
    const double rot = (at.rotation - half_rot) * p.rotation_step_deg;
    const int dx = (at.shift_x - half_shift) * p.shift_step;
    const int dy = (at.shift_y - half_shift) * p.shift_step;
    seq.frames.push_back(transform_image(img, scale, rot, dx, dy));
  }
  return seq;
}

}  // namespace spinhtm::dataset
