#pragma once

#include <filesystem>
#include <fstream>

#include "spinhtm/dataset_io.hpp"
#include "spinhtm/experiment.hpp"

namespace spinhtm::testing {

// Three bar shapes on a 16x16 canvas, jittered by one pixel per sample.
// Labels are interleaved in file order, as in the real IDX files.
inline dataset::LabeledImages toy_bars(int classes, int per_class) {
  dataset::LabeledImages out;
  for (int k = 0; k < per_class; ++k) {
    for (int c = 0; c < classes; ++c) {
      dataset::Image img(16, 16);
      const int j = (k % 3) - 1;
      for (int t = 3; t < 13; ++t) {
        for (int w = 0; w < 3; ++w) {
          int x = 0, y = 0;
          switch (c % 3) {
            case 0: x = t; y = 7 + w + j; break;
            case 1: x = 7 + w + j; y = t; break;
            default: x = t + w; y = t + j; break;
          }
          if (x >= 0 && x < 16 && y >= 0 && y < 16) img.at(x, y) = 255;
        }
      }
      out.images.push_back(std::move(img));
      out.labels.push_back(static_cast<std::uint8_t>(c));
    }
  }
  return out;
}

inline exp::ExperimentConfig toy_config() {
  exp::ExperimentConfig c;
  c.dataset.classes = 3;
  c.dataset.train_per_class = 2;
  c.dataset.test_offset = 2;
  c.dataset.test_per_class = 2;
  c.topology = {8, 4, 2};
  c.scan.max_shift = 1;
  c.scan.rotation_range_deg = 0;
  c.scan.scale_levels = {1.0};
  return c;
}

inline void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream f(p, std::ios::binary);
  f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

inline void write_idx_pair(const dataset::LabeledImages& d, const std::filesystem::path& images,
                           const std::filesystem::path& labels) {
  write_bytes(images, dataset::serialize_idx_images(d.images));
  write_bytes(labels, dataset::serialize_idx_labels(d.labels));
}

}  // namespace spinhtm::testing
