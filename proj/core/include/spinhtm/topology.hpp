#pragma once

#include <cstddef>
#include <vector>

namespace spinhtm::htm {

struct PatchOrigin {
  int x = 0;
  int y = 0;
  bool operator==(const PatchOrigin&) const = default;
};

/// Pyramidal HTM tree. Node ids are global and assigned level by level,
/// row-major within a level; level 0 is the pixel-facing level.
struct NetworkTopology {
  int field_width = 16;
  int field_height = 16;
  int patch_size = 4;
  std::vector<std::vector<std::size_t>> levels;    // node ids per level
  std::vector<std::vector<std::size_t>> children;  // per node, in receptive-field order
  std::vector<PatchOrigin> patches;                // per level-0 node
  std::vector<std::size_t> parent;                 // per node; output node maps to itself

  std::size_t node_count() const { return children.size(); }
  std::size_t level_count() const { return levels.size(); }
  std::size_t output_node() const { return levels.back().front(); }
  std::size_t level_of(std::size_t node) const;
  std::size_t input_dim_level0() const { return static_cast<std::size_t>(patch_size) * patch_size; }

  /// Tiles the field with patch_size x patch_size level-0 nodes, then groups
  /// fan x fan blocks per level until a single output node remains.
  static NetworkTopology pyramid(int field_width, int field_height, int patch_size, int fan);

  /// Throws InvalidTopology when an invariant does not hold.
  void validate() const;

  bool operator==(const NetworkTopology&) const = default;
};

}  // namespace spinhtm::htm
