#include "spinhtm/topology.hpp"

#include <string>

#include "spinhtm/error.hpp"

namespace spinhtm::htm {

std::size_t NetworkTopology::level_of(std::size_t node) const {
  for (std::size_t l = 0; l < levels.size(); ++l) {
    if (!levels[l].empty() && node >= levels[l].front() && node <= levels[l].back()) return l;
  }
  throw Error(ErrorKind::IndexOutOfRange, "node " + std::to_string(node) + " not in topology");
}

NetworkTopology NetworkTopology::pyramid(int field_width, int field_height, int patch_size, int fan) {
  if (patch_size < 1 || fan < 2) throw Error(ErrorKind::InvalidTopology, "pyramid: patch >= 1 and fan >= 2 required");
  if (field_width % patch_size != 0 || field_height % patch_size != 0) {
    throw Error(ErrorKind::InvalidTopology, "pyramid: patches must tile the field");
  }
  NetworkTopology t;
  t.field_width = field_width;
  t.field_height = field_height;
  t.patch_size = patch_size;

  int gw = field_width / patch_size, gh = field_height / patch_size;
  std::vector<std::size_t> grid;  // node ids of the current level, row-major gw x gh
  for (int gy = 0; gy < gh; ++gy) {
    for (int gx = 0; gx < gw; ++gx) {
      grid.push_back(t.children.size());
      t.children.emplace_back();
      t.patches.push_back({gx * patch_size, gy * patch_size});
    }
  }
  t.levels.push_back(grid);

  while (grid.size() > 1) {
    const int pw = (gw + fan - 1) / fan, ph = (gh + fan - 1) / fan;
    std::vector<std::size_t> next;
    for (int py = 0; py < ph; ++py) {
      for (int px = 0; px < pw; ++px) {
        std::vector<std::size_t> kids;
        for (int dy = 0; dy < fan; ++dy) {
          for (int dx = 0; dx < fan; ++dx) {
            const int cx = px * fan + dx, cy = py * fan + dy;
            if (cx < gw && cy < gh) kids.push_back(grid[static_cast<std::size_t>(cy) * gw + cx]);
          }
        }
        next.push_back(t.children.size());
        t.children.push_back(std::move(kids));
      }
    }
    t.levels.push_back(next);
    grid = std::move(next);
    gw = pw;
    gh = ph;
  }

  t.parent.assign(t.children.size(), 0);
  for (std::size_t n = 0; n < t.children.size(); ++n) {
    for (auto c : t.children[n]) t.parent[c] = n;
  }
  t.parent[t.output_node()] = t.output_node();
  t.validate();
  return t;
}

void NetworkTopology::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidTopology, msg); };
  if (levels.empty()) fail("no levels");
  if (levels.back().size() != 1) fail("top level must hold exactly one output node");
  if (patches.size() != levels.front().size()) fail("one patch per level-0 node required");
  if (parent.size() != children.size()) fail("parent table size mismatch");

  std::vector<int> parents_seen(children.size(), 0);
  std::size_t expected = 0;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    for (auto id : levels[l]) {
      if (id != expected++) fail("node ids must be contiguous and level ordered");
      if (l == 0 && !children[id].empty()) fail("level-0 nodes take pixels, not children");
      if (l > 0 && children[id].empty()) fail("node " + std::to_string(id) + " has no children");
      for (auto c : children[id]) {
        if (l == 0 || level_of(c) != l - 1) fail("children must sit one level below");
        ++parents_seen[c];
        if (parent[c] != id) fail("parent table disagrees with children");
      }
    }
  }
  if (expected != children.size()) fail("levels do not cover all nodes");
  for (std::size_t n = 0; n + 1 < children.size(); ++n) {
    if (parents_seen[n] != 1) fail("node " + std::to_string(n) + " must have exactly one parent");
  }

  // Level-0 patches tile the field without overlap.
  std::vector<int> cover(static_cast<std::size_t>(field_width) * field_height, 0);
  for (const auto& p : patches) {
    if (p.x < 0 || p.y < 0 || p.x + patch_size > field_width || p.y + patch_size > field_height) {
      fail("patch outside the visual field");
    }
    for (int y = p.y; y < p.y + patch_size; ++y) {
      for (int x = p.x; x < p.x + patch_size; ++x) ++cover[static_cast<std::size_t>(y) * field_width + x];
    }
  }
  for (int c : cover) {
    if (c != 1) fail("level-0 patches must tile the field exactly once");
  }
}

}  // namespace spinhtm::htm
