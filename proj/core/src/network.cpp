#include "spinhtm/network.hpp"

#include <algorithm>
#include <string>

#include "spinhtm/error.hpp"

namespace spinhtm::htm {

namespace {

double top_two_margin(std::span<const double> values) {
  if (values.size() < 2) return 1.0;
  double best = 0, second = 0;
  for (double v : values) {
    if (v > best) {
      second = best;
      best = v;
    } else if (v > second) {
      second = v;
    }
  }
  return best > 0 ? (best - second) / best : 0.0;
}

}  // namespace

// --- per-node steps ------------------------------------------------------------

Vector compose_spatial_input(std::span<const std::size_t> child_widths,
                             std::span<const std::optional<std::size_t>> child_winners) {
  if (child_widths.size() != child_winners.size()) {
    throw Error(ErrorKind::ArityMismatch, "compose_spatial_input: " + std::to_string(child_winners.size()) +
                                              " outputs for " + std::to_string(child_widths.size()) +
                                              " children");
  }
  std::size_t total = 0;
  for (auto w : child_widths) total += w;
  Vector input(total, 0.0);
  std::size_t offset = 0;
  for (std::size_t c = 0; c < child_widths.size(); ++c) {
    if (const auto& w = child_winners[c]) {
      if (*w >= child_widths[c]) throw Error(ErrorKind::IndexOutOfRange, "compose_spatial_input: winner out of range");
      input[offset + *w] = 1.0;
    }
    offset += child_widths[c];
  }
  return input;
}

Vector compose_spatial_input(const std::vector<const HtmNode*>& children, std::span<const NodeOutput> child_outputs) {
  std::vector<std::size_t> widths;
  std::vector<std::optional<std::size_t>> winners;
  for (const auto* c : children) widths.push_back(c->output_width());
  for (const auto& o : child_outputs) winners.push_back(o.winner);
  return compose_spatial_input(widths, winners);
}

Vector compute_spatial_density(const HtmNode& node, std::span<const double> input, const ComputeBackend& backend) {
  if (input.size() != node.input_dim()) {
    throw Error(ErrorKind::LengthMismatch, "compute_spatial_density: input length " + std::to_string(input.size()) +
                                               " != " + std::to_string(node.input_dim()));
  }
  const Vector raw = backend.dot_product_bank(input, node.coincidence_matrix());
  if (node.is_output()) {
    Vector y(raw.size(), 0.0);
    if (auto sel = backend.select_winner(raw, kAnyEvidence)) y[sel->winner] = 1.0;
    return y;
  }
  Vector y = backend.digitize(raw);
  const double thr = node.params().y_threshold;
  for (auto& v : y) {
    if (v < thr) v = 0.0;
  }
  return y;
}

Vector compute_group_density(const HtmNode& node, std::span<const double> y, const ComputeBackend& backend) {
  if (y.size() != node.coincidence_count()) {
    throw Error(ErrorKind::LengthMismatch, "compute_group_density: y length " + std::to_string(y.size()) +
                                               " != nc " + std::to_string(node.coincidence_count()));
  }
  return backend.dot_product_bank(y, node.inference_matrix());
}

NodeOutput infer_node(const HtmNode& node, std::span<const double> input, const ComputeBackend& backend,
                      double dom_threshold) {
  if (!node.finalized()) throw Error(ErrorKind::UntrainedNetwork, "infer_node: node is not trained");
  if (input.size() != node.input_dim()) {
    throw Error(ErrorKind::LengthMismatch, "infer_node: input length " + std::to_string(input.size()) +
                                               " != " + std::to_string(node.input_dim()));
  }
  NodeOutput out;
  double margin = 1.0;
  if (node.is_output()) {
    const Vector raw = backend.dot_product_bank(input, node.coincidence_matrix());
    margin = top_two_margin(raw);
    out.y.assign(raw.size(), 0.0);
    if (auto sel = backend.select_winner(raw, kAnyEvidence)) out.y[sel->winner] = 1.0;
  } else {
    out.y = compute_spatial_density(node, input, backend);
  }
  out.group_density = compute_group_density(node, out.y, backend);
  out.margin = std::min(margin, top_two_margin(out.group_density));

  const double thr = node.is_output() ? std::max(dom_threshold, kAnyEvidence) : kAnyEvidence;
  if (auto sel = backend.select_winner(out.group_density, thr)) {
    out.winner = sel->winner;
    out.dom = sel->dom;
  } else if (auto any = backend.select_winner(out.group_density, kAnyEvidence)) {
    out.dom = any->dom;  // rejected by threshold; keep the DOM for reporting
  }
  return out;
}

// --- network -----------------------------------------------------------------

Network::Network(NetworkTopology topology, NodeParams params, std::size_t n_classes)
    : topology_(std::move(topology)), params_(params), n_classes_(n_classes), nodes_(topology_.node_count()) {
  topology_.validate();
}

bool Network::trained() const {
  return !nodes_.empty() && std::all_of(nodes_.begin(), nodes_.end(), [](const HtmNode& n) { return n.finalized(); });
}

Vector Network::patch_input(const dataset::Image& img, std::size_t node) const {
  if (img.width != topology_.field_width || img.height != topology_.field_height) {
    throw Error(ErrorKind::TopologyMismatch, "image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                                                 " does not match the visual field");
  }
  const auto& p = topology_.patches.at(node);
  const int m = topology_.patch_size;
  Vector v;
  v.reserve(static_cast<std::size_t>(m) * m);
  for (int y = 0; y < m; ++y) {
    for (int x = 0; x < m; ++x) v.push_back(img.at(p.x + x, p.y + y));
  }
  return v;
}

namespace {

using WinnerTable = std::vector<std::vector<std::int32_t>>;  // [frame][node within level]

Vector level_input(const Network& net, std::size_t node, std::size_t level, const dataset::Image& frame,
                   const std::vector<std::int32_t>& below) {
  const auto& topo = net.topology();
  if (level == 0) return net.patch_input(frame, node);
  const auto& kids = topo.children[node];
  const std::size_t first = topo.levels[level - 1].front();
  std::vector<std::size_t> widths;
  std::vector<std::optional<std::size_t>> winners;
  for (auto c : kids) {
    if (!net.node(c).finalized()) {
      throw Error(ErrorKind::UntrainedChild, "node " + std::to_string(node) + " composed before child " +
                                                 std::to_string(c) + " was trained");
    }
    widths.push_back(net.node(c).output_width());
    const auto w = below[c - first];
    winners.push_back(w < 0 ? std::nullopt : std::optional<std::size_t>(static_cast<std::size_t>(w)));
  }
  return compose_spatial_input(widths, winners);
}

}  // namespace

Network train_network(const NetworkTopology& topology, const NodeParams& params, std::size_t n_classes,
                      std::span<const dataset::TrainingSequence> sequences, const ComputeBackend& backend) {
  Network net(topology, params, n_classes);
  const auto& topo = net.topology();

  std::vector<const dataset::Image*> frames;
  std::vector<std::size_t> seq_of_frame;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    if (sequences[s].frames.empty()) throw Error(ErrorKind::InvalidArgument, "training sequence is empty");
    if (!sequences[s].label) throw Error(ErrorKind::InvalidArgument, "output node training needs labelled sequences");
    if (*sequences[s].label < 0 || static_cast<std::size_t>(*sequences[s].label) >= n_classes) {
      throw Error(ErrorKind::IndexOutOfRange, "sequence label outside [0, n_classes)");
    }
    for (const auto& f : sequences[s].frames) {
      frames.push_back(&f);
      seq_of_frame.push_back(s);
    }
  }
  if (frames.empty()) throw Error(ErrorKind::InvalidArgument, "train_network: no training frames");

  WinnerTable below(frames.size());
  for (std::size_t level = 0; level < topo.level_count(); ++level) {
    const bool top = level + 1 == topo.level_count();
    for (auto id : topo.levels[level]) {
      std::size_t input_dim = 0;
      if (level == 0) {
        input_dim = topo.input_dim_level0();
      } else {
        for (auto c : topo.children[id]) input_dim += net.node(c).output_width();
      }
      HtmNode node(input_dim, params, top, top ? n_classes : 0);

      std::optional<std::size_t> prev;
      for (std::size_t f = 0; f < frames.size(); ++f) {
        if (f > 0 && seq_of_frame[f] != seq_of_frame[f - 1]) prev.reset();
        const Vector input = level_input(net, id, level, *frames[f], below[f]);
        const std::size_t idx = node.spatial_pool_update(input);
        if (prev) node.tac_update(*prev, idx);
        prev = idx;
        if (top) node.update_pcw(idx, static_cast<std::size_t>(*sequences[seq_of_frame[f]].label));
      }
      node.finalize();
      node.set_matrix_ids(id);
      net.node(id) = std::move(node);
    }
    if (top) break;

    WinnerTable current(frames.size(), std::vector<std::int32_t>(topo.levels[level].size(), -1));
    for (std::size_t f = 0; f < frames.size(); ++f) {
      for (std::size_t k = 0; k < topo.levels[level].size(); ++k) {
        const auto id = topo.levels[level][k];
        const Vector input = level_input(net, id, level, *frames[f], below[f]);
        const auto out = infer_node(net.node(id), input, backend);
        if (out.winner) current[f][k] = static_cast<std::int32_t>(*out.winner);
      }
    }
    below = std::move(current);
  }
  return net;
}

InferenceResult infer_network(const Network& net, const dataset::Image& img, const ComputeBackend& backend,
                              double dom_threshold, bool keep_node_outputs) {
  if (!net.trained()) throw Error(ErrorKind::UntrainedNetwork, "infer_network: network is not trained");
  const auto& topo = net.topology();
  std::vector<NodeOutput> outputs(topo.node_count());
  InferenceResult result;

  for (std::size_t level = 0; level < topo.level_count(); ++level) {
    for (auto id : topo.levels[level]) {
      Vector input;
      if (level == 0) {
        input = net.patch_input(img, id);
      } else {
        std::vector<std::size_t> widths;
        std::vector<std::optional<std::size_t>> winners;
        for (auto c : topo.children[id]) {
          widths.push_back(net.node(c).output_width());
          winners.push_back(outputs[c].winner);
        }
        input = compose_spatial_input(widths, winners);
      }
      outputs[id] = infer_node(net.node(id), input, backend, id == topo.output_node() ? dom_threshold : kAnyEvidence);
      if (outputs[id].winner) result.min_margin = std::min(result.min_margin, outputs[id].margin);
    }
  }
  const auto& top = outputs[topo.output_node()];
  result.label = top.winner;
  result.dom = top.dom;
  if (keep_node_outputs) result.nodes = std::move(outputs);
  return result;
}

}  // namespace spinhtm::htm
