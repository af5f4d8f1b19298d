#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "spinhtm/backend.hpp"
#include "spinhtm/dataset_io.hpp"
#include "spinhtm/node.hpp"
#include "spinhtm/topology.hpp"

namespace spinhtm::htm {

struct NodeOutput {
  Vector y;
  Vector group_density;
  std::optional<std::size_t> winner;  // empty: no evidence, or rejected
  double dom = 0.0;
  /// (best - second) / best over the values each selection saw.
  double margin = 1.0;
};

// --- per-node inference steps -----------------------------------------------

/// One-hot concatenation of child winners; a silent child contributes zeros.
Vector compose_spatial_input(std::span<const std::size_t> child_widths,
                             std::span<const std::optional<std::size_t>> child_winners);
Vector compose_spatial_input(const std::vector<const HtmNode*>& children,
                             std::span<const NodeOutput> child_outputs);

Vector compute_spatial_density(const HtmNode& node, std::span<const double> input, const ComputeBackend& backend);
Vector compute_group_density(const HtmNode& node, std::span<const double> y, const ComputeBackend& backend);

/// Spatial density, group density, winner selection. Non-output nodes only
/// reject evidence-free inputs; the output node applies dom_threshold too.
NodeOutput infer_node(const HtmNode& node, std::span<const double> input, const ComputeBackend& backend,
                      double dom_threshold = kAnyEvidence);

// --- network -------------------------------------------------------------------

class Network {
 public:
  Network() = default;
  Network(NetworkTopology topology, NodeParams params, std::size_t n_classes);

  const NetworkTopology& topology() const { return topology_; }
  const NodeParams& params() const { return params_; }
  std::size_t n_classes() const { return n_classes_; }
  const HtmNode& node(std::size_t id) const { return nodes_[id]; }
  HtmNode& node(std::size_t id) { return nodes_[id]; }
  std::size_t node_count() const { return nodes_.size(); }
  bool trained() const;

  /// Input vector of a level-0 node: its pixel patch, row-major.
  Vector patch_input(const dataset::Image& img, std::size_t node) const;

  bool operator==(const Network&) const = default;

 private:
  friend class NetworkCodec;
  NetworkTopology topology_;
  NodeParams params_;
  std::size_t n_classes_ = 0;
  std::vector<HtmNode> nodes_;
};

/// Trains bottom-up: a level sees the frames only once every level below it
/// is finalized and runs in inference mode. Labels feed the output node only.
Network train_network(const NetworkTopology& topology, const NodeParams& params, std::size_t n_classes,
                      std::span<const dataset::TrainingSequence> sequences,
                      const ComputeBackend& backend);

struct InferenceResult {
  std::optional<std::size_t> label;  // empty = reject
  double dom = 0.0;
  /// Smallest detection margin over all decisions taken on the way up.
  double min_margin = 1.0;
  std::vector<NodeOutput> nodes;  // filled when requested
};

InferenceResult infer_network(const Network& net, const dataset::Image& img, const ComputeBackend& backend,
                              double dom_threshold = kAnyEvidence, bool keep_node_outputs = false);

}  // namespace spinhtm::htm
