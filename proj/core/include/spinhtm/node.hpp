#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "spinhtm/weight_matrix.hpp"

namespace spinhtm::htm {

struct NodeParams {
  /// Maximum distance between unit-normalized patterns, sqrt(2 (1 - cos)),
  /// at which an input is absorbed by an existing coincidence. Larger values
  /// pool fewer, broader coincidences.
  double matching_threshold = 0.7;
  std::size_t max_group_size = 8;
  /// Bit width of stored inference-matrix codes; 0 keeps full precision.
  int weight_bits = 5;
  /// Entries of y below this are zeroed before marginalization.
  double y_threshold = 0.0;

  bool operator==(const NodeParams&) const = default;
};

/// Sparse copy of a pooled spatial pattern.
struct Coincidence {
  std::vector<std::uint32_t> index;
  std::vector<double> value;
  double norm = 0.0;

  bool operator==(const Coincidence&) const = default;
};

using Group = std::vector<std::uint32_t>;

/// Cosine similarity; 0 when exactly one side is zero, 1 when both are.
double spatial_similarity(std::span<const double> a, std::span<const double> b);
/// Euclidean distance between the unit vectors of a pair with this cosine.
double spatial_distance(double similarity);

class HtmNode {
 public:
  HtmNode() = default;
  HtmNode(std::size_t input_dim, NodeParams params, bool output_node = false, std::size_t n_classes = 0);

  // --- training ---
  std::size_t spatial_pool_update(std::span<const double> pattern);
  void tac_update(std::size_t prev_idx, std::size_t curr_idx);
  const std::vector<Group>& temporal_pool();
  const WeightMatrix& build_pcg();
  void update_pcw(std::size_t coincidence_idx, std::size_t class_idx);
  /// Builds groups and PCG, or normalizes PCW for the output node.
  void finalize();

  // --- state ---
  std::size_t input_dim() const { return input_dim_; }
  const NodeParams& params() const { return params_; }
  bool is_output() const { return output_; }
  std::size_t n_classes() const { return n_classes_; }
  bool finalized() const { return finalized_; }

  std::size_t coincidence_count() const { return coincidences_.size(); }
  const std::vector<Coincidence>& coincidences() const { return coincidences_; }
  Vector coincidence(std::size_t i) const;
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  double probability(std::size_t i) const;
  std::uint32_t tac(std::size_t i, std::size_t j) const;
  const std::vector<std::map<std::uint32_t, std::uint32_t>>& tac_rows() const { return tac_; }
  const std::vector<Group>& groups() const { return groups_; }
  const std::vector<std::vector<std::uint32_t>>& pcw_counts() const { return pcw_counts_; }
  std::size_t output_width() const { return output_ ? n_classes_ : groups_.size(); }

  /// Columns are stored coincidences; rows index the node's input.
  const WeightMatrix& coincidence_matrix() const { return coincidence_matrix_; }
  /// PCG (rows = coincidences, cols = groups) or PCW (cols = classes).
  const WeightMatrix& inference_matrix() const { return inference_matrix_; }

  void set_matrix_ids(std::uint64_t base);

  bool operator==(const HtmNode& o) const;

 private:
  friend class NodeCodec;

  std::size_t add_coincidence(std::span<const double> pattern, double norm);
  void quantize_and_store(std::vector<std::vector<double>> columns_by_row, std::size_t ncols);
  void rebuild_coincidence_matrix();

  std::size_t input_dim_ = 0;
  NodeParams params_;
  bool output_ = false;
  std::size_t n_classes_ = 0;
  bool finalized_ = false;

  std::vector<Coincidence> coincidences_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_count_ = 0;
  std::vector<std::map<std::uint32_t, std::uint32_t>> tac_;
  std::vector<Group> groups_;
  std::vector<std::vector<std::uint32_t>> pcw_counts_;
  WeightMatrix coincidence_matrix_;
  WeightMatrix inference_matrix_;

  // Training-time inverted index: input position -> (coincidence, value).
  std::vector<std::vector<std::pair<std::uint32_t, double>>> postings_;
  std::int64_t zero_coincidence_ = -1;
};

/// Quantizes v in [0, vmax] to the code grid of `bits` bits scaled by vmax.
double quantize_weight(double v, double vmax, int bits);

}  // namespace spinhtm::htm
