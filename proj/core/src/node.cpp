#include "spinhtm/node.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spinhtm/error.hpp"

namespace spinhtm::htm {

namespace {

constexpr double kMatchSlack = 1e-12;

void check_index(std::size_t i, std::size_t n, const char* what) {
  if (i >= n) {
    throw Error(ErrorKind::IndexOutOfRange,
                std::string(what) + ": index " + std::to_string(i) + " >= " + std::to_string(n));
  }
}

// Compared on the squared distance: sqrt would turn a one-ulp error in the
// cosine of identical patterns into a distance near 1e-8.
bool within_threshold(double similarity, double threshold) {
  return 2.0 * (1.0 - similarity) <= threshold * threshold + kMatchSlack;
}

}  // namespace

double spatial_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::LengthMismatch, "spatial_similarity: length mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 && nb == 0) return 1.0;
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double spatial_distance(double similarity) { return std::sqrt(std::max(0.0, 2.0 * (1.0 - similarity))); }

double quantize_weight(double v, double vmax, int bits) {
  if (bits <= 0) return v;
  if (vmax <= 0) return 0.0;
  const double levels = std::ldexp(1.0, bits) - 1.0;
  return std::round(v / vmax * levels) * vmax / levels;
}

HtmNode::HtmNode(std::size_t input_dim, NodeParams params, bool output_node, std::size_t n_classes)
    : input_dim_(input_dim), params_(params), output_(output_node), n_classes_(n_classes),
      postings_(input_dim) {
  if (params_.max_group_size < 1) throw Error(ErrorKind::InvalidArgument, "max_group_size must be >= 1");
  if (params_.weight_bits < 0 || params_.weight_bits > 31) {
    throw Error(ErrorKind::InvalidArgument, "weight_bits must be in [0, 31]");
  }
}

std::size_t HtmNode::add_coincidence(std::span<const double> pattern, double norm) {
  const auto idx = static_cast<std::uint32_t>(coincidences_.size());
  Coincidence c;
  c.norm = norm;
  for (std::size_t k = 0; k < pattern.size(); ++k) {
    if (pattern[k] == 0.0) continue;
    c.index.push_back(static_cast<std::uint32_t>(k));
    c.value.push_back(pattern[k]);
    postings_[k].emplace_back(idx, pattern[k]);
  }
  if (norm == 0.0) zero_coincidence_ = idx;
  coincidences_.push_back(std::move(c));
  counts_.push_back(1);
  ++total_count_;
  tac_.emplace_back();
  if (output_) pcw_counts_.emplace_back(n_classes_, 0u);
  return idx;
}

std::size_t HtmNode::spatial_pool_update(std::span<const double> pattern) {
  if (pattern.size() != input_dim_) {
    throw Error(ErrorKind::LengthMismatch, "spatial_pool_update: pattern length " + std::to_string(pattern.size()) +
                                               " != " + std::to_string(input_dim_));
  }
  if (finalized_) throw Error(ErrorKind::InvalidArgument, "spatial_pool_update: node already finalized");

  double norm2 = 0;
  for (double v : pattern) norm2 += v * v;
  const double norm = std::sqrt(norm2);

  if (norm == 0.0) {
    if (zero_coincidence_ >= 0) {
      ++counts_[static_cast<std::size_t>(zero_coincidence_)];
      ++total_count_;
      return static_cast<std::size_t>(zero_coincidence_);
    }
    if (coincidences_.empty() || !within_threshold(0.0, params_.matching_threshold)) {
      return add_coincidence(pattern, 0.0);
    }
    ++counts_[0];
    ++total_count_;
    return 0;
  }
  if (coincidences_.empty()) return add_coincidence(pattern, norm);

  std::vector<double> dot(coincidences_.size(), 0.0);
  for (std::size_t k = 0; k < pattern.size(); ++k) {
    if (pattern[k] == 0.0) continue;
    for (const auto& [ci, cv] : postings_[k]) dot[ci] += pattern[k] * cv;
  }
  std::size_t best = 0;
  double best_sim = -1.0;
  for (std::size_t i = 0; i < coincidences_.size(); ++i) {
    const double cn = coincidences_[i].norm;
    const double sim = cn == 0.0 ? 0.0 : dot[i] / (norm * cn);
    if (sim > best_sim) {
      best_sim = sim;
      best = i;
    }
  }
  if (within_threshold(best_sim, params_.matching_threshold)) {
    ++counts_[best];
    ++total_count_;
    return best;
  }
  return add_coincidence(pattern, norm);
}

void HtmNode::tac_update(std::size_t prev_idx, std::size_t curr_idx) {
  check_index(prev_idx, coincidences_.size(), "tac_update");
  check_index(curr_idx, coincidences_.size(), "tac_update");
  ++tac_[prev_idx][static_cast<std::uint32_t>(curr_idx)];
}

std::uint32_t HtmNode::tac(std::size_t i, std::size_t j) const {
  check_index(i, tac_.size(), "tac");
  auto it = tac_[i].find(static_cast<std::uint32_t>(j));
  return it == tac_[i].end() ? 0 : it->second;
}

double HtmNode::probability(std::size_t i) const {
  check_index(i, counts_.size(), "probability");
  return static_cast<double>(counts_[i]) / static_cast<double>(total_count_);
}

Vector HtmNode::coincidence(std::size_t i) const {
  check_index(i, coincidences_.size(), "coincidence");
  Vector v(input_dim_, 0.0);
  const auto& c = coincidences_[i];
  for (std::size_t k = 0; k < c.index.size(); ++k) v[c.index[k]] = c.value[k];
  return v;
}

const std::vector<Group>& HtmNode::temporal_pool() {
  const std::size_t nc = coincidences_.size();
  if (nc == 0) throw Error(ErrorKind::EmptyPool, "temporal_pool: empty spatial pool");
  groups_.clear();
  std::vector<bool> assigned(nc, false);
  std::size_t remaining = nc;

  while (remaining > 0) {
    // Seed: maximize P(c_i) * TAC(i, j) over unassigned i, j. Counts stand in
    // for P since the normalizer is shared.
    std::uint64_t best_score = 0;
    std::size_t seed = nc;
    for (std::size_t i = 0; i < nc; ++i) {
      if (assigned[i]) continue;
      for (const auto& [j, t] : tac_[i]) {
        if (assigned[j]) continue;
        const std::uint64_t score = counts_[i] * std::uint64_t{t};
        if (score > best_score) {
          best_score = score;
          seed = i;
        }
      }
    }
    if (seed == nc) {
      for (std::size_t i = 0; i < nc; ++i) {
        if (!assigned[i]) groups_.push_back({static_cast<std::uint32_t>(i)});
      }
      break;
    }

    Group group{static_cast<std::uint32_t>(seed)};
    assigned[seed] = true;
    --remaining;
    std::size_t last = seed;
    while (group.size() < params_.max_group_size) {
      std::uint32_t best_t = 0;
      std::size_t next = nc;
      for (const auto& [j, t] : tac_[last]) {
        if (!assigned[j] && t > best_t) {
          best_t = t;
          next = j;
        }
      }
      if (next == nc) break;
      group.push_back(static_cast<std::uint32_t>(next));
      assigned[next] = true;
      --remaining;
      last = next;
    }
    groups_.push_back(std::move(group));
  }
  return groups_;
}

void HtmNode::quantize_and_store(std::vector<std::vector<double>> rows, std::size_t ncols) {
  double vmax = 0;
  for (const auto& r : rows) {
    for (double v : r) vmax = std::max(vmax, v);
  }
  const auto id = inference_matrix_.id();
  inference_matrix_ = WeightMatrix(rows.size(), ncols);
  inference_matrix_.set_id(id);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < ncols; ++j) {
      const double q = quantize_weight(rows[i][j], vmax, params_.weight_bits);
      if (q != 0.0) inference_matrix_.set(i, j, q);
    }
  }
}

const WeightMatrix& HtmNode::build_pcg() {
  const std::size_t nc = coincidences_.size();
  if (nc == 0) throw Error(ErrorKind::EmptyPool, "build_pcg: empty spatial pool");
  if (groups_.empty()) temporal_pool();

  // Column j holds P(c_i) for members of g_j, renormalized to sum 1.
  std::vector<std::vector<double>> rows(nc, std::vector<double>(groups_.size(), 0.0));
  for (std::size_t j = 0; j < groups_.size(); ++j) {
    std::uint64_t mass = 0;
    for (auto i : groups_[j]) mass += counts_[i];
    if (mass == 0) continue;
    for (auto i : groups_[j]) rows[i][j] = static_cast<double>(counts_[i]) / static_cast<double>(mass);
  }
  quantize_and_store(std::move(rows), groups_.size());
  return inference_matrix_;
}

void HtmNode::update_pcw(std::size_t coincidence_idx, std::size_t class_idx) {
  if (!output_) throw Error(ErrorKind::NotOutputNode, "update_pcw: not the output node");
  check_index(coincidence_idx, coincidences_.size(), "update_pcw");
  check_index(class_idx, n_classes_, "update_pcw");
  ++pcw_counts_[coincidence_idx][class_idx];
}

void HtmNode::rebuild_coincidence_matrix() {
  const auto id = coincidence_matrix_.id();
  coincidence_matrix_ = WeightMatrix(input_dim_, 0);
  coincidence_matrix_.set_id(id);
  for (const auto& c : coincidences_) {
    const auto col = coincidence_matrix_.cols();
    coincidence_matrix_.resize_cols(col + 1);
    for (std::size_t k = 0; k < c.index.size(); ++k) coincidence_matrix_.set(c.index[k], col, c.value[k]);
  }
}

void HtmNode::finalize() {
  if (coincidences_.empty()) throw Error(ErrorKind::EmptyPool, "finalize: node saw no input");
  if (output_) {
    std::vector<std::uint64_t> class_total(n_classes_, 0);
    for (const auto& row : pcw_counts_) {
      for (std::size_t j = 0; j < n_classes_; ++j) class_total[j] += row[j];
    }
    std::vector<std::vector<double>> rows(coincidences_.size(), std::vector<double>(n_classes_, 0.0));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < n_classes_; ++j) {
        if (class_total[j] > 0) {
          rows[i][j] = static_cast<double>(pcw_counts_[i][j]) / static_cast<double>(class_total[j]);
        }
      }
    }
    quantize_and_store(std::move(rows), n_classes_);
  } else {
    temporal_pool();
    build_pcg();
  }
  rebuild_coincidence_matrix();
  postings_.clear();
  postings_.shrink_to_fit();
  finalized_ = true;
}

void HtmNode::set_matrix_ids(std::uint64_t base) {
  coincidence_matrix_.set_id(2 * base + 1);
  inference_matrix_.set_id(2 * base + 2);
}

bool HtmNode::operator==(const HtmNode& o) const {
  return input_dim_ == o.input_dim_ && params_ == o.params_ && output_ == o.output_ &&
         n_classes_ == o.n_classes_ && finalized_ == o.finalized_ && coincidences_ == o.coincidences_ &&
         counts_ == o.counts_ && total_count_ == o.total_count_ && tac_ == o.tac_ && groups_ == o.groups_ &&
         pcw_counts_ == o.pcw_counts_ && coincidence_matrix_ == o.coincidence_matrix_ &&
         inference_matrix_ == o.inference_matrix_;
}

}  // namespace spinhtm::htm
