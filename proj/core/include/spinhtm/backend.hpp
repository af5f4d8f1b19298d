#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>

#include "spinhtm/weight_matrix.hpp"

namespace spinhtm::htm {

struct Selection {
  std::size_t winner = 0;
  double dom = 0.0;
};

/// Threshold that rejects only an all-zero (evidence-free) result.
inline constexpr double kAnyEvidence = std::numeric_limits<double>::min();

/// The arithmetic the inference steps run on. Values returned by
/// dot_product_bank are backend-native (exact reals, or analog currents for
/// hardware); digitize maps them to what the next stage consumes.
class ComputeBackend {
 public:
  virtual ~ComputeBackend() = default;

  virtual Vector dot_product_bank(std::span<const double> inputs, const WeightMatrix& matrix) const = 0;

  virtual Vector digitize(std::span<const double> values) const {
    return Vector(values.begin(), values.end());
  }

  /// Winner and degree of match, or nullopt when dom < dom_threshold.
  /// Exact ties go to the lowest index.
  virtual std::optional<Selection> select_winner(std::span<const double> values,
                                                 double dom_threshold) const = 0;

  virtual std::string name() const = 0;
};

class IdealBackend final : public ComputeBackend {
 public:
  Vector dot_product_bank(std::span<const double> inputs, const WeightMatrix& matrix) const override;
  std::optional<Selection> select_winner(std::span<const double> values, double dom_threshold) const override;
  std::string name() const override { return "ideal"; }
};

/// Lowest-index argmax; nullopt for an empty span.
std::optional<std::size_t> argmax(std::span<const double> values);

}  // namespace spinhtm::htm
