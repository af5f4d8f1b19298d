#include "spinhtm/backend.hpp"

namespace spinhtm::htm {

std::optional<std::size_t> argmax(std::span<const double> values) {
  if (values.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Vector IdealBackend::dot_product_bank(std::span<const double> inputs, const WeightMatrix& matrix) const {
  return matrix.multiply(inputs);
}

std::optional<Selection> IdealBackend::select_winner(std::span<const double> values, double dom_threshold) const {
  const auto best = argmax(values);
  if (!best || values[*best] < dom_threshold) return std::nullopt;
  return Selection{*best, values[*best]};
}

}  // namespace spinhtm::htm
