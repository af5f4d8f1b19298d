#include "spinhtm/weight_matrix.hpp"

#include <algorithm>

#include "spinhtm/error.hpp"

namespace spinhtm::htm {

double WeightMatrix::at(std::size_t r, std::size_t c) const {
  const auto& row = rows_.at(r);
  auto it = std::lower_bound(row.begin(), row.end(), c,
                             [](const Entry& e, std::size_t col) { return e.col < col; });
  return (it != row.end() && it->col == c) ? it->value : 0.0;
}

void WeightMatrix::set(std::size_t r, std::size_t c, double value) {
  if (r >= rows_.size() || c >= cols_) throw Error(ErrorKind::IndexOutOfRange, "WeightMatrix::set out of range");
  auto& row = rows_[r];
  auto it = std::lower_bound(row.begin(), row.end(), c,
                             [](const Entry& e, std::size_t col) { return e.col < col; });
  if (it != row.end() && it->col == c) {
    if (value == 0.0) {
      row.erase(it);
    } else {
      it->value = value;
    }
  } else if (value != 0.0) {
    row.insert(it, Entry{static_cast<std::uint32_t>(c), value});
  }
}

void WeightMatrix::append_column(std::span<const double> column) {
  if (column.size() != rows_.size()) throw Error(ErrorKind::LengthMismatch, "append_column: wrong length");
  const auto c = static_cast<std::uint32_t>(cols_++);
  for (std::size_t r = 0; r < column.size(); ++r) {
    if (column[r] != 0.0) rows_[r].push_back(Entry{c, column[r]});
  }
}

std::vector<double> WeightMatrix::dense() const {
  std::vector<double> out(rows_.size() * cols_, 0.0);
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    for (const auto& e : rows_[r]) out[r * cols_ + e.col] = e.value;
  }
  return out;
}

std::vector<double> WeightMatrix::column(std::size_t c) const {
  std::vector<double> out(rows_.size(), 0.0);
  for (std::size_t r = 0; r < rows_.size(); ++r) out[r] = at(r, c);
  return out;
}

double WeightMatrix::max_value() const {
  double m = 0.0;
  for (const auto& row : rows_) {
    for (const auto& e : row) m = std::max(m, e.value);
  }
  return m;
}

std::size_t WeightMatrix::nonzeros() const {
  std::size_t n = 0;
  for (const auto& row : rows_) n += row.size();
  return n;
}

Vector WeightMatrix::multiply(std::span<const double> inputs) const {
  if (inputs.size() != rows_.size()) {
    throw Error(ErrorKind::LengthMismatch, "dot product: input length " + std::to_string(inputs.size()) +
                                               " != matrix rows " + std::to_string(rows_.size()));
  }
  Vector out(cols_, 0.0);
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    const double x = inputs[r];
    if (x == 0.0) continue;
    for (const auto& e : rows_[r]) out[e.col] += x * e.value;
  }
  return out;
}

}  // namespace spinhtm::htm
