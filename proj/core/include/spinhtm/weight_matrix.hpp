#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace spinhtm::htm {

using Vector = std::vector<double>;

/// Row-major sparse matrix. Rows index dot-product inputs, columns index the
/// stored patterns (one crossbar column each). Rows keep entries sorted by
/// column and never hold explicit zeros.
class WeightMatrix {
 public:
  struct Entry {
    std::uint32_t col;
    double value;
    bool operator==(const Entry&) const = default;
  };

  WeightMatrix() = default;
  WeightMatrix(std::size_t rows, std::size_t cols) : cols_(cols), rows_(rows) {}

  std::size_t rows() const { return rows_.size(); }
  std::size_t cols() const { return cols_; }

  double at(std::size_t r, std::size_t c) const;
  void set(std::size_t r, std::size_t c, double value);
  std::span<const Entry> row(std::size_t r) const { return rows_[r]; }

  /// Adds a column at the right edge from a dense vector of length rows().
  void append_column(std::span<const double> column);
  void resize_cols(std::size_t cols) { cols_ = cols; }

  std::vector<double> dense() const;  // row-major rows() x cols()
  std::vector<double> column(std::size_t c) const;
  double max_value() const;
  std::size_t nonzeros() const;

  /// Stable identity used by hardware backends to cache programmed arrays.
  std::uint64_t id() const { return id_; }
  void set_id(std::uint64_t id) { id_ = id; }

  /// out[c] = sum_r inputs[r] * W(r, c), skipping zero inputs.
  Vector multiply(std::span<const double> inputs) const;

  bool operator==(const WeightMatrix& o) const { return cols_ == o.cols_ && rows_ == o.rows_; }

 private:
  std::size_t cols_ = 0;
  std::vector<std::vector<Entry>> rows_;
  std::uint64_t id_ = 0;
};

}  // namespace spinhtm::htm
