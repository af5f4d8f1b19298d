#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spinhtm/weight_matrix.hpp"

namespace spinhtm::rcn {

using htm::Vector;

enum class Mode { Ideal, Lumped, Nodal };

Mode parse_mode(const std::string& s);
std::string to_string(Mode m);

struct ArrayConfig {
  double g_min = 1.0 / 32e3;  // S
  double g_max = 1.0 / 1e3;   // S
  int weight_bits = 5;        // 0 = unquantized
  double wire_r_per_um = 1.0;
  double cell_pitch_um = 1.0;
  /// Series ON resistance of a per-cell access transistor; 0 = none.
  double access_r_ohm = 0.0;

  double segment_r() const { return wire_r_per_um * cell_pitch_um; }
  void validate() const;

  /// 1 kOhm .. 32 kOhm, the default.
  static ArrayConfig standard();
  /// 200 Ohm .. 6.4 kOhm without access transistors.
  static ArrayConfig low_resistance();

  bool operator==(const ArrayConfig&) const = default;
};

struct DtcsConfig {
  double delta_v = 0.05;  // V
  double gt_full = 1e-3;  // S at the top input code
  int input_bits = 5;
  /// Ideal current source: I = delta_v * GT regardless of the row load.
  bool linear = false;

  std::uint32_t max_code() const { return (1u << input_bits) - 1u; }
  void validate() const;
};

/// Programmed conductances of one weight matrix. Rows are inputs, columns
/// stored patterns; each row carries a dummy device so that every row's
/// total device conductance equals gts.
struct CrossbarArray {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> g;      // row-major rows x cols, siemens
  std::vector<double> dummy;  // per row
  double gts = 0.0;
  std::vector<double> source_gain;  // per-row DTCS gain, 1 unless varied
  ArrayConfig cfg;
  double variation_sigma = 0.0;
  std::uint64_t seed = 0;
  /// Last column is an all-g_min reference, not a stored pattern.
  bool has_reference = false;

  double at(std::size_t r, std::size_t c) const { return g[r * cols + c]; }
  /// Effective conductance of a cell including the access device.
  double cell_g(std::size_t r, std::size_t c) const;
  double row_total(std::size_t r) const;

  /// Builds an array from explicit conductances; dummies pad rows to the
  /// largest row total, or to gts_floor when that is larger.
  static CrossbarArray from_conductances(std::size_t rows, std::size_t cols, std::vector<double> g,
                                         ArrayConfig cfg, double gts_floor = 0.0);
  /// Recomputes dummies and gts after the conductances changed.
  void equalize(double gts_floor = 0.0);

  bool operator==(const CrossbarArray&) const = default;
};

/// Quantizing linear map from [0, w_max] to [g_min, g_max]; zero -> g_min.
/// With reference_column an extra all-g_min column is appended.
CrossbarArray map_weights_to_conductances(const htm::WeightMatrix& w, const ArrayConfig& cfg,
                                          bool reference_column = false);
/// Same for a dense row-major matrix.
CrossbarArray map_weights_to_conductances(std::span<const double> w, std::size_t rows, std::size_t cols,
                                          const ArrayConfig& cfg, bool reference_column = false);

double dtcs_conductance(std::uint32_t code, const DtcsConfig& cfg);
double dtcs_current(std::uint32_t code, const DtcsConfig& cfg, double gts);
double cell_current(std::uint32_t code, const DtcsConfig& cfg, double gts, double g_ij);

std::vector<double> column_currents(const CrossbarArray& arr, std::span<const std::uint32_t> codes,
                                    const DtcsConfig& cfg, Mode mode);

struct NodalSolution {
  /// Row-bar taps (rows x (cols + 1), last tap feeds the dummy) followed by
  /// column-bar taps (rows x cols). Empty when wires are ideal.
  std::vector<double> voltages;
  std::vector<double> row_voltage;     // tap where each source enters
  std::vector<double> column_current;  // into each column clamp
  std::vector<double> source_current;  // out of each DTCS
  std::vector<double> dummy_current;   // through each dummy device
  /// |sum(source) - sum(column) - sum(dummy)| / sum(source).
  double kcl_residual = 0.0;
};

/// DC solution of the full resistive network: wire segments of
/// segment_r() ohms, DTCS sources as conductances to the delta_v rail,
/// column ends and dummy devices clamped at 0 V (the neuron clamp level).
NodalSolution solve_nodal(const CrossbarArray& arr, std::span<const std::uint32_t> codes, const DtcsConfig& cfg);

/// Standard normal draw for cell (r, c) of a variation stream. Counter based,
/// so any cell can be drawn without generating the cells before it. Draws
/// come from 2^16 equal-probability quantiles (tails cut near 4.2 sigma).
double variation_draw(std::uint64_t seed, std::uint64_t r, std::uint64_t c);

/// Multiplies each programmed conductance by an independent N(1, sigma)
/// draw, clamped to [g_min, g_max]. source_sigma varies each row's DTCS
/// gain the same way. Dummies are re-equalized afterwards.
CrossbarArray inject_variation(const CrossbarArray& arr, double sigma, std::uint64_t seed, double source_sigma = 0.0);

/// A crossbar programmed from a sparse weight matrix, with a reference
/// column. Unprogrammed cells sit at g_min and are not stored; under
/// variation they are drawn on demand (or tabulated when the array is small
/// enough). Evaluation skips rows with a zero input code, so large arrays
/// driven by sparse inputs stay cheap. Results match the dense path:
/// map_weights_to_conductances(w, cfg, true) followed by inject_variation.
class SparseCrossbar {
 public:
  /// Arrays with at most this many cells get a conductance table under variation.
  static constexpr std::size_t kTableLimit = std::size_t{1} << 25;

  SparseCrossbar(const htm::WeightMatrix& w, const ArrayConfig& cfg, double sigma = 0.0, std::uint64_t seed = 0,
                 double source_sigma = 0.0);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }  // stored patterns + reference
  double gts() const { return gts_; }
  /// Programmed conductance, variation included, before the access device.
  double conductance(std::size_t r, std::size_t c) const;
  double source_gain(std::size_t r) const { return source_gain_.empty() ? 1.0 : source_gain_[r]; }

  /// Ideal or lumped column currents, reference column last.
  std::vector<double> column_currents(std::span<const std::uint32_t> codes, const DtcsConfig& dtcs, Mode mode) const;
  /// Pattern-column currents minus the reference, clamped at 0.
  std::vector<double> signal_currents(std::span<const std::uint32_t> codes, const DtcsConfig& dtcs, Mode mode) const;

  /// Materialized equivalent, for the nodal solver.
  CrossbarArray dense() const;

 private:
  double nominal(std::size_t r, std::size_t c) const;
  double cell(double g) const;
  void row_conductances(std::size_t r, std::vector<double>& out) const;

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  ArrayConfig cfg_;
  double sigma_ = 0.0;
  std::uint64_t seed_ = 0;
  double gts_ = 0.0;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> programmed_;  // nonzero weights, by column
  std::vector<double> table_;  // rows x cols, only under variation
  std::vector<double> source_gain_;
};

/// (max - second) / max; 0 when max <= 0.
double detection_margin(std::span<const double> currents);

struct MarginSweepRow {
  double g_range_scale;
  Mode mode;
  double margin;
};

/// Margin of column k over the best other column, relative to column k.
/// Negative when another column wins.
double intended_margin(std::span<const double> currents, std::size_t k);

/// Column currents with the reference column subtracted (clamped at 0).
std::vector<double> signal_currents(const CrossbarArray& arr, std::span<const std::uint32_t> codes,
                                    const DtcsConfig& cfg, Mode mode);

/// A fixed stored-pattern set plus one input. Even rows are driven at full
/// code and odd rows at a low code. The intended column stores exactly the
/// even rows and sits farthest from the sources. Column 0 stores all odd rows
/// plus a partial copy of the even ones, so it is the runner-up once
/// source compression evens out the drive levels.
struct MarginProbe {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> w;  // row-major
  std::vector<std::uint32_t> codes;
  std::size_t intended = 0;
};
MarginProbe reference_probe(std::size_t rows = 32, std::size_t cols = 16, std::uint64_t seed = 7);

/// Scales [g_min, g_max] of `base` by each factor and records the intended
/// column's margin.
std::vector<MarginSweepRow> margin_range_sweep(const MarginProbe& probe, const ArrayConfig& base,
                                                      const DtcsConfig& dtcs, std::span<const double> scales,
                                                      Mode mode);

/// Structured-text dump: config plus the conductance matrix.
std::string dump_array(const CrossbarArray& arr);
CrossbarArray restore_array(const std::string& text);

std::string margin_sweep_csv(std::span<const MarginSweepRow> rows);

}  // namespace spinhtm::rcn
