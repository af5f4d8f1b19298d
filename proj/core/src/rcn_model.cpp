#include "spinhtm/rcn_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"
#include "spinhtm/error.hpp"

namespace spinhtm::rcn {

Mode parse_mode(const std::string& s) {
  if (s == "ideal") return Mode::Ideal;
  if (s == "lumped") return Mode::Lumped;
  if (s == "nodal") return Mode::Nodal;
  throw Error(ErrorKind::InvalidArgument, "unknown crossbar mode '" + s + "' (ideal|lumped|nodal)");
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Ideal: return "ideal";
    case Mode::Lumped: return "lumped";
    case Mode::Nodal: return "nodal";
  }
  return "?";
}

void ArrayConfig::validate() const {
  if (!(g_min > 0) || !(g_max > g_min)) throw Error(ErrorKind::InvalidArgument, "need 0 < g_min < g_max");
  if (weight_bits < 0 || weight_bits > 24) throw Error(ErrorKind::InvalidArgument, "weight_bits must be in [0, 24]");
  if (wire_r_per_um < 0 || cell_pitch_um < 0 || access_r_ohm < 0) {
    throw Error(ErrorKind::InvalidArgument, "wire and access resistances must be >= 0");
  }
}

ArrayConfig ArrayConfig::standard() { return {}; }

ArrayConfig ArrayConfig::low_resistance() {
  ArrayConfig c;
  c.g_min = 1.0 / 6.4e3;
  c.g_max = 1.0 / 200.0;
  return c;
}

void DtcsConfig::validate() const {
  if (!(delta_v > 0) || !(gt_full > 0)) throw Error(ErrorKind::InvalidArgument, "need delta_v > 0 and gt_full > 0");
  if (input_bits < 1 || input_bits > 24) throw Error(ErrorKind::InvalidArgument, "input_bits must be in [1, 24]");
}

double CrossbarArray::cell_g(std::size_t r, std::size_t c) const {
  const double gc = at(r, c);
  if (cfg.access_r_ohm <= 0) return gc;
  return gc / (1.0 + gc * cfg.access_r_ohm);
}

double CrossbarArray::row_total(std::size_t r) const {
  double s = dummy[r];
  for (std::size_t c = 0; c < cols; ++c) s += cell_g(r, c);
  return s;
}

void CrossbarArray::equalize(double gts_floor) {
  dummy.assign(rows, 0.0);
  std::vector<double> totals(rows);
  double top = gts_floor;
  for (std::size_t r = 0; r < rows; ++r) {
    totals[r] = row_total(r);
    top = std::max(top, totals[r]);
  }
  gts = top;
  for (std::size_t r = 0; r < rows; ++r) dummy[r] = top - totals[r];
  if (source_gain.size() != rows) source_gain.assign(rows, 1.0);
}

CrossbarArray CrossbarArray::from_conductances(std::size_t rows, std::size_t cols, std::vector<double> g,
                                               ArrayConfig cfg, double gts_floor) {
  if (g.size() != rows * cols) throw Error(ErrorKind::LengthMismatch, "conductance matrix size mismatch");
  for (double v : g) {
    if (!(v >= 0)) throw Error(ErrorKind::NegativeWeight, "conductances must be >= 0");
  }
  CrossbarArray a;
  a.rows = rows;
  a.cols = cols;
  a.g = std::move(g);
  a.cfg = cfg;
  a.equalize(gts_floor);
  return a;
}

CrossbarArray map_weights_to_conductances(std::span<const double> w, std::size_t rows, std::size_t cols,
                                          const ArrayConfig& cfg, bool reference_column) {
  cfg.validate();
  if (w.size() != rows * cols) throw Error(ErrorKind::LengthMismatch, "weight matrix size mismatch");
  double w_max = 0;
  for (double v : w) {
    if (v < 0) throw Error(ErrorKind::NegativeWeight, "crossbar weights must be nonnegative");
    w_max = std::max(w_max, v);
  }
  const std::size_t out_cols = cols + (reference_column ? 1 : 0);
  const double levels = cfg.weight_bits > 0 ? std::ldexp(1.0, cfg.weight_bits) - 1.0 : 0.0;
  const double span = cfg.g_max - cfg.g_min;
  std::vector<double> g(rows * out_cols, cfg.g_min);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double x = w_max > 0 ? w[r * cols + c] / w_max : 0.0;
      const double q = levels > 0 ? std::round(x * levels) / levels : x;
      g[r * out_cols + c] = cfg.g_min + q * span;
    }
  }
  auto arr = CrossbarArray::from_conductances(rows, out_cols, std::move(g), cfg);
  arr.has_reference = reference_column;
  return arr;
}

CrossbarArray map_weights_to_conductances(const htm::WeightMatrix& w, const ArrayConfig& cfg, bool reference_column) {
  return map_weights_to_conductances(w.dense(), w.rows(), w.cols(), cfg, reference_column);
}

double dtcs_conductance(std::uint32_t code, const DtcsConfig& cfg) {
  return static_cast<double>(code) / static_cast<double>(cfg.max_code()) * cfg.gt_full;
}

namespace {

double source_current(double gt, const DtcsConfig& cfg, double gts) {
  if (gt <= 0) return 0.0;
  if (cfg.linear || std::isinf(gts)) return cfg.delta_v * gt;
  return cfg.delta_v * gt * gts / (gt + gts);
}

double cell_current_gt(double gt, const DtcsConfig& cfg, double gts, double g_ij) {
  if (gt <= 0 || g_ij <= 0) return 0.0;
  if (cfg.linear) return cfg.delta_v * gt * g_ij / gts;
  return cfg.delta_v * gt * g_ij / (gt + gts);
}

void check_codes(const CrossbarArray& arr, std::span<const std::uint32_t> codes, const DtcsConfig& cfg) {
  if (codes.size() != arr.rows) {
    throw Error(ErrorKind::LengthMismatch, "column_currents: " + std::to_string(codes.size()) + " codes for " +
                                               std::to_string(arr.rows) + " rows");
  }
  for (auto c : codes) {
    if (c > cfg.max_code()) throw Error(ErrorKind::InvalidArgument, "input code exceeds DAC range");
  }
}

double row_gt(const CrossbarArray& arr, std::size_t r, std::uint32_t code, const DtcsConfig& cfg) {
  const double gain = arr.source_gain.empty() ? 1.0 : arr.source_gain[r];
  return dtcs_conductance(code, cfg) * gain;
}

}  // namespace

double dtcs_current(std::uint32_t code, const DtcsConfig& cfg, double gts) {
  return source_current(dtcs_conductance(code, cfg), cfg, gts);
}

double cell_current(std::uint32_t code, const DtcsConfig& cfg, double gts, double g_ij) {
  return cell_current_gt(dtcs_conductance(code, cfg), cfg, gts, g_ij);
}

std::vector<double> column_currents(const CrossbarArray& arr, std::span<const std::uint32_t> codes,
                                    const DtcsConfig& cfg, Mode mode) {
  check_codes(arr, codes, cfg);
  if (mode == Mode::Nodal) return solve_nodal(arr, codes, cfg).column_current;

  std::vector<double> out(arr.cols, 0.0);
  const double r_seg = arr.cfg.segment_r();
  for (std::size_t i = 0; i < arr.rows; ++i) {
    if (codes[i] == 0) continue;
    const double gt = row_gt(arr, i, codes[i], cfg);
    for (std::size_t j = 0; j < arr.cols; ++j) {
      const double g = arr.cell_g(i, j);
      double cur = cell_current_gt(gt, cfg, arr.gts, g);
      if (mode == Mode::Lumped && r_seg > 0) {
        // Row wire from the source to tap j, column wire from row i down to the clamp.
        const double path = r_seg * static_cast<double>(j + 1) + r_seg * static_cast<double>(arr.rows - i);
        cur /= 1.0 + g * path;
      }
      out[j] += cur;
    }
  }
  return out;
}

double detection_margin(std::span<const double> currents) {
  if (currents.size() < 2) throw Error(ErrorKind::TooFewColumns, "detection_margin needs at least 2 columns");
  double best = -std::numeric_limits<double>::infinity(), second = best;
  for (double v : currents) {
    if (v > best) {
      second = best;
      best = v;
    } else if (v > second) {
      second = v;
    }
  }
  if (best <= 0) return 0.0;
  return (best - std::max(second, 0.0)) / best;
}

double intended_margin(std::span<const double> currents, std::size_t k) {
  if (currents.size() < 2) throw Error(ErrorKind::TooFewColumns, "intended_margin needs at least 2 columns");
  if (k >= currents.size()) throw Error(ErrorKind::IndexOutOfRange, "intended_margin: column out of range");
  double other = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < currents.size(); ++j) {
    if (j != k) other = std::max(other, currents[j]);
  }
  if (currents[k] <= 0) return other > 0 ? -1.0 : 0.0;
  return (currents[k] - other) / currents[k];
}

std::vector<double> signal_currents(const CrossbarArray& arr, std::span<const std::uint32_t> codes,
                                    const DtcsConfig& cfg, Mode mode) {
  if (!arr.has_reference) throw Error(ErrorKind::InvalidArgument, "signal_currents needs a reference column");
  auto cur = column_currents(arr, codes, cfg, mode);
  const double ref = cur.back();
  cur.pop_back();
  for (auto& c : cur) c = std::max(0.0, c - ref);
  return cur;
}

MarginProbe reference_probe(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (rows < 2 || cols < 2) throw Error(ErrorKind::InvalidArgument, "reference_probe needs at least 2x2");
  MarginProbe p;
  p.rows = rows;
  p.cols = cols;
  p.w.resize(rows * cols);
  p.codes.resize(rows);
  p.intended = cols - 1;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> filler(0.0, 0.3);
  for (auto& v : p.w) v = filler(rng);
  for (std::size_t i = 0; i < rows; ++i) {
    const bool high = i % 2 == 0;
    p.codes[i] = high ? 31 : 8;
    p.w[i * cols + p.intended] = high ? 1.0 : 0.0;
    p.w[i * cols] = high ? 0.6 : 1.0;
  }
  return p;
}

std::vector<MarginSweepRow> margin_range_sweep(const MarginProbe& probe, const ArrayConfig& base,
                                               const DtcsConfig& dtcs, std::span<const double> scales, Mode mode) {
  std::vector<MarginSweepRow> out;
  for (double s : scales) {
    if (!(s > 0)) throw Error(ErrorKind::InvalidArgument, "range scale must be > 0");
    ArrayConfig cfg = base;
    cfg.g_min *= s;
    cfg.g_max *= s;
    const auto arr = map_weights_to_conductances(probe.w, probe.rows, probe.cols, cfg, true);
    out.push_back({s, mode, intended_margin(signal_currents(arr, probe.codes, dtcs, mode), probe.intended)});
  }
  return out;
}

namespace {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kSourceStream = 0xD1B54A32D192ED03ull;

double varied(double g, double sigma, std::uint64_t seed, std::size_t r, std::size_t c, const ArrayConfig& cfg) {
  return std::clamp(g * (1.0 + sigma * variation_draw(seed, r, c)), cfg.g_min, cfg.g_max);
}

}  // namespace

namespace {

// Normal quantiles at the midpoints of 2^16 equal-probability bins.
constexpr int kQuantileBits = 16;

std::vector<double> make_quantiles() {
  const std::size_t n = std::size_t{1} << kQuantileBits;
  std::vector<double> q(n);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double p = (static_cast<double>(k) + 0.5) / static_cast<double>(n);  // lower tail
    double lo = -10.0, hi = 0.0;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (0.5 * std::erfc(-mid / std::numbers::sqrt2) < p ? lo : hi) = mid;
    }
    q[k] = 0.5 * (lo + hi);
    q[n - 1 - k] = -q[k];
  }
  return q;
}

const std::vector<double>& quantiles() {
  static const std::vector<double> q = make_quantiles();
  return q;
}

std::uint64_t row_key(std::uint64_t seed, std::uint64_t r) { return mix64(mix64(seed) ^ r); }

double draw_from_key(const std::vector<double>& q, std::uint64_t key, std::uint64_t c) {
  return q[mix64(key ^ c) >> (64 - kQuantileBits)];
}

}  // namespace

double variation_draw(std::uint64_t seed, std::uint64_t r, std::uint64_t c) {
  return draw_from_key(quantiles(), row_key(seed, r), c);
}

CrossbarArray inject_variation(const CrossbarArray& arr, double sigma, std::uint64_t seed, double source_sigma) {
  if (sigma < 0 || source_sigma < 0) throw Error(ErrorKind::InvalidArgument, "variation sigma must be >= 0");
  CrossbarArray out = arr;
  if (sigma == 0 && source_sigma == 0) return out;
  out.variation_sigma = sigma;
  out.seed = seed;
  if (sigma > 0) {
    for (std::size_t r = 0; r < out.rows; ++r) {
      for (std::size_t c = 0; c < out.cols; ++c) {
        auto& g = out.g[r * out.cols + c];
        g = varied(g, sigma, seed, r, c, arr.cfg);
      }
    }
  }
  if (source_sigma > 0) {
    if (out.source_gain.size() != out.rows) out.source_gain.assign(out.rows, 1.0);
    for (std::size_t r = 0; r < out.rows; ++r) {
      out.source_gain[r] = std::max(0.0, out.source_gain[r] * (1.0 + source_sigma * variation_draw(seed ^ kSourceStream, r, 0)));
    }
  }
  out.equalize();
  return out;
}

// --- sparse crossbar -----------------------------------------------------------

SparseCrossbar::SparseCrossbar(const htm::WeightMatrix& w, const ArrayConfig& cfg, double sigma, std::uint64_t seed,
                               double source_sigma)
    : rows_(w.rows()), cols_(w.cols() + 1), cfg_(cfg), sigma_(sigma), seed_(seed) {
  cfg.validate();
  if (sigma < 0 || source_sigma < 0) throw Error(ErrorKind::InvalidArgument, "variation sigma must be >= 0");
  const double w_max = std::max(0.0, w.max_value());
  const double levels = cfg.weight_bits > 0 ? std::ldexp(1.0, cfg.weight_bits) - 1.0 : 0.0;
  const double span = cfg.g_max - cfg.g_min;
  programmed_.resize(rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (const auto& e : w.row(r)) {
      if (e.value < 0) throw Error(ErrorKind::NegativeWeight, "crossbar weights must be nonnegative");
      const double x = w_max > 0 ? e.value / w_max : 0.0;
      const double q = levels > 0 ? std::round(x * levels) / levels : x;
      programmed_[r].emplace_back(e.col, cfg.g_min + q * span);
    }
    std::sort(programmed_[r].begin(), programmed_[r].end());
  }
  if (sigma > 0 && rows_ * cols_ <= kTableLimit) {
    std::vector<double> table(rows_ * cols_);
    std::vector<double> row;
    for (std::size_t r = 0; r < rows_; ++r) {
      row_conductances(r, row);
      std::copy(row.begin(), row.end(), table.begin() + static_cast<std::ptrdiff_t>(r * cols_));
    }
    table_ = std::move(table);
  }
  // Same summation order as CrossbarArray::equalize.
  std::vector<double> row;
  double top = 0.0;
  for (std::size_t r = 0; r < rows_; ++r) {
    row_conductances(r, row);
    double s = 0.0;
    for (double g : row) s += cell(g);
    top = std::max(top, s);
  }
  gts_ = top;
  if (source_sigma > 0) {
    source_gain_.resize(rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
      source_gain_[r] = std::max(0.0, 1.0 + source_sigma * variation_draw(seed ^ kSourceStream, r, 0));
    }
  }
}

double SparseCrossbar::nominal(std::size_t r, std::size_t c) const {
  const auto& p = programmed_[r];
  auto it = std::lower_bound(p.begin(), p.end(), std::pair<std::uint32_t, double>(static_cast<std::uint32_t>(c), -1.0));
  return it != p.end() && it->first == c ? it->second : cfg_.g_min;
}

double SparseCrossbar::conductance(std::size_t r, std::size_t c) const {
  if (!table_.empty()) return table_[r * cols_ + c];
  const double g = nominal(r, c);
  return sigma_ > 0 ? varied(g, sigma_, seed_, r, c, cfg_) : g;
}

double SparseCrossbar::cell(double g) const {
  if (cfg_.access_r_ohm <= 0) return g;
  return g / (1.0 + g * cfg_.access_r_ohm);
}

void SparseCrossbar::row_conductances(std::size_t r, std::vector<double>& out) const {
  if (!table_.empty()) {
    out.assign(table_.begin() + static_cast<std::ptrdiff_t>(r * cols_),
               table_.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols_));
    return;
  }
  out.assign(cols_, cfg_.g_min);
  for (const auto& [c, g] : programmed_[r]) out[c] = g;
  if (sigma_ > 0) {
    const auto& q = quantiles();
    const std::uint64_t key = row_key(seed_, r);
    for (std::size_t c = 0; c < cols_; ++c) {
      out[c] = std::clamp(out[c] * (1.0 + sigma_ * draw_from_key(q, key, c)), cfg_.g_min, cfg_.g_max);
    }
  }
}

std::vector<double> SparseCrossbar::column_currents(std::span<const std::uint32_t> codes, const DtcsConfig& dtcs,
                                                    Mode mode) const {
  if (codes.size() != rows_) {
    throw Error(ErrorKind::LengthMismatch, "column_currents: " + std::to_string(codes.size()) + " codes for " +
                                               std::to_string(rows_) + " rows");
  }
  for (auto c : codes) {
    if (c > dtcs.max_code()) throw Error(ErrorKind::InvalidArgument, "input code exceeds DAC range");
  }
  if (mode == Mode::Nodal) return rcn::column_currents(dense(), codes, dtcs, mode);

  std::vector<double> out(cols_, 0.0);
  std::vector<double> row;
  const double r_seg = cfg_.segment_r();
  for (std::size_t i = 0; i < rows_; ++i) {
    if (codes[i] == 0) continue;
    const double gt = dtcs_conductance(codes[i], dtcs) * source_gain(i);
    row_conductances(i, row);
    for (std::size_t j = 0; j < cols_; ++j) {
      const double g = cell(row[j]);
      double cur = cell_current_gt(gt, dtcs, gts_, g);
      if (mode == Mode::Lumped && r_seg > 0) {
        const double path = r_seg * static_cast<double>(j + 1) + r_seg * static_cast<double>(rows_ - i);
        cur /= 1.0 + g * path;
      }
      out[j] += cur;
    }
  }
  return out;
}

std::vector<double> SparseCrossbar::signal_currents(std::span<const std::uint32_t> codes, const DtcsConfig& dtcs,
                                                    Mode mode) const {
  auto cur = column_currents(codes, dtcs, mode);
  const double ref = cur.back();
  cur.pop_back();
  for (auto& c : cur) c = std::max(0.0, c - ref);
  return cur;
}

CrossbarArray SparseCrossbar::dense() const {
  std::vector<double> g(rows_ * cols_);
  std::vector<double> row;
  for (std::size_t r = 0; r < rows_; ++r) {
    row_conductances(r, row);
    std::copy(row.begin(), row.end(), g.begin() + static_cast<std::ptrdiff_t>(r * cols_));
  }
  auto arr = CrossbarArray::from_conductances(rows_, cols_, std::move(g), cfg_);
  arr.has_reference = true;
  // Without variation the seed is meaningless; inject_variation leaves it unset too.
  if (sigma_ > 0 || !source_gain_.empty()) {
    arr.variation_sigma = sigma_;
    arr.seed = seed_;
  }
  if (!source_gain_.empty()) arr.source_gain = source_gain_;
  return arr;
}

std::string dump_array(const CrossbarArray& arr) {
  nlohmann::json j;
  j["format"] = "spinhtm-crossbar";
  j["version"] = 1;
  j["rows"] = arr.rows;
  j["cols"] = arr.cols;
  j["config"] = {{"g_min", arr.cfg.g_min},
                 {"g_max", arr.cfg.g_max},
                 {"weight_bits", arr.cfg.weight_bits},
                 {"wire_r_per_um", arr.cfg.wire_r_per_um},
                 {"cell_pitch_um", arr.cfg.cell_pitch_um},
                 {"access_r_ohm", arr.cfg.access_r_ohm}};
  j["variation_sigma"] = arr.variation_sigma;
  j["seed"] = arr.seed;
  j["has_reference"] = arr.has_reference;
  j["gts"] = arr.gts;
  j["g"] = arr.g;
  j["dummy"] = arr.dummy;
  j["source_gain"] = arr.source_gain;
  return j.dump(1);
}

CrossbarArray restore_array(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "spinhtm-crossbar" || j.at("version") != 1) {
      throw Error(ErrorKind::Config, "not a crossbar dump");
    }
    CrossbarArray a;
    a.rows = j.at("rows").get<std::size_t>();
    a.cols = j.at("cols").get<std::size_t>();
    const auto& c = j.at("config");
    a.cfg.g_min = c.at("g_min").get<double>();
    a.cfg.g_max = c.at("g_max").get<double>();
    a.cfg.weight_bits = c.at("weight_bits").get<int>();
    a.cfg.wire_r_per_um = c.at("wire_r_per_um").get<double>();
    a.cfg.cell_pitch_um = c.at("cell_pitch_um").get<double>();
    a.cfg.access_r_ohm = c.at("access_r_ohm").get<double>();
    a.variation_sigma = j.at("variation_sigma").get<double>();
    a.seed = j.at("seed").get<std::uint64_t>();
    a.has_reference = j.at("has_reference").get<bool>();
    a.gts = j.at("gts").get<double>();
    a.g = j.at("g").get<std::vector<double>>();
    a.dummy = j.at("dummy").get<std::vector<double>>();
    a.source_gain = j.at("source_gain").get<std::vector<double>>();
    if (a.g.size() != a.rows * a.cols || a.dummy.size() != a.rows || a.source_gain.size() != a.rows) {
      throw Error(ErrorKind::Config, "crossbar dump has inconsistent sizes");
    }
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("crossbar dump: ") + e.what());
  }
}

std::string margin_sweep_csv(std::span<const MarginSweepRow> rows) {
  std::ostringstream os;
  os.precision(17);
  os << "g_range,mode,margin\n";
  for (const auto& r : rows) os << r.g_range_scale << ',' << to_string(r.mode) << ',' << r.margin << '\n';
  return os.str();
}

}  // namespace spinhtm::rcn
