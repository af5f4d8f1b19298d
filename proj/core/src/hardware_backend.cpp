#include "spinhtm/hardware_backend.hpp"

#include <algorithm>
#include <cmath>

#include "spinhtm/error.hpp"

namespace spinhtm::hw {

HardwareConfig HardwareConfig::ideal_reference(int bits) {
  HardwareConfig c;
  c.array.wire_r_per_um = 0.0;
  c.array.weight_bits = 0;
  c.dtcs.linear = true;
  c.dtcs.input_bits = bits;
  c.adc_bits = bits;
  c.i_threshold = 0.0;
  return c;
}

void HardwareConfig::validate() const {
  array.validate();
  dtcs.validate();
  if (adc_bits < 1 || adc_bits > 24) throw Error(ErrorKind::InvalidArgument, "adc_bits must be in [1, 24]");
  if (!(adc_full_scale > 0)) throw Error(ErrorKind::InvalidArgument, "adc_full_scale must be > 0");
  if (i_threshold < 0 || dac_load_ratio < 0) throw Error(ErrorKind::InvalidArgument, "negative comparator parameter");
  if (variation_sigma < 0 || source_sigma < 0) throw Error(ErrorKind::InvalidArgument, "negative variation sigma");
}

HardwareBackend::HardwareBackend(HardwareConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::string HardwareBackend::name() const { return "rcn-" + rcn::to_string(cfg_.mode); }

wta::WtaConfig HardwareBackend::wta_config() const {
  wta::WtaConfig w;
  w.resolution = cfg_.adc_bits;
  w.dac.full_scale = cfg_.adc_full_scale;
  w.dac.load_ratio = cfg_.dac_load_ratio;
  w.i_threshold = cfg_.i_threshold;
  w.t_switch = cfg_.t_switch;
  return w;
}

std::shared_ptr<const HardwareBackend::Programmed> HardwareBackend::array_for(const htm::WeightMatrix& m) const {
  auto build = [&] {
    if (cfg_.mode == rcn::Mode::Nodal && m.rows() * (m.cols() + 1) > kNodalCellLimit) {
      throw Error(ErrorKind::InvalidArgument, "nodal mode: " + std::to_string(m.rows()) + "x" +
                                                  std::to_string(m.cols()) + " array exceeds the nodal size limit");
    }
    // Each matrix draws its own stream so arrays do not share variation.
    const std::uint64_t s = cfg_.seed * 0x9E3779B97F4A7C15ull ^ (m.id() + 0x632BE59BD9B4E019ull);
    rcn::SparseCrossbar sparse(m, cfg_.array, cfg_.variation_sigma, s, cfg_.source_sigma);
    std::optional<rcn::CrossbarArray> dense;
    if (cfg_.mode == rcn::Mode::Nodal) dense = sparse.dense();
    return std::make_shared<const Programmed>(Programmed{std::move(sparse), std::move(dense)});
  };
  if (m.id() == 0) return build();
  std::lock_guard lock(mu_);
  auto it = cache_.find(m.id());
  if (it != cache_.end()) return it->second;
  auto arr = build();
  cache_.emplace(m.id(), arr);
  return arr;
}

std::vector<std::uint32_t> HardwareBackend::input_codes(std::span<const double> inputs) const {
  double top = 0;
  for (double v : inputs) {
    if (v < 0) throw Error(ErrorKind::NegativeWeight, "crossbar inputs must be nonnegative");
    top = std::max(top, v);
  }
  std::vector<std::uint32_t> codes(inputs.size(), 0);
  if (top <= 0) return codes;
  const double mc = cfg_.dtcs.max_code();
  for (std::size_t i = 0; i < inputs.size(); ++i) codes[i] = static_cast<std::uint32_t>(std::lround(inputs[i] / top * mc));
  return codes;
}

htm::Vector HardwareBackend::dot_product_bank(std::span<const double> inputs, const htm::WeightMatrix& matrix) const {
  if (inputs.size() != matrix.rows()) {
    throw Error(ErrorKind::LengthMismatch, "dot_product_bank: " + std::to_string(inputs.size()) + " inputs for " +
                                               std::to_string(matrix.rows()) + " rows");
  }
  const auto codes = input_codes(inputs);
  if (std::all_of(codes.begin(), codes.end(), [](auto c) { return c == 0; })) return htm::Vector(matrix.cols(), 0.0);
  const auto arr = array_for(matrix);
  if (arr->dense) return rcn::signal_currents(*arr->dense, codes, cfg_.dtcs, cfg_.mode);
  return arr->sparse.signal_currents(codes, cfg_.dtcs, cfg_.mode);
}

htm::Vector HardwareBackend::normalize(std::span<const double> values) const {
  double top = 0;
  for (double v : values) top = std::max(top, v);
  htm::Vector out(values.size(), 0.0);
  if (top <= 0) return out;
  // Largest value sits mid-way into the top code bin.
  const double target = (std::ldexp(1.0, cfg_.adc_bits) - 0.5) * cfg_.adc_full_scale / std::ldexp(1.0, cfg_.adc_bits);
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = std::max(0.0, values[i]) / top * target;
  return out;
}

htm::Vector HardwareBackend::digitize(std::span<const double> values) const {
  const auto scaled = normalize(values);
  htm::Vector out(values.size(), 0.0);
  const auto w = wta_config();
  wta::DwnComparator cmp{0, w.i_threshold, w.t_switch};
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    if (scaled[i] > 0) out[i] = wta::sar_convert(scaled[i], w.dac, cmp, w.resolution);
  }
  return out;
}

std::optional<htm::Selection> HardwareBackend::select_winner(std::span<const double> values,
                                                             double dom_threshold) const {
  if (values.empty() || *std::max_element(values.begin(), values.end()) <= 0) return std::nullopt;
  const auto scaled = normalize(values);
  const std::uint32_t thr = dom_threshold <= htm::kAnyEvidence
                                ? 0u
                                : static_cast<std::uint32_t>(std::min(std::ceil(dom_threshold), 4294967295.0));
  const auto r = wta::wta_select(scaled, wta_config(), thr);
  if (!r.winner) return std::nullopt;
  return htm::Selection{*r.winner, static_cast<double>(r.dom)};
}

}  // namespace spinhtm::hw
