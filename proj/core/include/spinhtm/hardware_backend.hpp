#pragma once

#include <map>
#include <memory>
#include <mutex>

#include "spinhtm/backend.hpp"
#include "spinhtm/rcn_model.hpp"
#include "spinhtm/spin_wta.hpp"

namespace spinhtm::hw {

struct HardwareConfig {
  rcn::ArrayConfig array;
  rcn::DtcsConfig dtcs;
  rcn::Mode mode = rcn::Mode::Ideal;
  int adc_bits = 5;
  /// ADC full scale; column currents are normalized so the largest lands
  /// in the top code bin.
  double adc_full_scale = 100e-6;
  double dac_load_ratio = 0.0;
  double i_threshold = 2e-6;
  double t_switch = 1e-9;
  double variation_sigma = 0.0;
  double source_sigma = 0.0;
  std::uint64_t seed = 1;

  /// No parasitics, no variation, ideal comparator and linear sources.
  static HardwareConfig ideal_reference(int bits);
  void validate() const;
};

/// Crossbar dot products digitized by the spin-neuron SAR-ADC and selected
/// by the winner-tracking WTA. Programmed arrays are cached per matrix id;
/// matrices with id 0 are mapped on every call.
class HardwareBackend final : public htm::ComputeBackend {
 public:
  explicit HardwareBackend(HardwareConfig cfg);

  htm::Vector dot_product_bank(std::span<const double> inputs, const htm::WeightMatrix& matrix) const override;
  htm::Vector digitize(std::span<const double> values) const override;
  std::optional<htm::Selection> select_winner(std::span<const double> values, double dom_threshold) const override;
  std::string name() const override;

  /// Nodal mode solves the full network per product; larger arrays are refused.
  static constexpr std::size_t kNodalCellLimit = std::size_t{1} << 18;

  const HardwareConfig& config() const { return cfg_; }
  /// Input codes the DTCS bank would receive for these values.
  std::vector<std::uint32_t> input_codes(std::span<const double> inputs) const;
  /// Values rescaled onto the ADC range.
  htm::Vector normalize(std::span<const double> values) const;
  wta::WtaConfig wta_config() const;

 private:
  struct Programmed {
    rcn::SparseCrossbar sparse;
    std::optional<rcn::CrossbarArray> dense;  // nodal mode only
  };
  std::shared_ptr<const Programmed> array_for(const htm::WeightMatrix& m) const;

  HardwareConfig cfg_;
  mutable std::mutex mu_;
  mutable std::map<std::uint64_t, std::shared_ptr<const Programmed>> cache_;
};

}  // namespace spinhtm::hw
