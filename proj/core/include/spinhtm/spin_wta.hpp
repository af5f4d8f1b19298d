#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

namespace spinhtm::wta {

/// Domain-wall neuron used as a current comparator with hysteresis.
struct DwnComparator {
  int state = 0;
  double i_threshold = 2e-6;  // A; 0 gives an ideal comparator
  double t_switch = 1e-9;     // s
};

/// Flips to 1 at i_net >= +Ic, to 0 at i_net <= -Ic, else keeps the state.
int dwn_compare(DwnComparator& cmp, double i_net);

/// Reference DAC of one SAR column. Code k of 2^resolution steps maps to
/// full_scale * k / 2^r, bent by the same series-load compression as the
/// input DTCS when load_ratio (GT_full / G_load) is nonzero.
struct SarDac {
  double full_scale = 100e-6;  // A at code 2^resolution
  double load_ratio = 0.0;     // 0 = linear

  double current(std::uint32_t code, int resolution) const;
  double lsb(int resolution) const;
};

struct WtaConfig {
  int resolution = 5;
  SarDac dac;
  double i_threshold = 2e-6;
  double t_switch = 1e-9;
};

/// MSB-first binary search. The comparator is reset to 0 at the start of
/// each conversion and keeps its state across the trials.
std::uint32_t sar_convert(double i_in, const SarDac& dac, DwnComparator& cmp, int resolution);

struct SarWtaState {
  std::vector<std::uint32_t> sar;
  std::vector<std::uint8_t> tr;
  std::vector<std::uint8_t> dr;
  bool dl = true;
  int bit_cursor = 0;  // bits already resolved
  int resolution = 5;
  std::uint32_t dom_threshold = 0;

  static SarWtaState start(std::size_t columns, int resolution, std::uint32_t dom_threshold = 0);
};

/// Applies one resolved bit of every column. Tracking registers start all
/// set; a step clears the tracked columns whose bit is 0 only if some
/// tracked column's bit is 1.
void wta_step(SarWtaState& state, std::span<const std::uint8_t> bits);

struct WtaResult {
  std::optional<std::size_t> winner;  // empty = reject
  std::uint32_t dom = 0;              // code of the best column, also on reject
  std::vector<std::uint32_t> codes;
  std::size_t comparator_ops = 0;
};

/// All columns convert in lockstep; each bit feeds wta_step. Survivors hold
/// the maximum code; the lowest-index survivor wins. Optional trace rows:
/// step,column,trial_code,outcome,tr.
WtaResult wta_select(std::span<const double> currents, const WtaConfig& cfg, std::uint32_t dom_threshold,
                     std::ostream* trace = nullptr);

}  // namespace spinhtm::wta
