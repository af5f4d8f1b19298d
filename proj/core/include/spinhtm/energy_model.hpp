#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spinhtm::energy {

struct EnergyParams {
  double delta_v = 0.05;      // V
  double v_clamp = 0.5;       // V, neuron clamp level
  double i_threshold = 2e-6;  // A
  double t_switch = 1e-9;     // s
  double read_current = 0.3e-6;
  double read_voltage = 0.8;
  double read_time = 1e-9;
  double data_rate = 100e6;  // Hz
  /// Average column current per ampere of comparator threshold
  /// (50 uA at 2 uA).
  double column_current_per_threshold = 25.0;
  /// Per conversion of one DTCS/reference DAC.
  double dac_conversion_energy = 6e-15;
  /// Tracking/discharge register logic per column per bit.
  double wta_bit_energy = 12e-15;
  double wire_cap_per_um = 0.4e-15;  // F/um
  double cmos_memory_read_energy = 1e-9;
  double cmos_dac_energy = 70e-12;
  double cmos_compute_energy = 8.53e-9;

  double average_column_current() const { return column_current_per_threshold * i_threshold; }
  double cmos_reference_total() const { return cmos_memory_read_energy + cmos_dac_energy + cmos_compute_energy; }
  void validate() const;
};

struct EnergyBreakdown {
  double rcn_static = 0;
  double neuron_switching = 0;
  double mtj_read = 0;
  double dac_dynamic = 0;
  double digital_wta = 0;
  double total = 0;
  double cmos_reference_total = 0;
  double ratio = 0;

  double static_part() const { return rcn_static + neuron_switching; }
  double dynamic_part() const { return mtj_read + dac_dynamic + digital_wta; }
};

/// Event counts of one node inference cycle. Every count is required.
struct NodeActivity {
  std::optional<std::uint64_t> rcn_evaluations;   // column-cycles with crossbar current
  std::optional<std::uint64_t> neuron_switch_events;
  std::optional<std::uint64_t> mtj_reads;
  std::optional<std::uint64_t> dac_conversions;
  std::optional<std::uint64_t> wta_bit_cycles;   // column x bit
  double input_wire_um = 0;                       // row wire charged per cycle
};

double neuron_switch_energy(double i_avg, double v_level, double t);
double mtj_read_energy(double i_read, double v_supply, double t);
double rcn_static_energy(double total_column_current, const EnergyParams& p, double t_eval);

/// Activity of a node with a (rows1 x cols1) coincidence crossbar feeding a
/// (rows2 x cols2) inference crossbar, each column digitized with `bits`.
NodeActivity node_activity(std::size_t rows1, std::size_t cols1, std::size_t rows2, std::size_t cols2, int bits,
                           double cell_pitch_um = 1.0);

EnergyBreakdown node_energy_report(const NodeActivity& activity, const EnergyParams& p);

struct SweepRow {
  double i_threshold;
  double delta_v;
  double static_energy;
  double dynamic_energy;
  double total;
};
std::vector<SweepRow> threshold_sweep(const NodeActivity& activity, const EnergyParams& base,
                                      std::span<const double> thresholds, std::span<const double> delta_vs);

std::string breakdown_json(const EnergyBreakdown& b);
std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace spinhtm::energy
