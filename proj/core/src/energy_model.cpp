#include "spinhtm/energy_model.hpp"

#include <sstream>

#include "json.hpp"
#include "spinhtm/error.hpp"

namespace spinhtm::energy {

void EnergyParams::validate() const {
  const double all[] = {delta_v,     v_clamp,       i_threshold, t_switch, read_current, read_voltage, read_time,
                        data_rate,   column_current_per_threshold, cmos_memory_read_energy, cmos_dac_energy,
                        cmos_compute_energy};
  for (double v : all) {
    if (!(v > 0)) throw Error(ErrorKind::InvalidArgument, "energy parameters must be positive");
  }
  if (dac_conversion_energy < 0 || wta_bit_energy < 0 || wire_cap_per_um < 0) {
    throw Error(ErrorKind::InvalidArgument, "per-event energies must be >= 0");
  }
}

double neuron_switch_energy(double i_avg, double v_level, double t) { return i_avg * v_level * t; }

double mtj_read_energy(double i_read, double v_supply, double t) { return i_read * v_supply * t; }

double rcn_static_energy(double total_column_current, const EnergyParams& p, double t_eval) {
  if (total_column_current < 0) throw Error(ErrorKind::InvalidArgument, "column current must be >= 0");
  return total_column_current * 2.0 * p.delta_v * t_eval;
}

NodeActivity node_activity(std::size_t rows1, std::size_t cols1, std::size_t rows2, std::size_t cols2, int bits,
                           double cell_pitch_um) {
  const std::uint64_t column_bits = static_cast<std::uint64_t>(cols1 + cols2) * static_cast<std::uint64_t>(bits);
  NodeActivity a;
  a.rcn_evaluations = column_bits;
  a.neuron_switch_events = column_bits;
  a.mtj_reads = column_bits;
  a.wta_bit_cycles = column_bits;
  // Input DTCS per crossbar row, plus one reference-DAC trial per column-bit.
  a.dac_conversions = rows1 + rows2 + column_bits;
  a.input_wire_um = static_cast<double>(rows1 * cols1 + rows2 * cols2) * cell_pitch_um;
  return a;
}

EnergyBreakdown node_energy_report(const NodeActivity& a, const EnergyParams& p) {
  p.validate();
  auto need = [](const std::optional<std::uint64_t>& v, const char* what) {
    if (!v) throw Error(ErrorKind::MissingActivity, std::string("node activity lacks ") + what);
    return static_cast<double>(*v);
  };
  const double rcn = need(a.rcn_evaluations, "rcn_evaluations");
  const double sw = need(a.neuron_switch_events, "neuron_switch_events");
  const double reads = need(a.mtj_reads, "mtj_reads");
  const double dacs = need(a.dac_conversions, "dac_conversions");
  const double bits = need(a.wta_bit_cycles, "wta_bit_cycles");

  const double i_avg = p.average_column_current();
  EnergyBreakdown b;
  b.rcn_static = rcn * rcn_static_energy(i_avg, p, p.t_switch);
  b.neuron_switching = sw * neuron_switch_energy(i_avg, p.delta_v, p.t_switch);
  b.mtj_read = reads * mtj_read_energy(p.read_current, p.read_voltage, p.read_time);
  b.dac_dynamic = dacs * p.dac_conversion_energy + a.input_wire_um * p.wire_cap_per_um * p.delta_v * p.delta_v;
  b.digital_wta = bits * p.wta_bit_energy;
  b.total = b.rcn_static + b.neuron_switching + b.mtj_read + b.dac_dynamic + b.digital_wta;
  if (b.total > 0) {
    b.cmos_reference_total = p.cmos_reference_total();
    b.ratio = b.cmos_reference_total / b.total;
  }
  return b;
}

std::vector<SweepRow> threshold_sweep(const NodeActivity& activity, const EnergyParams& base,
                                      std::span<const double> thresholds, std::span<const double> delta_vs) {
  std::vector<SweepRow> rows;
  for (double dv : delta_vs) {
    for (double it : thresholds) {
      EnergyParams p = base;
      p.delta_v = dv;
      p.i_threshold = it;
      const auto b = node_energy_report(activity, p);
      rows.push_back({it, dv, b.static_part(), b.dynamic_part(), b.total});
    }
  }
  return rows;
}

std::string breakdown_json(const EnergyBreakdown& b) {
  nlohmann::ordered_json j;
  j["schema"] = "spinhtm.energy.v1";
  j["rcn_static_j"] = b.rcn_static;
  j["neuron_switching_j"] = b.neuron_switching;
  j["mtj_read_j"] = b.mtj_read;
  j["dac_dynamic_j"] = b.dac_dynamic;
  j["digital_wta_j"] = b.digital_wta;
  j["static_j"] = b.static_part();
  j["dynamic_j"] = b.dynamic_part();
  j["total_j"] = b.total;
  j["cmos_reference_total_j"] = b.cmos_reference_total;
  j["ratio"] = b.ratio;
  return j.dump(2);
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::ostringstream os;
  os.precision(10);
  os << "i_threshold_a,delta_v_v,static_j,dynamic_j,total_j\n";
  for (const auto& r : rows) {
    os << r.i_threshold << ',' << r.delta_v << ',' << r.static_energy << ',' << r.dynamic_energy << ',' << r.total
       << '\n';
  }
  return os.str();
}

}  // namespace spinhtm::energy
