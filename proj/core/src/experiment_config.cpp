#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "spinhtm/error.hpp"
#include "spinhtm/experiment.hpp"

namespace spinhtm::exp {

using nlohmann::json;

namespace {

const char* const kBackends[] = {"ideal", "rcn-ideal", "rcn-lumped", "rcn-nodal"};

void config_error(const std::string& msg) { throw Error(ErrorKind::Config, msg); }

// Reads `key` from `obj` into `out` when present; type errors become Config errors.
template <class T>
void read(const json& obj, const char* key, T& out, const std::string& section) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    config_error(section + "." + key + ": wrong type (" + std::string(it->type_name()) + ")");
  }
}

void reject_unknown(const json& obj, const json& reference, const std::string& section) {
  if (!obj.is_object()) config_error(section + ": expected an object");
  for (const auto& [k, v] : obj.items()) {
    if (!reference.contains(k)) config_error("unknown key " + (section.empty() ? k : section + "." + k));
  }
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["schema"] = kConfigSchema;
  j["dataset"] = {{"images", c.dataset.images},
                  {"labels", c.dataset.labels},
                  {"classes", c.dataset.classes},
                  {"train_per_class", c.dataset.train_per_class},
                  {"test_offset", c.dataset.test_offset},
                  {"test_per_class", c.dataset.test_per_class}};
  j["topology"] = {{"field", c.topology.field}, {"patch", c.topology.patch}, {"fan", c.topology.fan}};
  j["htm"] = {{"matching_threshold", c.htm.matching_threshold},
              {"max_group_size", c.htm.max_group_size},
              {"weight_bits", c.htm.weight_bits},
              {"y_threshold", c.htm.y_threshold}};
  j["scan"] = {{"max_shift", c.scan.max_shift},
               {"shift_step", c.scan.shift_step},
               {"rotation_range_deg", c.scan.rotation_range_deg},
               {"rotation_step_deg", c.scan.rotation_step_deg},
               {"scale_levels", c.scan.scale_levels}};
  j["backend"] = c.backend;
  j["dom_threshold"] = c.dom_threshold;
  const auto& h = c.hardware;
  j["hardware"] = {{"preset", h.preset},
                   {"r_min_ohm", h.r_min_ohm},
                   {"r_max_ohm", h.r_max_ohm},
                   {"weight_bits", h.weight_bits},
                   {"wire_r_per_um", h.wire_r_per_um},
                   {"wire_c_per_um", h.wire_c_per_um},
                   {"cell_pitch_um", h.cell_pitch_um},
                   {"access_r_ohm", h.access_r_ohm},
                   {"delta_v", h.delta_v},
                   {"gt_full", h.gt_full},
                   {"input_bits", h.input_bits},
                   {"linear_dtcs", h.linear_dtcs},
                   {"adc_bits", h.adc_bits},
                   {"adc_full_scale", h.adc_full_scale},
                   {"dac_load_ratio", h.dac_load_ratio},
                   {"i_threshold", h.i_threshold},
                   {"t_switch", h.t_switch},
                   {"variation_sigma", h.variation_sigma},
                   {"source_sigma", h.source_sigma},
                   {"data_rate", h.data_rate}};
  const auto& e = c.energy;
  j["energy"] = {{"v_clamp", e.v_clamp},
                 {"read_current", e.read_current},
                 {"read_voltage", e.read_voltage},
                 {"read_time", e.read_time},
                 {"column_current_per_threshold", e.column_current_per_threshold},
                 {"dac_conversion_energy", e.dac_conversion_energy},
                 {"wta_bit_energy", e.wta_bit_energy},
                 {"cmos_memory_read_energy", e.cmos_memory_read_energy},
                 {"cmos_dac_energy", e.cmos_dac_energy},
                 {"cmos_compute_energy", e.cmos_compute_energy}};
  j["seed"] = c.seed;
  j["out"] = c.out;
  return j;
}

ExperimentConfig from_json(const json& j, const ExperimentConfig& base) {
  const json ref = to_json(base);
  reject_unknown(j, ref, "");
  if (auto it = j.find("schema"); it != j.end() && *it != kConfigSchema) {
    config_error("unsupported config schema " + it->dump());
  }
  ExperimentConfig c = base;
  auto section = [&](const char* name) -> const json* {
    auto it = j.find(name);
    if (it == j.end()) return nullptr;
    reject_unknown(*it, ref[name], name);
    return &*it;
  };
  if (const json* s = section("dataset")) {
    read(*s, "images", c.dataset.images, "dataset");
    read(*s, "labels", c.dataset.labels, "dataset");
    read(*s, "classes", c.dataset.classes, "dataset");
    read(*s, "train_per_class", c.dataset.train_per_class, "dataset");
    read(*s, "test_offset", c.dataset.test_offset, "dataset");
    read(*s, "test_per_class", c.dataset.test_per_class, "dataset");
  }
  if (const json* s = section("topology")) {
    read(*s, "field", c.topology.field, "topology");
    read(*s, "patch", c.topology.patch, "topology");
    read(*s, "fan", c.topology.fan, "topology");
  }
  if (const json* s = section("htm")) {
    read(*s, "matching_threshold", c.htm.matching_threshold, "htm");
    read(*s, "max_group_size", c.htm.max_group_size, "htm");
    read(*s, "weight_bits", c.htm.weight_bits, "htm");
    read(*s, "y_threshold", c.htm.y_threshold, "htm");
  }
  if (const json* s = section("scan")) {
    read(*s, "max_shift", c.scan.max_shift, "scan");
    read(*s, "shift_step", c.scan.shift_step, "scan");
    read(*s, "rotation_range_deg", c.scan.rotation_range_deg, "scan");
    read(*s, "rotation_step_deg", c.scan.rotation_step_deg, "scan");
    read(*s, "scale_levels", c.scan.scale_levels, "scan");
  }
  read(j, "backend", c.backend, "");
  read(j, "dom_threshold", c.dom_threshold, "");
  if (const json* s = section("hardware")) {
    auto& h = c.hardware;
    read(*s, "preset", h.preset, "hardware");
    // A preset fills the conductance range unless the file gives it explicitly.
    if (s->contains("preset")) {
      if (h.preset == "standard") {
        h.r_min_ohm = 1e3;
        h.r_max_ohm = 32e3;
      } else if (h.preset == "low_resistance") {
        h.r_min_ohm = 200;
        h.r_max_ohm = 6.4e3;
      } else {
        config_error("hardware.preset: unknown preset '" + h.preset + "'");
      }
    }
    read(*s, "r_min_ohm", h.r_min_ohm, "hardware");
    read(*s, "r_max_ohm", h.r_max_ohm, "hardware");
    read(*s, "weight_bits", h.weight_bits, "hardware");
    read(*s, "wire_r_per_um", h.wire_r_per_um, "hardware");
    read(*s, "wire_c_per_um", h.wire_c_per_um, "hardware");
    read(*s, "cell_pitch_um", h.cell_pitch_um, "hardware");
    read(*s, "access_r_ohm", h.access_r_ohm, "hardware");
    read(*s, "delta_v", h.delta_v, "hardware");
    read(*s, "gt_full", h.gt_full, "hardware");
    read(*s, "input_bits", h.input_bits, "hardware");
    read(*s, "linear_dtcs", h.linear_dtcs, "hardware");
    read(*s, "adc_bits", h.adc_bits, "hardware");
    read(*s, "adc_full_scale", h.adc_full_scale, "hardware");
    read(*s, "dac_load_ratio", h.dac_load_ratio, "hardware");
    read(*s, "i_threshold", h.i_threshold, "hardware");
    read(*s, "t_switch", h.t_switch, "hardware");
    read(*s, "variation_sigma", h.variation_sigma, "hardware");
    read(*s, "source_sigma", h.source_sigma, "hardware");
    read(*s, "data_rate", h.data_rate, "hardware");
  }
  if (const json* s = section("energy")) {
    auto& e = c.energy;
    read(*s, "v_clamp", e.v_clamp, "energy");
    read(*s, "read_current", e.read_current, "energy");
    read(*s, "read_voltage", e.read_voltage, "energy");
    read(*s, "read_time", e.read_time, "energy");
    read(*s, "column_current_per_threshold", e.column_current_per_threshold, "energy");
    read(*s, "dac_conversion_energy", e.dac_conversion_energy, "energy");
    read(*s, "wta_bit_energy", e.wta_bit_energy, "energy");
    read(*s, "cmos_memory_read_energy", e.cmos_memory_read_energy, "energy");
    read(*s, "cmos_dac_energy", e.cmos_dac_energy, "energy");
    read(*s, "cmos_compute_energy", e.cmos_compute_energy, "energy");
  }
  read(j, "seed", c.seed, "");
  read(j, "out", c.out, "");
  return c;
}

std::string upper(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

json parse_env_value(const std::string& raw) {
  try {
    return json::parse(raw);
  } catch (const json::exception&) {
    return json(raw);
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) config_error(msg);
  };
  require(dataset.classes >= 2, "dataset.classes must be >= 2");
  require(dataset.train_per_class >= 1, "dataset.train_per_class must be >= 1");
  require(dataset.test_per_class >= 0, "dataset.test_per_class must be >= 0");
  require(dataset.test_offset >= dataset.train_per_class, "dataset.test_offset must not overlap the training slice");
  require(topology.field > 0 && topology.patch > 0 && topology.fan > 0, "topology values must be positive");
  require(htm.matching_threshold >= 0, "htm.matching_threshold must be >= 0");
  require(htm.max_group_size >= 1, "htm.max_group_size must be >= 1");
  require(htm.weight_bits >= 0 && htm.weight_bits <= 16, "htm.weight_bits must be in [0, 16]");
  require(dom_threshold >= 0, "dom_threshold must be >= 0");
  bool known = false;
  for (const char* b : kBackends) known = known || backend == b;
  require(known, "backend must be one of ideal, rcn-ideal, rcn-lumped, rcn-nodal (got '" + backend + "')");
  require(hardware.preset == "standard" || hardware.preset == "low_resistance",
          "hardware.preset must be standard or low_resistance");
  require(hardware.r_min_ohm > 0 && hardware.r_max_ohm > hardware.r_min_ohm,
          "hardware: need 0 < r_min_ohm < r_max_ohm");
  require(hardware.variation_sigma >= 0 && hardware.source_sigma >= 0, "hardware sigmas must be >= 0");
  require(hardware.data_rate > 0, "hardware.data_rate must be > 0");
  try {
    scan.validate();
    hardware_config(rcn::Mode::Ideal).validate();
    // An ideal comparator (zero threshold) is valid for inference; the
    // energy model then refuses to cost it.
    if (hardware.i_threshold > 0) energy_params().validate();
  } catch (const Error& e) {
    config_error(e.what());
  }
}

hw::HardwareConfig ExperimentConfig::hardware_config(std::optional<rcn::Mode> mode_override) const {
  const auto& h = hardware;
  hw::HardwareConfig c;
  c.array.g_min = 1.0 / h.r_max_ohm;
  c.array.g_max = 1.0 / h.r_min_ohm;
  c.array.weight_bits = h.weight_bits;
  c.array.wire_r_per_um = h.wire_r_per_um;
  c.array.cell_pitch_um = h.cell_pitch_um;
  c.array.access_r_ohm = h.access_r_ohm;
  c.dtcs.delta_v = h.delta_v;
  c.dtcs.gt_full = h.gt_full;
  c.dtcs.input_bits = h.input_bits;
  c.dtcs.linear = h.linear_dtcs;
  if (mode_override) {
    c.mode = *mode_override;
  } else if (backend.rfind("rcn-", 0) == 0) {
    c.mode = rcn::parse_mode(backend.substr(4));
  }
  c.adc_bits = h.adc_bits;
  c.adc_full_scale = h.adc_full_scale;
  c.dac_load_ratio = h.dac_load_ratio;
  c.i_threshold = h.i_threshold;
  c.t_switch = h.t_switch;
  c.variation_sigma = h.variation_sigma;
  c.source_sigma = h.source_sigma;
  c.seed = seed;
  return c;
}

energy::EnergyParams ExperimentConfig::energy_params() const {
  energy::EnergyParams p = energy;
  p.delta_v = hardware.delta_v;
  p.i_threshold = hardware.i_threshold;
  p.t_switch = hardware.t_switch;
  p.data_rate = hardware.data_rate;
  p.wire_cap_per_um = hardware.wire_c_per_um;
  return p;
}

ExperimentConfig default_config(const std::filesystem::path& data_dir) {
  ExperimentConfig c;
  c.dataset.images = (data_dir / "mnist5k" / "images-idx3-ubyte.gz").string();
  c.dataset.labels = (data_dir / "mnist5k" / "labels-idx1-ubyte.gz").string();
  return c;
}

ExperimentConfig config_from_json(const std::string& text, const ExperimentConfig& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    config_error(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(j, base);
}

ExperimentConfig load_config(const std::filesystem::path& path, const ExperimentConfig& base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig c = config_from_json(ss.str(), base);
  // Relative dataset paths resolve against the config file's directory.
  const auto dir = path.parent_path();
  for (auto* p : {&c.dataset.images, &c.dataset.labels}) {
    std::filesystem::path fp(*p);
    if (!p->empty() && fp.is_relative() && !dir.empty()) *p = (dir / fp).lexically_normal().string();
  }
  return c;
}

std::string config_to_json(const ExperimentConfig& cfg) { return to_json(cfg).dump(2); }

ExperimentConfig apply_env_overrides(const ExperimentConfig& cfg, const EnvLookup& lookup) {
  const json ref = to_json(cfg);
  json patch = json::object();
  for (const auto& [key, value] : ref.items()) {
    if (key == "schema") continue;
    if (value.is_object()) {
      for (const auto& [sub, v] : value.items()) {
        if (auto raw = lookup("SPINHTM_" + upper(key) + "_" + upper(sub))) {
          // Keep strings as strings even when they happen to parse as JSON.
          patch[key][sub] = v.is_string() ? json(*raw) : parse_env_value(*raw);
        }
      }
    } else if (auto raw = lookup("SPINHTM_" + upper(key))) {
      patch[key] = value.is_string() ? json(*raw) : parse_env_value(*raw);
    }
  }
  if (patch.empty()) return cfg;
  return from_json(patch, cfg);
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

}  // namespace spinhtm::exp
