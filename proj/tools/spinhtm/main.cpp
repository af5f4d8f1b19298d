// spinhtm: train, evaluate and cost HTM networks on ideal or spin-RCN hardware.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "spinhtm/error.hpp"
#include "spinhtm/experiment.hpp"
#include "spinhtm/serialization.hpp"

namespace fs = std::filesystem;
using namespace spinhtm;

namespace {

enum Exit : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,    // bad arguments or config
  kIo = 3,       // missing or unreadable files
  kData = 4,     // malformed dataset or network file
  kModel = 5,    // network state does not fit the request
  kNumeric = 6,  // solver or hardware model failure
};

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config:
    case ErrorKind::InvalidArgument:
    case ErrorKind::UnknownAxis:
      return kUsage;
    case ErrorKind::Io:
      return kIo;
    case ErrorKind::BadMagic:
    case ErrorKind::TruncatedFile:
    case ErrorKind::DimensionOverflow:
    case ErrorKind::TrailingData:
    case ErrorKind::InvalidLabel:
    case ErrorKind::BadNetworkFile:
      return kData;
    case ErrorKind::UntrainedNetwork:
    case ErrorKind::UntrainedChild:
    case ErrorKind::InvalidTopology:
    case ErrorKind::TopologyMismatch:
    case ErrorKind::NotOutputNode:
      return kModel;
    case ErrorKind::SingularSystem:
    case ErrorKind::NegativeWeight:
    case ErrorKind::TooFewColumns:
    case ErrorKind::CursorOverrun:
    case ErrorKind::MissingActivity:
      return kNumeric;
    default:
      return kInternal;
  }
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string backend;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON experiment config")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Overrides the config seed");
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--backend", c.backend, "ideal | rcn-ideal | rcn-lumped | rcn-nodal");
}

exp::ExperimentConfig resolve(const Common& c) {
  auto cfg = exp::default_config(SPINHTM_DEFAULT_DATA_DIR);
  if (!c.config.empty()) cfg = exp::load_config(c.config, cfg);
  cfg = exp::apply_env_overrides(cfg, exp::process_env());
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out = c.out;
  if (!c.backend.empty()) cfg.backend = c.backend;
  cfg.validate();
  return cfg;
}

fs::path out_dir(const exp::ExperimentConfig& cfg) {
  fs::path dir(cfg.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

htm::Network load_or_fail(const std::string& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::Io, "network file not found: " + path + " (run `spinhtm train` first)");
  return htm::load_network(path);
}

std::string network_path(const std::string& given, const exp::ExperimentConfig& cfg) {
  return given.empty() ? (fs::path(cfg.out) / "network.bin").string() : given;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spintronic HTM experiments"};
  app.require_subcommand(1);

  Common common;
  std::string network;
  std::string axis, values;
  std::string split = "test";
  std::size_t limit = 0;
  bool energy_sweep = false;

  auto* train = app.add_subcommand("train", "Train a network and save it to <out>/network.bin");
  add_common(train, common);

  auto* infer = app.add_subcommand("infer", "Classify the test split");
  add_common(infer, common);
  infer->add_option("--network", network, "Trained network (default <out>/network.bin)");
  infer->add_option("--split", split, "test | train")->check(CLI::IsMember({"test", "train"}));

  auto* sweep = app.add_subcommand("sweep", "Sweep one parameter and write <out>/sweep_<axis>.csv");
  add_common(sweep, common);
  sweep->add_option("--axis", axis, "matching_threshold | variation_sigma | i_threshold | g_range")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  sweep->add_option("--network", network, "Reuse a trained network where the axis allows it");

  auto* compare = app.add_subcommand("compare-backends", "Ideal vs hardware decisions on the test split");
  add_common(compare, common);
  compare->add_option("--network", network, "Trained network (default <out>/network.bin)");
  compare->add_option("--limit", limit, "Only the first N test images");

  auto* energy = app.add_subcommand("energy-report", "Per-inference energy of the reference node");
  add_common(energy, common);
  energy->add_option("--network", network, "Also cost every node of this network");
  energy->add_flag("--sweep", energy_sweep, "Also write the threshold/delta-V sweep CSV");

  auto* show = app.add_subcommand("show-config", "Print the effective config as JSON");
  add_common(show, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    const auto cfg = resolve(common);

    if (*show) {
      std::cout << exp::config_to_json(cfg) << '\n';
      return kOk;
    }

    if (*train) {
      const auto data = exp::load_dataset(cfg);
      const auto r = exp::train(cfg, data);
      const auto dir = out_dir(cfg);
      htm::save_network(r.net, dir / "network.bin");
      write_text(dir / "train_report.json", exp::train_report_json(r) + "\n");
      std::cout << "trained " << r.sequences << " sequences (" << r.frames << " frames) in " << r.seconds << " s\n";
      std::cout << "output node: nc=" << r.nodes.back().nc << "\n";
      std::cout << "wrote " << (dir / "network.bin").string() << "\n";
      return kOk;
    }

    if (*infer) {
      const auto net = load_or_fail(network_path(network, cfg));
      const auto data = exp::load_dataset(cfg);
      const auto backend = exp::make_backend(cfg);
      const bool on_train = split == "train";
      const auto rep = exp::infer(net, on_train ? data.train : data.test, on_train ? data.train_labels : data.test_labels,
                                  *backend, cfg.dom_threshold);
      const auto dir = out_dir(cfg);
      write_text(dir / "infer_report.json", exp::infer_report_json(rep, backend->name()) + "\n");
      write_text(dir / "predictions.csv", exp::predictions_csv(rep));
      std::cout << "backend=" << backend->name() << " images=" << rep.predictions.size()
                << " accuracy=" << rep.accuracy() << " rejects=" << rep.rejects << "\n";
      return kOk;
    }

    if (*sweep) {
      if (axis != "g_range" && axis != "matching_threshold" && axis != "variation_sigma" && axis != "i_threshold") {
        throw Error(ErrorKind::UnknownAxis, "unknown sweep axis '" + axis +
                                                "' (expected matching_threshold, variation_sigma, i_threshold, g_range)");
      }
      const auto vals = exp::parse_values(values);
      std::optional<exp::Dataset> data;
      std::optional<htm::Network> net;
      if (axis != "g_range") data = exp::load_dataset(cfg);
      if (!network.empty()) net = load_or_fail(network);
      const auto table = exp::sweep(cfg, axis, vals, data ? &*data : nullptr, net ? &*net : nullptr);
      const auto dir = out_dir(cfg);
      const auto path = dir / ("sweep_" + axis + ".csv");
      write_text(path, exp::sweep_csv(table));
      std::cout << exp::sweep_csv(table);
      return kOk;
    }

    if (*compare) {
      const auto net = load_or_fail(network_path(network, cfg));
      auto data = exp::load_dataset(cfg);
      if (limit && limit < data.test.size()) {
        data.test.resize(limit);
        data.test_labels.resize(limit);
      }
      auto hcfg = cfg;
      if (hcfg.backend == "ideal") hcfg.backend = "rcn-ideal";
      const auto backend = exp::make_backend(hcfg);
      const double floor = 2.0 / std::ldexp(1.0, cfg.hardware.adc_bits);
      const auto rep = exp::compare_backends(net, data.test, data.test_labels, *backend, cfg.dom_threshold, floor);
      const auto dir = out_dir(cfg);
      write_text(dir / "compare_report.json", exp::compare_report_json(rep) + "\n");
      write_text(dir / "compare.csv", exp::compare_csv(rep));
      const auto [above, n_above] = rep.agreement_above(floor);
      std::cout << "backend=" << rep.backend << " images=" << rep.rows.size() << " agreement=" << rep.agreement()
                << " agreement_above_2lsb=" << above << " (n=" << n_above << ")"
                << " decisions_above_2lsb=" << rep.decisions_above << " agreed=" << rep.decisions_agreed << "\n";
      return kOk;
    }

    if (*energy) {
      const auto params = cfg.energy_params();
      const auto act = exp::reference_node_activity(cfg.hardware.adc_bits, cfg.hardware.cell_pitch_um);
      const auto ref = energy::node_energy_report(act, params);
      std::vector<exp::NodeEnergy> nodes;
      if (!network.empty()) nodes = exp::network_energy(load_or_fail(network), cfg);
      const auto dir = out_dir(cfg);
      write_text(dir / "energy_report.json", exp::energy_report_json(ref, nodes) + "\n");
      if (energy_sweep) {
        const std::vector<double> thresholds{0.5e-6, 1e-6, 2e-6, 5e-6, 10e-6, 20e-6};
        const std::vector<double> dvs{0.03, 0.05, 0.1};
        write_text(dir / "energy_sweep.csv", energy::sweep_csv(energy::threshold_sweep(act, params, thresholds, dvs)));
      }
      std::cout << "reference node total=" << ref.total << " J static=" << ref.static_part()
                << " J dynamic=" << ref.dynamic_part() << " J cmos/spin=" << ref.ratio << "\n";
      return kOk;
    }
  } catch (const Error& e) {
    std::cerr << "spinhtm: error[" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "spinhtm: error[internal]: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}
