#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spinhtm/backend.hpp"
#include "spinhtm/dataset_io.hpp"
#include "spinhtm/energy_model.hpp"
#include "spinhtm/hardware_backend.hpp"
#include "spinhtm/network.hpp"

namespace spinhtm::exp {

inline constexpr const char* kConfigSchema = "spinhtm.config.v1";

struct DatasetConfig {
  std::string images;
  std::string labels;
  int classes = 10;
  int train_per_class = 20;
  /// Test images are taken per class starting at this in-class index, so
  /// they never overlap the training images.
  int test_offset = 250;
  int test_per_class = 50;
};

struct TopologyConfig {
  int field = 16;
  int patch = 4;
  int fan = 2;
};

/// Device and circuit defaults; preset picks the conductance range.
struct HardwareSection {
  std::string preset = "standard";  // standard | low_resistance
  double r_min_ohm = 1e3;
  double r_max_ohm = 32e3;
  int weight_bits = 5;
  double wire_r_per_um = 1.0;
  double wire_c_per_um = 0.4e-15;
  double cell_pitch_um = 1.0;
  double access_r_ohm = 0.0;
  double delta_v = 0.05;
  double gt_full = 1e-3;
  int input_bits = 5;
  bool linear_dtcs = false;
  int adc_bits = 5;
  double adc_full_scale = 100e-6;
  double dac_load_ratio = 0.0;
  double i_threshold = 2e-6;
  double t_switch = 1e-9;
  double variation_sigma = 0.0;
  double source_sigma = 0.0;
  double data_rate = 100e6;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  TopologyConfig topology;
  htm::NodeParams htm;
  dataset::ScanParams scan;
  std::string backend = "ideal";  // ideal | rcn-ideal | rcn-lumped | rcn-nodal
  double dom_threshold = 0.0;     // 0 rejects only evidence-free inputs
  HardwareSection hardware;
  energy::EnergyParams energy;
  std::uint64_t seed = 1;
  std::string out = "out";

  void validate() const;
  /// Hardware backend settings; `mode_override` replaces the mode implied by
  /// `backend` (useful when `backend` is ideal).
  hw::HardwareConfig hardware_config(std::optional<rcn::Mode> mode_override = std::nullopt) const;
  energy::EnergyParams energy_params() const;
};

/// Defaults with dataset paths under data_dir/mnist5k.
ExperimentConfig default_config(const std::filesystem::path& data_dir);

/// Missing keys keep the values of `base`; unknown keys are errors.
ExperimentConfig config_from_json(const std::string& text, const ExperimentConfig& base);
ExperimentConfig load_config(const std::filesystem::path& path, const ExperimentConfig& base);
std::string config_to_json(const ExperimentConfig& cfg);

/// Applies SPINHTM_<SECTION>_<KEY> (and SPINHTM_<KEY> for top-level keys).
/// Values are parsed as JSON, falling back to a plain string.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
ExperimentConfig apply_env_overrides(const ExperimentConfig& cfg, const EnvLookup& lookup);
EnvLookup process_env();

// --- data ----------------------------------------------------------------------

struct Dataset {
  std::vector<dataset::Image> train;
  std::vector<int> train_labels;
  std::vector<dataset::Image> test;
  std::vector<int> test_labels;
};

/// Picks per-class slices from the IDX pair and prepares them for the field.
Dataset load_dataset(const ExperimentConfig& cfg);
Dataset split_dataset(const dataset::LabeledImages& raw, const ExperimentConfig& cfg);

/// Scan sequences ordered round-robin over classes.
std::vector<dataset::TrainingSequence> training_sequences(const Dataset& data, const dataset::ScanParams& scan);

// --- commands -------------------------------------------------------------------

std::unique_ptr<htm::ComputeBackend> make_backend(const ExperimentConfig& cfg);

struct NodeStat {
  std::size_t id = 0;
  std::size_t level = 0;
  std::size_t nc = 0;
  std::size_t ng = 0;
};

struct TrainResult {
  htm::Network net;
  std::vector<NodeStat> nodes;
  std::size_t sequences = 0;
  std::size_t frames = 0;
  double seconds = 0;
};

TrainResult train(const ExperimentConfig& cfg, const Dataset& data);
std::vector<NodeStat> node_stats(const htm::Network& net);
std::string train_report_json(const TrainResult& r);

struct Prediction {
  int label = 0;
  std::optional<std::size_t> predicted;
  double dom = 0;
  double margin = 0;
};

struct InferReport {
  std::size_t n_classes = 0;
  std::vector<Prediction> predictions;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::size_t rejects = 0;

  std::size_t correct() const;
  double accuracy() const;  // over all images; rejects count as wrong
  std::vector<double> per_class_accuracy() const;
};

InferReport infer(const htm::Network& net, std::span<const dataset::Image> images, std::span<const int> labels,
                  const htm::ComputeBackend& backend, double dom_threshold);
std::string infer_report_json(const InferReport& r, const std::string& backend);
std::string predictions_csv(const InferReport& r);

struct SweepTable {
  std::string axis;
  std::vector<std::string> columns;  // first column is the swept value
  std::vector<std::vector<double>> rows;
};

/// Axes: matching_threshold, variation_sigma, i_threshold, g_range.
/// `trained` is reused by axes that do not retrain.
SweepTable sweep(const ExperimentConfig& cfg, const std::string& axis, std::span<const double> values,
                 const Dataset* data = nullptr, const htm::Network* trained = nullptr);
std::string sweep_csv(const SweepTable& t);

struct CompareRow {
  int label = 0;
  std::optional<std::size_t> ideal;
  std::optional<std::size_t> hardware;
  double ideal_margin = 0;
  double hardware_margin = 0;
};

struct CompareReport {
  std::string backend;
  std::vector<CompareRow> rows;
  /// Per-node decisions whose ideal margin exceeds margin_floor, each
  /// re-run on hardware with the inputs the ideal network produced.
  double margin_floor = 0;
  std::size_t decisions_above = 0;
  std::size_t decisions_agreed = 0;

  double agreement() const;
  /// Agreement over images whose ideal margin is strictly above min_margin,
  /// with the number of such images.
  std::pair<double, std::size_t> agreement_above(double min_margin) const;
};

CompareReport compare_backends(const htm::Network& net, std::span<const dataset::Image> images,
                               std::span<const int> labels, const htm::ComputeBackend& hardware,
                               double dom_threshold, double margin_floor = 0.0);
std::string compare_report_json(const CompareReport& r);
std::string compare_csv(const CompareReport& r);

struct NodeEnergy {
  std::size_t id = 0;
  std::size_t level = 0;
  energy::EnergyBreakdown breakdown;
};

/// The level-2 node sized as in the hardware study: 256 inputs, 270
/// coincidences, 64 groups.
energy::NodeActivity reference_node_activity(int bits, double cell_pitch_um);
std::vector<NodeEnergy> network_energy(const htm::Network& net, const ExperimentConfig& cfg);
std::string energy_report_json(const energy::EnergyBreakdown& reference, std::span<const NodeEnergy> nodes);

/// Runs `fn(i)` for i in [0, n) over a pool of worker threads. Results must
/// be written to index-addressed slots so the outcome is order independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

std::vector<double> parse_values(const std::string& csv);

}  // namespace spinhtm::exp
