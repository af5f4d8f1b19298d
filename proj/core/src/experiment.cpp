#include "spinhtm/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "spinhtm/error.hpp"

namespace spinhtm::exp {

using nlohmann::json;

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || !std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "bad value '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorKind::InvalidArgument, "no values given");
  return out;
}

// --- data ----------------------------------------------------------------------

Dataset split_dataset(const dataset::LabeledImages& raw, const ExperimentConfig& cfg) {
  const auto& d = cfg.dataset;
  const int field = cfg.topology.field;
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(d.classes));
  for (std::size_t i = 0; i < raw.labels.size(); ++i) {
    if (raw.labels[i] < d.classes) by_class[raw.labels[i]].push_back(i);
  }
  Dataset out;
  for (int c = 0; c < d.classes; ++c) {
    const auto& idx = by_class[static_cast<std::size_t>(c)];
    if (idx.size() < static_cast<std::size_t>(d.train_per_class)) {
      throw Error(ErrorKind::InvalidArgument, "class " + std::to_string(c) + " has only " +
                                                  std::to_string(idx.size()) + " images");
    }
    for (int k = 0; k < d.train_per_class; ++k) {
      out.train.push_back(dataset::prepare_character(raw.images[idx[static_cast<std::size_t>(k)]], field, field));
      out.train_labels.push_back(c);
    }
  }
  // Test images are stored class-interleaved so prefixes stay balanced.
  for (int k = d.test_offset; k < d.test_offset + d.test_per_class; ++k) {
    for (int c = 0; c < d.classes; ++c) {
      const auto& idx = by_class[static_cast<std::size_t>(c)];
      if (static_cast<std::size_t>(k) >= idx.size()) continue;
      out.test.push_back(dataset::prepare_character(raw.images[idx[static_cast<std::size_t>(k)]], field, field));
      out.test_labels.push_back(c);
    }
  }
  return out;
}

Dataset load_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.images.empty() || cfg.dataset.labels.empty()) {
    throw Error(ErrorKind::Config, "dataset.images and dataset.labels must be set");
  }
  for (const auto& p : {cfg.dataset.images, cfg.dataset.labels}) {
    if (!std::filesystem::exists(p)) throw Error(ErrorKind::Io, "dataset file not found: " + p);
  }
  return split_dataset(dataset::load_idx_pair(cfg.dataset.images, cfg.dataset.labels), cfg);
}

std::vector<dataset::TrainingSequence> training_sequences(const Dataset& data, const dataset::ScanParams& scan) {
  // Round-robin over classes: PCW counts then accumulate evenly as training
  // proceeds instead of one class at a time.
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < data.train.size(); ++i) by_class[data.train_labels[i]].push_back(i);
  std::vector<dataset::TrainingSequence> seqs;
  seqs.reserve(data.train.size());
  for (std::size_t k = 0;; ++k) {
    bool any = false;
    for (const auto& [label, idx] : by_class) {
      if (k >= idx.size()) continue;
      any = true;
      seqs.push_back(dataset::generate_training_sequence(data.train[idx[k]], scan, label, idx[k]));
    }
    if (!any) break;
  }
  return seqs;
}

// --- train -------------------------------------------------------------------

std::unique_ptr<htm::ComputeBackend> make_backend(const ExperimentConfig& cfg) {
  if (cfg.backend == "ideal") return std::make_unique<htm::IdealBackend>();
  if (cfg.backend.rfind("rcn-", 0) == 0) return std::make_unique<hw::HardwareBackend>(cfg.hardware_config());
  throw Error(ErrorKind::Config, "unknown backend '" + cfg.backend + "'");
}

std::vector<NodeStat> node_stats(const htm::Network& net) {
  std::vector<NodeStat> out;
  for (std::size_t id = 0; id < net.node_count(); ++id) {
    out.push_back({id, net.topology().level_of(id), net.node(id).coincidence_count(), net.node(id).groups().size()});
  }
  return out;
}

TrainResult train(const ExperimentConfig& cfg, const Dataset& data) {
  cfg.validate();
  const auto topo = htm::NetworkTopology::pyramid(cfg.topology.field, cfg.topology.field, cfg.topology.patch,
                                                  cfg.topology.fan);
  const auto seqs = training_sequences(data, cfg.scan);
  TrainResult r;
  r.sequences = seqs.size();
  for (const auto& s : seqs) r.frames += s.frames.size();
  // Learning runs on exact arithmetic; the hardware backends are for inference.
  htm::IdealBackend ideal;
  const auto t0 = std::chrono::steady_clock::now();
  r.net = htm::train_network(topo, cfg.htm, static_cast<std::size_t>(cfg.dataset.classes), seqs, ideal);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.nodes = node_stats(r.net);
  return r;
}

std::string train_report_json(const TrainResult& r) {
  json j;
  j["schema"] = "spinhtm.train_report.v1";
  j["sequences"] = r.sequences;
  j["frames"] = r.frames;
  j["seconds"] = r.seconds;
  j["nodes"] = json::array();
  for (const auto& n : r.nodes) j["nodes"].push_back({{"id", n.id}, {"level", n.level}, {"nc", n.nc}, {"ng", n.ng}});
  return j.dump(2);
}

// --- infer -------------------------------------------------------------------

std::size_t InferReport::correct() const {
  std::size_t ok = 0;
  for (const auto& p : predictions) ok += p.predicted && static_cast<int>(*p.predicted) == p.label;
  return ok;
}

double InferReport::accuracy() const {
  return predictions.empty() ? 0.0 : static_cast<double>(correct()) / static_cast<double>(predictions.size());
}

std::vector<double> InferReport::per_class_accuracy() const {
  std::vector<std::size_t> ok(n_classes, 0), total(n_classes, 0);
  for (const auto& p : predictions) {
    const auto c = static_cast<std::size_t>(p.label);
    ++total[c];
    ok[c] += p.predicted && *p.predicted == c;
  }
  std::vector<double> out(n_classes, 0.0);
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (total[c]) out[c] = static_cast<double>(ok[c]) / static_cast<double>(total[c]);
  }
  return out;
}

InferReport infer(const htm::Network& net, std::span<const dataset::Image> images, std::span<const int> labels,
                  const htm::ComputeBackend& backend, double dom_threshold) {
  if (images.size() != labels.size()) throw Error(ErrorKind::LengthMismatch, "infer: images and labels differ in length");
  InferReport r;
  r.n_classes = net.n_classes();
  r.predictions.resize(images.size());
  for (auto l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= r.n_classes) throw Error(ErrorKind::IndexOutOfRange, "label outside [0, n_classes)");
  }
  parallel_for(images.size(), [&](std::size_t i) {
    const auto res = htm::infer_network(net, images[i], backend, dom_threshold);
    r.predictions[i] = {labels[i], res.label, res.dom, res.min_margin};
  });
  r.confusion.assign(r.n_classes, std::vector<std::size_t>(r.n_classes, 0));
  for (const auto& p : r.predictions) {
    if (p.predicted) {
      ++r.confusion[static_cast<std::size_t>(p.label)][*p.predicted];
    } else {
      ++r.rejects;
    }
  }
  return r;
}

std::string infer_report_json(const InferReport& r, const std::string& backend) {
  json j;
  j["schema"] = "spinhtm.infer_report.v1";
  j["backend"] = backend;
  j["images"] = r.predictions.size();
  j["correct"] = r.correct();
  j["rejects"] = r.rejects;
  j["accuracy"] = r.accuracy();
  j["per_class_accuracy"] = r.per_class_accuracy();
  j["confusion"] = r.confusion;
  return j.dump(2);
}

std::string predictions_csv(const InferReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "index,label,predicted,dom,margin\n";
  for (std::size_t i = 0; i < r.predictions.size(); ++i) {
    const auto& p = r.predictions[i];
    os << i << ',' << p.label << ',' << (p.predicted ? static_cast<long long>(*p.predicted) : -1LL) << ',' << p.dom
       << ',' << p.margin << '\n';
  }
  return os.str();
}

// --- compare -----------------------------------------------------------------

double CompareReport::agreement() const {
  if (rows.empty()) return 0.0;
  std::size_t same = 0;
  for (const auto& r : rows) same += r.ideal == r.hardware;
  return static_cast<double>(same) / static_cast<double>(rows.size());
}

std::pair<double, std::size_t> CompareReport::agreement_above(double min_margin) const {
  std::size_t n = 0, same = 0;
  for (const auto& r : rows) {
    if (!(r.ideal && r.ideal_margin > min_margin)) continue;
    ++n;
    same += r.ideal == r.hardware;
  }
  return {n ? static_cast<double>(same) / static_cast<double>(n) : 1.0, n};
}

CompareReport compare_backends(const htm::Network& net, std::span<const dataset::Image> images,
                               std::span<const int> labels, const htm::ComputeBackend& hardware,
                               double dom_threshold, double margin_floor) {
  if (images.size() != labels.size()) throw Error(ErrorKind::LengthMismatch, "compare: images and labels differ in length");
  htm::IdealBackend ideal;
  const auto& topo = net.topology();
  CompareReport r;
  r.backend = hardware.name();
  r.margin_floor = margin_floor;
  r.rows.resize(images.size());
  std::vector<std::pair<std::size_t, std::size_t>> decisions(images.size());
  parallel_for(images.size(), [&](std::size_t i) {
    const auto a = htm::infer_network(net, images[i], ideal, dom_threshold, true);
    const auto b = htm::infer_network(net, images[i], hardware, dom_threshold);
    r.rows[i] = {labels[i], a.label, b.label, a.min_margin, b.min_margin};
    std::size_t above = 0, agreed = 0;
    for (std::size_t id = 0; id < net.node_count(); ++id) {
      const auto& ref = a.nodes[id];
      if (!ref.winner || !(ref.margin > margin_floor)) continue;
      htm::Vector input;
      if (topo.level_of(id) == 0) {
        input = net.patch_input(images[i], id);
      } else {
        std::vector<std::size_t> widths;
        std::vector<std::optional<std::size_t>> winners;
        for (auto c : topo.children[id]) {
          widths.push_back(net.node(c).output_width());
          winners.push_back(a.nodes[c].winner);
        }
        input = htm::compose_spatial_input(widths, winners);
      }
      const double thr = id == topo.output_node() ? dom_threshold : htm::kAnyEvidence;
      const auto out = htm::infer_node(net.node(id), input, hardware, thr);
      ++above;
      agreed += out.winner == ref.winner;
    }
    decisions[i] = {above, agreed};
  });
  for (const auto& [above, agreed] : decisions) {
    r.decisions_above += above;
    r.decisions_agreed += agreed;
  }
  return r;
}

std::string compare_report_json(const CompareReport& r) {
  json j;
  j["schema"] = "spinhtm.compare_report.v1";
  j["backend"] = r.backend;
  j["images"] = r.rows.size();
  j["agreement"] = r.agreement();
  const auto [above, n_above] = r.agreement_above(r.margin_floor);
  j["margin_floor"] = r.margin_floor;
  j["agreement_above_floor"] = above;
  j["images_above_floor"] = n_above;
  j["decisions_above_floor"] = r.decisions_above;
  j["decisions_agreed"] = r.decisions_agreed;
  std::vector<double> margins;
  for (const auto& row : r.rows) margins.push_back(row.ideal_margin);
  std::sort(margins.begin(), margins.end());
  if (!margins.empty()) {
    j["ideal_margin"] = {{"min", margins.front()}, {"median", margins[margins.size() / 2]}, {"max", margins.back()}};
  }
  return j.dump(2);
}

std::string compare_csv(const CompareReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "index,label,ideal,hardware,ideal_margin,hardware_margin\n";
  auto code = [](const std::optional<std::size_t>& v) { return v ? static_cast<long long>(*v) : -1LL; };
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& x = r.rows[i];
    os << i << ',' << x.label << ',' << code(x.ideal) << ',' << code(x.hardware) << ',' << x.ideal_margin << ','
       << x.hardware_margin << '\n';
  }
  return os.str();
}

// --- energy ------------------------------------------------------------------

energy::NodeActivity reference_node_activity(int bits, double cell_pitch_um) {
  return energy::node_activity(256, 270, 270, 64, bits, cell_pitch_um);
}

std::vector<NodeEnergy> network_energy(const htm::Network& net, const ExperimentConfig& cfg) {
  const auto params = cfg.energy_params();
  std::vector<NodeEnergy> out;
  for (std::size_t id = 0; id < net.node_count(); ++id) {
    const auto& n = net.node(id);
    const auto act = energy::node_activity(n.input_dim(), n.coincidence_count(), n.coincidence_count(),
                                           n.output_width(), cfg.hardware.adc_bits, cfg.hardware.cell_pitch_um);
    out.push_back({id, net.topology().level_of(id), energy::node_energy_report(act, params)});
  }
  return out;
}

std::string energy_report_json(const energy::EnergyBreakdown& reference, std::span<const NodeEnergy> nodes) {
  json j;
  j["schema"] = "spinhtm.energy_report.v1";
  j["reference_node"] = json::parse(energy::breakdown_json(reference));
  if (!nodes.empty()) {
    j["nodes"] = json::array();
    double total = 0;
    for (const auto& n : nodes) {
      j["nodes"].push_back({{"id", n.id}, {"level", n.level}, {"total_j", n.breakdown.total},
                            {"static_j", n.breakdown.static_part()}, {"dynamic_j", n.breakdown.dynamic_part()}});
      total += n.breakdown.total;
    }
    j["network_total_j"] = total;
  }
  return j.dump(2);
}

// --- sweeps ------------------------------------------------------------------

namespace {

const Dataset& require_data(const Dataset* data, const std::string& axis) {
  if (!data) throw Error(ErrorKind::InvalidArgument, "sweep over " + axis + " needs a dataset");
  return *data;
}

ExperimentConfig hardware_variant(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  if (c.backend == "ideal") c.backend = "rcn-ideal";
  return c;
}

}  // namespace

SweepTable sweep(const ExperimentConfig& cfg, const std::string& axis, std::span<const double> values,
                 const Dataset* data, const htm::Network* trained) {
  SweepTable t;
  t.axis = axis;
  if (axis == "g_range") {
    t.columns = {"g_range", "margin_ideal", "margin_lumped", "margin_nodal"};
    const auto hc = cfg.hardware_config();
    const auto probe = rcn::reference_probe();
    std::vector<std::vector<rcn::MarginSweepRow>> per_mode;
    for (auto m : {rcn::Mode::Ideal, rcn::Mode::Lumped, rcn::Mode::Nodal}) {
      per_mode.push_back(rcn::margin_range_sweep(probe, hc.array, hc.dtcs, values, m));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      t.rows.push_back({values[i], per_mode[0][i].margin, per_mode[1][i].margin, per_mode[2][i].margin});
    }
    return t;
  }

  if (axis == "matching_threshold") {
    const auto& d = require_data(data, axis);
    t.columns = {"matching_threshold", "accuracy", "rejects", "coincidences", "output_coincidences", "train_seconds"};
    const auto backend = make_backend(cfg);
    for (double v : values) {
      ExperimentConfig c = cfg;
      c.htm.matching_threshold = v;
      const auto tr = train(c, d);
      const auto rep = infer(tr.net, d.test, d.test_labels, *backend, c.dom_threshold);
      double total_nc = 0;
      for (const auto& n : tr.nodes) total_nc += static_cast<double>(n.nc);
      t.rows.push_back({v, rep.accuracy(), static_cast<double>(rep.rejects), total_nc,
                        static_cast<double>(tr.nodes.back().nc), tr.seconds});
    }
    return t;
  }

  if (axis == "variation_sigma" || axis == "i_threshold") {
    const auto& d = require_data(data, axis);
    std::optional<htm::Network> own;
    if (!trained) {
      own = train(cfg, d).net;
      trained = &*own;
    }
    const bool variation = axis == "variation_sigma";
    if (variation) {
      t.columns = {"variation_sigma", "accuracy", "rejects", "agreement"};
    } else {
      t.columns = {"i_threshold", "accuracy", "rejects", "static_j", "dynamic_j", "total_j"};
    }
    for (double v : values) {
      ExperimentConfig c = hardware_variant(cfg);
      if (variation) {
        c.hardware.variation_sigma = v;
      } else {
        c.hardware.i_threshold = v;
      }
      c.validate();
      hw::HardwareBackend backend(c.hardware_config());
      if (variation) {
        const auto cmp = compare_backends(*trained, d.test, d.test_labels, backend, c.dom_threshold);
        std::size_t ok = 0, rejects = 0;
        for (const auto& r : cmp.rows) {
          ok += r.hardware && static_cast<int>(*r.hardware) == r.label;
          rejects += !r.hardware;
        }
        const double n = cmp.rows.empty() ? 1.0 : static_cast<double>(cmp.rows.size());
        t.rows.push_back({v, static_cast<double>(ok) / n, static_cast<double>(rejects), cmp.agreement()});
      } else {
        const auto rep = infer(*trained, d.test, d.test_labels, backend, c.dom_threshold);
        const auto e = energy::node_energy_report(reference_node_activity(c.hardware.adc_bits, c.hardware.cell_pitch_um),
                                                  c.energy_params());
        t.rows.push_back({v, rep.accuracy(), static_cast<double>(rep.rejects), e.static_part(), e.dynamic_part(),
                          e.total});
      }
    }
    return t;
  }

  throw Error(ErrorKind::UnknownAxis,
              "unknown sweep axis '" + axis + "' (expected matching_threshold, variation_sigma, i_threshold, g_range)");
}

std::string sweep_csv(const SweepTable& t) {
  std::ostringstream os;
  os.precision(10);
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << '\n';
  }
  return os.str();
}

}  // namespace spinhtm::exp
