#include <gtest/gtest.h>

#include <atomic>
#include <map>
#include <set>

#include "json.hpp"
#include "spinhtm/error.hpp"
#include "spinhtm/experiment.hpp"
#include "spinhtm/serialization.hpp"
#include "test_support.hpp"
#include "toy_data.hpp"

using namespace spinhtm;
using namespace spinhtm::exp;
using nlohmann::json;
using spinhtm::testing::TempDir;
using spinhtm::testing::toy_bars;
using spinhtm::testing::toy_config;

namespace {

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no spinhtm::Error thrown";
  return ErrorKind::Io;
}

EnvLookup env(std::map<std::string, std::string> vars) {
  return [vars = std::move(vars)](const std::string& k) -> std::optional<std::string> {
    auto it = vars.find(k);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

const Dataset& toy_data() {
  static const Dataset d = split_dataset(toy_bars(3, 6), toy_config());
  return d;
}

const TrainResult& toy_trained() {
  static const TrainResult r = train(toy_config(), toy_data());
  return r;
}

}  // namespace

TEST(Config, JsonRoundTrip) {
  auto c = toy_config();
  c.backend = "rcn-nodal";
  c.hardware.variation_sigma = 0.04;
  c.seed = 99;
  c.scan.scale_levels = {0.8, 1.0};
  const auto text = config_to_json(c);
  const auto back = config_from_json(text, ExperimentConfig{});
  EXPECT_EQ(config_to_json(back), text);
  EXPECT_EQ(json::parse(text).at("schema"), kConfigSchema);
}

TEST(Config, MissingKeysKeepBase) {
  const auto base = toy_config();
  const auto c = config_from_json(R"({"htm": {"matching_threshold": 0.3}})", base);
  EXPECT_EQ(c.htm.matching_threshold, 0.3);
  EXPECT_EQ(c.topology.field, 8);
  EXPECT_EQ(c.dataset.classes, 3);
}

TEST(Config, Errors) {
  const ExperimentConfig base;
  EXPECT_EQ(kind_of([&] { config_from_json(R"({"bogus": 1})", base); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([&] { config_from_json(R"({"htm": {"bogus": 1}})", base); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([&] { config_from_json(R"({"seed": "x"})", base); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([&] { config_from_json("{", base); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([&] { config_from_json(R"({"schema": "other"})", base); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([&] { config_from_json(R"({"hardware": {"preset": "odd"}})", base); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([&] { load_config("/nonexistent/cfg.json", base); }), ErrorKind::Io);
}

TEST(Config, PresetSetsRangeUnlessGiven) {
  const ExperimentConfig base;
  auto c = config_from_json(R"({"hardware": {"preset": "low_resistance"}})", base);
  EXPECT_EQ(c.hardware.r_min_ohm, 200);
  EXPECT_EQ(c.hardware.r_max_ohm, 6.4e3);
  c = config_from_json(R"({"hardware": {"preset": "low_resistance", "r_max_ohm": 5000}})", base);
  EXPECT_EQ(c.hardware.r_min_ohm, 200);
  EXPECT_EQ(c.hardware.r_max_ohm, 5000);
}

TEST(Config, Validate) {
  EXPECT_NO_THROW(toy_config().validate());
  EXPECT_NO_THROW(ExperimentConfig{}.validate());
  auto bad = [](auto mutate) {
    auto c = toy_config();
    mutate(c);
    return kind_of([&] { c.validate(); });
  };
  EXPECT_EQ(bad([](ExperimentConfig& c) { c.dataset.classes = 1; }), ErrorKind::Config);
  EXPECT_EQ(bad([](ExperimentConfig& c) { c.dataset.test_offset = 1; }), ErrorKind::Config);
  EXPECT_EQ(bad([](ExperimentConfig& c) { c.backend = "gpu"; }), ErrorKind::Config);
  EXPECT_EQ(bad([](ExperimentConfig& c) { c.hardware.r_max_ohm = 500; }), ErrorKind::Config);
  EXPECT_EQ(bad([](ExperimentConfig& c) { c.htm.weight_bits = 17; }), ErrorKind::Config);
  EXPECT_EQ(bad([](ExperimentConfig& c) { c.scan.scale_levels.clear(); }), ErrorKind::Config);
  EXPECT_EQ(bad([](ExperimentConfig& c) { c.dom_threshold = -1; }), ErrorKind::Config);
  EXPECT_EQ(bad([](ExperimentConfig& c) { c.hardware.variation_sigma = -0.1; }), ErrorKind::Config);
}

TEST(Config, HardwareAndEnergyViews) {
  auto c = toy_config();
  c.backend = "rcn-lumped";
  c.hardware.i_threshold = 3e-6;
  const auto h = c.hardware_config();
  EXPECT_EQ(h.mode, rcn::Mode::Lumped);
  EXPECT_DOUBLE_EQ(h.array.g_max, 1e-3);
  EXPECT_DOUBLE_EQ(h.array.g_min, 1.0 / 32e3);
  EXPECT_EQ(c.hardware_config(rcn::Mode::Nodal).mode, rcn::Mode::Nodal);
  EXPECT_EQ(c.energy_params().i_threshold, 3e-6);
}

TEST(Config, EnvOverrides) {
  const auto base = toy_config();
  const auto c = apply_env_overrides(base, env({{"SPINHTM_HTM_MATCHING_THRESHOLD", "0.5"},
                                                {"SPINHTM_SEED", "7"},
                                                {"SPINHTM_BACKEND", "rcn-lumped"},
                                                {"SPINHTM_OUT", "123"},
                                                {"SPINHTM_SCAN_SCALE_LEVELS", "[0.5, 2]"},
                                                {"SPINHTM_HARDWARE_LINEAR_DTCS", "true"}}));
  EXPECT_EQ(c.htm.matching_threshold, 0.5);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.backend, "rcn-lumped");
  EXPECT_EQ(c.out, "123");  // strings stay strings
  EXPECT_EQ(c.scan.scale_levels, (std::vector<double>{0.5, 2}));
  EXPECT_TRUE(c.hardware.linear_dtcs);
  EXPECT_EQ(config_to_json(apply_env_overrides(base, env({}))), config_to_json(base));
  EXPECT_EQ(kind_of([&] { apply_env_overrides(base, env({{"SPINHTM_SEED", "many"}})); }), ErrorKind::Config);
}

TEST(Config, LoadResolvesRelativePaths) {
  TempDir dir("cfg");
  {
    std::ofstream f(dir / "c.json");
    f << R"({"dataset": {"images": "imgs.idx", "labels": "/abs/labels.idx"}})";
  }
  const auto c = load_config(dir / "c.json", ExperimentConfig{});
  EXPECT_EQ(c.dataset.images, (dir / "imgs.idx").string());
  EXPECT_EQ(c.dataset.labels, "/abs/labels.idx");
}

TEST(Values, Parse) {
  EXPECT_EQ(parse_values("0.5,0.6,1e-6"), (std::vector<double>{0.5, 0.6, 1e-6}));
  EXPECT_EQ(parse_values("3,"), (std::vector<double>{3}));
  EXPECT_EQ(kind_of([] { parse_values(""); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([] { parse_values("1,x"); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([] { parse_values("1.5q"); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([] { parse_values("inf"); }), ErrorKind::InvalidArgument);
}

TEST(Data, SplitSlicesPerClass) {
  const auto& d = toy_data();
  ASSERT_EQ(d.train.size(), 6u);
  EXPECT_EQ(d.train_labels, (std::vector<int>{0, 0, 1, 1, 2, 2}));
  ASSERT_EQ(d.test.size(), 6u);
  EXPECT_EQ(d.test_labels, (std::vector<int>{0, 1, 2, 0, 1, 2}));
  for (const auto* set : {&d.train, &d.test}) {
    for (const auto& img : *set) {
      EXPECT_EQ(img.width, 8);
      EXPECT_EQ(img.bit_depth, 1);
    }
  }
}

TEST(Data, SplitShortClass) {
  auto c = toy_config();
  c.dataset.train_per_class = 7;
  c.dataset.test_offset = 7;
  EXPECT_EQ(kind_of([&] { split_dataset(toy_bars(3, 6), c); }), ErrorKind::InvalidArgument);
  // Test slices past the end of a class are skipped, not an error.
  c.dataset.train_per_class = 2;
  c.dataset.test_offset = 5;
  c.dataset.test_per_class = 10;
  EXPECT_EQ(split_dataset(toy_bars(3, 6), c).test.size(), 3u);
}

TEST(Data, LoadFromIdxFiles) {
  TempDir dir("data");
  spinhtm::testing::write_idx_pair(toy_bars(3, 6), dir / "i.idx", dir / "l.idx");
  auto c = toy_config();
  c.dataset.images = (dir / "i.idx").string();
  c.dataset.labels = (dir / "l.idx").string();
  const auto d = load_dataset(c);
  EXPECT_EQ(d.train, toy_data().train);
  EXPECT_EQ(d.test_labels, toy_data().test_labels);

  c.dataset.labels = (dir / "missing.idx").string();
  EXPECT_EQ(kind_of([&] { load_dataset(c); }), ErrorKind::Io);
  c.dataset.labels.clear();
  EXPECT_EQ(kind_of([&] { load_dataset(c); }), ErrorKind::Config);
}

TEST(Data, TrainingSequencesRoundRobin) {
  const auto seqs = training_sequences(toy_data(), toy_config().scan);
  ASSERT_EQ(seqs.size(), 6u);
  std::vector<int> labels;
  for (const auto& s : seqs) labels.push_back(*s.label);
  EXPECT_EQ(labels, (std::vector<int>{0, 1, 2, 0, 1, 2}));
  EXPECT_EQ(seqs[1].source_id, 2u);
  for (const auto& s : seqs) EXPECT_EQ(s.frames.size(), 9u);  // 3x3 shifts
}

TEST(Commands, MakeBackend) {
  auto c = toy_config();
  EXPECT_EQ(make_backend(c)->name(), htm::IdealBackend{}.name());
  for (const char* b : {"rcn-ideal", "rcn-lumped", "rcn-nodal"}) {
    c.backend = b;
    EXPECT_NE(make_backend(c)->name(), htm::IdealBackend{}.name()) << b;
  }
  c.backend = "gpu";
  EXPECT_EQ(kind_of([&] { make_backend(c); }), ErrorKind::Config);
}

TEST(Commands, TrainIsDeterministic) {
  const auto& a = toy_trained();
  const auto b = train(toy_config(), toy_data());
  EXPECT_EQ(htm::serialize_network(a.net), htm::serialize_network(b.net));
  EXPECT_EQ(a.sequences, 6u);
  EXPECT_EQ(a.frames, 54u);
  ASSERT_EQ(a.nodes.size(), a.net.node_count());
  EXPECT_GE(a.nodes.back().nc, 1u);
  const auto j = json::parse(train_report_json(a));
  EXPECT_EQ(j.at("schema"), "spinhtm.train_report.v1");
  EXPECT_EQ(j.at("nodes").size(), a.nodes.size());
}

TEST(Commands, InferReportIsConsistent) {
  const auto& d = toy_data();
  const auto rep = infer(toy_trained().net, d.test, d.test_labels, htm::IdealBackend{}, 0.0);
  ASSERT_EQ(rep.predictions.size(), d.test.size());
  std::size_t in_confusion = 0, diag = 0;
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 0; b < 3; ++b) {
      in_confusion += rep.confusion[a][b];
      if (a == b) diag += rep.confusion[a][b];
    }
  }
  EXPECT_EQ(in_confusion + rep.rejects, d.test.size());
  EXPECT_EQ(diag, rep.correct());
  EXPECT_DOUBLE_EQ(rep.accuracy(), static_cast<double>(rep.correct()) / d.test.size());
  const auto j = json::parse(infer_report_json(rep, "ideal"));
  EXPECT_EQ(j.at("schema"), "spinhtm.infer_report.v1");
  EXPECT_EQ(j.at("images"), d.test.size());
  const auto csv = predictions_csv(rep);
  EXPECT_EQ(csv.rfind("index,label,predicted,dom,margin\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), static_cast<long>(d.test.size() + 1));
}

TEST(Commands, HugeDomThresholdRejectsAll) {
  const auto& d = toy_data();
  const auto rep = infer(toy_trained().net, d.test, d.test_labels, htm::IdealBackend{}, 1e9);
  EXPECT_EQ(rep.rejects, d.test.size());
  EXPECT_EQ(rep.accuracy(), 0.0);
}

TEST(Commands, EmptyTestSet) {
  const auto rep = infer(toy_trained().net, {}, {}, htm::IdealBackend{}, 0.0);
  EXPECT_EQ(rep.accuracy(), 0.0);
  EXPECT_EQ(rep.per_class_accuracy(), (std::vector<double>{0, 0, 0}));
}

TEST(Commands, InferErrors) {
  const auto& d = toy_data();
  const std::vector<int> short_labels{0};
  EXPECT_EQ(kind_of([&] { infer(toy_trained().net, d.test, short_labels, htm::IdealBackend{}, 0); }),
            ErrorKind::LengthMismatch);
  std::vector<int> bad(d.test.size(), 0);
  bad[1] = 3;
  EXPECT_EQ(kind_of([&] { infer(toy_trained().net, d.test, bad, htm::IdealBackend{}, 0); }),
            ErrorKind::IndexOutOfRange);
}

TEST(Commands, CompareIdealAgainstItself) {
  const auto& d = toy_data();
  const auto rep = compare_backends(toy_trained().net, d.test, d.test_labels, htm::IdealBackend{}, 0.0);
  EXPECT_EQ(rep.agreement(), 1.0);
  EXPECT_EQ(rep.decisions_agreed, rep.decisions_above);
  EXPECT_GT(rep.decisions_above, 0u);
  const auto j = json::parse(compare_report_json(rep));
  EXPECT_EQ(j.at("schema"), "spinhtm.compare_report.v1");
  EXPECT_EQ(compare_csv(rep).rfind("index,label,ideal,hardware,ideal_margin,hardware_margin\n", 0), 0u);
}

TEST(Commands, AgreementAboveCountsOnlyConfidentImages) {
  CompareReport r;
  r.rows = {{0, 1, 1, 0.5, 0}, {0, 1, 2, 0.01, 0}, {0, std::nullopt, 2, 0.9, 0}};
  const auto [frac, n] = r.agreement_above(0.1);
  EXPECT_EQ(n, 1u);
  EXPECT_EQ(frac, 1.0);
  EXPECT_NEAR(r.agreement(), 1.0 / 3, 1e-15);
}

TEST(Commands, Sweeps) {
  const auto cfg = toy_config();
  const std::vector<double> thr{0.0, 0.9};
  EXPECT_EQ(kind_of([&] { sweep(cfg, "matching_threshold", thr); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([&] { sweep(cfg, "colour", thr, &toy_data()); }), ErrorKind::UnknownAxis);

  const auto t = sweep(cfg, "matching_threshold", thr, &toy_data());
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.columns.front(), "matching_threshold");
  // A looser threshold merges more patterns.
  EXPECT_GE(t.rows[0][3], t.rows[1][3]);

  const std::vector<double> sig{0.0};
  const auto v = sweep(cfg, "variation_sigma", sig, &toy_data(), &toy_trained().net);
  ASSERT_EQ(v.rows.size(), 1u);
  EXPECT_EQ(v.columns.size(), v.rows[0].size());

  const std::vector<double> it{1e-6, 4e-6};
  const auto e = sweep(cfg, "i_threshold", it, &toy_data(), &toy_trained().net);
  EXPECT_NEAR(e.rows[1][3], 4 * e.rows[0][3], 1e-9 * e.rows[1][3]);
  EXPECT_EQ(sweep_csv(e).rfind("i_threshold,", 0), 0u);

  const std::vector<double> g{0.5, 1, 2};
  const auto gr = sweep(cfg, "g_range", g);
  EXPECT_EQ(gr.columns, (std::vector<std::string>{"g_range", "margin_ideal", "margin_lumped", "margin_nodal"}));
  EXPECT_EQ(gr.rows.size(), 3u);
}

TEST(Commands, EnergyReports) {
  const auto ref = energy::node_energy_report(reference_node_activity(5, 1.0), toy_config().energy_params());
  EXPECT_NEAR(ref.total, 46.2282e-12, 1e-20);
  const auto nodes = network_energy(toy_trained().net, toy_config());
  ASSERT_EQ(nodes.size(), toy_trained().net.node_count());
  const auto j = json::parse(energy_report_json(ref, nodes));
  EXPECT_EQ(j.at("schema"), "spinhtm.energy_report.v1");
  double sum = 0;
  for (const auto& n : nodes) sum += n.breakdown.total;
  EXPECT_NEAR(j.at("network_total_j").get<double>(), sum, 1e-12 * sum);
  EXPECT_FALSE(json::parse(energy_report_json(ref, {})).contains("nodes"));
}

TEST(Parallel, CoversEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  parallel_for(0, [](std::size_t) { FAIL(); });
}

TEST(Parallel, RethrowsWorkerFailure) {
  EXPECT_EQ(kind_of([] {
              parallel_for(100, [](std::size_t i) {
                if (i == 37) throw Error(ErrorKind::SingularSystem, "boom");
              });
            }),
            ErrorKind::SingularSystem);
}
