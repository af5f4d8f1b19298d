#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>

#include "spinhtm/dataset_io.hpp"
#include "spinhtm/hardware_backend.hpp"
#include "spinhtm/network.hpp"
#include "spinhtm/rcn_model.hpp"
#include "spinhtm/spin_wta.hpp"

using namespace spinhtm;

namespace {

rcn::CrossbarArray random_array(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  rcn::ArrayConfig cfg;
  std::uniform_real_distribution<double> u(cfg.g_min, cfg.g_max);
  std::vector<double> g(rows * cols);
  for (auto& v : g) v = u(rng);
  return rcn::CrossbarArray::from_conductances(rows, cols, std::move(g), cfg);
}

void BM_NodalSolve(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const auto a = random_array(n, n, rng);
  std::vector<std::uint32_t> codes(n);
  for (auto& c : codes) c = static_cast<std::uint32_t>(rng() % 32);
  const rcn::DtcsConfig d;
  for (auto _ : state) benchmark::DoNotOptimize(rcn::solve_nodal(a, codes, d));
  state.SetComplexityN(static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_NodalSolve)->RangeMultiplier(2)->Range(8, 128)->Complexity();

void BM_LumpedColumns(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  const auto a = random_array(n, n, rng);
  std::vector<std::uint32_t> codes(n);
  for (auto& c : codes) c = static_cast<std::uint32_t>(rng() % 32);
  const rcn::DtcsConfig d;
  for (auto _ : state) benchmark::DoNotOptimize(rcn::column_currents(a, codes, d, rcn::Mode::Lumped));
}
BENCHMARK(BM_LumpedColumns)->RangeMultiplier(4)->Range(16, 1024);

void BM_WtaSelect(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  wta::WtaConfig cfg;
  std::uniform_real_distribution<double> u(0, cfg.dac.full_scale);
  std::vector<double> cur(n);
  for (auto& v : cur) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(wta::wta_select(cur, cfg, 0));
}
BENCHMARK(BM_WtaSelect)->RangeMultiplier(4)->Range(16, 4096);

// Two shapes scanned across an 8x8 field; small enough to train per run.
htm::Network toy_network() {
  std::vector<dataset::TrainingSequence> seqs;
  dataset::ScanParams scan;
  scan.max_shift = 1;
  scan.rotation_range_deg = 0;
  scan.scale_levels = {1.0};
  for (int c = 0; c < 2; ++c) {
    dataset::Image img(8, 8, 1);
    for (int t = 2; t < 6; ++t) (c ? img.at(4, t) : img.at(t, 4)) = 1;
    seqs.push_back(dataset::generate_training_sequence(img, scan, c));
  }
  return htm::train_network(htm::NetworkTopology::pyramid(8, 8, 4, 2), htm::NodeParams{}, 2, seqs,
                            htm::IdealBackend{});
}

void BM_InferNetwork(benchmark::State& state) {
  const auto net = toy_network();
  dataset::Image img(8, 8, 1);
  for (int t = 2; t < 6; ++t) img.at(t, 4) = 1;
  const htm::IdealBackend ideal;
  hw::HardwareConfig hc;
  hc.mode = static_cast<rcn::Mode>(std::max<std::int64_t>(state.range(0) - 1, 0));
  const hw::HardwareBackend hwb(hc);
  const htm::ComputeBackend& be = state.range(0) == 0 ? static_cast<const htm::ComputeBackend&>(ideal) : hwb;
  for (auto _ : state) benchmark::DoNotOptimize(htm::infer_network(net, img, be));
  state.SetLabel(be.name());
}
BENCHMARK(BM_InferNetwork)->DenseRange(0, 3);

}  // namespace

BENCHMARK_MAIN();
