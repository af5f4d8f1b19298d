#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "spinhtm/error.hpp"
#include "spinhtm/spin_wta.hpp"
#include "test_support.hpp"

using namespace spinhtm;
using namespace spinhtm::wta;
using spinhtm::testing::Gen;

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

// 5 bits over 32 uA: one LSB is exactly 1 uA.
WtaConfig micro_amp_lsb(double i_threshold = 0.0) {
  WtaConfig c;
  c.resolution = 5;
  c.dac.full_scale = 32e-6;
  c.i_threshold = i_threshold;
  return c;
}

std::uint32_t oracle_code(double i, const SarDac& dac, int r) {
  const double top = std::ldexp(1.0, r) - 1;
  return static_cast<std::uint32_t>(std::clamp(std::floor(i / dac.lsb(r)), 0.0, top));
}

}  // namespace

TEST(Comparator, Examples) {
  DwnComparator c{0, 2e-6, 1e-9};
  EXPECT_EQ(dwn_compare(c, 3e-6), 1);
  EXPECT_EQ(dwn_compare(c, -1e-6), 1);  // dead zone keeps the state
  EXPECT_EQ(dwn_compare(c, -2e-6), 0);  // boundary flips
  EXPECT_EQ(dwn_compare(c, 1.9e-6), 0);
  EXPECT_EQ(dwn_compare(c, 2e-6), 1);
  DwnComparator ideal{0, 0.0, 1e-9};
  EXPECT_EQ(dwn_compare(ideal, 0.0), 1);
  EXPECT_EQ(dwn_compare(ideal, -1e-18), 0);
}

TEST(Sar, Examples) {
  const auto cfg = micro_amp_lsb();
  DwnComparator c{0, 0.0, 1e-9};
  EXPECT_EQ(sar_convert(0.0, cfg.dac, c, 5), 0u);
  EXPECT_EQ(sar_convert(32e-6, cfg.dac, c, 5), 31u);
  EXPECT_EQ(sar_convert(1.0, cfg.dac, c, 5), 31u);
  EXPECT_EQ(sar_convert(20e-6, cfg.dac, c, 5), 20u);
  EXPECT_EQ(sar_convert(20.999e-6, cfg.dac, c, 5), 20u);
  EXPECT_EQ(kind_of([&] { sar_convert(1e-6, cfg.dac, c, 0); }), ErrorKind::InvalidArgument);
}

TEST(Sar, IdealComparatorIsFloor) {
  Gen g(1);
  for (int t = 0; t < 20000; ++t) {
    const int r = static_cast<int>(g.range(1, 10));
    SarDac dac{g.uniform(10e-6, 200e-6), 0.0};
    const double i = g.uniform(-0.1, 1.2) * dac.full_scale;
    DwnComparator c{0, 0.0, 1e-9};
    ASSERT_EQ(sar_convert(i, dac, c, r), oracle_code(i, dac, r)) << i << " @" << r;
  }
}

TEST(Sar, HysteresisErrorBound) {
  Gen g(2);
  for (int t = 0; t < 20000; ++t) {
    const int r = static_cast<int>(g.range(3, 8));
    SarDac dac{100e-6, 0.0};
    const double ic = g.uniform(0, 8) * dac.lsb(r);
    const double i = g.uniform(0, 1) * dac.full_scale;
    DwnComparator c{0, ic, 1e-9};
    const auto code = static_cast<long>(sar_convert(i, dac, c, r));
    const auto ideal = static_cast<long>(oracle_code(i, dac, r));
    ASSERT_LE(std::abs(code - ideal), static_cast<long>(std::ceil(ic / dac.lsb(r))) + 1) << i << " ic " << ic;
  }
}

TEST(Sar, CompressedDacStillMonotone) {
  SarDac dac{100e-6, 0.5};
  std::uint32_t prev = 0;
  for (int k = 0; k <= 1000; ++k) {
    DwnComparator c{0, 0.0, 1e-9};
    const auto code = sar_convert(k * 1e-7, dac, c, 6);
    EXPECT_GE(code, prev);
    prev = code;
  }
  EXPECT_DOUBLE_EQ(dac.current(64, 6), 100e-6);
}

TEST(WtaStep, Examples) {
  auto s = SarWtaState::start(3, 2);
  const std::uint8_t msb[] = {1, 0, 1};
  wta_step(s, msb);
  EXPECT_EQ(s.tr, (std::vector<std::uint8_t>{1, 0, 1}));
  EXPECT_FALSE(s.dl);

  auto a = s;
  const std::uint8_t next_a[] = {1, 1, 0};  // column 1 is no longer tracked
  wta_step(a, next_a);
  EXPECT_FALSE(a.dl);
  EXPECT_EQ(a.tr, (std::vector<std::uint8_t>{1, 0, 0}));

  auto b = s;
  const std::uint8_t next_b[] = {0, 1, 0};
  wta_step(b, next_b);
  EXPECT_TRUE(b.dl);
  EXPECT_EQ(b.tr, (std::vector<std::uint8_t>{1, 0, 1}));

  EXPECT_EQ(kind_of([&] { wta_step(b, next_b); }), ErrorKind::CursorOverrun);
  auto c = SarWtaState::start(3, 2);
  const std::uint8_t two[] = {1, 0};
  EXPECT_EQ(kind_of([&] { wta_step(c, two); }), ErrorKind::LengthMismatch);
}

TEST(WtaStep, SurvivorsArePrefixMaxima) {
  Gen g(3);
  for (int t = 0; t < 5000; ++t) {
    const int r = static_cast<int>(g.range(1, 8));
    const std::size_t n = static_cast<std::size_t>(g.range(1, 40));
    std::vector<std::uint32_t> codes(n);
    for (auto& c : codes) c = static_cast<std::uint32_t>(g.range(0, (1 << r) - 1));
    auto s = SarWtaState::start(n, r);
    for (int step = 0; step < r; ++step) {
      const int pos = r - 1 - step;
      std::vector<std::uint8_t> bits(n);
      for (std::size_t c = 0; c < n; ++c) bits[c] = (codes[c] >> pos) & 1u;
      wta_step(s, bits);
      std::uint32_t best = 0;
      for (auto c : codes) best = std::max(best, c >> pos);
      for (std::size_t c = 0; c < n; ++c) {
        ASSERT_EQ(s.tr[c], (codes[c] >> pos) == best ? 1 : 0) << "step " << step << " col " << c;
        ASSERT_EQ(s.sar[c], (codes[c] >> pos) << pos);
      }
    }
  }
}

TEST(WtaSelect, Examples) {
  const auto cfg = micro_amp_lsb();
  auto at = [](std::initializer_list<double> codes) {
    std::vector<double> v;
    for (double c : codes) v.push_back((c + 0.5) * 1e-6);
    return v;
  };
  auto r = wta_select(at({12}), cfg, 0);
  EXPECT_EQ(r.winner, 0u);
  EXPECT_EQ(r.dom, 12u);

  r = wta_select(at({31, 29, 12}), cfg, 0);
  EXPECT_EQ(r.winner, 0u);
  EXPECT_EQ(r.dom, 31u);
  EXPECT_EQ(r.codes, (std::vector<std::uint32_t>{31, 29, 12}));

  r = wta_select(at({7, 7, 3}), cfg, 0);
  EXPECT_EQ(r.winner, 0u);
  EXPECT_EQ(r.dom, 7u);

  r = wta_select(at({3, 9, 9}), cfg, 0);
  EXPECT_EQ(r.winner, 1u);

  r = wta_select(at({5, 3}), cfg, 8);
  EXPECT_FALSE(r.winner);
  EXPECT_EQ(r.dom, 5u);

  EXPECT_EQ(kind_of([&] { wta_select(std::vector<double>{}, cfg, 0); }), ErrorKind::InvalidArgument);
}

TEST(WtaSelect, OracleEquivalence) {
  Gen g(4);
  for (int t = 0; t < 10000; ++t) {
    const std::size_t n = static_cast<std::size_t>(g.range(2, 128));
    WtaConfig cfg;
    cfg.i_threshold = 0;
    const auto cur = g.vec(n, 0, cfg.dac.full_scale);
    const auto r = wta_select(cur, cfg, 0);
    std::size_t best = 0;
    std::uint32_t best_code = 0;
    for (std::size_t c = 0; c < n; ++c) {
      const auto code = oracle_code(cur[c], cfg.dac, cfg.resolution);
      if (code > best_code) {
        best_code = code;
        best = c;
      }
    }
    ASSERT_EQ(r.winner, best);
    ASSERT_EQ(r.dom, best_code);
    ASSERT_EQ(r.comparator_ops, n * static_cast<std::size_t>(cfg.resolution));
  }
}

TEST(WtaSelect, FourPercentMarginAlwaysResolved) {
  Gen g(5);
  int checked = 0;
  while (checked < 1000) {
    const std::size_t n = static_cast<std::size_t>(g.range(2, 64));
    WtaConfig cfg;
    cfg.i_threshold = 0;
    auto cur = g.vec(n, 0, 1);
    const std::size_t best = static_cast<std::size_t>(g.range(0, n - 1));
    cur[best] = 1.0;
    bool ok = true;
    for (std::size_t c = 0; c < n; ++c) ok = ok && (c == best || cur[c] <= 0.96);
    if (!ok) continue;
    // Normalized to the ADC range: the best column sits at full scale.
    for (auto& v : cur) v *= cfg.dac.full_scale * (1 - 1e-9);
    ASSERT_EQ(wta_select(cur, cfg, 0).winner, best);
    ++checked;
  }
}

TEST(WtaSelect, TraceRows) {
  const auto cfg = micro_amp_lsb();
  std::ostringstream os;
  const std::vector<double> cur{20.5e-6, 3.5e-6};
  wta_select(cur, cfg, 0, &os);
  std::istringstream in(os.str());
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 10u);
  EXPECT_EQ(lines[0], "0,0,16,1,1");
  EXPECT_EQ(lines[1], "0,1,16,0,0");
  EXPECT_EQ(lines[2], "1,0,24,0,1");
  EXPECT_EQ(lines[4], "2,0,20,1,1");
}
