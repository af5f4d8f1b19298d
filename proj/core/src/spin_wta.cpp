#include "spinhtm/spin_wta.hpp"

#include <cmath>
#include <string>

#include "spinhtm/error.hpp"

namespace spinhtm::wta {

int dwn_compare(DwnComparator& cmp, double i_net) {
  if (i_net >= cmp.i_threshold) {
    cmp.state = 1;
  } else if (i_net <= -cmp.i_threshold) {
    cmp.state = 0;
  }
  return cmp.state;
}

double SarDac::current(std::uint32_t code, int resolution) const {
  const double x = static_cast<double>(code) / std::ldexp(1.0, resolution);
  if (load_ratio <= 0) return full_scale * x;
  return full_scale * x * (1.0 + load_ratio) / (1.0 + load_ratio * x);
}

double SarDac::lsb(int resolution) const { return full_scale / std::ldexp(1.0, resolution); }

namespace {

void check_resolution(int r) {
  if (r < 1 || r > 24) throw Error(ErrorKind::InvalidArgument, "resolution must be in [1, 24]");
}

}  // namespace

std::uint32_t sar_convert(double i_in, const SarDac& dac, DwnComparator& cmp, int resolution) {
  check_resolution(resolution);
  cmp.state = 0;
  std::uint32_t code = 0;
  for (int b = resolution - 1; b >= 0; --b) {
    const std::uint32_t trial = code | (1u << b);
    if (dwn_compare(cmp, i_in - dac.current(trial, resolution)) == 1) code = trial;
  }
  return code;
}

SarWtaState SarWtaState::start(std::size_t columns, int resolution, std::uint32_t dom_threshold) {
  check_resolution(resolution);
  SarWtaState s;
  s.sar.assign(columns, 0);
  s.tr.assign(columns, 1);
  s.dr.assign(columns, 0);
  s.resolution = resolution;
  s.dom_threshold = dom_threshold;
  return s;
}

void wta_step(SarWtaState& s, std::span<const std::uint8_t> bits) {
  if (s.bit_cursor >= s.resolution) {
    throw Error(ErrorKind::CursorOverrun, "wta_step: all " + std::to_string(s.resolution) + " bits already resolved");
  }
  if (bits.size() != s.tr.size()) throw Error(ErrorKind::LengthMismatch, "wta_step: one bit per column required");
  const int pos = s.resolution - 1 - s.bit_cursor;
  s.dl = true;
  bool any = false;
  for (std::size_t c = 0; c < bits.size(); ++c) {
    if (bits[c]) s.sar[c] |= 1u << pos;
    s.dr[c] = (s.tr[c] && bits[c]) ? 1 : 0;
    any = any || s.dr[c];
  }
  if (any) {
    s.dl = false;
    for (std::size_t c = 0; c < bits.size(); ++c) {
      if (s.tr[c] && !bits[c]) s.tr[c] = 0;
    }
  }
  ++s.bit_cursor;
}

WtaResult wta_select(std::span<const double> currents, const WtaConfig& cfg, std::uint32_t dom_threshold,
                     std::ostream* trace) {
  if (currents.empty()) throw Error(ErrorKind::InvalidArgument, "wta_select: no columns");
  const std::size_t n = currents.size();
  auto state = SarWtaState::start(n, cfg.resolution, dom_threshold);
  std::vector<DwnComparator> cmp(n, DwnComparator{0, cfg.i_threshold, cfg.t_switch});
  std::vector<std::uint8_t> bits(n);
  WtaResult res;

  for (int step = 0; step < cfg.resolution; ++step) {
    const int b = cfg.resolution - 1 - step;
    for (std::size_t c = 0; c < n; ++c) {
      const std::uint32_t trial = state.sar[c] | (1u << b);
      bits[c] = static_cast<std::uint8_t>(dwn_compare(cmp[c], currents[c] - cfg.dac.current(trial, cfg.resolution)));
      ++res.comparator_ops;
    }
    wta_step(state, bits);
    if (trace) {
      for (std::size_t c = 0; c < n; ++c) {
        const std::uint32_t trial = (state.sar[c] & ~((1u << b) - 1u)) | (1u << b);
        *trace << step << ',' << c << ',' << trial << ',' << int(bits[c]) << ',' << int(state.tr[c]) << '\n';
      }
    }
  }

  std::size_t winner = 0;
  while (winner < n && !state.tr[winner]) ++winner;
  res.codes = std::move(state.sar);
  res.dom = res.codes[winner];
  if (res.dom >= dom_threshold) res.winner = winner;
  return res;
}

}  // namespace spinhtm::wta
