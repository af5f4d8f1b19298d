#include <Eigen/Sparse>
#include <cmath>

#include "spinhtm/error.hpp"
#include "spinhtm/rcn_model.hpp"

namespace spinhtm::rcn {

namespace {

// Ideal wires: each row bar is one node and every column bar sits at the clamp.
NodalSolution solve_shorted(const CrossbarArray& arr, std::span<const std::uint32_t> codes, const DtcsConfig& cfg) {
  NodalSolution s;
  s.row_voltage.assign(arr.rows, 0.0);
  s.column_current.assign(arr.cols, 0.0);
  s.source_current.assign(arr.rows, 0.0);
  s.dummy_current.assign(arr.rows, 0.0);
  double total_in = 0, total_out = 0;
  for (std::size_t i = 0; i < arr.rows; ++i) {
    const double gt = dtcs_conductance(codes[i], cfg) * arr.source_gain[i];
    if (gt <= 0) continue;
    const double load = arr.row_total(i);
    if (!(load > 0)) throw Error(ErrorKind::SingularSystem, "row " + std::to_string(i) + " has no load");
    const double v = cfg.linear ? cfg.delta_v * gt / load : cfg.delta_v * gt / (gt + load);
    s.row_voltage[i] = v;
    s.source_current[i] = cfg.linear ? cfg.delta_v * gt : gt * (cfg.delta_v - v);
    total_in += s.source_current[i];
    for (std::size_t j = 0; j < arr.cols; ++j) s.column_current[j] += v * arr.cell_g(i, j);
    s.dummy_current[i] = v * arr.dummy[i];
    total_out += s.dummy_current[i];
  }
  for (double c : s.column_current) total_out += c;
  s.kcl_residual = total_in > 0 ? std::abs(total_in - total_out) / total_in : 0.0;
  return s;
}

}  // namespace

NodalSolution solve_nodal(const CrossbarArray& arr, std::span<const std::uint32_t> codes, const DtcsConfig& cfg) {
  if (codes.size() != arr.rows) throw Error(ErrorKind::LengthMismatch, "solve_nodal: codes length != rows");
  const double r_seg = arr.cfg.segment_r();
  if (r_seg == 0) return solve_shorted(arr, codes, cfg);
  if (!(r_seg > 0) || !std::isfinite(r_seg)) throw Error(ErrorKind::SingularSystem, "wire segments need finite resistance");

  const std::size_t R = arr.rows, C = arr.cols;
  const std::size_t row_nodes = R * (C + 1);
  const std::size_t n = row_nodes + R * C;
  const double g_seg = 1.0 / r_seg;
  auto rn = [C](std::size_t i, std::size_t k) { return i * (C + 1) + k; };
  auto cn = [C, row_nodes](std::size_t i, std::size_t j) { return row_nodes + i * C + j; };

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(n * 5);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  auto link = [&trip](std::size_t a, std::size_t c, double g) {
    const auto ia = static_cast<int>(a), ic = static_cast<int>(c);
    trip.emplace_back(ia, ia, g);
    trip.emplace_back(ic, ic, g);
    trip.emplace_back(ia, ic, -g);
    trip.emplace_back(ic, ia, -g);
  };
  auto to_ground = [&trip](std::size_t a, double g) {
    trip.emplace_back(static_cast<int>(a), static_cast<int>(a), g);
  };

  std::vector<double> gt(R);
  for (std::size_t i = 0; i < R; ++i) {
    gt[i] = dtcs_conductance(codes[i], cfg) * arr.source_gain[i];
    if (gt[i] > 0) {
      if (cfg.linear) {
        b[static_cast<Eigen::Index>(rn(i, 0))] += cfg.delta_v * gt[i];
      } else {
        to_ground(rn(i, 0), gt[i]);
        b[static_cast<Eigen::Index>(rn(i, 0))] += gt[i] * cfg.delta_v;
      }
    }
    for (std::size_t k = 0; k < C; ++k) link(rn(i, k), rn(i, k + 1), g_seg);
    if (arr.dummy[i] > 0) to_ground(rn(i, C), arr.dummy[i]);
    for (std::size_t j = 0; j < C; ++j) {
      const double g = arr.cell_g(i, j);
      if (g > 0) link(rn(i, j), cn(i, j), g);
      if (i + 1 < R) {
        link(cn(i, j), cn(i + 1, j), g_seg);
      } else {
        to_ground(cn(i, j), g_seg);
      }
    }
  }

  Eigen::SparseMatrix<double> G(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  G.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(G);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::SingularSystem, "nodal matrix factorization failed");
  Eigen::VectorXd v = solver.solve(b);
  for (int pass = 0; pass < 2; ++pass) {
    const Eigen::VectorXd r = b - G * v;
    v += solver.solve(r);
  }
  if (solver.info() != Eigen::Success || !v.allFinite()) {
    throw Error(ErrorKind::SingularSystem, "nodal solve did not converge");
  }

  NodalSolution s;
  s.voltages.assign(v.data(), v.data() + v.size());
  s.row_voltage.resize(R);
  s.column_current.assign(C, 0.0);
  s.source_current.assign(R, 0.0);
  s.dummy_current.assign(R, 0.0);
  double total_in = 0, total_out = 0;
  for (std::size_t i = 0; i < R; ++i) {
    const double v0 = v[static_cast<Eigen::Index>(rn(i, 0))];
    s.row_voltage[i] = v0;
    if (gt[i] > 0) s.source_current[i] = cfg.linear ? cfg.delta_v * gt[i] : gt[i] * (cfg.delta_v - v0);
    total_in += s.source_current[i];
    s.dummy_current[i] = arr.dummy[i] * v[static_cast<Eigen::Index>(rn(i, C))];
    total_out += s.dummy_current[i];
  }
  for (std::size_t j = 0; j < C; ++j) {
    s.column_current[j] = g_seg * v[static_cast<Eigen::Index>(cn(R - 1, j))];
    total_out += s.column_current[j];
  }
  s.kcl_residual = total_in > 0 ? std::abs(total_in - total_out) / total_in : 0.0;
  return s;
}

}  // namespace spinhtm::rcn
