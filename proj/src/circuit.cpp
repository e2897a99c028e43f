#include "qlmprot/circuit.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

namespace qlmprot {

void TrotterConfig::validate() const {
  params.validate();
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("TrotterConfig: dt must be positive");
  if (n_steps < 1) throw std::invalid_argument("TrotterConfig: n_steps must be at least 1");
  if (sequence.size() != params.matter_sites)
    throw std::invalid_argument("TrotterConfig: sequence length does not match L");
  if (params.error == ErrorKind::extreme)
    throw UnsupportedConfiguration("TrotterConfig: the extreme error has no gate decomposition");
}

Matrix<Complex> gate_matrix(const Gate& gate) {
  const double c = std::cos(gate.angle);
  const double s = std::sin(gate.angle);
  switch (gate.kind) {
    case GateKind::rx: {
      const double ch = std::cos(0.5 * gate.angle);
      const double sh = std::sin(0.5 * gate.angle);
      Matrix<Complex> m(2, 2);
      m << ch, Complex(0, -sh), Complex(0, -sh), ch;
      return m;
    }
    case GateKind::rz: {
      Matrix<Complex> m = Matrix<Complex>::Zero(2, 2);
      m(0, 0) = std::polar(1.0, -0.5 * gate.angle);
      m(1, 1) = std::polar(1.0, 0.5 * gate.angle);
      return m;
    }
    case GateKind::two_qubit_pp: {
      // couples |00> and |11> only
      Matrix<Complex> m = Matrix<Complex>::Identity(4, 4);
      m(0, 0) = m(3, 3) = c;
      m(0, 3) = m(3, 0) = Complex(0, -s);
      return m;
    }
    case GateKind::global_phase:
      return Matrix<Complex>::Constant(1, 1, std::polar(1.0, -gate.angle));
    case GateKind::exact_layer:
      break;
  }
  throw std::invalid_argument("gate_matrix: the exact layer is not a local gate");
}

HoppingSpectrum hopping_spectrum(const SpinBasis& basis, double J) {
  const GaugeSectorTable table = sector_map(basis);
  return std::make_shared<const BlockSpectrum<double>>(eigh_blocks(build_hopping(basis, J).matrix(), table.sector_index));
}

GateList build_trotter_step(const TrotterConfig& config) {
  config.validate();
  return build_trotter_step(config, hopping_spectrum(config.params.basis(), config.params.J));
}

GateList build_trotter_step(const TrotterConfig& config, HoppingSpectrum hopping) {
  config.validate();
  const ModelParams& p = config.params;
  const SpinBasis basis = p.basis();
  if (!hopping || hopping->dim != basis.dim()) throw std::invalid_argument("build_trotter_step: hopping spectrum has wrong size");
  const double dt = config.dt;
  const int l = basis.matter_sites();

  GateList step{basis, dt, {}, std::move(hopping)};
  step.gates.push_back({GateKind::exact_layer, {}, dt});

  if (p.error == ErrorKind::local) {
    for (int j = 1; j <= l; ++j) step.gates.push_back({GateKind::rx, {basis.link_qubit(j)}, 2.0 * p.lambda * dt});
    for (int j = 1; j <= l; ++j)
      step.gates.push_back({GateKind::two_qubit_pp, {basis.matter_qubit(j), basis.matter_qubit(j + 1)}, p.lambda * dt});
  }

  // H_m + V sum_j c_j G_j with G_j = s_j/2 (z_j + z_{j-1,j} + z_{j,j+1} + 1):
  // each z picks up the weights of every incident G_j, the constants add up
  // to a global phase. rz(phi) = exp(-i phi Z / 2), so phi = 2 dt * weight.
  std::vector<double> weight(static_cast<std::size_t>(basis.qubits()), 0.0);
  double constant = 0.0;
  for (int j = 1; j <= l; ++j) {
    const double g = 0.5 * p.V * config.sequence.coefficient(j - 1) * ((j % 2 == 0) ? 1.0 : -1.0);
    weight[static_cast<std::size_t>(basis.matter_qubit(j))] += 0.5 * p.mu + g;
    weight[static_cast<std::size_t>(basis.link_qubit(j - 1))] += g;
    weight[static_cast<std::size_t>(basis.link_qubit(j))] += g;
    constant += g;
  }
  for (int q = 0; q < basis.qubits(); ++q)
    step.gates.push_back({GateKind::rz, {q}, 2.0 * dt * weight[static_cast<std::size_t>(q)]});
  step.gates.push_back({GateKind::global_phase, {}, constant * dt});
  return step;
}

namespace {

void apply_pair_rotation(StateVector& psi, std::uint64_t low_mask, std::uint64_t flip, double c, double s) {
  const Complex ms(0.0, -s);
  for (Index a = 0; a < psi.size(); ++a) {
    if ((static_cast<std::uint64_t>(a) & low_mask) != 0) continue;
    const Index b = static_cast<Index>(static_cast<std::uint64_t>(a) | flip);
    const Complex pa = psi(a);
    const Complex pb = psi(b);
    psi(a) = c * pa + ms * pb;
    psi(b) = ms * pa + c * pb;
  }
}

}  // namespace

void apply(const GateList& step, StateVector& psi) {
  const SpinBasis& basis = step.basis;
  if (psi.size() != basis.dim()) throw std::invalid_argument("apply: dimension mismatch");
  for (const Gate& gate : step.gates) {
    switch (gate.kind) {
      case GateKind::exact_layer:
        step.hopping->evolve(psi, gate.angle);
        break;
      case GateKind::rx: {
        const std::uint64_t m = basis.mask(gate.qubits.at(0));
        apply_pair_rotation(psi, m, m, std::cos(0.5 * gate.angle), std::sin(0.5 * gate.angle));
        break;
      }
      case GateKind::two_qubit_pp: {
        const std::uint64_t m = basis.mask(gate.qubits.at(0)) | basis.mask(gate.qubits.at(1));
        apply_pair_rotation(psi, m, m, std::cos(gate.angle), std::sin(gate.angle));
        break;
      }
      case GateKind::rz: {
        const int q = gate.qubits.at(0);
        const Complex up = std::polar(1.0, -0.5 * gate.angle);
        const Complex down = std::conj(up);
        for (Index s = 0; s < psi.size(); ++s) psi(s) *= basis.bit(s, q) ? down : up;
        break;
      }
      case GateKind::global_phase:
        psi *= std::polar(1.0, -gate.angle);
        break;
    }
  }
}

Matrix<Complex> step_unitary(const GateList& step) {
  const Index dim = step.basis.dim();
  Matrix<Complex> u(dim, dim);
  for (Index c = 0; c < dim; ++c) {
    StateVector col = StateVector::Unit(dim, c);
    apply(step, col);
    u.col(c) = col;
  }
  return u;
}

Trajectory run_circuit(const TrotterConfig& config, const StateVector& psi0) {
  config.validate();
  return run_circuit(config, psi0, hopping_spectrum(config.params.basis(), config.params.J));
}

Trajectory run_circuit(const TrotterConfig& config, const StateVector& psi0, HoppingSpectrum hopping) {
  require_normalized(psi0);
  const GateList step = build_trotter_step(config, std::move(hopping));
  const RealVector violation = violation_diagonal(step.basis);
  Trajectory out;
  out.params = config.params;
  out.protection = "linear" + config.sequence.to_string();
  StateVector psi = psi0;
  double sum = 0.0;
  for (int k = 1; k <= config.n_steps; ++k) {
    apply(step, psi);
    const double eps = gauge_violation(psi, violation);
    sum += eps;
    out.times.push_back(k * config.dt);
    out.epsilon.push_back(eps);
    out.epsilon_avg.push_back(sum / k);
    out.max_norm_error = std::max(out.max_norm_error, std::abs(psi.norm() - 1.0));
  }
  return out;
}

double v_ideal(double dt, double c_bar, double xi) {
  if (!(dt > 0.0)) throw std::invalid_argument("v_ideal: dt must be positive");
  if (!(c_bar > 0.0) || c_bar > 1.0) throw std::invalid_argument("v_ideal: c_bar must lie in (0, 1]");
  return std::numbers::pi / (2.0 * c_bar * dt) - xi;
}

namespace {

double mean_violation_at(const TrotterConfig& base, const StateVector& psi0, const HoppingSpectrum& hopping,
                         double V) {
  TrotterConfig cfg = base;
  cfg.params.V = V;
  return run_circuit(cfg, psi0, hopping).epsilon_avg.back();
}

}  // namespace

VIdealSearch locate_v_ideal(const TrotterConfig& base, const StateVector& psi0, double v_lo, double v_hi,
                            int coarse_points, double rel_tol, HoppingSpectrum hopping, int threads) {
  base.validate();
  if (!(v_hi > v_lo) || coarse_points < 3 || !(rel_tol > 0.0))
    throw std::invalid_argument("locate_v_ideal: need v_lo < v_hi, at least 3 coarse points and rel_tol > 0");
  if (!hopping) hopping = hopping_spectrum(base.params.basis(), base.params.J);

  VIdealSearch out;
  std::vector<double> grid(static_cast<std::size_t>(coarse_points));
  std::vector<double> values(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = v_lo + (v_hi - v_lo) * static_cast<double>(k) / (coarse_points - 1);
  parallel_for(grid.size(), threads, [&](std::size_t k) { values[k] = mean_violation_at(base, psi0, hopping, grid[k]); });
  std::size_t best = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out.evaluations.emplace_back(grid[k], values[k]);
    if (values[k] < values[best]) best = k;
  }

  auto eval = [&](double v) {
    const double e = mean_violation_at(base, psi0, hopping, v);
    out.evaluations.emplace_back(v, e);
    return e;
  };
  double a = grid[best == 0 ? 0 : best - 1];
  double b = grid[std::min(best + 1, grid.size() - 1)];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = eval(x1);
  double f2 = eval(x2);
  while (b - a > rel_tol * 0.5 * (a + b)) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = eval(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = eval(x2);
    }
  }
  out.v_argmin = grid[best];
  out.eps_min = values[best];
  for (const auto& [v, e] : out.evaluations)
    if (e < out.eps_min) {
      out.eps_min = e;
      out.v_argmin = v;
    }
  return out;
}

std::vector<CollapseRow> collapse_scan(const TrotterConfig& base, const StateVector& psi0, std::span<const double> dts,
                                       std::span<const double> v_dt_grid, double t_final, HoppingSpectrum hopping,
                                       int threads) {
  if (!(t_final > 0.0)) throw std::invalid_argument("collapse_scan: t_final must be positive");
  base.params.validate();
  if (!hopping) hopping = hopping_spectrum(base.params.basis(), base.params.J);
  std::vector<CollapseRow> rows;
  for (double dt : dts)
    for (double vdt : v_dt_grid) rows.push_back({dt, vdt / dt, vdt, 0.0, 0.0});
  parallel_for(rows.size(), threads, [&](std::size_t k) {
    CollapseRow& row = rows[k];
    TrotterConfig cfg = base;
    cfg.dt = row.dt;
    cfg.n_steps = std::max(1, static_cast<int>(std::lround(t_final / row.dt)));
    row.eps_avg = mean_violation_at(cfg, psi0, hopping, row.V);
    row.eps_avg_rescaled = row.eps_avg / (cfg.params.J * row.dt * cfg.params.J * row.dt);
  });
  return rows;
}

void write_circuit_csv(std::ostream& out, const Trajectory& trajectory) {
  out << "step,t,epsilon\n" << std::setprecision(17);
  for (std::size_t k = 0; k < trajectory.times.size(); ++k)
    out << (k + 1) << ',' << trajectory.times[k] << ',' << trajectory.epsilon[k] << '\n';
}

void write_collapse_csv(std::ostream& out, std::span<const CollapseRow> rows) {
  out << "dt,V,V_dt,eps_avg,eps_avg_rescaled\n" << std::setprecision(17);
  for (const CollapseRow& r : rows)
    out << r.dt << ',' << r.V << ',' << r.V_dt << ',' << r.eps_avg << ',' << r.eps_avg_rescaled << '\n';
}

}  // namespace qlmprot
