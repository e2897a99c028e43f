#include "qlmprot/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace qlmprot {

RealVector violation_diagonal(const SpinBasis& basis) {
  const int l = basis.matter_sites();
  RealVector d = RealVector::Zero(basis.dim());
  for (Index s = 0; s < basis.dim(); ++s) {
    int total = 0;
    for (int j = 1; j <= l; ++j) {
      const int g = gauss_value(basis, s, j);
      total += g * g;
    }
    d(s) = static_cast<double>(total) / l;
  }
  return d;
}

double gauge_violation(const StateVector& psi, const RealVector& violation_diag) {
  if (psi.size() != violation_diag.size()) throw std::invalid_argument("gauge_violation: dimension mismatch");
  return psi.cwiseAbs2().dot(violation_diag);
}

double gauge_violation(const StateVector& psi, std::span<const RealOperator> gauss_ops) {
  if (gauss_ops.empty()) throw std::invalid_argument("gauge_violation: no generators");
  RealVector d = RealVector::Zero(psi.size());
  for (const RealOperator& g : gauss_ops) {
    if (g.dim() != psi.size()) throw std::invalid_argument("gauge_violation: dimension mismatch");
    if (!g.diagonal()) throw ContractError("gauge_violation: generators must be diagonal");
    d += g.diagonal_values().cwiseAbs2();
  }
  return gauge_violation(psi, RealVector(d / static_cast<double>(gauss_ops.size())));
}

std::vector<double> log_time_grid(double t_min, double t_max, int points) {
  if (!(t_min > 0.0) || !(t_max >= t_min) || points < 1 || !std::isfinite(t_max))
    throw std::invalid_argument("log_time_grid: need 0 < t_min <= t_max and points >= 1");
  std::vector<double> grid(static_cast<std::size_t>(points));
  if (points == 1) {
    grid[0] = t_min;
    return grid;
  }
  const double a = std::log10(t_min);
  const double b = std::log10(t_max);
  for (int k = 0; k < points; ++k) grid[static_cast<std::size_t>(k)] = std::pow(10.0, a + (b - a) * k / (points - 1));
  grid.front() = t_min;
  grid.back() = t_max;
  return grid;
}

std::vector<double> default_time_grid() { return log_time_grid(1e-2, 1e10, 200); }

std::string_view to_string(AverageScheme scheme) {
  return scheme == AverageScheme::exact ? "exact" : "trapezoid";
}

AverageScheme parse_average_scheme(std::string_view name) {
  if (name == "exact") return AverageScheme::exact;
  if (name == "trapezoid") return AverageScheme::trapezoid;
  throw std::invalid_argument("unknown average scheme '" + std::string(name) + "'");
}

namespace {

// (e^{ix} - 1) / (ix)
Complex averaged_phase(double x) {
  if (std::abs(x) < 1e-6) return {1.0, 0.5 * x};
  const double h = std::sin(0.5 * x);
  return {std::sin(x) / x, 2.0 * h * h / x};
}

void check_times(std::span<const double> times) {
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!std::isfinite(times[k]) || times[k] < 0.0)
      throw std::invalid_argument("trajectory: times must be finite and non-negative");
    if (k > 0 && !(times[k] > times[k - 1])) throw std::invalid_argument("trajectory: times must increase");
  }
}

}  // namespace

template <typename Scalar>
RunningAverage<Scalar>::RunningAverage(const SpectralDecomposition<Scalar>& spectrum, const StateVector& psi0,
                                       const RealVector& observable_diag, double near_gap)
    : energies_(spectrum.eigenvalues) {
  const Index dim = spectrum.dim();
  if (psi0.size() != dim || observable_diag.size() != dim)
    throw std::invalid_argument("RunningAverage: dimension mismatch");
  const StateVector a = eigenbasis_coefficients(spectrum, psi0);
  const Matrix<Scalar>& v = spectrum.eigenvectors;
  Matrix<Scalar> weighted = observable_diag.asDiagonal() * v;
  const Matrix<Scalar> o = v.adjoint() * weighted;
  weighted.resize(0, 0);

  initial_ = gauge_violation(psi0, observable_diag);

  far_ = Matrix<Complex>::Zero(dim, dim);
  for (Index n = 0; n < dim; ++n) {
    if (a(n) == Complex(0.0)) continue;
    for (Index m = 0; m < dim; ++m) {
      if (a(m) == Complex(0.0)) continue;
      const Complex w = std::conj(a(m)) * a(n) * Complex(o(m, n));
      const double omega = energies_(m) - energies_(n);
      if (std::abs(omega) < near_gap)
        near_.push_back({m, n, w, omega});
      else
        far_(m, n) = w / omega;
    }
  }
  far_offset_ = far_.sum();
}

template <typename Scalar>
double RunningAverage<Scalar>::at(double t) const {
  if (!std::isfinite(t) || t < 0.0) throw std::invalid_argument("RunningAverage: t must be finite and >= 0");
  if (t == 0.0) return initial_;
  Complex total(0.0);
  for (const NearPair& p : near_) total += p.weight * averaged_phase(p.omega * t);
  const Index dim = energies_.size();
  StateVector u(dim);
  for (Index m = 0; m < dim; ++m) u(m) = std::conj(unit_phase(energies_(m), t));
  const Complex bilinear = u.transpose() * (far_ * u.conjugate());
  total += (bilinear - far_offset_) / Complex(0.0, t);
  return total.real();
}

template <typename Scalar>
Trajectory run_trajectory(const SpectralDecomposition<Scalar>& spectrum, const RealVector& violation_diag,
                          const StateVector& psi0, std::span<const double> times, AverageScheme scheme) {
  require_normalized(psi0);
  check_times(times);
  if (psi0.size() != spectrum.dim()) throw std::invalid_argument("run_trajectory: dimension mismatch");
  Trajectory out;
  out.times.assign(times.begin(), times.end());
  const StateVector a = eigenbasis_coefficients(spectrum, psi0);
  for (double t : times) {
    const StateVector psi = state_from_coefficients(spectrum, a, t);
    out.epsilon.push_back(gauge_violation(psi, violation_diag));
    out.max_norm_error = std::max(out.max_norm_error, std::abs(psi.norm() - 1.0));
  }
  if (scheme == AverageScheme::exact) {
    const RunningAverage<Scalar> avg(spectrum, psi0, violation_diag);
    for (double t : times) out.epsilon_avg.push_back(avg.at(t));
  } else {
    double integral = 0.0;
    double t_prev = 0.0;
    double e_prev = gauge_violation(psi0, violation_diag);
    for (std::size_t k = 0; k < times.size(); ++k) {
      integral += 0.5 * (times[k] - t_prev) * (out.epsilon[k] + e_prev);
      t_prev = times[k];
      e_prev = out.epsilon[k];
      out.epsilon_avg.push_back(times[k] > 0.0 ? integral / times[k] : out.epsilon[k]);
    }
  }
  return out;
}

Trajectory run_trajectory(const ModelParams& params, const Protection& protection, const StateVector& psi0,
                          std::span<const double> times, AverageScheme scheme) {
  const SpinBasis basis = params.basis();
  const auto spectrum = eigh(prepare_hamiltonian(params, protection).matrix_at(params.V));
  Trajectory out = run_trajectory(spectrum, violation_diagonal(basis), psi0, times, scheme);
  out.params = params;
  out.protection = protection.describe();
  return out;
}

std::string_view to_string(InfiniteTimeMode mode) {
  return mode == InfiniteTimeMode::sample_at_1e10 ? "sample_at_1e10" : "diagonal_ensemble";
}

template <typename Scalar>
InfiniteTimeResult infinite_time_violation(const SpectralDecomposition<Scalar>& spectrum,
                                           const RealVector& violation_diag, const StateVector& psi0,
                                           InfiniteTimeMode mode) {
  require_normalized(psi0);
  InfiniteTimeResult result;
  result.min_level_spacing = spectrum.min_level_spacing();
  if (mode == InfiniteTimeMode::sample_at_1e10) {
    result.value = RunningAverage<Scalar>(spectrum, psi0, violation_diag).at(kInfiniteTime);
    return result;
  }
  const StateVector a = eigenbasis_coefficients(spectrum, psi0);
  const RealVector o_nn = spectrum.eigenvectors.cwiseAbs2().transpose() * violation_diag;
  result.value = a.cwiseAbs2().dot(o_nn);
  result.approximate = result.min_level_spacing < kDegeneracyThreshold;
  return result;
}

InfiniteTimeResult infinite_time_violation(const ModelParams& params, const Protection& protection,
                                           const StateVector& psi0, InfiniteTimeMode mode) {
  const auto spectrum = eigh(prepare_hamiltonian(params, protection).matrix_at(params.V));
  return infinite_time_violation(spectrum, violation_diagonal(params.basis()), psi0, mode);
}

std::vector<long long> protection_block_labels(const Protection& protection, const SpinBasis& basis) {
  std::vector<long long> labels(static_cast<std::size_t>(basis.dim()), 0);
  if (protection.kind() == Protection::Kind::none) return labels;
  for (Index s = 0; s < basis.dim(); ++s) {
    const Sector g = sector_of_state(basis, s);
    long long value = 0;
    if (protection.kind() == Protection::Kind::linear) {
      value = protection.sequence().label(g);
    } else {
      for (int gj : g) value += static_cast<long long>(gj) * gj;
    }
    labels[static_cast<std::size_t>(s)] = value;
  }
  return labels;
}

Matrix<double> block_diagonal_part(const Matrix<double>& m, std::span<const long long> labels) {
  if (m.rows() != m.cols() || static_cast<std::size_t>(m.rows()) != labels.size())
    throw std::invalid_argument("block_diagonal_part: dimension mismatch");
  Matrix<double> out = m;
  for (Index c = 0; c < m.cols(); ++c)
    for (Index r = 0; r < m.rows(); ++r)
      if (labels[static_cast<std::size_t>(r)] != labels[static_cast<std::size_t>(c)]) out(r, c) = 0.0;
  return out;
}

ZenoPropagator::ZenoPropagator(const ModelParams& params, const Protection& protection) {
  const SpinBasis basis = params.basis();
  ProtectedHamiltonian h = prepare_hamiltonian(params, protection);
  const std::vector<long long> labels = protection_block_labels(protection, basis);
  spectrum_ = eigh(block_diagonal_part(h.unprotected.matrix(), labels));
  protection_ = std::move(h.protection);
}

StateVector ZenoPropagator::evolve(const StateVector& psi0, double V, double t) const {
  StateVector psi = evolve_with_spectrum(spectrum_, psi0, t);
  for (Index s = 0; s < psi.size(); ++s) psi(s) *= unit_phase(V * protection_(s), t);
  return psi;
}

StateVector zeno_evolution(const ModelParams& params, const Protection& protection, const StateVector& psi0,
                           double t) {
  require_normalized(psi0);
  return ZenoPropagator(params, protection).evolve(psi0, params.V, t);
}

std::vector<double> zeno_residual(const ModelParams& params, const Protection& protection, const StateVector& psi0,
                                  double t, std::span<const double> v_list) {
  require_normalized(psi0);
  for (std::size_t k = 0; k < v_list.size(); ++k)
    if (!(v_list[k] > 0.0) || (k > 0 && !(v_list[k] > v_list[k - 1])))
      throw std::invalid_argument("zeno_residual: V list must be positive and ascending");
  const ZenoPropagator zeno(params, protection);
  const ProtectedHamiltonian h = prepare_hamiltonian(params, protection);
  std::vector<double> residuals;
  for (double v : v_list) {
    const auto spectrum = eigh(h.matrix_at(v));
    residuals.push_back((evolve_with_spectrum(spectrum, psi0, t) - zeno.evolve(psi0, v, t)).norm());
  }
  return residuals;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  out << "t,epsilon,epsilon_avg\n" << std::setprecision(17);
  for (std::size_t k = 0; k < trajectory.times.size(); ++k)
    out << trajectory.times[k] << ',' << trajectory.epsilon[k] << ',' << trajectory.epsilon_avg[k] << '\n';
}

#define QLMPROT_INSTANTIATE(S)                                                                                 \
  template class RunningAverage<S>;                                                                            \
  template Trajectory run_trajectory(const SpectralDecomposition<S>&, const RealVector&, const StateVector&, \
                                     std::span<const double>, AverageScheme);                                 \
  template InfiniteTimeResult infinite_time_violation(const SpectralDecomposition<S>&, const RealVector&,      \
                                                      const StateVector&, InfiniteTimeMode);

QLMPROT_INSTANTIATE(double)
QLMPROT_INSTANTIATE(Complex)

#undef QLMPROT_INSTANTIATE

}  // namespace qlmprot
