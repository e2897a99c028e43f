// circuit.hpp - Trotterized digital evolution: one step is the exact hopping
// layer, the error layer (rx on links, pair gates on matter) and a single
// layer of z rotations carrying both the mass and the protection term.

#ifndef QLMPROT_CIRCUIT_HPP
#define QLMPROT_CIRCUIT_HPP

#include "qlmprot/core.hpp"
#include "qlmprot/evolve.hpp"
#include "qlmprot/gauge.hpp"
#include "qlmprot/model.hpp"

#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace qlmprot {

/// The requested model has no gate decomposition here (the extreme error).
class UnsupportedConfiguration : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TrotterConfig {
  double dt = 0.2;
  int n_steps = 100;
  ModelParams params;  // params.V is the protection strength
  ProtectionSequence sequence = ProtectionSequence::paper_compliant_L6();

  double t_final() const { return dt * n_steps; }
  void validate() const;
};

enum class GateKind {
  exact_layer,   // e^{-i H_J dt}, applied through the spectrum of H_J
  rx,            // exp(-i angle/2 X) on one link qubit
  two_qubit_pp,  // exp(-i angle (s+s+ + s-s-)) on two matter qubits
  rz,            // exp(-i angle/2 Z) on one qubit
  global_phase,  // e^{-i angle}
};

struct Gate {
  GateKind kind;
  std::vector<int> qubits;
  double angle = 0.0;
};

/// Dense matrix of a local gate: 2x2, 4x4 (first qubit most significant) or
/// 1x1 for the global phase. The exact layer has no local matrix.
Matrix<Complex> gate_matrix(const Gate& gate);

using HoppingSpectrum = std::shared_ptr<const BlockSpectrum<double>>;

/// Spectrum of H_J alone (mass term excluded), one block per gauge sector,
/// shared by every step and scan point.
HoppingSpectrum hopping_spectrum(const SpinBasis& basis, double J = 1.0);

struct GateList {
  SpinBasis basis{2};
  double dt = 0.0;
  std::vector<Gate> gates;
  HoppingSpectrum hopping;
};

GateList build_trotter_step(const TrotterConfig& config);
GateList build_trotter_step(const TrotterConfig& config, HoppingSpectrum hopping);

/// Applies the gates of one step in order.
void apply(const GateList& step, StateVector& psi);

/// Step unitary column by column (small L only).
Matrix<Complex> step_unitary(const GateList& step);

/// Per-step samples: times k dt, epsilon after step k, epsilon_avg the mean
/// over steps 1..k. The whole-run mean is epsilon_avg.back(), the final-step
/// value epsilon.back().
Trajectory run_circuit(const TrotterConfig& config, const StateVector& psi0);
Trajectory run_circuit(const TrotterConfig& config, const StateVector& psi0, HoppingSpectrum hopping);

/// pi / (2 c_bar dt) - xi
double v_ideal(double dt, double c_bar, double xi = 0.58);

struct VIdealSearch {
  double v_argmin = 0.0;
  double eps_min = 0.0;
  std::vector<std::pair<double, double>> evaluations;  // (V, mean epsilon), in evaluation order
};

/// Coarse scan of `coarse_points` linearly spaced V in [v_lo, v_hi], then a
/// golden-section search around the best point until the bracket is below
/// rel_tol * V.
VIdealSearch locate_v_ideal(const TrotterConfig& base, const StateVector& psi0, double v_lo, double v_hi,
                            int coarse_points = 15, double rel_tol = 0.01, HoppingSpectrum hopping = nullptr,
                            int threads = 1);

struct CollapseRow {
  double dt;
  double V;
  double V_dt;
  double eps_avg;
  double eps_avg_rescaled;  // eps_avg / (J dt)^2
};

/// For each dt, runs t_final / dt steps at every V = v_dt / dt.
std::vector<CollapseRow> collapse_scan(const TrotterConfig& base, const StateVector& psi0, std::span<const double> dts,
                                       std::span<const double> v_dt_grid, double t_final,
                                       HoppingSpectrum hopping = nullptr, int threads = 1);

/// Header `step,t,epsilon`.
void write_circuit_csv(std::ostream& out, const Trajectory& trajectory);
/// Header `dt,V,V_dt,eps_avg,eps_avg_rescaled`.
void write_collapse_csv(std::ostream& out, std::span<const CollapseRow> rows);

}  // namespace qlmprot

#endif  // QLMPROT_CIRCUIT_HPP
