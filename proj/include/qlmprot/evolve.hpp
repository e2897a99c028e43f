// evolve.hpp - quench dynamics of the gauge violation: trajectories with
// running time averages, infinite-time values and the Zeno-limit reference.

#ifndef QLMPROT_EVOLVE_HPP
#define QLMPROT_EVOLVE_HPP

#include "qlmprot/core.hpp"
#include "qlmprot/model.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace qlmprot {

/// Diagonal of (1/L) sum_j G_j^2 in the z basis.
RealVector violation_diagonal(const SpinBasis& basis);

/// <psi| diag |psi> for a z-diagonal observable.
double gauge_violation(const StateVector& psi, const RealVector& violation_diag);
/// (1/L) sum_j <psi|G_j^2|psi> from explicit diagonal generators.
double gauge_violation(const StateVector& psi, std::span<const RealOperator> gauss_ops);

/// `points` log-spaced times in [t_min, t_max].
std::vector<double> log_time_grid(double t_min, double t_max, int points);
std::vector<double> default_time_grid();  // 200 points, 1e-2 .. 1e10

enum class AverageScheme {
  exact,      // closed-form time integral over the spectrum
  trapezoid,  // trapezoid rule on the sampled grid with eps(0) prepended
};

std::string_view to_string(AverageScheme scheme);
AverageScheme parse_average_scheme(std::string_view name);

struct Trajectory {
  std::vector<double> times;
  std::vector<double> epsilon;
  std::vector<double> epsilon_avg;
  double max_norm_error = 0.0;  // max_t | ||psi(t)|| - 1 |
  ModelParams params;
  std::string protection;
};

/// Time average (1/t) int_0^t <psi(s)|O|psi(s)> ds for a z-diagonal O,
/// evaluated exactly from the spectrum. Pairs of eigenvalues closer than
/// `near_gap` are summed directly; the rest go through one matrix-vector
/// product per time point.
template <typename Scalar>
class RunningAverage {
 public:
  RunningAverage(const SpectralDecomposition<Scalar>& spectrum, const StateVector& psi0,
                 const RealVector& observable_diag, double near_gap = 1e-3);

  double at(double t) const;
  std::size_t near_pairs() const { return near_.size(); }

 private:
  struct NearPair {
    Index m, n;
    Complex weight;
    double omega;
  };
  RealVector energies_;
  Matrix<Complex> far_;  // w_mn / omega_mn on far pairs, zero elsewhere
  Complex far_offset_;   // 1^T far_ 1
  std::vector<NearPair> near_;
  double initial_ = 0.0;
};

/// Full pipeline: assemble H at params.V, diagonalize once, sample.
Trajectory run_trajectory(const ModelParams& params, const Protection& protection, const StateVector& psi0,
                          std::span<const double> times, AverageScheme scheme = AverageScheme::exact);

/// Lower level: reuse an existing decomposition.
template <typename Scalar>
Trajectory run_trajectory(const SpectralDecomposition<Scalar>& spectrum, const RealVector& violation_diag,
                          const StateVector& psi0, std::span<const double> times,
                          AverageScheme scheme = AverageScheme::exact);

enum class InfiniteTimeMode { sample_at_1e10, diagonal_ensemble };

std::string_view to_string(InfiniteTimeMode mode);

struct InfiniteTimeResult {
  double value = 0.0;
  /// Diagonal ensemble only: a level spacing below 1e-12 was found, so the
  /// value ignores coherences between (nearly) degenerate eigenstates.
  bool approximate = false;
  double min_level_spacing = 0.0;
};

inline constexpr double kInfiniteTime = 1e10;
inline constexpr double kDegeneracyThreshold = 1e-12;

InfiniteTimeResult infinite_time_violation(const ModelParams& params, const Protection& protection,
                                           const StateVector& psi0, InfiniteTimeMode mode);

template <typename Scalar>
InfiniteTimeResult infinite_time_violation(const SpectralDecomposition<Scalar>& spectrum,
                                           const RealVector& violation_diag, const StateVector& psi0,
                                           InfiniteTimeMode mode);

/// Integer label of the protection eigenvalue per basis state: c.g times the
/// denominator (linear), sum_j g_j^2 (quadratic), 0 for every state (none).
std::vector<long long> protection_block_labels(const Protection& protection, const SpinBasis& basis);

/// sum_n Pi_n M Pi_n: entries between states with different labels dropped.
Matrix<double> block_diagonal_part(const Matrix<double>& m, std::span<const long long> labels);

/// Evolution under V H_G + sum_n Pi_n (H0 + lambda H1) Pi_n. The block part
/// commutes with H_G, so one decomposition serves every V.
class ZenoPropagator {
 public:
  ZenoPropagator(const ModelParams& params, const Protection& protection);

  StateVector evolve(const StateVector& psi0, double V, double t) const;
  const SpectralDecomposition<double>& block_spectrum() const { return spectrum_; }

 private:
  SpectralDecomposition<double> spectrum_;
  RealVector protection_;
};

StateVector zeno_evolution(const ModelParams& params, const Protection& protection, const StateVector& psi0,
                           double t);

/// || U(t) psi0 - U_zeno(t) psi0 || for each V (params.V is ignored).
std::vector<double> zeno_residual(const ModelParams& params, const Protection& protection, const StateVector& psi0,
                                  double t, std::span<const double> v_list);

/// Header `t,epsilon,epsilon_avg`, 17 significant digits.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

}  // namespace qlmprot

#endif  // QLMPROT_EVOLVE_HPP
