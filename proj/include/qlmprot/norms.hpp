// norms.hpp - interaction-potential decomposition of H0 + lambda H1 into
// diagonal and off-diagonal parts with respect to the protection term, the
// kappa-norms of those potentials and the resulting protection-strength
// estimates.
//
// Sites of the potential are unit cells: cell j holds matter site j and link
// (j, j+1). A hopping term thus spans two cells, a link flip one.

#ifndef QLMPROT_NORMS_HPP
#define QLMPROT_NORMS_HPP

#include "qlmprot/core.hpp"
#include "qlmprot/gauge.hpp"
#include "qlmprot/model.hpp"

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qlmprot {

enum class PotentialPart { diag, ndiag };

/// How the support of a diagonal part is recorded. `minimal` keeps the cells
/// the part acts on (the label change of a transition only involves flipped
/// qubits, so this is the support of the original term). `enlarged` adds every
/// cell touched by a G_j that overlaps the term.
enum class SupportRule { minimal, enlarged };

struct PotentialTerm {
  std::string name;
  PotentialPart part;
  std::vector<int> support;  // sorted cells, 1-based
  std::vector<int> qubits;   // qubits of `block`, first one most significant
  Matrix<double> block;      // real symmetric, 2^qubits.size() square
  double op_norm = 0.0;
};

struct PotentialDecomposition {
  int matter_sites = 0;
  std::vector<PotentialTerm> terms;

  /// Embeds every term into the full space and sums (small L only).
  Matrix<double> reconstruct() const;
  std::size_t count(PotentialPart part) const;
};

/// Splits each j-summand of H0 + lambda H1 into the entries that keep the
/// integer protection label c.g (diag) and those that change it (ndiag).
/// The sequence is used in its unnormalized integer form.
PotentialDecomposition decompose(const ModelParams& params, const ProtectionSequence& sequence,
                                 SupportRule rule = SupportRule::minimal);

/// sup_x sum_{S containing x} e^{kappa |S|} ||X_S|| over terms of the given
/// part (all terms when `part` is empty).
double kappa_norm(const PotentialDecomposition& pot, double kappa,
                  std::optional<PotentialPart> part = std::nullopt);

/// floor(x / (1 + ln x)^3) - 2 with x = V/V0; empty when 1 + ln x <= 0.
std::optional<long long> n_star(double V, double V0);

/// 64 log-spaced points in [0.01, 5].
std::vector<double> default_kappa_grid();

class EstimationFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NormEstimate {
  double kappa0 = 0.0;
  double norm_diag = 0.0;
  double norm_ndiag = 0.0;
  double V0 = 0.0;
  /// 9 pi ||H_ndiag|| / kappa0
  double v_bound = 0.0;
  /// Upper end of the first window x in (1/e, e^2) where n* >= 1, or the
  /// bound above if larger.
  double v_min = 0.0;
  /// Start of the second window x >= e^2 where n* >= 1 again.
  double v_min_asymptotic = 0.0;
  long long n_star_at_v_min = 0;
  double kappa_n_star = 0.0;  // kappa0 / (1 + ln(1 + n*)) at v_min
  std::vector<std::pair<double, double>> scan;  // (kappa, V0(kappa))
};

/// Minimizes V0 over the grid, refines once around the best point, then
/// solves for the protection thresholds. Throws EstimationFailed when no
/// grid point gives a finite V0.
NormEstimate estimate_vmin(const PotentialDecomposition& pot, std::span<const double> kappa_grid);

}  // namespace qlmprot

#endif  // QLMPROT_NORMS_HPP
