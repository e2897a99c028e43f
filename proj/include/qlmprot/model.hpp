// model.hpp - Hamiltonians of the U(1) quantum link model with gauge-breaking
// errors and single-body (linear) or two-body (quadratic) energy penalties.

#ifndef QLMPROT_MODEL_HPP
#define QLMPROT_MODEL_HPP

#include "qlmprot/core.hpp"
#include "qlmprot/gauge.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace qlmprot {

enum class ErrorKind { none, local, extreme };

std::string_view to_string(ErrorKind kind);
ErrorKind parse_error_kind(std::string_view name);

/// All couplings in units of J, which is fixed to 1.
struct ModelParams {
  int matter_sites = 6;
  double J = 1.0;
  double mu = 0.5;
  double lambda = 0.05;
  double V = 0.0;
  ErrorKind error = ErrorKind::extreme;

  /// Throws std::invalid_argument unless L >= 2 is even and J == 1.
  void validate() const;
  SpinBasis basis() const { return SpinBasis(matter_sites); }
};

class Protection {
 public:
  enum class Kind { none, linear, quadratic };

  static Protection none() { return Protection(Kind::none, std::nullopt); }
  static Protection linear(ProtectionSequence c) { return Protection(Kind::linear, std::move(c)); }
  static Protection quadratic() { return Protection(Kind::quadratic, std::nullopt); }

  Kind kind() const { return kind_; }
  const ProtectionSequence& sequence() const;
  std::string describe() const;

 private:
  Protection(Kind kind, std::optional<ProtectionSequence> c) : kind_(kind), sequence_(std::move(c)) {}
  Kind kind_;
  std::optional<ProtectionSequence> sequence_;
};

/// J sum_j (s^-_j t^+_{j,j+1} s^-_{j+1} + h.c.)
RealOperator build_hopping(const SpinBasis& basis, double J = 1.0);
/// (mu/2) sum_j s^z_j
RealOperator build_mass(const SpinBasis& basis, double mu);
RealOperator build_h0(const ModelParams& params);

/// Diagonal G_j for 1 <= j <= L.
RealOperator build_gauss(int j, const SpinBasis& basis);

/// local:   sum_j (t^x_{j,j+1} + s^+_j s^+_{j+1} + s^-_j s^-_{j+1})
/// extreme: the local terms plus sum_{xi=+-1} prod_j (1 + xi s^x_j)(1 + xi t^x_{j,j+1}),
///          the product built as the rank-2 form 2^{2L} (P_+ + P_-).
RealOperator build_h1(ErrorKind kind, const SpinBasis& basis);

/// sum_j c_j G_j (linear) or sum_j G_j^2 (quadratic), without the factor V.
RealOperator build_protection(const Protection& protection, const SpinBasis& basis);
RealVector protection_diagonal(const Protection& protection, const SpinBasis& basis);

/// H0 + lambda H1 + V * protection.
RealOperator assemble(const ModelParams& params, const Protection& protection);

/// H(V) = unprotected + V diag(protection), so scans over V share one build.
struct ProtectedHamiltonian {
  RealOperator unprotected;  // H0 + lambda H1
  RealVector protection;

  Matrix<double> matrix_at(double V) const;
  RealOperator at(double V) const;
};

ProtectedHamiltonian prepare_hamiltonian(const ModelParams& params, const Protection& protection);

/// Which links of the staggered vacuum point down. Both choices lie in g = 0.
enum class LinkConvention { odd_links_down, even_links_down };

/// Basis state with the given matter sites occupied (s^z = +1, all others
/// empty with s^z = -1) and links fixed by G_j = 0. The convention picks the
/// orientation of link (L, 1) when both orientations are consistent.
/// Throws std::invalid_argument when no link configuration gives g = 0.
Index gauge_invariant_state(const SpinBasis& basis, std::span<const int> occupied_sites,
                            LinkConvention convention = LinkConvention::odd_links_down);

/// Empty matter sites, odd links down and even links up (default convention).
Index staggered_vacuum(const SpinBasis& basis, LinkConvention convention = LinkConvention::odd_links_down);

/// Particles on matter sites 1 and 4, links between them down-up-down.
Index two_particle_14(const SpinBasis& basis);

/// '0' = up, '1' = down, qubit 0 first; length 2L.
Index parse_bitstring(const SpinBasis& basis, std::string_view bits);
std::string format_bitstring(const SpinBasis& basis, Index state);

}  // namespace qlmprot

#endif  // QLMPROT_MODEL_HPP
