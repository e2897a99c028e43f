// gauge.hpp - gauge-sector combinatorics: classifying basis states by their
// Gauss-law eigenvalues, protection coefficient sequences, compliance and the
// protection gap, and the degeneracy diagnostics used for Zeno protection.

#ifndef QLMPROT_GAUGE_HPP
#define QLMPROT_GAUGE_HPP

#include "qlmprot/core.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qlmprot {

/// Integer vector g of Gauss-law eigenvalues, one entry per matter site.
using Sector = std::vector<int>;

/// Eigenvalue of G_j = (-1)^j/2 (sz_j + tz_{j-1,j} + tz_{j,j+1} + 1) on a
/// z-basis state. Exact integer arithmetic.
int gauss_value(const SpinBasis& basis, Index state, int j);

Sector sector_of_state(const SpinBasis& basis, Index state);

/// Neighboring staggering-corrected values (-1)^j g_j never form (2,-1) or
/// (-1,2), including the periodic wrap.
bool obeys_adjacency_rule(const Sector& g);

struct GaugeSectorTable {
  SpinBasis basis{2};
  std::vector<int> sector_index;             // basis state -> sector id
  std::vector<Sector> sectors;               // sorted lexicographically
  std::vector<std::vector<Index>> members;   // sector id -> basis states

  int find(const Sector& g) const;           // -1 when absent
  int zero_sector() const;
  const Sector& sector_of(Index state) const { return sectors[static_cast<std::size_t>(sector_index[static_cast<std::size_t>(state)])]; }
  /// 0/1 diagonal of the projector P_g.
  RealVector projector(int sector_id) const;
};

/// Enumerates all 4^L basis states. Throws ResourceError for L > 8.
GaugeSectorTable sector_map(const SpinBasis& basis);

/// Integer protection coefficients c_j = numerators[j] / denominator with
/// max_j |numerators[j]| == denominator.
class ProtectionSequence {
 public:
  ProtectionSequence(std::vector<long long> numerators, long long denominator);
  /// Normalizes by the largest magnitude.
  static ProtectionSequence from_integers(std::vector<long long> raw);

  static ProtectionSequence paper_compliant_L6();
  static ProtectionSequence paper_noncompliant_L6();
  /// c_j = (-1)^j
  static ProtectionSequence staggered_unit(int matter_sites);
  /// c_j = 1
  static ProtectionSequence uniform_unit(int matter_sites);

  int size() const { return static_cast<int>(numerators_.size()); }
  const std::vector<long long>& numerators() const { return numerators_; }
  long long denominator() const { return denominator_; }
  double coefficient(int index) const;  // 0-based
  std::vector<double> coefficients() const;
  /// Spatial mean of |c_j|.
  double mean_abs() const;
  /// Sum_j numerators_j g_j, i.e. denominator * (c . g).
  long long label(const Sector& g) const;
  std::string to_string() const;

  bool operator==(const ProtectionSequence&) const = default;

 private:
  std::vector<long long> numerators_;
  long long denominator_;
};

struct ComplianceReport {
  bool compliant = false;
  double gap_D = 0.0;                 // min over allowed g != 0 of |c . g|
  long long gap_numerator = 0;        // gap_D * denominator, exact
  bool fully_nondegenerate = false;   // c . g1 != c . g2 for all allowed g1 != g2
  std::optional<Sector> witness;      // a nonzero sector with c . g = 0
};

ComplianceReport check_compliance(const ProtectionSequence& c, const GaugeSectorTable& table);

/// Lexicographic search over the staggered ansatz c_j = (-1)^j a_j with
/// 1 <= a_j <= d, for d = 1, 2, ..., max_denominator. Returns the first
/// compliant sequence, or nullopt when none exists within the bound.
std::optional<ProtectionSequence> find_compliant_sequence(const GaugeSectorTable& table, long long max_denominator);
std::optional<ProtectionSequence> find_compliant_sequence(int matter_sites, long long max_denominator);

/// Real coefficients c_j = (-1)^j [Delta j + (U - delta + Delta/2)], kept in
/// physical units; `scale` is max_j |c_j|.
struct SuperlatticeSequence {
  std::vector<double> coefficients;
  double scale = 0.0;

  std::vector<double> normalized() const;
  double dot(const Sector& g) const;
};

SuperlatticeSequence build_superlattice_sequence(int matter_sites, double tilt, double interaction, double offset);

/// Allowed sectors g != 0 with |c . g| <= tolerance * scale, ordered by
/// |g|^2 and then lexicographically.
std::vector<Sector> degenerate_sectors(const SuperlatticeSequence& c, const GaugeSectorTable& table,
                                       double tolerance = 1e-9);
std::optional<Sector> minimal_degenerate_sector(const SuperlatticeSequence& c, const GaugeSectorTable& table,
                                                double tolerance = 1e-9);

/// True iff every block P_g1 H1 P_g2 between distinct sectors sharing the same
/// protection eigenvalue c . g vanishes (max entry < threshold).
bool degeneracy_split_check(const ProtectionSequence& c, const RealOperator& h1, const GaugeSectorTable& table,
                            double threshold = 1e-12);

/// Per-basis-state protection label denominator * (c . g(state)).
std::vector<long long> protection_labels(const ProtectionSequence& c, const GaugeSectorTable& table);

}  // namespace qlmprot

#endif  // QLMPROT_GAUGE_HPP
