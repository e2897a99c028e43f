#include "qlmprot/gauge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numeric>
#include <sstream>

namespace qlmprot {

namespace {

int stagger(int j) { return (j % 2 == 0) ? 1 : -1; }

long long norm2(const Sector& g) {
  long long s = 0;
  for (int x : g) s += static_cast<long long>(x) * x;
  return s;
}

bool is_zero(const Sector& g) {
  return std::all_of(g.begin(), g.end(), [](int x) { return x == 0; });
}

}  // namespace

int gauss_value(const SpinBasis& basis, Index state, int j) {
  if (j < 1 || j > basis.matter_sites()) throw std::invalid_argument("gauss_value: site index out of range");
  const int sum = basis.z(state, basis.matter_qubit(j)) + basis.z(state, basis.link_qubit(j - 1)) +
                  basis.z(state, basis.link_qubit(j)) + 1;
  // sum is always even: three +-1 terms plus one
  return stagger(j) * sum / 2;
}

Sector sector_of_state(const SpinBasis& basis, Index state) {
  Sector g(static_cast<std::size_t>(basis.matter_sites()));
  for (int j = 1; j <= basis.matter_sites(); ++j) g[static_cast<std::size_t>(j - 1)] = gauss_value(basis, state, j);
  return g;
}

bool obeys_adjacency_rule(const Sector& g) {
  const int l = static_cast<int>(g.size());
  if (l < 2) return true;
  for (int i = 0; i < l; ++i) {
    const int next = (i + 1) % l;
    const int a = stagger(i + 1) * g[static_cast<std::size_t>(i)];
    const int b = stagger(next + 1) * g[static_cast<std::size_t>(next)];
    if ((a == 2 && b == -1) || (a == -1 && b == 2)) return false;
  }
  return true;
}

int GaugeSectorTable::find(const Sector& g) const {
  const auto it = std::lower_bound(sectors.begin(), sectors.end(), g);
  if (it == sectors.end() || *it != g) return -1;
  return static_cast<int>(it - sectors.begin());
}

int GaugeSectorTable::zero_sector() const {
  return find(Sector(static_cast<std::size_t>(basis.matter_sites()), 0));
}

RealVector GaugeSectorTable::projector(int sector_id) const {
  RealVector diag = RealVector::Zero(basis.dim());
  for (Index s : members.at(static_cast<std::size_t>(sector_id))) diag(s) = 1.0;
  return diag;
}

GaugeSectorTable sector_map(const SpinBasis& basis) {
  if (basis.matter_sites() > 8) throw ResourceError("sector_map: enumeration limited to L <= 8");
  GaugeSectorTable table;
  table.basis = basis;
  std::map<Sector, std::vector<Index>> grouped;
  for (Index s = 0; s < basis.dim(); ++s) grouped[sector_of_state(basis, s)].push_back(s);
  table.sector_index.assign(static_cast<std::size_t>(basis.dim()), -1);
  for (auto& [g, states] : grouped) {
    const int id = static_cast<int>(table.sectors.size());
    for (Index s : states) table.sector_index[static_cast<std::size_t>(s)] = id;
    table.sectors.push_back(g);
    table.members.push_back(std::move(states));
  }
  return table;
}

ProtectionSequence::ProtectionSequence(std::vector<long long> numerators, long long denominator)
    : numerators_(std::move(numerators)), denominator_(denominator) {
  if (numerators_.empty()) throw std::invalid_argument("ProtectionSequence: empty sequence");
  if (denominator_ <= 0) throw std::invalid_argument("ProtectionSequence: denominator must be positive");
  long long largest = 0;
  for (long long n : numerators_) largest = std::max(largest, std::llabs(n));
  if (largest != denominator_)
    throw std::invalid_argument("ProtectionSequence: max |numerator| must equal the denominator");
}

ProtectionSequence ProtectionSequence::from_integers(std::vector<long long> raw) {
  long long largest = 0;
  for (long long n : raw) largest = std::max(largest, std::llabs(n));
  if (largest == 0) throw std::invalid_argument("ProtectionSequence: all coefficients are zero");
  return ProtectionSequence(std::move(raw), largest);
}

ProtectionSequence ProtectionSequence::paper_compliant_L6() {
  return ProtectionSequence({-115, 116, -118, 122, -130, 146}, 146);
}

ProtectionSequence ProtectionSequence::paper_noncompliant_L6() {
  return ProtectionSequence({-115, 116, -118, 130, -122, 145}, 145);
}

ProtectionSequence ProtectionSequence::staggered_unit(int matter_sites) {
  std::vector<long long> n(static_cast<std::size_t>(matter_sites));
  for (int j = 1; j <= matter_sites; ++j) n[static_cast<std::size_t>(j - 1)] = stagger(j);
  return ProtectionSequence(std::move(n), 1);
}

ProtectionSequence ProtectionSequence::uniform_unit(int matter_sites) {
  return ProtectionSequence(std::vector<long long>(static_cast<std::size_t>(matter_sites), 1), 1);
}

double ProtectionSequence::coefficient(int index) const {
  return static_cast<double>(numerators_.at(static_cast<std::size_t>(index))) / static_cast<double>(denominator_);
}

std::vector<double> ProtectionSequence::coefficients() const {
  std::vector<double> c(numerators_.size());
  for (int i = 0; i < size(); ++i) c[static_cast<std::size_t>(i)] = coefficient(i);
  return c;
}

double ProtectionSequence::mean_abs() const {
  long long total = 0;
  for (long long n : numerators_) total += std::llabs(n);
  return static_cast<double>(total) / (static_cast<double>(denominator_) * size());
}

long long ProtectionSequence::label(const Sector& g) const {
  if (static_cast<int>(g.size()) != size()) throw std::invalid_argument("ProtectionSequence: sector length mismatch");
  long long s = 0;
  for (std::size_t i = 0; i < g.size(); ++i) s += numerators_[i] * g[i];
  return s;
}

std::string ProtectionSequence::to_string() const {
  std::ostringstream out;
  out << '{';
  for (std::size_t i = 0; i < numerators_.size(); ++i) out << (i ? "," : "") << numerators_[i];
  out << "}/" << denominator_;
  return out.str();
}

ComplianceReport check_compliance(const ProtectionSequence& c, const GaugeSectorTable& table) {
  if (c.size() != table.basis.matter_sites())
    throw std::invalid_argument("check_compliance: sequence length does not match the lattice");
  ComplianceReport report;
  std::vector<long long> labels;
  labels.reserve(table.sectors.size());
  long long gap = 0;
  for (const Sector& g : table.sectors) {
    const long long n = c.label(g);
    labels.push_back(n);
    if (is_zero(g)) continue;
    if (n == 0) {
      if (!report.witness || norm2(g) < norm2(*report.witness)) report.witness = g;
    } else if (gap == 0 || std::llabs(n) < gap) {
      gap = std::llabs(n);
    }
  }
  report.compliant = !report.witness.has_value();
  report.gap_numerator = report.compliant ? gap : 0;
  report.gap_D = static_cast<double>(report.gap_numerator) / static_cast<double>(c.denominator());
  std::sort(labels.begin(), labels.end());
  report.fully_nondegenerate = std::adjacent_find(labels.begin(), labels.end()) == labels.end();
  return report;
}

std::optional<ProtectionSequence> find_compliant_sequence(const GaugeSectorTable& table, long long max_denominator) {
  const int l = table.basis.matter_sites();
  if (max_denominator < 1) return std::nullopt;

  // Nonzero sectors bucketed by their last nonzero site, so a partial
  // assignment a_1..a_k can be rejected as soon as a sector supported on the
  // first k sites sums to zero.
  std::vector<std::vector<const Sector*>> by_last(static_cast<std::size_t>(l));
  for (const Sector& g : table.sectors) {
    int last = -1;
    for (int i = 0; i < l; ++i)
      if (g[static_cast<std::size_t>(i)] != 0) last = i;
    if (last >= 0) by_last[static_cast<std::size_t>(last)].push_back(&g);
  }

  std::vector<long long> numerators(static_cast<std::size_t>(l), 0);
  auto prefix_ok = [&](int depth) {
    for (const Sector* g : by_last[static_cast<std::size_t>(depth)]) {
      long long s = 0;
      for (int i = 0; i <= depth; ++i) s += numerators[static_cast<std::size_t>(i)] * (*g)[static_cast<std::size_t>(i)];
      if (s == 0) return false;
    }
    return true;
  };

  for (long long d = 1; d <= max_denominator; ++d) {
    // depth-first, lexicographic in (a_1, ..., a_L)
    auto search = [&](auto&& self, int depth, bool reached_max) -> bool {
      if (depth == l) return reached_max;
      for (long long a = 1; a <= d; ++a) {
        numerators[static_cast<std::size_t>(depth)] = stagger(depth + 1) * a;
        if (!prefix_ok(depth)) continue;
        if (self(self, depth + 1, reached_max || a == d)) return true;
      }
      return false;
    };
    if (search(search, 0, false)) return ProtectionSequence(numerators, d);
  }
  return std::nullopt;
}

std::optional<ProtectionSequence> find_compliant_sequence(int matter_sites, long long max_denominator) {
  return find_compliant_sequence(sector_map(SpinBasis(matter_sites)), max_denominator);
}

std::vector<double> SuperlatticeSequence::normalized() const {
  std::vector<double> out = coefficients;
  if (scale > 0)
    for (double& c : out) c /= scale;
  return out;
}

double SuperlatticeSequence::dot(const Sector& g) const {
  if (g.size() != coefficients.size()) throw std::invalid_argument("SuperlatticeSequence: sector length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += coefficients[i] * g[i];
  return s;
}

SuperlatticeSequence build_superlattice_sequence(int matter_sites, double tilt, double interaction, double offset) {
  if (matter_sites < 2) throw std::invalid_argument("build_superlattice_sequence: need L >= 2");
  SuperlatticeSequence seq;
  seq.coefficients.resize(static_cast<std::size_t>(matter_sites));
  for (int j = 1; j <= matter_sites; ++j) {
    const double c = stagger(j) * (tilt * j + (interaction - offset + tilt / 2.0));
    seq.coefficients[static_cast<std::size_t>(j - 1)] = c;
    seq.scale = std::max(seq.scale, std::abs(c));
  }
  return seq;
}

std::vector<Sector> degenerate_sectors(const SuperlatticeSequence& c, const GaugeSectorTable& table,
                                       double tolerance) {
  if (static_cast<int>(c.coefficients.size()) != table.basis.matter_sites())
    throw std::invalid_argument("degenerate_sectors: sequence length does not match the lattice");
  std::vector<Sector> out;
  const double threshold = tolerance * std::max(c.scale, 1.0);
  for (const Sector& g : table.sectors)
    if (!is_zero(g) && std::abs(c.dot(g)) <= threshold) out.push_back(g);
  std::stable_sort(out.begin(), out.end(), [](const Sector& a, const Sector& b) { return norm2(a) < norm2(b); });
  return out;
}

std::optional<Sector> minimal_degenerate_sector(const SuperlatticeSequence& c, const GaugeSectorTable& table,
                                                double tolerance) {
  auto all = degenerate_sectors(c, table, tolerance);
  if (all.empty()) return std::nullopt;
  return all.front();
}

std::vector<long long> protection_labels(const ProtectionSequence& c, const GaugeSectorTable& table) {
  if (c.size() != table.basis.matter_sites())
    throw std::invalid_argument("protection_labels: sequence length does not match the lattice");
  std::vector<long long> per_sector(table.sectors.size());
  for (std::size_t k = 0; k < table.sectors.size(); ++k) per_sector[k] = c.label(table.sectors[k]);
  std::vector<long long> labels(table.sector_index.size());
  for (std::size_t s = 0; s < labels.size(); ++s) labels[s] = per_sector[static_cast<std::size_t>(table.sector_index[s])];
  return labels;
}

bool degeneracy_split_check(const ProtectionSequence& c, const RealOperator& h1, const GaugeSectorTable& table,
                            double threshold) {
  if (h1.dim() != table.basis.dim()) throw std::invalid_argument("degeneracy_split_check: dimension mismatch");
  const auto labels = protection_labels(c, table);
  const auto& m = h1.matrix();
  for (Index col = 0; col < m.cols(); ++col) {
    const auto sc = static_cast<std::size_t>(col);
    for (Index row = 0; row < m.rows(); ++row) {
      const auto sr = static_cast<std::size_t>(row);
      if (table.sector_index[sr] == table.sector_index[sc] || labels[sr] != labels[sc]) continue;
      if (std::abs(m(row, col)) >= threshold) return false;
    }
  }
  return true;
}

}  // namespace qlmprot
