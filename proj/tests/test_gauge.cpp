#include "oracles.hpp"
#include "qlmprot/gauge.hpp"
#include "qlmprot/model.hpp"

#include <doctest.h>

#include <map>
#include <set>

using namespace qlmprot;

namespace {

// Sectors from the diagonals of explicitly built G_j matrices.
std::map<Sector, int> oracle_sectors(int L) {
  std::vector<Eigen::VectorXd> g;
  for (int j = 1; j <= L; ++j) g.push_back(oracle::gauss(L, j).diagonal().real());
  std::map<Sector, int> count;
  for (Index s = 0; s < g[0].size(); ++s) {
    Sector v;
    for (const auto& gj : g) v.push_back(static_cast<int>(std::lround(gj(s))));
    ++count[v];
  }
  return count;
}

}  // namespace

TEST_CASE("gauss values agree with the explicit generator") {
  for (int L : {2, 4}) {
    SpinBasis b(L);
    for (int j = 1; j <= L; ++j) {
      const Eigen::VectorXd diag = oracle::gauss(L, j).diagonal().real();
      for (Index s = 0; s < b.dim(); ++s) CHECK(gauss_value(b, s, j) == diag(s));
    }
  }
  CHECK_THROWS_AS(gauss_value(SpinBasis(2), 0, 3), std::invalid_argument);
}

TEST_CASE("sector table partitions the basis") {
  for (int L : {2, 4}) {
    SpinBasis b(L);
    const auto table = sector_map(b);
    const auto expect = oracle_sectors(L);
    REQUIRE(table.sectors.size() == expect.size());
    std::size_t total = 0;
    std::vector<int> seen(static_cast<std::size_t>(b.dim()), 0);
    for (std::size_t k = 0; k < table.sectors.size(); ++k) {
      CHECK(static_cast<int>(table.members[k].size()) == expect.at(table.sectors[k]));
      total += table.members[k].size();
      for (Index s : table.members[k]) {
        ++seen[static_cast<std::size_t>(s)];
        CHECK(table.sector_of(s) == table.sectors[k]);
      }
      for (int j = 1; j <= L; ++j) {
        const int v = table.sectors[k][static_cast<std::size_t>(j - 1)] * (j % 2 == 0 ? 1 : -1);
        CHECK(v >= -1);
        CHECK(v <= 2);
      }
    }
    CHECK(total == static_cast<std::size_t>(b.dim()));
    CHECK(std::all_of(seen.begin(), seen.end(), [](int n) { return n == 1; }));
    REQUIRE(table.zero_sector() >= 0);
    CHECK(table.sector_of(staggered_vacuum(b)) == Sector(static_cast<std::size_t>(L), 0));
  }
  // regression values from the enumeration above
  CHECK(sector_map(SpinBasis(2)).sectors.size() == 10);
  CHECK(sector_map(SpinBasis(2)).members[static_cast<std::size_t>(sector_map(SpinBasis(2)).zero_sector())].size() == 3);
  CHECK(sector_map(SpinBasis(4)).sectors.size() == 134);
  CHECK(sector_map(SpinBasis(4)).members[static_cast<std::size_t>(sector_map(SpinBasis(4)).zero_sector())].size() == 7);
  CHECK_THROWS_AS(sector_map(SpinBasis(9)), ResourceError);
}

TEST_CASE("adjacency rule holds on every realized sector") {
  for (int L : {2, 4, 6}) {
    const auto table = sector_map(SpinBasis(L));
    for (const auto& g : table.sectors) CHECK(obeys_adjacency_rule(g));
  }
  CHECK_FALSE(obeys_adjacency_rule(Sector{-2, -1, 0, 0}));  // corrected values (2, -1)
  CHECK(obeys_adjacency_rule(Sector{0, 0, 0, 0}));
}

TEST_CASE("projectors are complete and orthogonal") {
  const auto table = sector_map(SpinBasis(2));
  RealVector sum = RealVector::Zero(16);
  for (std::size_t k = 0; k < table.sectors.size(); ++k) {
    const auto p = table.projector(static_cast<int>(k));
    CHECK(max_abs(p.cwiseProduct(p) - p) == 0.0);
    sum += p;
    for (std::size_t l = k + 1; l < table.sectors.size(); ++l)
      CHECK(p.cwiseProduct(table.projector(static_cast<int>(l))).sum() == 0.0);
  }
  CHECK(max_abs(sum - RealVector::Ones(16)) == 0.0);
}

TEST_CASE("protection sequences normalize by the largest magnitude") {
  const auto c = ProtectionSequence::paper_compliant_L6();
  CHECK(c.numerators() == std::vector<long long>{-115, 116, -118, 122, -130, 146});
  CHECK(c.denominator() == 146);
  CHECK(c.coefficient(5) == 1.0);
  CHECK(c.mean_abs() == doctest::Approx(747.0 / 876.0));
  const auto n = ProtectionSequence::paper_noncompliant_L6();
  CHECK(n.numerators() == std::vector<long long>{-115, 116, -118, 130, -122, 145});
  CHECK(n.denominator() == 145);
  CHECK(ProtectionSequence::from_integers({2, -4, 1}) == ProtectionSequence({2, -4, 1}, 4));
  CHECK(ProtectionSequence::staggered_unit(4).numerators() == std::vector<long long>{-1, 1, -1, 1});
  CHECK_THROWS_AS(ProtectionSequence({1, 2}, 3), std::invalid_argument);
  CHECK_THROWS_AS(ProtectionSequence({}, 1), std::invalid_argument);
}

TEST_CASE("compliance of the reference sequences at L = 6") {
  const auto table = sector_map(SpinBasis(6));
  CHECK(table.sectors.size() == 1582);

  const auto good = check_compliance(ProtectionSequence::paper_compliant_L6(), table);
  CHECK(good.compliant);
  CHECK(good.gap_numerator == 1);
  CHECK(good.gap_D == 1.0 / 146.0);
  CHECK_FALSE(good.witness.has_value());

  const auto bad = check_compliance(ProtectionSequence::paper_noncompliant_L6(), table);
  CHECK_FALSE(bad.compliant);
  CHECK(bad.gap_D == 0.0);
  REQUIRE(bad.witness.has_value());
  CHECK(ProtectionSequence::paper_noncompliant_L6().label(*bad.witness) == 0);
  CHECK(table.find(*bad.witness) >= 0);

  for (const auto& c : {ProtectionSequence::uniform_unit(6), ProtectionSequence::staggered_unit(6)}) {
    const auto r = check_compliance(c, table);
    CHECK_FALSE(r.compliant);
    REQUIRE(r.witness.has_value());
    CHECK(c.label(*r.witness) == 0);
    CHECK(*r.witness != Sector(6, 0));
  }
}

TEST_CASE("compliance properties against a brute-force label scan") {
  const auto table = sector_map(SpinBasis(4));
  for (const auto& c : {ProtectionSequence({-1, 3, -2, 4}, 4), ProtectionSequence({-1, 5, -4, 7}, 7),
                        ProtectionSequence::staggered_unit(4), ProtectionSequence({1, 2, 3, 4}, 4)}) {
    const auto r = check_compliance(c, table);
    long long min_nonzero = -1;
    bool zero_only_at_origin = true;
    std::set<long long> labels;
    bool distinct = true;
    for (const auto& g : table.sectors) {
      long long dot = 0;
      for (std::size_t j = 0; j < g.size(); ++j) dot += c.numerators()[j] * g[j];
      if (!labels.insert(dot).second) distinct = false;
      const bool origin = std::all_of(g.begin(), g.end(), [](int x) { return x == 0; });
      if (origin) continue;
      if (dot == 0) zero_only_at_origin = false;
      const long long a = dot < 0 ? -dot : dot;
      if (a != 0 && (min_nonzero < 0 || a < min_nonzero)) min_nonzero = a;
    }
    CHECK(r.compliant == zero_only_at_origin);
    CHECK(r.compliant == (r.gap_D > 0));
    if (r.compliant) CHECK(r.gap_numerator == min_nonzero);
    CHECK(r.fully_nondegenerate == distinct);
    if (r.fully_nondegenerate) CHECK(r.compliant);
  }
}

TEST_CASE("compliant sector structure: zero label means g = 0") {
  const SpinBasis b(4);
  const auto table = sector_map(b);
  const auto c = find_compliant_sequence(table, 20);
  REQUIRE(c.has_value());
  const auto labels = protection_labels(*c, table);
  const auto& zero = table.members[static_cast<std::size_t>(table.zero_sector())];
  std::set<Index> zero_set(zero.begin(), zero.end());
  for (Index s = 0; s < b.dim(); ++s) CHECK((labels[static_cast<std::size_t>(s)] == 0) == (zero_set.count(s) == 1));
}

TEST_CASE("sequence search") {
  const auto l2 = find_compliant_sequence(2, 10);
  REQUIRE(l2.has_value());
  CHECK(check_compliance(*l2, sector_map(SpinBasis(2))).compliant);
  CHECK_FALSE(find_compliant_sequence(2, 0).has_value());

  const auto l4 = find_compliant_sequence(4, 20);
  REQUIRE(l4.has_value());
  CHECK(check_compliance(*l4, sector_map(SpinBasis(4))).compliant);
  for (int j = 0; j < 4; ++j) CHECK((l4->numerators()[static_cast<std::size_t>(j)] > 0) == (j % 2 == 1));
  // deterministic
  CHECK(*find_compliant_sequence(4, 20) == *l4);
}

TEST_CASE("superlattice sequence") {
  const auto flat = build_superlattice_sequence(6, 0.0, 2.0, 0.5);
  for (int j = 1; j <= 6; ++j)
    CHECK(flat.coefficients[static_cast<std::size_t>(j - 1)] == doctest::Approx((j % 2 == 0 ? 1.0 : -1.0) * 1.5));
  CHECK(flat.scale == doctest::Approx(1.5));

  const auto s = build_superlattice_sequence(6, 0.57, 1.3, 0.21);
  CHECK(s.coefficients[0] == doctest::Approx(-(0.57 + 1.3 - 0.21 + 0.285)));
  CHECK(s.coefficients[3] == doctest::Approx(4 * 0.57 + 1.3 - 0.21 + 0.285));
  const auto table = sector_map(SpinBasis(6));
  const auto deg = degenerate_sectors(s, table);
  REQUIRE_FALSE(deg.empty());  // generic parameters leave degenerate sectors
  for (const auto& g : deg) CHECK(std::abs(s.dot(g)) <= 1e-9 * s.scale);
  for (std::size_t i = 1; i < deg.size(); ++i) {
    auto norm2 = [](const Sector& g) {
      int n = 0;
      for (int x : g) n += x * x;
      return n;
    };
    CHECK(norm2(deg[i - 1]) <= norm2(deg[i]));
  }
  CHECK(minimal_degenerate_sector(s, table) == deg.front());
}

TEST_CASE("degeneracy split diagnostic") {
  const SpinBasis b4(4);
  const auto t4 = sector_map(b4);
  CHECK(degeneracy_split_check(ProtectionSequence::staggered_unit(4), build_h1(ErrorKind::local, b4), t4));
  CHECK_FALSE(degeneracy_split_check(ProtectionSequence::uniform_unit(4), build_h1(ErrorKind::extreme, b4), t4));
  // base-5 digits: every allowed sector gets its own label
  const ProtectionSequence distinct({-1, 5, -25, 125}, 125);
  REQUIRE(check_compliance(distinct, t4).fully_nondegenerate);
  CHECK(degeneracy_split_check(distinct, build_h1(ErrorKind::extreme, b4), t4));

  const SpinBasis b6(6);
  CHECK(degeneracy_split_check(ProtectionSequence::staggered_unit(6), build_h1(ErrorKind::local, b6), sector_map(b6)));
}
