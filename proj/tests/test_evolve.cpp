#include "oracles.hpp"
#include "qlmprot/evolve.hpp"
#include "qlmprot/gauge.hpp"

#include <doctest.h>

#include <sstream>

using namespace qlmprot;

namespace {

ModelParams small(int L, ErrorKind e, double lambda, double V) {
  ModelParams p;
  p.matter_sites = L;
  p.error = e;
  p.lambda = lambda;
  p.V = V;
  return p;
}

// eps(t) straight from the Taylor-exponential propagator.
double oracle_epsilon(const Matrix<double>& h, const RealVector& obs, const StateVector& psi0, double t) {
  const StateVector psi = oracle::expm(Complex(0, -t) * h.cast<Complex>()) * psi0;
  return (psi.cwiseAbs2().array() * obs.array()).sum();
}

}  // namespace

TEST_CASE("violation observable") {
  const SpinBasis b(6);
  const auto obs = violation_diagonal(b);
  const auto vac = staggered_vacuum(b);
  CHECK(gauge_violation(basis_state(b, vac), obs) == 0.0);

  // one flipped link changes the two adjacent generators by one unit each
  const Index flipped = static_cast<Index>(static_cast<std::uint64_t>(vac) ^ b.mask(b.link_qubit(3)));
  CHECK(gauge_violation(basis_state(b, flipped), obs) == doctest::Approx(1.0 / 3.0));

  // uniform superposition: basis average of (1/L) sum g^2 from the sector table
  const SpinBasis b4(4);
  const auto table = sector_map(b4);
  double avg = 0.0;
  for (Index s = 0; s < b4.dim(); ++s) {
    double g2 = 0.0;
    for (int x : table.sector_of(s)) g2 += x * x;
    avg += g2 / 4.0;
  }
  avg /= double(b4.dim());
  const StateVector uniform = StateVector::Constant(b4.dim(), 1.0 / std::sqrt(double(b4.dim())));
  CHECK(gauge_violation(uniform, violation_diagonal(b4)) == doctest::Approx(avg).epsilon(1e-13));

  std::vector<RealOperator> gs;
  for (int j = 1; j <= 4; ++j) gs.push_back(build_gauss(j, b4));
  CHECK(gauge_violation(uniform, gs) == doctest::Approx(avg).epsilon(1e-13));
}

TEST_CASE("time grids") {
  const auto g = default_time_grid();
  CHECK(g.size() == 200);
  CHECK(g.front() == doctest::Approx(1e-2));
  CHECK(g.back() == doctest::Approx(1e10));
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
  CHECK(parse_average_scheme("trapezoid") == AverageScheme::trapezoid);
}

TEST_CASE("trajectory samples match a Taylor-propagator oracle") {
  const auto p = small(2, ErrorKind::local, 0.3, 1.5);
  const auto prot = Protection::linear(ProtectionSequence::staggered_unit(2));
  const SpinBasis b(2);
  const StateVector psi0 = basis_state(b, staggered_vacuum(b));
  const std::vector<double> times{0.1, 0.7, 2.0, 5.0};
  const auto tr = run_trajectory(p, prot, psi0, times);
  const auto h = assemble(p, prot).matrix();
  const auto obs = violation_diagonal(b);
  for (std::size_t i = 0; i < times.size(); ++i)
    CHECK(tr.epsilon[i] == doctest::Approx(oracle_epsilon(h, obs, psi0, times[i])).epsilon(1e-9));
}

TEST_CASE("exact running average matches quadrature") {
  const auto p = small(2, ErrorKind::extreme, 0.2, 0.8);
  const auto prot = Protection::linear(ProtectionSequence::staggered_unit(2));
  const SpinBasis b(2);
  const StateVector psi0 = basis_state(b, staggered_vacuum(b));
  const auto spectrum = eigh(assemble(p, prot));
  const auto obs = violation_diagonal(b);
  RunningAverage<double> avg(spectrum, psi0, obs);

  auto eps = [&](double s) { return gauge_violation(evolve_with_spectrum(spectrum, psi0, s), obs); };
  for (double t : {0.5, 3.0, 17.0}) {
    const double ref = oracle::simpson(eps, 0.0, t, 4000) / t;
    CHECK(avg.at(t) == doctest::Approx(ref).epsilon(1e-8));
  }
  // the trapezoid option converges to the same value on a fine grid
  std::vector<double> fine;
  for (int i = 1; i <= 4000; ++i) fine.push_back(3.0 * i / 4000.0);
  const auto tr = run_trajectory(spectrum, obs, psi0, fine, AverageScheme::trapezoid);
  CHECK(tr.epsilon_avg.back() == doctest::Approx(avg.at(3.0)).epsilon(1e-5));
}

TEST_CASE("running average with degenerate levels") {
  // lambda = 0 leaves exact degeneracies between sectors; the near-pair path handles them
  const auto p = small(2, ErrorKind::local, 0.0, 0.0);
  const SpinBasis b(2);
  const auto spectrum = eigh(assemble(p, Protection::none()));
  CHECK(spectrum.min_level_spacing() < 1e-12);
  StateVector psi0 = (basis_state(b, 0) + basis_state(b, 5) + basis_state(b, staggered_vacuum(b))).normalized();
  const auto obs = violation_diagonal(b);
  RunningAverage<double> avg(spectrum, psi0, obs);
  CHECK(avg.near_pairs() > 0);
  auto eps = [&](double s) { return gauge_violation(evolve_with_spectrum(spectrum, psi0, s), obs); };
  CHECK(avg.at(4.0) == doctest::Approx(oracle::simpson(eps, 0.0, 4.0, 4000) / 4.0).epsilon(1e-8));
}

TEST_CASE("trajectory invariants") {
  const auto p = small(4, ErrorKind::extreme, 0.05, 5.0);
  const SpinBasis b(4);
  const StateVector psi0 = basis_state(b, staggered_vacuum(b));
  const auto times = default_time_grid();
  const auto tr = run_trajectory(p, Protection::linear(ProtectionSequence({-1, 5, -4, 7}, 7)), psi0, times);
  CHECK(tr.max_norm_error < 1e-9);
  REQUIRE(tr.epsilon.size() == times.size());
  double lo = 0.0, hi = 0.0;  // eps(0) = 0
  for (std::size_t i = 0; i < times.size(); ++i) {
    CHECK(tr.epsilon[i] >= 0.0);
    CHECK(tr.epsilon[i] <= 4.0);
    hi = std::max(hi, tr.epsilon[i]);
    lo = std::min(lo, tr.epsilon[i]);
    CHECK(tr.epsilon_avg[i] >= lo - 1e-12);
    CHECK(tr.epsilon_avg[i] <= hi + 1e-12);
  }
  CHECK_THROWS_AS(run_trajectory(p, Protection::none(), 2.0 * psi0, times), std::invalid_argument);
  const std::vector<double> bad{1.0, std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS(run_trajectory(p, Protection::none(), psi0, bad), std::invalid_argument);
}

TEST_CASE("lambda = 0 conserves gauge invariance") {
  const auto p = small(4, ErrorKind::local, 0.0, 3.0);
  const SpinBasis b(4);
  const StateVector psi0 = basis_state(b, staggered_vacuum(b));
  const auto tr = run_trajectory(p, Protection::quadratic(), psi0, default_time_grid());
  for (double e : tr.epsilon) CHECK(e < 1e-10);
  CHECK(tr.max_norm_error < 1e-9);
  for (auto mode : {InfiniteTimeMode::sample_at_1e10, InfiniteTimeMode::diagonal_ensemble})
    CHECK(infinite_time_violation(p, Protection::quadratic(), psi0, mode).value < 1e-10);
}

TEST_CASE("diagonal ensemble agrees with the long-time average") {
  const SpinBasis b(4);
  const StateVector psi0 = basis_state(b, staggered_vacuum(b));
  const auto prot = Protection::linear(ProtectionSequence({-1, 5, -4, 7}, 7));
  for (double V : {2.0, 20.0}) {
    const auto p = small(4, ErrorKind::local, 0.05, V);
    const auto a = infinite_time_violation(p, prot, psi0, InfiniteTimeMode::sample_at_1e10);
    const auto d = infinite_time_violation(p, prot, psi0, InfiniteTimeMode::diagonal_ensemble);
    if (!d.approximate) CHECK(std::abs(a.value - d.value) <= 0.05 * d.value);
    CHECK(d.min_level_spacing >= 0.0);
  }
  // exact degeneracy is flagged
  const auto p0 = small(4, ErrorKind::local, 0.0, 0.0);
  CHECK(infinite_time_violation(p0, Protection::none(), psi0, InfiniteTimeMode::diagonal_ensemble).approximate);
}

TEST_CASE("two-body protection beats single-body at equal V (controlled regime)") {
  const SpinBasis b(4);
  const StateVector psi0 = basis_state(b, staggered_vacuum(b));
  const auto p = small(4, ErrorKind::extreme, 0.05, 100.0);
  const auto q = infinite_time_violation(p, Protection::quadratic(), psi0, InfiniteTimeMode::sample_at_1e10);
  const auto c = find_compliant_sequence(4, 20);
  REQUIRE(c.has_value());
  const auto l = infinite_time_violation(p, Protection::linear(*c), psi0, InfiniteTimeMode::sample_at_1e10);
  CHECK(q.value <= l.value);
}

TEST_CASE("Zeno reference evolution") {
  const SpinBasis b(4);
  const StateVector psi0 = basis_state(b, staggered_vacuum(b));
  const auto c = find_compliant_sequence(4, 20);
  REQUIRE(c.has_value());
  auto p = small(4, ErrorKind::extreme, 0.05, 0.0);

  // compliant c keeps the Zeno state in g = 0
  const ZenoPropagator zeno(p, Protection::linear(*c));
  const auto obs = violation_diagonal(b);
  for (double t : {0.5, 10.0, 1000.0}) CHECK(gauge_violation(zeno.evolve(psi0, 50.0, t), obs) < 1e-20);

  // the block part commutes with the protection term
  const auto labels = protection_block_labels(Protection::linear(*c), b);
  const auto blockpart = block_diagonal_part(prepare_hamiltonian(p, Protection::none()).unprotected.matrix(), labels);
  const RealVector hg = protection_diagonal(Protection::linear(*c), b);
  const Matrix<double> comm = hg.asDiagonal() * blockpart - blockpart * hg.asDiagonal();
  CHECK(max_abs(comm) < 1e-12);

  // without protection every state is one block: Zeno = full evolution
  const auto full = eigh(assemble(p, Protection::none()));
  CHECK(max_abs(zeno_evolution(p, Protection::none(), psi0, 2.0) - evolve_with_spectrum(full, psi0, 2.0)) < 1e-10);

  // lambda = 0: both evolutions agree
  auto p0 = small(4, ErrorKind::local, 0.0, 0.0);
  const std::vector<double> vs{1.0, 10.0, 100.0};
  for (double r : zeno_residual(p0, Protection::linear(*c), psi0, 1.0, vs)) CHECK(r < 1e-10);

  const std::vector<double> descending{10.0, 1.0};
  CHECK_THROWS_AS(zeno_residual(p, Protection::linear(*c), psi0, 1.0, descending), std::invalid_argument);
}

TEST_CASE("Zeno residual decays like 1/V") {
  const SpinBasis b(4);
  const StateVector psi0 = basis_state(b, staggered_vacuum(b));
  const auto p = small(4, ErrorKind::local, 0.05, 0.0);
  const auto prot = Protection::linear(ProtectionSequence::staggered_unit(4));
  std::vector<double> vs;
  for (int i = 0; i <= 10; ++i) vs.push_back(1000.0 * std::pow(10.0, i / 10.0));
  const auto r = zeno_residual(p, prot, psi0, 1.0, vs);
  CHECK(oracle::loglog_slope(vs, r) == doctest::Approx(-1.0).epsilon(0.3));
  // decade-scale monotonic trend, 20% wiggle allowed
  for (std::size_t i = 1; i < r.size(); ++i) CHECK(r[i] <= 1.2 * r[i - 1] + 1e-15);
}

TEST_CASE("trajectory CSV") {
  Trajectory t;
  t.times = {0.5, 1.0};
  t.epsilon = {0.1, 1.0 / 3.0};
  t.epsilon_avg = {0.05, 0.2};
  std::ostringstream s;
  write_trajectory_csv(s, t);
  CHECK(s.str() == "t,epsilon,epsilon_avg\n0.5,0.10000000000000001,0.050000000000000003\n"
                   "1,0.33333333333333331,0.20000000000000001\n");
}
