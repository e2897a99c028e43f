// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Arguments select criteria by number (default: all ten).

#include "qlmprot/circuit.hpp"
#include "qlmprot/evolve.hpp"
#include "qlmprot/gauge.hpp"
#include "qlmprot/model.hpp"
#include "qlmprot/norms.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

using namespace qlmprot;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// least-squares slope of log y against log x
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= double(x.size());
  my /= double(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

ModelParams model(int L, ErrorKind e, double lambda = 0.05, double V = 0.0) {
  ModelParams p;
  p.matter_sites = L;
  p.error = e;
  p.lambda = lambda;
  p.V = V;
  return p;
}

StateVector vacuum(int L) {
  const SpinBasis b(L);
  return basis_state(b, staggered_vacuum(b));
}

double eps_inf(ModelParams p, double V, const Protection& prot) {
  p.V = V;
  return infinite_time_violation(p, prot, vacuum(p.matter_sites), InfiniteTimeMode::sample_at_1e10).value;
}

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string sector_text(const Sector& g) {
  std::string s = "(";
  for (std::size_t i = 0; i < g.size(); ++i) s += (i ? "," : "") + std::to_string(g[i]);
  return s + ")";
}

Outcome compliance_gap() {
  const auto start = Clock::now();
  const auto table = sector_map(SpinBasis(6));
  const auto good = check_compliance(ProtectionSequence::paper_compliant_L6(), table);
  const auto bad = check_compliance(ProtectionSequence::paper_noncompliant_L6(), table);
  const double secs = seconds_since(start);
  const bool gap_ok = good.gap_numerator == 1 && std::abs(good.gap_D - 0.0068) < 0.00005;
  return {good.compliant && gap_ok && !bad.compliant && secs < 1.0,
          fmt("compliant=%d gap_D=%.6f (%lld/146) noncompliant=%d in %.3f s", int(good.compliant), good.gap_D,
              good.gap_numerator, int(bad.compliant), secs)};
}

Outcome controlled_scaling() {
  const auto p = model(6, ErrorKind::extreme);
  const auto good = Protection::linear(ProtectionSequence::paper_compliant_L6());
  const auto bad = Protection::linear(ProtectionSequence::paper_noncompliant_L6());
  std::vector<double> vs{1e3, std::pow(10.0, 3.5), 1e4, std::pow(10.0, 4.5), 1e5}, eps;
  std::string detail = "compliant eps:";
  for (double v : vs) {
    eps.push_back(eps_inf(p, v, good));
    detail += fmt(" %.3g@%.3g", eps.back(), v);
  }
  const std::vector<double> top_v(vs.end() - 3, vs.end()), top_e(eps.end() - 3, eps.end());
  const double slope = loglog_slope(top_v, top_e);
  const double n1 = eps_inf(p, vs[3], bad), n2 = eps_inf(p, vs[4], bad);
  const double ratio = n2 / n1;
  detail += fmt("; slope over [1e4,1e5] = %.3f; noncompliant %.3g -> %.3g, ratio %.3f", slope, n1, n2, ratio);
  return {std::abs(slope + 2.0) <= 0.2 && ratio >= 0.5 && ratio <= 2.0, detail};
}

Outcome exact_conservation() {
  auto p = model(6, ErrorKind::extreme, 0.0, 10.0);
  const auto times = log_time_grid(1e-2, 1e10, 121);
  const auto tr = run_trajectory(p, Protection::linear(ProtectionSequence::paper_compliant_L6()), vacuum(6), times);
  double worst = 0.0;
  for (double e : tr.epsilon) worst = std::max(worst, std::abs(e));
  return {worst < 1e-10 && tr.max_norm_error < 1e-9,
          fmt("max eps = %.3g, max norm error = %.3g over %zu times", worst, tr.max_norm_error, times.size())};
}

Outcome local_robustness() {
  const auto p = model(6, ErrorKind::local);
  const double lo = 0.1, hi = 1000.0;
  const std::vector<std::pair<std::string, ProtectionSequence>> seqs{
      {"compliant", ProtectionSequence::paper_compliant_L6()},
      {"noncompliant", ProtectionSequence::paper_noncompliant_L6()},
      {"staggered", ProtectionSequence::staggered_unit(6)},
      {"uniform", ProtectionSequence::uniform_unit(6)}};
  bool pass = true;
  std::string detail = fmt("suppression eps(V=%g)/eps(V=%g):", lo, hi);
  for (const auto& [name, c] : seqs) {
    const auto prot = Protection::linear(c);
    const double s = eps_inf(p, lo, prot) / eps_inf(p, hi, prot);
    detail += fmt(" %s %.3g", name.c_str(), s);
    pass = pass && (name == "uniform" ? s < 2.0 : s >= 10.0);
  }
  return {pass, detail};
}

Outcome ensemble_oracle() {
  const auto psi0 = vacuum(4);
  const auto obs = violation_diagonal(SpinBasis(4));
  int checked = 0, skipped = 0;
  double worst = 0.0;
  for (auto e : {ErrorKind::local, ErrorKind::extreme})
    for (const auto& c : {ProtectionSequence({-1, 5, -4, 7}, 7), ProtectionSequence::staggered_unit(4)})
      for (double V : {0.1, 1.0, 10.0, 100.0, 1000.0}) {
        const auto spectrum = eigh(assemble(model(4, e, 0.05, V), Protection::linear(c)));
        const auto de = infinite_time_violation(spectrum, obs, psi0, InfiniteTimeMode::diagonal_ensemble);
        // nondegenerate: every spacing resolvable within t = 1e10
        if (de.approximate || de.min_level_spacing < 1e-8) {
          ++skipped;
          continue;
        }
        const auto s = infinite_time_violation(spectrum, obs, psi0, InfiniteTimeMode::sample_at_1e10);
        worst = std::max(worst, std::abs(s.value - de.value) / std::abs(de.value));
        ++checked;
      }
  return {checked > 0 && worst <= 0.05,
          fmt("%d nondegenerate cases, max relative difference %.3g (%d degenerate skipped)", checked, worst, skipped)};
}

Outcome digital_v_ideal() {
  TrotterConfig base;
  base.params = model(6, ErrorKind::local);
  base.sequence = ProtectionSequence::paper_compliant_L6();
  base.dt = 0.2;
  base.n_steps = 100;
  const auto psi0 = vacuum(6);
  const auto hop = hopping_spectrum(base.params.basis());
  const double predicted = v_ideal(0.2, base.sequence.mean_abs(), 0.58);
  const auto found = locate_v_ideal(base, psi0, 2.0, 16.0, 15, 0.01, hop);
  const double dev = std::abs(found.v_argmin - predicted) / predicted;

  std::vector<double> argmins;
  std::string collapse;
  for (double dt : {0.1, 0.2, 0.4}) {
    auto t = base;
    t.dt = dt;
    t.n_steps = static_cast<int>(std::lround(20.0 / dt));
    const auto s = locate_v_ideal(t, psi0, 0.4 / dt, 3.0 / dt, 15, 0.01, hop);
    argmins.push_back(s.v_argmin * dt);
    collapse += fmt(" %.3f", argmins.back());
  }
  const auto [mn, mx] = std::minmax_element(argmins.begin(), argmins.end());
  const double mean = (argmins[0] + argmins[1] + argmins[2]) / 3.0;
  const double spread = (*mx - *mn) / mean;
  return {dev <= 0.2 && spread <= 0.15,
          fmt("argmin V = %.3f vs %.3f (%.1f%%); V*dt minima", found.v_argmin, predicted, 100 * dev) + collapse +
              fmt(" spread %.1f%%", 100 * spread)};
}

Outcome analog_digital() {
  const auto p = model(6, ErrorKind::local, 0.05, 1.0);
  const auto c = ProtectionSequence::paper_compliant_L6();
  const auto psi0 = vacuum(6);
  const auto spectrum = eigh(assemble(p, Protection::linear(c)));
  const auto obs = violation_diagonal(p.basis());
  const auto hop = hopping_spectrum(p.basis());
  const int t_max = 5;
  std::vector<double> diff;
  std::string detail = "max |eps_circuit - eps_exact| at t=1..5:";
  for (double dt : {0.2, 0.1, 0.05}) {
    TrotterConfig t;
    t.params = p;
    t.sequence = c;
    t.dt = dt;
    t.n_steps = static_cast<int>(std::lround(t_max / dt));
    const auto tr = run_circuit(t, psi0, hop);
    double worst = 0.0;
    for (int s = 1; s <= t_max; ++s) {
      const auto k = static_cast<std::size_t>(std::lround(s / dt)) - 1;
      worst = std::max(worst, std::abs(tr.epsilon[k] - gauge_violation(evolve_with_spectrum(spectrum, psi0, s), obs)));
    }
    diff.push_back(worst);
    detail += fmt(" %.3g(dt=%g)", worst, dt);
  }
  const double o1 = std::log2(diff[0] / diff[1]), o2 = std::log2(diff[1] / diff[2]);
  return {o1 >= 0.8 && o2 >= 0.8, detail + fmt("; orders %.2f %.2f", o1, o2)};
}

Outcome zeno_scaling() {
  const auto p = model(4, ErrorKind::local);
  const auto vs = log_time_grid(1e3, 1e4, 11);
  const auto r = zeno_residual(p, Protection::linear(ProtectionSequence::staggered_unit(4)), vacuum(4), 1.0, vs);
  const double slope = loglog_slope(vs, r);
  return {std::abs(slope + 1.0) <= 0.3,
          fmt("residual %.3g at V=1e3, %.3g at V=1e4, slope %.3f", r.front(), r.back(), slope)};
}

Outcome theorem_estimates() {
  const auto start = Clock::now();
  auto within2 = [](double x, double ref) { return x >= ref / 2 && x <= ref * 2; };
  const auto c = ProtectionSequence::paper_compliant_L6();
  const auto local = estimate_vmin(decompose(model(6, ErrorKind::local), c), default_kappa_grid());
  const auto extreme = estimate_vmin(decompose(model(6, ErrorKind::extreme), c), default_kappa_grid());
  const double secs = seconds_since(start);
  const bool pass = within2(local.V0, 3000) && within2(local.v_min, 2000) && within2(extreme.V0, 8000) &&
                    within2(extreme.v_min, 5000) && secs < 60.0;
  return {pass, fmt("local V0 = %.4g V_min = %.4g; extreme V0 = %.4g V_min = %.4g; %.1f s", local.V0, local.v_min,
                    extreme.V0, extreme.v_min, secs)};
}

// (0,...,0, s,-s,s,-s, 0,...,0) for s = +-1
bool alternating_block(const Sector& g) {
  std::vector<std::size_t> nz;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g[i] != 0) nz.push_back(i);
  if (nz.size() != 4 || nz.back() - nz.front() != 3) return false;
  for (std::size_t k = 0; k < 4; ++k)
    if (std::abs(g[nz[k]]) != 1 || (k > 0 && g[nz[k]] != -g[nz[k - 1]])) return false;
  return true;
}

Outcome degeneracy_split() {
  const SpinBasis b(6);
  const auto table = sector_map(b);
  const bool split = degeneracy_split_check(ProtectionSequence::staggered_unit(6), build_h1(ErrorKind::local, b), table);
  bool forms = true;
  std::string detail = fmt("staggered/local split=%d; superlattice minimal sectors:", int(split));
  for (const auto& [tilt, u, offset] : {std::tuple{0.57, 1.3, 0.21}, std::tuple{0.31, 0.9, 0.13},
                                       std::tuple{1.1, 2.3, 0.47}}) {
    const auto g = minimal_degenerate_sector(build_superlattice_sequence(6, tilt, u, offset), table);
    detail += " " + (g ? sector_text(*g) : std::string("none"));
    forms = forms && g && alternating_block(*g);
  }
  return {split && forms, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria{
      {1, {"compliance gap", compliance_gap}},
      {2, {"controlled-violation scaling", controlled_scaling}},
      {3, {"exact gauge conservation", exact_conservation}},
      {4, {"local-error robustness", local_robustness}},
      {5, {"diagonal-ensemble oracle", ensemble_oracle}},
      {6, {"digital V_ideal", digital_v_ideal}},
      {7, {"analog-digital consistency", analog_digital}},
      {8, {"Zeno residual scaling", zeno_scaling}},
      {9, {"kappa-norm estimates", theorem_estimates}},
      {10, {"degeneracy splitting", degeneracy_split}},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  if (selected.empty())
    for (const auto& [n, _] : criteria) selected.insert(n);

  int failed = 0;
  for (int n : selected) {
    const auto it = criteria.find(n);
    if (it == criteria.end()) {
      std::printf("FAIL criterion %d: no such criterion\n", n);
      ++failed;
      continue;
    }
    const auto start = Clock::now();
    Outcome o;
    try {
      o = it->second.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", n, it->second.first,
                o.detail.c_str(), seconds_since(start));
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
