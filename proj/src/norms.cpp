#include "qlmprot/norms.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

namespace qlmprot {

namespace {

int cell_of(int qubit) { return qubit / 2 + 1; }

struct LocalFactor {
  int qubit;
  PauliAxis axis;
};

// Dense block of a product of single-qubit factors on the listed qubits.
Matrix<double> local_string(const std::vector<int>& qubits, const std::vector<LocalFactor>& factors, double coeff) {
  const int n = static_cast<int>(qubits.size());
  const Index dim = Index{1} << n;
  Matrix<double> m = Matrix<double>::Zero(dim, dim);
  auto position = [&](int q) {
    return static_cast<int>(std::find(qubits.begin(), qubits.end(), q) - qubits.begin());
  };
  for (Index col = 0; col < dim; ++col) {
    auto row = static_cast<std::uint64_t>(col);
    double amp = coeff;
    bool vanishes = false;
    for (const LocalFactor& f : factors) {
      const std::uint64_t mask = std::uint64_t{1} << (n - 1 - position(f.qubit));
      const bool down = (row & mask) != 0;
      switch (f.axis) {
        case PauliAxis::x:
          row ^= mask;
          break;
        case PauliAxis::z:
          if (down) amp = -amp;
          break;
        case PauliAxis::plus:
          vanishes = !down;
          row ^= mask;
          break;
        case PauliAxis::minus:
          vanishes = down;
          row ^= mask;
          break;
        case PauliAxis::identity:
          break;
        case PauliAxis::y:
          throw std::invalid_argument("decompose: real blocks only");
      }
      if (vanishes) break;
    }
    if (!vanishes) m(static_cast<Index>(row), col) += amp;
  }
  return m;
}

struct RawTerm {
  std::string name;
  std::vector<int> qubits;
  Matrix<double> block;
};

std::vector<RawTerm> raw_terms(const ModelParams& p) {
  const SpinBasis basis = p.basis();
  const int l = basis.matter_sites();
  std::vector<RawTerm> terms;
  for (int j = 1; j <= l; ++j) {
    const int a = basis.matter_qubit(j), link = basis.link_qubit(j), b = basis.matter_qubit(j + 1);
    const std::vector<int> q{a, link, b};
    Matrix<double> hop = local_string(q, {{a, PauliAxis::minus}, {link, PauliAxis::plus}, {b, PauliAxis::minus}}, p.J);
    hop += local_string(q, {{a, PauliAxis::plus}, {link, PauliAxis::minus}, {b, PauliAxis::plus}}, p.J);
    terms.push_back({"hop(" + std::to_string(j) + ")", q, std::move(hop)});
  }
  for (int j = 1; j <= l; ++j) {
    const int a = basis.matter_qubit(j);
    terms.push_back({"mass(" + std::to_string(j) + ")", {a}, local_string({a}, {{a, PauliAxis::z}}, 0.5 * p.mu)});
  }
  if (p.error == ErrorKind::none || p.lambda == 0.0) return terms;
  for (int j = 1; j <= l; ++j) {
    const int link = basis.link_qubit(j);
    terms.push_back({"tx(" + std::to_string(j) + ")", {link}, local_string({link}, {{link, PauliAxis::x}}, p.lambda)});
  }
  for (int j = 1; j <= l; ++j) {
    const int a = basis.matter_qubit(j), b = basis.matter_qubit(j + 1);
    const std::vector<int> q{a, b};
    Matrix<double> pp = local_string(q, {{a, PauliAxis::plus}, {b, PauliAxis::plus}}, p.lambda);
    pp += local_string(q, {{a, PauliAxis::minus}, {b, PauliAxis::minus}}, p.lambda);
    terms.push_back({"pp(" + std::to_string(j) + ")", q, std::move(pp)});
  }
  if (p.error == ErrorKind::extreme) {
    std::vector<int> all(static_cast<std::size_t>(basis.qubits()));
    for (int q = 0; q < basis.qubits(); ++q) all[static_cast<std::size_t>(q)] = q;
    const RealVector ones = RealVector::Ones(basis.dim());
    RealVector parity(basis.dim());
    for (Index s = 0; s < basis.dim(); ++s)
      parity(s) = (std::popcount(static_cast<std::uint64_t>(s)) % 2 == 0) ? 1.0 : -1.0;
    Matrix<double> prod = p.lambda * (ones * ones.transpose() + parity * parity.transpose());
    terms.push_back({"product", all, std::move(prod)});
  }
  return terms;
}

// Twice the protection label restricted to the qubits of a block, per local
// configuration: sum_q w_q z_q with w_q = sum over G_j containing q of
// num_j (-1)^j. Labels of two configurations differ by half the difference.
std::vector<long long> local_labels(const SpinBasis& basis, const ProtectionSequence& c, const std::vector<int>& qubits) {
  const int n = static_cast<int>(qubits.size());
  std::vector<long long> weight(static_cast<std::size_t>(basis.qubits()), 0);
  for (int j = 1; j <= basis.matter_sites(); ++j) {
    const long long w = c.numerators()[static_cast<std::size_t>(j - 1)] * ((j % 2 == 0) ? 1 : -1);
    weight[static_cast<std::size_t>(basis.matter_qubit(j))] += w;
    weight[static_cast<std::size_t>(basis.link_qubit(j - 1))] += w;
    weight[static_cast<std::size_t>(basis.link_qubit(j))] += w;
  }
  std::vector<long long> labels(std::size_t{1} << n, 0);
  for (std::size_t config = 0; config < labels.size(); ++config)
    for (int k = 0; k < n; ++k) {
      const bool down = (config >> (n - 1 - k)) & 1U;
      labels[config] += (down ? -1 : 1) * weight[static_cast<std::size_t>(qubits[static_cast<std::size_t>(k)])];
    }
  return labels;
}

double spectral_norm(const Matrix<double>& m) {
  if (m.size() == 0) return 0.0;
  // Each row and column holding at most one entry: the norm is the largest entry.
  bool monomial = true;
  for (Index c = 0; c < m.cols() && monomial; ++c)
    monomial = (m.col(c).array() != 0.0).count() <= 1 && (m.row(c).array() != 0.0).count() <= 1;
  if (monomial) return max_abs(m);
  const RealVector ev = eigvalsh(Matrix<double>(m));
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

std::vector<int> cells_of(const std::vector<int>& qubits) {
  std::set<int> cells;
  for (int q : qubits) cells.insert(cell_of(q));
  return {cells.begin(), cells.end()};
}

std::vector<int> enlarged_cells(const SpinBasis& basis, const std::vector<int>& qubits) {
  std::set<int> touched(qubits.begin(), qubits.end());
  std::set<int> cells;
  for (int q : qubits) cells.insert(cell_of(q));
  for (int j = 1; j <= basis.matter_sites(); ++j) {
    const int gq[3] = {basis.matter_qubit(j), basis.link_qubit(j - 1), basis.link_qubit(j)};
    if (touched.count(gq[0]) || touched.count(gq[1]) || touched.count(gq[2]))
      for (int q : gq) cells.insert(cell_of(q));
  }
  return {cells.begin(), cells.end()};
}

}  // namespace

Matrix<double> PotentialDecomposition::reconstruct() const {
  const SpinBasis basis(matter_sites);
  const Index dim = basis.dim();
  Matrix<double> out = Matrix<double>::Zero(dim, dim);
  for (const PotentialTerm& t : terms) {
    const int n = static_cast<int>(t.qubits.size());
    const std::uint64_t term_mask = [&] {
      std::uint64_t m = 0;
      for (int q : t.qubits) m |= basis.mask(q);
      return m;
    }();
    auto local_index = [&](std::uint64_t s) {
      std::uint64_t idx = 0;
      for (int k = 0; k < n; ++k) idx = (idx << 1) | ((s & basis.mask(t.qubits[static_cast<std::size_t>(k)])) ? 1U : 0U);
      return static_cast<Index>(idx);
    };
    for (Index c = 0; c < dim; ++c) {
      const auto sc = static_cast<std::uint64_t>(c);
      for (Index r = 0; r < dim; ++r) {
        const auto sr = static_cast<std::uint64_t>(r);
        if ((sr & ~term_mask) != (sc & ~term_mask)) continue;
        out(r, c) += t.block(local_index(sr), local_index(sc));
      }
    }
  }
  return out;
}

std::size_t PotentialDecomposition::count(PotentialPart part) const {
  return static_cast<std::size_t>(std::count_if(terms.begin(), terms.end(), [&](const PotentialTerm& t) { return t.part == part; }));
}

PotentialDecomposition decompose(const ModelParams& params, const ProtectionSequence& sequence, SupportRule rule) {
  params.validate();
  const SpinBasis basis = params.basis();
  if (sequence.size() != basis.matter_sites()) throw std::invalid_argument("decompose: sequence length does not match L");
  PotentialDecomposition pot;
  pot.matter_sites = basis.matter_sites();
  for (RawTerm& raw : raw_terms(params)) {
    const Index dim = raw.block.rows();
    Matrix<double> diag = Matrix<double>::Zero(dim, dim);
    Matrix<double> ndiag = Matrix<double>::Zero(dim, dim);
    const std::vector<long long> labels = local_labels(basis, sequence, raw.qubits);
    for (Index c = 0; c < dim; ++c)
      for (Index r = 0; r < dim; ++r) {
        const double v = raw.block(r, c);
        if (v == 0.0) continue;
        if (labels[static_cast<std::size_t>(r)] == labels[static_cast<std::size_t>(c)])
          diag(r, c) = v;
        else
          ndiag(r, c) = v;
      }
    const std::vector<int> cells = cells_of(raw.qubits);
    if (max_abs(diag) > 0.0) {
      const double norm = spectral_norm(diag);
      std::vector<int> support = rule == SupportRule::minimal ? cells : enlarged_cells(basis, raw.qubits);
      pot.terms.push_back({raw.name, PotentialPart::diag, std::move(support), raw.qubits, std::move(diag), norm});
    }
    if (max_abs(ndiag) > 0.0) {
      const double norm = spectral_norm(ndiag);
      pot.terms.push_back({raw.name, PotentialPart::ndiag, cells, raw.qubits, std::move(ndiag), norm});
    }
  }
  return pot;
}

double kappa_norm(const PotentialDecomposition& pot, double kappa, std::optional<PotentialPart> part) {
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa_norm: kappa must be positive");
  double best = 0.0;
  for (int x = 1; x <= pot.matter_sites; ++x) {
    double sum = 0.0;
    for (const PotentialTerm& t : pot.terms) {
      if (part && t.part != *part) continue;
      if (!std::binary_search(t.support.begin(), t.support.end(), x)) continue;
      sum += std::exp(kappa * static_cast<double>(t.support.size())) * t.op_norm;
    }
    best = std::max(best, sum);
  }
  return best;
}

std::optional<long long> n_star(double V, double V0) {
  if (!(V > 0.0) || !(V0 > 0.0)) return std::nullopt;
  const double x = V / V0;
  const double d = 1.0 + std::log(x);
  if (!(d > 0.0)) return std::nullopt;
  return static_cast<long long>(std::floor(x / (d * d * d))) - 2;
}

std::vector<double> default_kappa_grid() {
  std::vector<double> grid(64);
  for (int k = 0; k < 64; ++k) grid[static_cast<std::size_t>(k)] = std::pow(10.0, -2.0 + std::log10(500.0) * k / 63.0);
  return grid;
}

namespace {

double v0_at(const PotentialDecomposition& pot, double kappa, double& diag, double& ndiag) {
  diag = kappa_norm(pot, kappa, PotentialPart::diag);
  ndiag = kappa_norm(pot, kappa, PotentialPart::ndiag);
  return 54.0 * std::numbers::pi / (kappa * kappa) * (diag + 2.0 * ndiag);
}

// x / (1 + ln x)^3
double threshold_ratio(double x) {
  const double d = 1.0 + std::log(x);
  return x / (d * d * d);
}

}  // namespace

NormEstimate estimate_vmin(const PotentialDecomposition& pot, std::span<const double> kappa_grid) {
  NormEstimate est;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_k = 0;
  for (std::size_t k = 0; k < kappa_grid.size(); ++k) {
    const double kappa = kappa_grid[k];
    if (!(kappa > 0.0)) throw std::invalid_argument("estimate_vmin: kappa grid must be positive");
    double d = 0.0, n = 0.0;
    const double v0 = v0_at(pot, kappa, d, n);
    est.scan.emplace_back(kappa, v0);
    if (std::isfinite(v0) && v0 > 0.0 && v0 < best) {
      best = v0;
      best_k = k;
    }
  }
  if (!std::isfinite(best)) throw EstimationFailed("estimate_vmin: no kappa in the grid gives a finite V0");

  // one refinement pass between the neighbours of the best grid point
  const double lo = kappa_grid[best_k == 0 ? 0 : best_k - 1];
  const double hi = kappa_grid[std::min(best_k + 1, kappa_grid.size() - 1)];
  est.kappa0 = kappa_grid[best_k];
  for (int k = 0; k <= 64; ++k) {
    const double kappa = lo + (hi - lo) * k / 64.0;
    if (!(kappa > 0.0)) continue;
    double d = 0.0, n = 0.0;
    const double v0 = v0_at(pot, kappa, d, n);
    if (std::isfinite(v0) && v0 < best) {
      best = v0;
      est.kappa0 = kappa;
    }
  }
  est.V0 = v0_at(pot, est.kappa0, est.norm_diag, est.norm_ndiag);
  est.v_bound = 9.0 * std::numbers::pi * est.norm_ndiag / est.kappa0;

  // first window: threshold_ratio falls from +inf at 1/e to its minimum at e^2
  double a = std::exp(-1.0) * (1.0 + 1e-9), b = std::exp(2.0);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (a + b);
    (threshold_ratio(mid) >= 3.0 ? a : b) = mid;
  }
  const double x1 = a;  // largest x of the window with ratio >= 3
  // second window: increasing again beyond e^2
  a = std::exp(2.0);
  b = a;
  while (threshold_ratio(b) < 3.0) b *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (a + b);
    (threshold_ratio(mid) >= 3.0 ? b : a) = mid;
  }
  const double x2 = b;

  // The bound of the first window only counts if the kappa bound does not
  // push V past it; otherwise n* >= 1 needs the second window.
  est.v_min_asymptotic = std::max(x2 * est.V0, est.v_bound);
  est.v_min = est.v_bound <= x1 * est.V0 ? x1 * est.V0 : est.v_min_asymptotic;
  est.n_star_at_v_min = n_star(est.v_min, est.V0).value_or(0);
  est.kappa_n_star = est.kappa0 / (1.0 + std::log(1.0 + static_cast<double>(est.n_star_at_v_min)));
  return est;
}

}  // namespace qlmprot
