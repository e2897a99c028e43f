// Independent reference constructions for the tests: operators from explicit
// Kronecker products, a Taylor matrix exponential and brute-force quadrature.
// None of this goes through the library's own builders.

#ifndef QLMPROT_TESTS_ORACLES_HPP
#define QLMPROT_TESTS_ORACLES_HPP

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

namespace oracle {

using C = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;

inline MatC pauli(char which) {
  MatC m = MatC::Zero(2, 2);
  switch (which) {
    case 'x': m << 0, 1, 1, 0; break;
    case 'y': m << 0, C(0, -1), C(0, 1), 0; break;
    case 'z': m << 1, 0, 0, -1; break;
    case '+': m << 0, 1, 0, 0; break;  // |up><down|, up = index 0
    case '-': m << 0, 0, 1, 0; break;
    default: m << 1, 0, 0, 1; break;
  }
  return m;
}

inline MatC kron(const MatC& a, const MatC& b) {
  MatC out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Product over qubits 0..n-1 (qubit 0 leftmost) of the given single-qubit
/// factors; qubits not listed get the identity.
inline MatC product(int n, const std::vector<std::pair<int, char>>& factors) {
  MatC out = MatC::Identity(1, 1);
  for (int q = 0; q < n; ++q) {
    char which = 'i';
    for (const auto& [qq, w] : factors)
      if (qq == q) which = w;
    out = kron(out, pauli(which));
  }
  return out;
}

inline int matter(int L, int j) { return 2 * (((j - 1) % L + L) % L); }
inline int link(int L, int j) { return 2 * (((j - 1) % L + L) % L) + 1; }

/// J sum_j (s-_j t+_{j,j+1} s-_{j+1} + h.c.) + mu/2 sum_j sz_j
inline MatC h0(int L, double J, double mu) {
  const int n = 2 * L;
  MatC h = MatC::Zero(Eigen::Index(1) << n, Eigen::Index(1) << n);
  for (int j = 1; j <= L; ++j) {
    MatC hop = product(n, {{matter(L, j), '-'}, {link(L, j), '+'}, {matter(L, j + 1), '-'}});
    h += J * (hop + hop.adjoint());
    h += 0.5 * mu * product(n, {{matter(L, j), 'z'}});
  }
  return h;
}

/// sum_j (tx_{j,j+1} + s+_j s+_{j+1} + s-_j s-_{j+1})
inline MatC h1_local(int L) {
  const int n = 2 * L;
  MatC h = MatC::Zero(Eigen::Index(1) << n, Eigen::Index(1) << n);
  for (int j = 1; j <= L; ++j) {
    h += product(n, {{link(L, j), 'x'}});
    h += product(n, {{matter(L, j), '+'}, {matter(L, j + 1), '+'}});
    h += product(n, {{matter(L, j), '-'}, {matter(L, j + 1), '-'}});
  }
  return h;
}

/// sum_{xi = +-1} prod_j (1 + xi sx_j)(1 + xi tx_{j,j+1})
inline MatC h1_product(int L) {
  const int n = 2 * L;
  MatC total = MatC::Zero(Eigen::Index(1) << n, Eigen::Index(1) << n);
  for (int xi : {1, -1}) {
    MatC p = MatC::Identity(1, 1);
    for (int q = 0; q < n; ++q) p = kron(p, MatC::Identity(2, 2) + double(xi) * pauli('x'));
    total += p;
  }
  return total;
}

/// G_j = (-1)^j / 2 (sz_j + tz_{j-1,j} + tz_{j,j+1} + 1)
inline MatC gauss(int L, int j) {
  const int n = 2 * L;
  const double sign = (j % 2 == 0) ? 1.0 : -1.0;
  MatC g = product(n, {{matter(L, j), 'z'}}) + product(n, {{link(L, j - 1), 'z'}}) +
           product(n, {{link(L, j), 'z'}}) + MatC::Identity(Eigen::Index(1) << n, Eigen::Index(1) << n);
  return 0.5 * sign * g;
}

/// exp(m) by scaling and squaring with a long Taylor series.
inline MatC expm(const MatC& m) {
  const double norm = m.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  while (norm / std::pow(2.0, squarings) > 0.25) ++squarings;
  const MatC a = m / std::pow(2.0, squarings);
  MatC term = MatC::Identity(m.rows(), m.cols()), sum = term;
  for (int k = 1; k <= 24; ++k) {
    term = term * a / double(k);
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

/// Composite Simpson rule on [a, b] with `panels` (even) subintervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
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

}  // namespace oracle

#endif  // QLMPROT_TESTS_ORACLES_HPP
