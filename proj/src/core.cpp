#include "qlmprot/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#ifdef QLMPROT_HAVE_LAPACKE
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>
#endif

namespace qlmprot {

SpinBasis::SpinBasis(int matter_sites) : matter_sites_(matter_sites) {
  if (matter_sites < 1) throw std::invalid_argument("SpinBasis: need at least one matter site");
  if (2 * matter_sites > 30) throw ResourceError("SpinBasis: dense Hilbert space too large");
}

int SpinBasis::wrap(int j) const {
  const int l = matter_sites_;
  return ((j - 1) % l + l) % l + 1;
}

template <typename Scalar>
void accumulate(Matrix<Scalar>& target, const SpinBasis& basis, const PauliString<Scalar>& term) {
  const Index dim = basis.dim();
  if (target.rows() != dim || target.cols() != dim)
    throw std::invalid_argument("accumulate: target has wrong dimension");
  for (const auto& [qubit, axis] : term.factors) {
    if (qubit < 0 || qubit >= basis.qubits()) throw std::invalid_argument("accumulate: qubit out of range");
    if constexpr (!is_complex_v<Scalar>) {
      if (axis == PauliAxis::y) throw std::invalid_argument("accumulate: Pauli y needs a complex scalar");
    }
  }
  for (Index col = 0; col < dim; ++col) {
    auto row = static_cast<std::uint64_t>(col);
    Scalar amplitude = term.coefficient;
    bool vanishes = false;
    for (const auto& [qubit, axis] : term.factors) {
      const std::uint64_t m = basis.mask(qubit);
      const bool down = (row & m) != 0;
      switch (axis) {
        case PauliAxis::identity:
          break;
        case PauliAxis::x:
          row ^= m;
          break;
        case PauliAxis::y:
          if constexpr (is_complex_v<Scalar>) {
            // sigma^y |up> = i |down>, sigma^y |down> = -i |up>
            amplitude *= down ? Scalar(0, -1) : Scalar(0, 1);
          }
          row ^= m;
          break;
        case PauliAxis::z:
          if (down) amplitude = -amplitude;
          break;
        case PauliAxis::plus:
          if (!down) vanishes = true;
          row ^= m;
          break;
        case PauliAxis::minus:
          if (down) vanishes = true;
          row ^= m;
          break;
      }
      if (vanishes) break;
    }
    if (!vanishes) target(static_cast<Index>(row), col) += amplitude;
  }
}

namespace {

template <typename Scalar>
bool off_diagonal_is_zero(const Matrix<Scalar>& m) {
  for (Index c = 0; c < m.cols(); ++c)
    for (Index r = 0; r < m.rows(); ++r)
      if (r != c && m(r, c) != Scalar(0)) return false;
  return true;
}

template <typename Scalar>
double hermitian_deviation(const Matrix<Scalar>& m) {
  double worst = 0.0;
  for (Index c = 0; c < m.cols(); ++c)
    for (Index r = 0; r <= c; ++r) worst = std::max(worst, static_cast<double>(std::abs(m(r, c) - Eigen::numext::conj(m(c, r)))));
  return worst;
}

}  // namespace

template <typename Scalar>
Operator<Scalar>::Operator(Matrix<Scalar> entries, bool hermitian, bool diagonal)
    : entries_(std::move(entries)), hermitian_(hermitian), diagonal_(diagonal) {
  if (entries_.rows() != entries_.cols()) throw std::invalid_argument("Operator: matrix must be square");
  if (hermitian_ && hermitian_deviation(entries_) > 1e-12)
    throw ContractError("Operator: hermitian flag set on a non-Hermitian matrix");
  if (diagonal_ && !off_diagonal_is_zero(entries_))
    throw ContractError("Operator: diagonal flag set on a matrix with off-diagonal entries");
}

template <typename Scalar>
Operator<Scalar> Operator<Scalar>::zero(Index dim, bool hermitian, bool diagonal) {
  return Operator(Matrix<Scalar>::Zero(dim, dim), hermitian, diagonal);
}

template <typename Scalar>
Operator<Scalar> Operator<Scalar>::identity(Index dim) {
  return Operator(Matrix<Scalar>::Identity(dim, dim), true, true);
}

template <typename Scalar>
Operator<Scalar> Operator<Scalar>::from_diagonal(const RealVector& values) {
  Matrix<Scalar> m = Matrix<Scalar>::Zero(values.size(), values.size());
  m.diagonal() = values.template cast<Scalar>();
  return Operator(std::move(m), true, true);
}

template <typename Scalar>
Operator<Scalar>& Operator<Scalar>::operator+=(const Operator& other) {
  if (other.dim() != dim()) throw std::invalid_argument("Operator: dimension mismatch");
  entries_ += other.entries_;
  hermitian_ = hermitian_ && other.hermitian_;
  diagonal_ = diagonal_ && other.diagonal_;
  return *this;
}

template <typename Scalar>
Operator<Scalar>& Operator<Scalar>::operator-=(const Operator& other) {
  if (other.dim() != dim()) throw std::invalid_argument("Operator: dimension mismatch");
  entries_ -= other.entries_;
  hermitian_ = hermitian_ && other.hermitian_;
  diagonal_ = diagonal_ && other.diagonal_;
  return *this;
}

template <typename Scalar>
Operator<Scalar>& Operator<Scalar>::operator*=(double factor) {
  entries_ *= Scalar(factor);
  return *this;
}

template <typename Scalar>
Operator<Scalar> operator*(const Operator<Scalar>& a, const Operator<Scalar>& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("Operator: dimension mismatch");
  const bool both_diagonal = a.diagonal() && b.diagonal();
  Matrix<Scalar> product = a.matrix() * b.matrix();
  return Operator<Scalar>(std::move(product), both_diagonal, both_diagonal);
}

template <typename Scalar>
Matrix<Scalar> commutator(const Operator<Scalar>& a, const Operator<Scalar>& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("commutator: dimension mismatch");
  if (a.diagonal() && b.diagonal()) return Matrix<Scalar>::Zero(a.dim(), a.dim());
  if (b.diagonal()) {
    // [A, D]_{rc} = A_{rc} (d_c - d_r)
    Matrix<Scalar> out = a.matrix();
    const auto d = b.matrix().diagonal();
    for (Index c = 0; c < out.cols(); ++c)
      for (Index r = 0; r < out.rows(); ++r) out(r, c) *= d(c) - d(r);
    return out;
  }
  if (a.diagonal()) return -commutator(b, a);
  return a.matrix() * b.matrix() - b.matrix() * a.matrix();
}

template <typename Scalar>
Operator<Scalar> embed_pauli(PauliAxis axis, int qubit, const SpinBasis& basis) {
  if (qubit < 0 || qubit >= basis.qubits()) throw std::invalid_argument("embed_pauli: qubit index out of range");
  if constexpr (!is_complex_v<Scalar>) {
    if (axis == PauliAxis::y) throw std::invalid_argument("embed_pauli: Pauli y needs a complex scalar");
  }
  Matrix<Scalar> m = Matrix<Scalar>::Zero(basis.dim(), basis.dim());
  accumulate(m, basis, PauliString<Scalar>{Scalar(1), {{qubit, axis}}});
  const bool hermitian = axis != PauliAxis::plus && axis != PauliAxis::minus;
  const bool diagonal = axis == PauliAxis::z || axis == PauliAxis::identity;
  return Operator<Scalar>(std::move(m), hermitian, diagonal);
}

template <typename Scalar>
Matrix<Scalar> SpectralDecomposition<Scalar>::reconstruct() const {
  return eigenvectors * eigenvalues.template cast<Scalar>().asDiagonal() * eigenvectors.adjoint();
}

template <typename Scalar>
double SpectralDecomposition<Scalar>::unitarity_error() const {
  const Matrix<Scalar> gram = eigenvectors.adjoint() * eigenvectors;
  return max_abs(gram - Matrix<Scalar>::Identity(dim(), dim()));
}

template <typename Scalar>
double SpectralDecomposition<Scalar>::min_level_spacing() const {
  double spacing = std::numeric_limits<double>::infinity();
  for (Index i = 1; i < eigenvalues.size(); ++i) spacing = std::min(spacing, eigenvalues(i) - eigenvalues(i - 1));
  return spacing;
}

namespace {

#ifdef QLMPROT_HAVE_LAPACKE
lapack_int syevd(Index n, double* a, double* w, char jobz = 'V') {
  return LAPACKE_dsyevd(LAPACK_COL_MAJOR, jobz, 'L', static_cast<lapack_int>(n), a, static_cast<lapack_int>(n), w);
}
lapack_int syevd(Index n, Complex* a, double* w, char jobz = 'V') {
  return LAPACKE_zheevd(LAPACK_COL_MAJOR, jobz, 'L', static_cast<lapack_int>(n), a, static_cast<lapack_int>(n), w);
}
#endif

}  // namespace

template <typename Scalar>
SpectralDecomposition<Scalar> eigh(Matrix<Scalar>&& hermitian_matrix) {
  if (hermitian_matrix.rows() != hermitian_matrix.cols()) throw std::invalid_argument("eigh: matrix must be square");
  SpectralDecomposition<Scalar> out;
  const Index n = hermitian_matrix.rows();
  if (n == 0) return out;
#ifdef QLMPROT_HAVE_LAPACKE
  out.eigenvalues.resize(n);
  if (syevd(n, hermitian_matrix.data(), out.eigenvalues.data()) != 0)
    throw std::runtime_error("eigh: LAPACK eigensolver did not converge");
  out.eigenvectors = std::move(hermitian_matrix);
#else
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(hermitian_matrix);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigh: eigensolver did not converge");
  out.eigenvalues = solver.eigenvalues();
  out.eigenvectors = solver.eigenvectors();
#endif
  return out;
}

template <typename Scalar>
RealVector eigvalsh(Matrix<Scalar>&& hermitian_matrix) {
  if (hermitian_matrix.rows() != hermitian_matrix.cols()) throw std::invalid_argument("eigvalsh: matrix must be square");
  const Index n = hermitian_matrix.rows();
  if (n == 0) return RealVector();
#ifdef QLMPROT_HAVE_LAPACKE
  RealVector values(n);
  if (syevd(n, hermitian_matrix.data(), values.data(), 'N') != 0)
    throw std::runtime_error("eigvalsh: LAPACK eigensolver did not converge");
  return values;
#else
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(hermitian_matrix, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigvalsh: eigensolver did not converge");
  return solver.eigenvalues();
#endif
}

template <typename Scalar>
SpectralDecomposition<Scalar> eigh(const Operator<Scalar>& op) {
  if (!op.hermitian()) throw ContractError("eigh: operator is not flagged Hermitian");
  Matrix<Scalar> copy = op.matrix();
  return eigh(std::move(copy));
}

double reduced_phase(double energy, double t) {
  constexpr long double two_pi = 2.0L * std::numbers::pi_v<long double>;
  long double phase = std::fmod(static_cast<long double>(energy) * static_cast<long double>(t), two_pi);
  if (phase < 0) phase += two_pi;
  return static_cast<double>(phase);
}

Complex unit_phase(double energy, double t) { return std::polar(1.0, -reduced_phase(energy, t)); }

namespace {

using RowPair = Eigen::Matrix<double, 2, Eigen::Dynamic>;

Eigen::Map<const RowPair> as_rows(const StateVector& v) {
  return {reinterpret_cast<const double*>(v.data()), 2, v.size()};
}
Eigen::Map<RowPair> as_rows(StateVector& v) { return {reinterpret_cast<double*>(v.data()), 2, v.size()}; }

}  // namespace

template <typename Scalar>
StateVector eigenbasis_coefficients(const SpectralDecomposition<Scalar>& spectrum, const StateVector& psi) {
  if (psi.size() != spectrum.dim()) throw std::invalid_argument("eigenbasis_coefficients: dimension mismatch");
  if constexpr (is_complex_v<Scalar>) {
    return spectrum.eigenvectors.adjoint() * psi;
  } else {
    // real eigenvectors: view the complex vector as a 2 x dim real matrix so
    // that V is streamed once instead of promoting it to complex
    StateVector out(psi.size());
    as_rows(out).noalias() = as_rows(psi) * spectrum.eigenvectors;
    return out;
  }
}

template <typename Scalar>
StateVector state_from_coefficients(const SpectralDecomposition<Scalar>& spectrum, const StateVector& coefficients,
                                    double t) {
  if (coefficients.size() != spectrum.dim()) throw std::invalid_argument("state_from_coefficients: dimension mismatch");
  StateVector rotated(coefficients.size());
  for (Index n = 0; n < coefficients.size(); ++n) rotated(n) = unit_phase(spectrum.eigenvalues(n), t) * coefficients(n);
  if constexpr (is_complex_v<Scalar>) {
    return spectrum.eigenvectors * rotated;
  } else {
    StateVector out(rotated.size());
    as_rows(out).noalias() = as_rows(rotated) * spectrum.eigenvectors.transpose();
    return out;
  }
}

template <typename Scalar>
StateVector evolve_with_spectrum(const SpectralDecomposition<Scalar>& spectrum, const StateVector& psi, double t) {
  if (psi.size() != spectrum.dim()) throw std::invalid_argument("evolve_with_spectrum: dimension mismatch");
  if (!std::isfinite(t)) throw std::invalid_argument("evolve_with_spectrum: time must be finite");
  if (t == 0.0) return psi;
  return state_from_coefficients(spectrum, eigenbasis_coefficients(spectrum, psi), t);
}

template <typename Scalar>
void BlockSpectrum<Scalar>::evolve(StateVector& psi, double t) const {
  if (psi.size() != dim) throw std::invalid_argument("BlockSpectrum::evolve: dimension mismatch");
  for (const Block& b : blocks) {
    const Index n = static_cast<Index>(b.states.size());
    StateVector local(n);
    for (Index k = 0; k < n; ++k) local(k) = psi(b.states[static_cast<std::size_t>(k)]);
    StateVector c = b.vectors.adjoint() * local;
    for (Index k = 0; k < n; ++k) c(k) *= unit_phase(b.energies(k), t);
    local.noalias() = b.vectors * c;
    for (Index k = 0; k < n; ++k) psi(b.states[static_cast<std::size_t>(k)]) = local(k);
  }
}

template <typename Scalar>
SpectralDecomposition<Scalar> BlockSpectrum<Scalar>::dense() const {
  std::vector<std::pair<double, std::pair<std::size_t, Index>>> order;
  for (std::size_t b = 0; b < blocks.size(); ++b)
    for (Index k = 0; k < blocks[b].energies.size(); ++k) order.push_back({blocks[b].energies(k), {b, k}});
  std::stable_sort(order.begin(), order.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  SpectralDecomposition<Scalar> out;
  out.eigenvalues.resize(dim);
  out.eigenvectors = Matrix<Scalar>::Zero(dim, dim);
  for (Index col = 0; col < dim; ++col) {
    const auto& [energy, where] = order[static_cast<std::size_t>(col)];
    const Block& b = blocks[where.first];
    out.eigenvalues(col) = energy;
    for (std::size_t r = 0; r < b.states.size(); ++r)
      out.eigenvectors(b.states[r], col) = b.vectors(static_cast<Index>(r), where.second);
  }
  return out;
}

template <typename Scalar>
BlockSpectrum<Scalar> eigh_blocks(const Matrix<Scalar>& hermitian_matrix, const std::vector<int>& block_of_state,
                                  double tolerance) {
  const Index dim = hermitian_matrix.rows();
  if (hermitian_matrix.cols() != dim || static_cast<Index>(block_of_state.size()) != dim)
    throw std::invalid_argument("eigh_blocks: dimension mismatch");
  for (Index c = 0; c < dim; ++c)
    for (Index r = 0; r < dim; ++r)
      if (block_of_state[static_cast<std::size_t>(r)] != block_of_state[static_cast<std::size_t>(c)] &&
          std::abs(hermitian_matrix(r, c)) > tolerance)
        throw ContractError("eigh_blocks: matrix couples different blocks");
  std::vector<std::vector<Index>> members;
  std::vector<int> slot;
  for (Index s = 0; s < dim; ++s) {
    const int id = block_of_state[static_cast<std::size_t>(s)];
    if (id < 0) throw std::invalid_argument("eigh_blocks: negative block id");
    if (static_cast<std::size_t>(id) >= slot.size()) slot.resize(static_cast<std::size_t>(id) + 1, -1);
    if (slot[static_cast<std::size_t>(id)] < 0) {
      slot[static_cast<std::size_t>(id)] = static_cast<int>(members.size());
      members.emplace_back();
    }
    members[static_cast<std::size_t>(slot[static_cast<std::size_t>(id)])].push_back(s);
  }
  BlockSpectrum<Scalar> out;
  out.dim = dim;
  for (auto& states : members) {
    const Index n = static_cast<Index>(states.size());
    Matrix<Scalar> sub(n, n);
    for (Index c = 0; c < n; ++c)
      for (Index r = 0; r < n; ++r) sub(r, c) = hermitian_matrix(states[static_cast<std::size_t>(r)], states[static_cast<std::size_t>(c)]);
    auto spec = eigh(std::move(sub));
    out.blocks.push_back({std::move(states), std::move(spec.eigenvalues), std::move(spec.eigenvectors)});
  }
  return out;
}

StateVector basis_state(const SpinBasis& basis, Index index) {
  if (index < 0 || index >= basis.dim()) throw std::invalid_argument("basis_state: index out of range");
  StateVector psi = StateVector::Zero(basis.dim());
  psi(index) = 1.0;
  return psi;
}

void require_normalized(const StateVector& psi, double tolerance) {
  if (std::abs(psi.norm() - 1.0) > tolerance) throw std::invalid_argument("state is not normalized");
}

#define QLMPROT_INSTANTIATE(S)                                                                   \
  template void accumulate<S>(Matrix<S>&, const SpinBasis&, const PauliString<S>&);             \
  template class Operator<S>;                                                                   \
  template Operator<S> operator*(const Operator<S>&, const Operator<S>&);                       \
  template Matrix<S> commutator<S>(const Operator<S>&, const Operator<S>&);                     \
  template Operator<S> embed_pauli<S>(PauliAxis, int, const SpinBasis&);                        \
  template struct SpectralDecomposition<S>;                                                     \
  template struct BlockSpectrum<S>;                                                             \
  template BlockSpectrum<S> eigh_blocks<S>(const Matrix<S>&, const std::vector<int>&, double);  \
  template SpectralDecomposition<S> eigh<S>(const Operator<S>&);                                \
  template SpectralDecomposition<S> eigh<S>(Matrix<S>&&);                                       \
  template RealVector eigvalsh<S>(Matrix<S>&&);                                                 \
  template StateVector evolve_with_spectrum<S>(const SpectralDecomposition<S>&, const StateVector&, double); \
  template StateVector eigenbasis_coefficients<S>(const SpectralDecomposition<S>&, const StateVector&);      \
  template StateVector state_from_coefficients<S>(const SpectralDecomposition<S>&, const StateVector&, double);

QLMPROT_INSTANTIATE(double)
QLMPROT_INSTANTIATE(Complex)

#undef QLMPROT_INSTANTIATE

}  // namespace qlmprot
