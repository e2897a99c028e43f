// core.hpp - dense operator algebra on a chain of 2L qubits and the Hermitian
// spectral machinery shared by every other module.

#ifndef QLMPROT_CORE_HPP
#define QLMPROT_CORE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <complex>
#include <cstdint>
#include <exception>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

namespace qlmprot {

using Index = Eigen::Index;
using Complex = std::complex<double>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RealVector = Eigen::VectorXd;
using StateVector = Eigen::VectorXcd;

template <typename T>
struct is_complex : std::false_type {};
template <typename T>
struct is_complex<std::complex<T>> : std::true_type {};
template <typename T>
inline constexpr bool is_complex_v = is_complex<T>::value;

/// Raised when a caller violates a documented precondition on operator flags.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised when a request would exceed what dense enumeration can hold.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Chain of L matter sites and L links with periodic wrap. Qubits alternate
/// matter/link: qubit 2(j-1) is matter site j, qubit 2(j-1)+1 is link (j, j+1).
/// Basis index bits are ordered with qubit 0 most significant; bit 0 is spin
/// up (z = +1), bit 1 is spin down (z = -1).
class SpinBasis {
 public:
  explicit SpinBasis(int matter_sites);

  int matter_sites() const { return matter_sites_; }
  int qubits() const { return 2 * matter_sites_; }
  Index dim() const { return Index{1} << qubits(); }

  /// Site index j is 1-based and wraps periodically (j = 0 is site L).
  int wrap(int j) const;
  int matter_qubit(int j) const { return 2 * (wrap(j) - 1); }
  /// Qubit of link (j, j+1).
  int link_qubit(int j) const { return 2 * (wrap(j) - 1) + 1; }

  std::uint64_t mask(int qubit) const { return std::uint64_t{1} << (qubits() - 1 - qubit); }
  int bit(Index state, int qubit) const {
    return static_cast<int>((static_cast<std::uint64_t>(state) >> (qubits() - 1 - qubit)) & 1U);
  }
  int z(Index state, int qubit) const { return 1 - 2 * bit(state, qubit); }

  bool operator==(const SpinBasis&) const = default;

 private:
  int matter_sites_;
};

enum class PauliAxis { x, y, z, plus, minus, identity };

/// A product of single-qubit factors with a coefficient. Each such string maps
/// a basis state to at most one basis state, so it can be accumulated into a
/// dense matrix in O(dim).
template <typename Scalar>
struct PauliString {
  Scalar coefficient{1};
  std::vector<std::pair<int, PauliAxis>> factors;
};

/// Adds coefficient * string into `target` (dim x dim).
template <typename Scalar>
void accumulate(Matrix<Scalar>& target, const SpinBasis& basis, const PauliString<Scalar>& term);

template <typename Scalar>
class Operator {
 public:
  Operator() = default;
  /// Checks the flags against the entries; throws ContractError on mismatch.
  Operator(Matrix<Scalar> entries, bool hermitian, bool diagonal);

  static Operator zero(Index dim, bool hermitian = true, bool diagonal = true);
  static Operator identity(Index dim);
  static Operator from_diagonal(const RealVector& values);

  Index dim() const { return entries_.rows(); }
  bool hermitian() const { return hermitian_; }
  bool diagonal() const { return diagonal_; }
  const Matrix<Scalar>& matrix() const { return entries_; }
  /// Releases the storage; the operator is left empty.
  Matrix<Scalar> take_matrix() && { return std::move(entries_); }

  /// Real part of the main diagonal.
  RealVector diagonal_values() const { return entries_.diagonal().real(); }

  Operator& operator+=(const Operator& other);
  Operator& operator-=(const Operator& other);
  Operator& operator*=(double factor);

 private:
  Matrix<Scalar> entries_;
  bool hermitian_ = true;
  bool diagonal_ = true;
};

template <typename Scalar>
Operator<Scalar> operator+(Operator<Scalar> a, const Operator<Scalar>& b) {
  return a += b;
}
template <typename Scalar>
Operator<Scalar> operator-(Operator<Scalar> a, const Operator<Scalar>& b) {
  return a -= b;
}
template <typename Scalar>
Operator<Scalar> operator*(double factor, Operator<Scalar> a) {
  return a *= factor;
}

/// Product ab. Flags are dropped except diagonality of two diagonal factors.
template <typename Scalar>
Operator<Scalar> operator*(const Operator<Scalar>& a, const Operator<Scalar>& b);

/// [a, b] as a plain matrix (generally neither Hermitian nor diagonal).
template <typename Scalar>
Matrix<Scalar> commutator(const Operator<Scalar>& a, const Operator<Scalar>& b);

template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
  return m.size() == 0 ? 0.0 : static_cast<double>(m.cwiseAbs().maxCoeff());
}

template <typename Scalar>
double hermiticity_error(const Matrix<Scalar>& m) {
  return max_abs(m - m.adjoint());
}

/// Single-qubit Pauli or ladder operator tensored with identity. Axis y is
/// only available for complex scalars.
template <typename Scalar>
Operator<Scalar> embed_pauli(PauliAxis axis, int qubit, const SpinBasis& basis);

using RealOperator = Operator<double>;
using ComplexOperator = Operator<Complex>;

template <typename Scalar>
struct SpectralDecomposition {
  RealVector eigenvalues;      // ascending
  Matrix<Scalar> eigenvectors; // columns

  Index dim() const { return eigenvalues.size(); }
  Matrix<Scalar> reconstruct() const;
  double unitarity_error() const;
  /// Smallest gap between consecutive eigenvalues (infinity for dim < 2).
  double min_level_spacing() const;
};

/// Dense Hermitian eigendecomposition. Throws ContractError unless the
/// operator carries the Hermitian flag.
template <typename Scalar>
SpectralDecomposition<Scalar> eigh(const Operator<Scalar>& op);

/// Eigenvalues only (ascending), consuming the matrix.
template <typename Scalar>
RealVector eigvalsh(Matrix<Scalar>&& hermitian_matrix);

/// Same, consuming a matrix the caller vouches is Hermitian (no copy).
template <typename Scalar>
SpectralDecomposition<Scalar> eigh(Matrix<Scalar>&& hermitian_matrix);

/// Spectrum of a matrix that is block diagonal under a known partition of the
/// basis (e.g. an operator commuting with every G_j). Each block is
/// diagonalized on its own; entries coupling different blocks must vanish.
template <typename Scalar>
struct BlockSpectrum {
  struct Block {
    std::vector<Index> states;
    RealVector energies;
    Matrix<Scalar> vectors;
  };
  Index dim = 0;
  std::vector<Block> blocks;

  /// psi <- e^{-i H t} psi, in place.
  void evolve(StateVector& psi, double t) const;
  /// Dense equivalent with globally ascending eigenvalues.
  SpectralDecomposition<Scalar> dense() const;
};

/// Throws ContractError when an entry larger than `tolerance` couples two
/// different blocks.
template <typename Scalar>
BlockSpectrum<Scalar> eigh_blocks(const Matrix<Scalar>& hermitian_matrix, const std::vector<int>& block_of_state,
                                  double tolerance = 1e-12);

/// e^{-i energy t}, with energy*t reduced modulo 2 pi in extended precision.
Complex unit_phase(double energy, double t);
/// energy*t reduced into [0, 2 pi) in extended precision.
double reduced_phase(double energy, double t);

/// V e^{-i diag(E) t} V^H psi, computed per eigenvalue (no matrix exponential).
template <typename Scalar>
StateVector evolve_with_spectrum(const SpectralDecomposition<Scalar>& spectrum, const StateVector& psi,
                                 double t);

/// Amplitudes of psi in the eigenbasis, V^H psi.
template <typename Scalar>
StateVector eigenbasis_coefficients(const SpectralDecomposition<Scalar>& spectrum, const StateVector& psi);

/// V (e^{-i E t} * coefficients), for coefficients from eigenbasis_coefficients.
template <typename Scalar>
StateVector state_from_coefficients(const SpectralDecomposition<Scalar>& spectrum,
                                    const StateVector& coefficients, double t);

StateVector basis_state(const SpinBasis& basis, Index index);

void require_normalized(const StateVector& psi, double tolerance = 1e-10);

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Callers write
/// results by index, so output never depends on scheduling. The exception of
/// the lowest failing index is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(count, threads < 1 ? 1 : static_cast<std::size_t>(threads));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace qlmprot

#endif  // QLMPROT_CORE_HPP
