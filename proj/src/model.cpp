#include "qlmprot/model.hpp"

#include <bit>
#include <cmath>

namespace qlmprot {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::none:
      return "none";
    case ErrorKind::local:
      return "local";
    case ErrorKind::extreme:
      return "extreme";
  }
  return "?";
}

ErrorKind parse_error_kind(std::string_view name) {
  if (name == "none") return ErrorKind::none;
  if (name == "local") return ErrorKind::local;
  if (name == "extreme") return ErrorKind::extreme;
  throw std::invalid_argument("unknown error kind '" + std::string(name) + "'");
}

void ModelParams::validate() const {
  if (matter_sites < 2 || matter_sites % 2 != 0)
    throw std::invalid_argument("ModelParams: L must be even and at least 2");
  if (J != 1.0) throw std::invalid_argument("ModelParams: J is the energy unit and must be 1");
  if (!std::isfinite(mu) || !std::isfinite(lambda) || !std::isfinite(V))
    throw std::invalid_argument("ModelParams: couplings must be finite");
}

const ProtectionSequence& Protection::sequence() const {
  if (!sequence_) throw std::logic_error("Protection: no coefficient sequence for this kind");
  return *sequence_;
}

std::string Protection::describe() const {
  switch (kind_) {
    case Kind::none:
      return "none";
    case Kind::quadratic:
      return "quadratic";
    case Kind::linear:
      return "linear" + sequence_->to_string();
  }
  return "?";
}

RealOperator build_hopping(const SpinBasis& basis, double J) {
  Matrix<double> m = Matrix<double>::Zero(basis.dim(), basis.dim());
  for (int j = 1; j <= basis.matter_sites(); ++j) {
    const int left = basis.matter_qubit(j);
    const int link = basis.link_qubit(j);
    const int right = basis.matter_qubit(j + 1);
    accumulate(m, basis,
               PauliString<double>{J, {{left, PauliAxis::minus}, {link, PauliAxis::plus}, {right, PauliAxis::minus}}});
    accumulate(m, basis,
               PauliString<double>{J, {{left, PauliAxis::plus}, {link, PauliAxis::minus}, {right, PauliAxis::plus}}});
  }
  return RealOperator(std::move(m), true, false);
}

RealOperator build_mass(const SpinBasis& basis, double mu) {
  RealVector d = RealVector::Zero(basis.dim());
  for (Index s = 0; s < basis.dim(); ++s)
    for (int j = 1; j <= basis.matter_sites(); ++j) d(s) += 0.5 * mu * basis.z(s, basis.matter_qubit(j));
  return RealOperator::from_diagonal(d);
}

RealOperator build_h0(const ModelParams& params) {
  params.validate();
  const SpinBasis basis = params.basis();
  RealOperator h = build_hopping(basis, params.J);
  h += build_mass(basis, params.mu);
  return h;
}

RealOperator build_gauss(int j, const SpinBasis& basis) {
  if (j < 1 || j > basis.matter_sites()) throw std::invalid_argument("build_gauss: site index out of range");
  RealVector d(basis.dim());
  for (Index s = 0; s < basis.dim(); ++s) d(s) = gauss_value(basis, s, j);
  return RealOperator::from_diagonal(d);
}

RealOperator build_h1(ErrorKind kind, const SpinBasis& basis) {
  Matrix<double> m = Matrix<double>::Zero(basis.dim(), basis.dim());
  if (kind == ErrorKind::none) return RealOperator(std::move(m), true, true);
  for (int j = 1; j <= basis.matter_sites(); ++j) {
    const int a = basis.matter_qubit(j);
    const int b = basis.matter_qubit(j + 1);
    accumulate(m, basis, PauliString<double>{1.0, {{basis.link_qubit(j), PauliAxis::x}}});
    accumulate(m, basis, PauliString<double>{1.0, {{a, PauliAxis::plus}, {b, PauliAxis::plus}}});
    accumulate(m, basis, PauliString<double>{1.0, {{a, PauliAxis::minus}, {b, PauliAxis::minus}}});
  }
  if (kind == ErrorKind::extreme) {
    // prod_q (1 + xi X_q) = 2^{2L} |xi><xi| on the x-product state; in the z
    // basis that is the outer product of (xi^{popcount})_s with itself.
    const RealVector ones = RealVector::Ones(basis.dim());
    RealVector parity(basis.dim());
    for (Index s = 0; s < basis.dim(); ++s)
      parity(s) = (std::popcount(static_cast<std::uint64_t>(s)) % 2 == 0) ? 1.0 : -1.0;
    m.noalias() += ones * ones.transpose();
    m.noalias() += parity * parity.transpose();
  }
  return RealOperator(std::move(m), true, false);
}

RealVector protection_diagonal(const Protection& protection, const SpinBasis& basis) {
  RealVector d = RealVector::Zero(basis.dim());
  switch (protection.kind()) {
    case Protection::Kind::none:
      break;
    case Protection::Kind::linear: {
      const ProtectionSequence& c = protection.sequence();
      if (c.size() != basis.matter_sites())
        throw std::invalid_argument("build_protection: sequence length does not match L");
      for (Index s = 0; s < basis.dim(); ++s)
        d(s) = static_cast<double>(c.label(sector_of_state(basis, s))) / static_cast<double>(c.denominator());
      break;
    }
    case Protection::Kind::quadratic:
      for (Index s = 0; s < basis.dim(); ++s)
        for (int j = 1; j <= basis.matter_sites(); ++j) {
          const int g = gauss_value(basis, s, j);
          d(s) += g * g;
        }
      break;
  }
  return d;
}

RealOperator build_protection(const Protection& protection, const SpinBasis& basis) {
  return RealOperator::from_diagonal(protection_diagonal(protection, basis));
}

Matrix<double> ProtectedHamiltonian::matrix_at(double V) const {
  Matrix<double> m = unprotected.matrix();
  m.diagonal() += V * protection;
  return m;
}

RealOperator ProtectedHamiltonian::at(double V) const { return RealOperator(matrix_at(V), true, false); }

ProtectedHamiltonian prepare_hamiltonian(const ModelParams& params, const Protection& protection) {
  params.validate();
  const SpinBasis basis = params.basis();
  RealOperator h = build_h0(params);
  if (params.error != ErrorKind::none && params.lambda != 0.0) {
    RealOperator h1 = build_h1(params.error, basis);
    h += params.lambda * std::move(h1);
  }
  return ProtectedHamiltonian{std::move(h), protection_diagonal(protection, basis)};
}

RealOperator assemble(const ModelParams& params, const Protection& protection) {
  return prepare_hamiltonian(params, protection).at(params.V);
}

Index gauge_invariant_state(const SpinBasis& basis, std::span<const int> occupied_sites, LinkConvention convention) {
  const int l = basis.matter_sites();
  std::vector<int> matter(static_cast<std::size_t>(l), -1);
  for (int j : occupied_sites) {
    if (j < 1 || j > l) throw std::invalid_argument("gauge_invariant_state: site index out of range");
    matter[static_cast<std::size_t>(j - 1)] = 1;
  }
  // Link (L,1) orientation preferred by the convention: with L even, link L
  // is even, so it points up unless even links are the down ones.
  const int preferred = (convention == LinkConvention::odd_links_down) ? 1 : -1;
  for (int first : {preferred, -preferred}) {
    std::vector<int> links(static_cast<std::size_t>(l + 1));
    links[0] = first;  // link (0,1) == link (L,1)
    bool ok = true;
    for (int j = 1; j <= l && ok; ++j) {
      // G_j = 0  <=>  s_j + t_{j-1} + t_j + 1 = 0
      const int t = -(matter[static_cast<std::size_t>(j - 1)] + links[static_cast<std::size_t>(j - 1)] + 1);
      ok = (t == 1 || t == -1);
      links[static_cast<std::size_t>(j)] = t;
    }
    if (!ok || links[static_cast<std::size_t>(l)] != first) continue;
    Index state = 0;
    for (int j = 1; j <= l; ++j) {
      if (matter[static_cast<std::size_t>(j - 1)] < 0) state |= static_cast<Index>(basis.mask(basis.matter_qubit(j)));
      if (links[static_cast<std::size_t>(j)] < 0) state |= static_cast<Index>(basis.mask(basis.link_qubit(j)));
    }
    return state;
  }
  throw std::invalid_argument("gauge_invariant_state: no link configuration satisfies Gauss's law");
}

Index staggered_vacuum(const SpinBasis& basis, LinkConvention convention) {
  return gauge_invariant_state(basis, {}, convention);
}

Index two_particle_14(const SpinBasis& basis) {
  if (basis.matter_sites() < 4) throw std::invalid_argument("two_particle_14: needs L >= 4");
  const int sites[] = {1, 4};
  return gauge_invariant_state(basis, sites);
}

Index parse_bitstring(const SpinBasis& basis, std::string_view bits) {
  if (static_cast<int>(bits.size()) != basis.qubits())
    throw std::invalid_argument("parse_bitstring: expected " + std::to_string(basis.qubits()) + " characters");
  Index state = 0;
  for (int q = 0; q < basis.qubits(); ++q) {
    const char ch = bits[static_cast<std::size_t>(q)];
    if (ch != '0' && ch != '1') throw std::invalid_argument("parse_bitstring: only '0' and '1' allowed");
    if (ch == '1') state |= static_cast<Index>(basis.mask(q));
  }
  return state;
}

std::string format_bitstring(const SpinBasis& basis, Index state) {
  std::string out(static_cast<std::size_t>(basis.qubits()), '0');
  for (int q = 0; q < basis.qubits(); ++q)
    if (basis.bit(state, q)) out[static_cast<std::size_t>(q)] = '1';
  return out;
}

}  // namespace qlmprot
