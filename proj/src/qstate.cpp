#include "qlink/qstate.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace qlink {

namespace {

constexpr double kHermTol = 1e-10;
constexpr double kEigFloor = 1e-10;

const Eigen::Matrix2cd& pauli_table(int index) {
  static const std::array<Eigen::Matrix2cd, 4> table = [] {
    std::array<Eigen::Matrix2cd, 4> t;
    const cxd i(0.0, 1.0);
    t[0] << 1, 0, 0, 1;
    t[1] << 0, 1, 1, 0;
    t[2] << 0, -i, i, 0;
    t[3] << 1, 0, 0, -1;
    return t;
  }();
  if (index < 0 || index > 3) {
    throw std::invalid_argument("pauli index must be in 0..3");
  }
  return table[static_cast<std::size_t>(index)];
}

}  // namespace

const Eigen::Matrix2cd& pauli(int index) { return pauli_table(index); }

TimeBinQubit TimeBinQubit::normalized() const {
  const double n = std::sqrt(norm2());
  if (n <= 0.0) throw std::domain_error("cannot normalize null state");
  return {a0 / n, a1 / n};
}

DensityMatrix::DensityMatrix(const Eigen::Matrix2cd& m) : m_(m) {
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > kHermTol) {
    throw std::invalid_argument("density matrix not Hermitian");
  }
  if (std::abs(m.trace().real() - 1.0) > kHermTol ||
      std::abs(m.trace().imag()) > kHermTol) {
    throw std::invalid_argument("density matrix trace != 1");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(m_);
  if (es.eigenvalues().minCoeff() < -kEigFloor) {
    throw std::invalid_argument("density matrix not positive semidefinite");
  }
}

DensityMatrix DensityMatrix::pure(const TimeBinQubit& q) {
  const TimeBinQubit n = q.normalized();
  Eigen::Vector2cd v;
  v << n.a0, n.a1;
  return DensityMatrix(v * v.adjoint());
}

DensityMatrix DensityMatrix::maximally_mixed() {
  return DensityMatrix(0.5 * Eigen::Matrix2cd::Identity());
}

std::string to_string(BellState b) {
  switch (b) {
    case BellState::PhiPlus: return "Phi+";
    case BellState::PhiMinus: return "Phi-";
    case BellState::PsiPlus: return "Psi+";
    case BellState::PsiMinus: return "Psi-";
  }
  return "?";
}

TimeBinQubit make_qubit(double polar, double azimuth) {
  return {cxd(std::cos(polar / 2.0), 0.0),
          std::polar(std::sin(polar / 2.0), azimuth)};
}

TimeBinQubit cardinal_state(int index) {
  constexpr double pi = 3.14159265358979323846;
  switch (index) {
    case 0: return make_qubit(0.0, 0.0);         // |0>
    case 1: return make_qubit(pi, 0.0);          // |1>
    case 2: return make_qubit(pi / 2, 0.0);      // |+>
    case 3: return make_qubit(pi / 2, pi);       // |->
    case 4: return make_qubit(pi / 2, pi / 2);   // |+i>
    case 5: return make_qubit(pi / 2, -pi / 2);  // |-i>
    default: throw std::invalid_argument("cardinal state index must be 0..5");
  }
}

std::string cardinal_state_name(int index) {
  static const char* names[6] = {"0", "1", "+", "-", "+i", "-i"};
  if (index < 0 || index > 5) {
    throw std::invalid_argument("cardinal state index must be 0..5");
  }
  return names[index];
}

TimeBinQubit apply_pauli(const TimeBinQubit& state, int pauli_index) {
  const Eigen::Matrix2cd& p = pauli(pauli_index);
  Eigen::Vector2cd v;
  v << state.a0, state.a1;
  Eigen::Vector2cd w = p * v;
  return TimeBinQubit{w(0), w(1)}.normalized();
}

TimeBinQubit expected_teleported_state(const TimeBinQubit& input,
                                       BellState outcome) {
  switch (outcome) {
    case BellState::PsiPlus: return apply_pauli(input, 1);
    case BellState::PsiMinus: return apply_pauli(input, 2);
    default:
      throw std::invalid_argument(
          "analyzer heralds only Psi+ / Psi-; no teleported state is defined "
          "for " + to_string(outcome));
  }
}

TomographyResult reconstruct_density(const ProjectionCounts& c) {
  if (c.n0 < 0 || c.n1 < 0 || c.n_plus < 0 || c.n_minus < 0 ||
      c.n_plus_i < 0 || c.n_minus_i < 0) {
    throw std::invalid_argument("projection counts must be non-negative");
  }
  const double denom = static_cast<double>(c.n0 + c.n1);
  if (denom <= 0.0) {
    throw std::invalid_argument("tomography needs n0 + n1 > 0");
  }
  StokesVector s;
  s.s0 = 1.0;
  s.s1 = static_cast<double>(c.n_plus - c.n_minus) / denom;
  s.s2 = static_cast<double>(c.n_plus_i - c.n_minus_i) / denom;
  s.s3 = static_cast<double>(c.n0 - c.n1) / denom;

  Eigen::Matrix2cd raw = 0.5 * (s.s0 * pauli(0) + s.s1 * pauli(1) +
                                s.s2 * pauli(2) + s.s3 * pauli(3));

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(raw);
  Eigen::Vector2d ev = es.eigenvalues();
  bool projected = false;
  Eigen::Matrix2cd phys = raw;
  if (ev.minCoeff() < 0.0) {
    projected = true;
    Eigen::Vector2d clamped = ev.cwiseMax(0.0);
    const double tr = clamped.sum();
    if (tr <= 0.0) throw std::domain_error("projection collapsed to zero");
    clamped /= tr;
    phys = es.eigenvectors() * clamped.asDiagonal() *
           es.eigenvectors().adjoint();
  }
  // Clean up rounding asymmetry before the physicality checks.
  phys = 0.5 * (phys + phys.adjoint().eval());
  phys /= phys.trace().real();
  return TomographyResult{DensityMatrix(phys), raw, s, projected};
}

double fidelity(const DensityMatrix& rho_aim, const DensityMatrix& rho) {
  // Eigenvalues below the floor are rounding debris; sqrt would amplify
  // them to ~1e-8 and spoil the pure-state reduction.
  auto floored = [](const Eigen::Vector2d& ev) {
    Eigen::Vector2d out = ev;
    for (int i = 0; i < 2; ++i) {
      if (out(i) < kEigFloor) out(i) = 0.0;
    }
    return out;
  };
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(rho_aim.matrix());
  const Eigen::Vector2d ev = floored(es.eigenvalues());
  Eigen::Matrix2cd sqrt_aim = es.eigenvectors() *
                              ev.cwiseSqrt().asDiagonal() *
                              es.eigenvectors().adjoint();
  Eigen::Matrix2cd inner = sqrt_aim * rho.matrix() * sqrt_aim;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es2(inner);
  const Eigen::Vector2d ev2 = floored(es2.eigenvalues());
  const double tr_sqrt = ev2.cwiseSqrt().sum();
  const double f = tr_sqrt * tr_sqrt;
  return f < 0.0 ? 0.0 : (f > 1.0 ? 1.0 : f);
}

double overlap2(const TimeBinQubit& a, const TimeBinQubit& b) {
  const TimeBinQubit an = a.normalized();
  const TimeBinQubit bn = b.normalized();
  return std::norm(std::conj(an.a0) * bn.a0 + std::conj(an.a1) * bn.a1);
}

double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  Eigen::Matrix2cd d = a.matrix() - b.matrix();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(d);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

ProjectionProbabilities projection_probabilities(const DensityMatrix& rho) {
  const Eigen::Matrix2cd& m = rho.matrix();
  auto expect = [&](int i) { return (m * pauli(i)).trace().real(); };
  const double s1 = expect(1), s2 = expect(2), s3 = expect(3);
  return ProjectionProbabilities{
      0.5 * (1 + s3), 0.5 * (1 - s3), 0.5 * (1 + s1),
      0.5 * (1 - s1), 0.5 * (1 + s2), 0.5 * (1 - s2)};
}

}  // namespace qlink
