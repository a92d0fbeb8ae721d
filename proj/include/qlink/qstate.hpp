#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <string>

namespace qlink {

using cxd = std::complex<double>;

/// Single photon in the {early |0>, late |1>} time-bin basis.
struct TimeBinQubit {
  cxd a0{1.0, 0.0};  ///< amplitude of the early bin
  cxd a1{0.0, 0.0};  ///< amplitude of the late bin

  double norm2() const { return std::norm(a0) + std::norm(a1); }
  TimeBinQubit normalized() const;
};

/// 2x2 density operator. Construction checks Hermiticity, unit trace and
/// positivity (within small tolerances), so a DensityMatrix value is always
/// physical.
class DensityMatrix {
 public:
  /// Defaults to the maximally mixed state.
  DensityMatrix() : m_(0.5 * Eigen::Matrix2cd::Identity()) {}
  explicit DensityMatrix(const Eigen::Matrix2cd& m);

  const Eigen::Matrix2cd& matrix() const { return m_; }

  static DensityMatrix pure(const TimeBinQubit& q);
  static DensityMatrix maximally_mixed();

 private:
  Eigen::Matrix2cd m_;
};

/// Stokes parameters (s0, s1, s2, s3); s0 is 1 by construction.
struct StokesVector {
  double s0 = 1.0;
  double s1 = 0.0;
  double s2 = 0.0;
  double s3 = 0.0;

  double bloch_norm() const { return std::sqrt(s1 * s1 + s2 * s2 + s3 * s3); }
};

/// Coincidence counts of the six projective measurements used for state
/// tomography: {|0>, |1>} from time bins t0/t2, {|+>, |->} and {|+i>, |-i>}
/// from the t1 interference ports at the two analyzer phase settings.
struct ProjectionCounts {
  std::int64_t n0 = 0;
  std::int64_t n1 = 0;
  std::int64_t n_plus = 0;
  std::int64_t n_minus = 0;
  std::int64_t n_plus_i = 0;
  std::int64_t n_minus_i = 0;
};

enum class BellState { PhiPlus, PhiMinus, PsiPlus, PsiMinus };

std::string to_string(BellState b);

/// Pauli matrices sigma_0..sigma_3 (identity, x, y, z).
const Eigen::Matrix2cd& pauli(int index);

/// Bloch-angle construction: a0 = cos(polar/2), a1 = e^{i azimuth} sin(polar/2).
TimeBinQubit make_qubit(double polar, double azimuth);

/// The six cardinal states |0>,|1>,|+>,|->,|+i>,|-i> in that order.
TimeBinQubit cardinal_state(int index);
std::string cardinal_state_name(int index);

/// sigma_p |psi>, renormalized; global phase not fixed.
TimeBinQubit apply_pauli(const TimeBinQubit& state, int pauli_index);

/// State the central node should hold after a successful teleportation
/// heralded by `outcome`: sigma_x|psi> for PsiPlus, sigma_y|psi> for
/// PsiMinus. The analyzer cannot herald PhiPlus/PhiMinus; those throw.
TimeBinQubit expected_teleported_state(const TimeBinQubit& input,
                                       BellState outcome);

/// Linear-inversion tomography result. `rho` is the physical estimate
/// (negative eigenvalues clamped to zero, trace renormalized); `raw` keeps
/// the unprojected matrix for diagnostics.
struct TomographyResult {
  DensityMatrix rho;
  Eigen::Matrix2cd raw;
  StokesVector stokes_raw;
  bool projected = false;
};

/// Stokes reconstruction: s1 = (n+ - n-)/(n0 + n1), s2 = (n+i - n-i)/(n0 + n1),
/// s3 = (n0 - n1)/(n0 + n1), rho = (1/2) sum_i s_i sigma_i.
TomographyResult reconstruct_density(const ProjectionCounts& counts);

/// Uhlmann fidelity [Tr sqrt(sqrt(rho_aim) rho sqrt(rho_aim))]^2, evaluated
/// by Hermitian eigendecomposition. Symmetric in its arguments.
double fidelity(const DensityMatrix& rho_aim, const DensityMatrix& rho);

/// |<a|b>|^2 for pure states.
double overlap2(const TimeBinQubit& a, const TimeBinQubit& b);

/// (1/2) Tr |a - b|, the trace distance between qubit density matrices.
double trace_distance(const DensityMatrix& a, const DensityMatrix& b);

/// Exact probabilities of the six projective outcomes for a given state,
/// ordered as ProjectionCounts fields. Each basis pair sums to 1.
struct ProjectionProbabilities {
  double p0, p1, p_plus, p_minus, p_plus_i, p_minus_i;
};
ProjectionProbabilities projection_probabilities(const DensityMatrix& rho);

}  // namespace qlink
