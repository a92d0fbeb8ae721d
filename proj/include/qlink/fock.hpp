#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <vector>

namespace qlink::fock {

using cxd = std::complex<double>;

/// Optical mode label. The meaning of each id is owned by the caller.
/// Mode ids are limited to 254 and states to 8 photons.
using Mode = std::uint16_t;

/// A photon multiset: one entry per photon, kept sorted.
using Photons = std::vector<Mode>;

struct ModeAmp {
  Mode mode;
  cxd amp;
};

/// Few-photon state represented as a polynomial in creation operators acting
/// on vacuum: sum_mu c_mu prod_{m in mu} a_m^dag |0>. Passive linear optics
/// (beam splitters, phase shifts, loss onto environment modes) act by
/// substituting each creation operator with a linear combination, which is
/// exact for any photon number.
class State {
 public:
  State();

  static State vacuum();

  /// Adds c * prod a_m^dag to the polynomial (photons in any order).
  void add_term(Photons photons, cxd amp);

  /// Multiplies the state by sum_i amp_i a_{mode_i}^dag (adds one photon in
  /// a superposition mode).
  void apply_creation(const std::vector<ModeAmp>& superposition);

  /// Replaces every a_from^dag with sum_i amp_i a_{mode_i}^dag. The image
  /// must not contain `from` itself. Rows of a unitary (or isometry, when
  /// loss modes are included) preserve the norm.
  void substitute(Mode from, const std::vector<ModeAmp>& image);

  /// <state|state>; includes the n! factors of repeated modes.
  double norm2() const;

  void scale(cxd factor);

  State tensor(const State& other) const;

  /// Probability of each occupation pattern (key: sorted photon multiset).
  /// Correct once all applied maps form an isometry and the input was
  /// normalized; probabilities then sum to 1.
  std::map<Photons, double> pattern_probabilities() const;

  /// Allocation-light traversal of the same probabilities.
  void for_each_pattern(
      const std::function<void(const Photons&, double)>& fn) const;

  std::map<Photons, cxd> terms() const;

  std::size_t term_count() const;

 private:
  struct Rep;
  void ensure_unique();
  std::shared_ptr<Rep> rep_;
};

/// n! for the small n encountered here.
double factorial(int n);

/// Product of n_i! over the multiplicities of a sorted multiset.
double multiplicity_factor(const Photons& photons);

}  // namespace qlink::fock
