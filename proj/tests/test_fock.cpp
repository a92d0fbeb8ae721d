#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qlink/fock.hpp"

using namespace qlink::fock;
using qlink::fock::cxd;

namespace {
const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
}

TEST_CASE("norm accounting with repeated modes") {
  State s = State::vacuum();
  CHECK(s.norm2() == doctest::Approx(1.0));
  // (a0^dag)^2 |0> has norm^2 = 2!
  s.apply_creation({{0, 1.0}});
  s.apply_creation({{0, 1.0}});
  CHECK(s.norm2() == doctest::Approx(2.0));
  s.scale(1.0 / std::sqrt(2.0));
  CHECK(s.norm2() == doctest::Approx(1.0));
}

TEST_CASE("beam splitter on a single photon") {
  State s = State::vacuum();
  s.apply_creation({{0, 1.0}});
  s.substitute(0, {{1, cxd(kInvSqrt2, 0)}, {2, cxd(kInvSqrt2, 0)}});
  const auto probs = s.pattern_probabilities();
  CHECK(probs.at({1}) == doctest::Approx(0.5));
  CHECK(probs.at({2}) == doctest::Approx(0.5));
  CHECK(s.norm2() == doctest::Approx(1.0));
}

TEST_CASE("hong-ou-mandel bunching at a 50:50 splitter") {
  State s = State::vacuum();
  s.apply_creation({{0, 1.0}});  // port a
  s.apply_creation({{1, 1.0}});  // port b
  s.substitute(0, {{2, cxd(kInvSqrt2, 0)}, {3, cxd(kInvSqrt2, 0)}});
  s.substitute(1, {{2, cxd(kInvSqrt2, 0)}, {3, cxd(-kInvSqrt2, 0)}});
  const auto probs = s.pattern_probabilities();
  CHECK(probs.at({2, 2}) == doctest::Approx(0.5));
  CHECK(probs.at({3, 3}) == doctest::Approx(0.5));
  // coincidence term cancels exactly
  CHECK(probs.count({2, 3}) + probs.count({3, 2}) == 0);
}

TEST_CASE("distinguishable photons route classically") {
  State s = State::vacuum();
  s.apply_creation({{0, 1.0}});
  s.apply_creation({{1, 1.0}});
  // photon 0 goes to output modes (2,3), photon 1 to orthogonal copies (4,5)
  s.substitute(0, {{2, cxd(kInvSqrt2, 0)}, {3, cxd(kInvSqrt2, 0)}});
  s.substitute(1, {{4, cxd(kInvSqrt2, 0)}, {5, cxd(-kInvSqrt2, 0)}});
  const auto probs = s.pattern_probabilities();
  // cross-arm coincidence = photons in different spatial arms = 1/2
  const double cross = probs.at({2, 5}) + probs.at({3, 4});
  CHECK(cross == doctest::Approx(0.5));
}

TEST_CASE("loss substitution preserves total probability") {
  State s = State::vacuum();
  s.apply_creation({{0, cxd(0.6, 0)}, {1, cxd(0.8, 0)}});
  s.apply_creation({{0, cxd(0.6, 0)}, {1, cxd(0.8, 0)}});
  s.scale(1.0 / std::sqrt(2.0));
  CHECK(s.norm2() == doctest::Approx(1.0));
  const double t = 0.3;
  s.substitute(0, {{2, std::sqrt(t)}, {9, std::sqrt(1 - t)}});
  s.substitute(1, {{3, std::sqrt(t)}, {10, std::sqrt(1 - t)}});
  double total = 0.0;
  for (const auto& [pattern, p] : s.pattern_probabilities()) {
    (void)pattern;
    total += p;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("tensor product composes independent subsystems") {
  State a = State::vacuum();
  a.apply_creation({{0, cxd(kInvSqrt2, 0)}, {1, cxd(kInvSqrt2, 0)}});
  State b = State::vacuum();
  b.apply_creation({{2, 1.0}});
  const State ab = a.tensor(b);
  const auto probs = ab.pattern_probabilities();
  CHECK(probs.at({0, 2}) == doctest::Approx(0.5));
  CHECK(probs.at({1, 2}) == doctest::Approx(0.5));
}

TEST_CASE("substitution image may not contain its own source") {
  State s = State::vacuum();
  s.apply_creation({{0, 1.0}});
  CHECK_THROWS_AS(s.substitute(0, {{0, 1.0}}), std::invalid_argument);
}
