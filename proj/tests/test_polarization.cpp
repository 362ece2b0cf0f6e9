// Unit tests for polarization vectors and spherical-tensor algebra.
//
// Oracles (defined first, used nowhere in the library): a hard-coded
// Clebsch-Gordan literal table for 1 (x) 1 couplings, the associated-Legendre
// route to harmonics of real directions, and a pure-Eigen Cartesian evaluation
// of the circular-pair formula.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>

#include "obesteady/polarization.hpp"

using obesteady::Complex;
using obesteady::ComplexVector3;
using obesteady::Frame;
using obesteady::Polarization;
using obesteady::SphericalTensor;
using obesteady::circular_pair;
using obesteady::cross;
using obesteady::dot;
using obesteady::from_cartesian;
using obesteady::natural_frame_angle;
using obesteady::polarization_from_ellipticity;
using obesteady::spherical_dot;
using obesteady::spherical_harmonic;
using obesteady::tensor_power;
using obesteady::tensor_product;
using obesteady::to_cartesian;

namespace {

constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

// Rank-2 tensor power from hard-coded 1 (x) 1 -> 2 Clebsch-Gordan literals:
// C^{22}_{1111} = 1, C^{21}_{1110} = 1/sqrt2, C^{20}_{111-1} = 1/sqrt6,
// C^{20}_{1010} = sqrt(2/3).
std::array<Complex, 5> oracle_rank2(const ComplexVector3& a) {
  const Complex p = a.q_plus, z = a.q_zero, m = a.q_minus;
  return {p * p, std::sqrt(2.0) * p * z,
          2.0 * p * m / std::sqrt(6.0) + std::sqrt(2.0 / 3.0) * z * z,
          std::sqrt(2.0) * z * m, m * m};
}

// Harmonic of a real unit direction (theta, phi) via std::assoc_legendre
// (which omits the Condon-Shortley phase; it is restored explicitly):
//   n_{LM} = (-1)^M sqrt((L-M)!/(L+M)!) P_L^M(cos theta) e^{i M phi}, M >= 0,
//   n_{L,-M} = (-1)^M conj(n_{LM}).
Complex oracle_real_harmonic(int l, int m, double theta, double phi) {
  const int am = std::abs(m);
  double ratio = 1.0;  // (L-|M|)!/(L+|M|)!
  for (int k = l - am + 1; k <= l + am; ++k) ratio /= k;
  const double mag = std::sqrt(ratio) * std::assoc_legendre(static_cast<unsigned>(l),
                                                            static_cast<unsigned>(am),
                                                            std::cos(theta));
  const Complex positive = (am % 2 == 0 ? 1.0 : -1.0) * mag *
                           std::exp(Complex(0.0, am * phi));
  if (m >= 0) return positive;
  return (am % 2 == 0 ? 1.0 : -1.0) * std::conj(positive);
}

// Plain bilinear cross product (Eigen's .cross() conjugates complex results).
Eigen::Vector3cd plain_cross(const Eigen::Vector3cd& u, const Eigen::Vector3cd& v) {
  return Eigen::Vector3cd(u.y() * v.z() - u.z() * v.y(),
                          u.z() * v.x() - u.x() * v.z(),
                          u.x() * v.y() - u.y() * v.x());
}

// Circular-pair formula evaluated directly in Cartesian components with Eigen
// only (no spherical machinery).
std::pair<Eigen::Vector3cd, Eigen::Vector3cd> oracle_circular_pair(double eps) {
  const Eigen::Vector3cd e(std::cos(eps), Complex(0.0, 1.0) * std::sin(eps), 0.0);
  const Eigen::Vector3cd estar = e.conjugate();
  const Complex x = e.transpose() * e;  // plain (e.e), no conjugation
  const Eigen::Vector3cd e_x_estar = plain_cross(e, estar);
  const Eigen::Vector3cd outer = plain_cross(e, e_x_estar);
  const double ax = std::abs(x);
  const Complex circ = Complex(0.0, 1.0) * std::sqrt(x);
  const double denom = std::sqrt((1.0 - ax * ax) * (1.0 + ax));
  return {(outer + circ * e_x_estar) / denom, (outer - circ * e_x_estar) / denom};
}

ComplexVector3 random_vector(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return ComplexVector3(Complex(u(rng), u(rng)), Complex(u(rng), u(rng)),
                        Complex(u(rng), u(rng)));
}

double max_component_distance(const SphericalTensor& s, const SphericalTensor& t) {
  REQUIRE(s.rank() == t.rank());
  double worst = 0.0;
  for (int two_m = s.rank().two_j; two_m >= -s.rank().two_j; two_m -= 2)
    worst = std::max(worst, std::abs(s.component(two_m) - t.component(two_m)));
  return worst;
}

}  // namespace

// ---------------------------------------------------------------------------
// Frames and ellipticity
// ---------------------------------------------------------------------------

TEST_CASE("polarization components in each frame", "[polarization]") {
  // Linear light in the natural frames is pure e_0.
  for (Frame f : {Frame::NaturalPlus, Frame::NaturalMinus}) {
    const Polarization p = polarization_from_ellipticity(0.0, f);
    CHECK(std::abs(p.e.q_plus) == 0.0);
    CHECK(p.e.q_zero == Complex(1.0, 0.0));
    CHECK(std::abs(p.e.q_minus) == 0.0);
  }
  // Circular light has a single spherical component and (e.e) = 0.
  for (Frame f : {Frame::Conventional, Frame::NaturalPlus, Frame::NaturalMinus}) {
    const Polarization p = polarization_from_ellipticity(kPi / 4, f);
    int nonzero = 0;
    for (int q : {1, 0, -1})
      if (std::abs(p.e.component(q)) > 1e-12) ++nonzero;
    CHECK(nonzero == 1);
    CHECK(std::abs(dot(p.e, p.e)) < 1e-12);
  }
  // Pinned natural-frame form at eps = pi/8.
  const Polarization p8 = polarization_from_ellipticity(kPi / 8, Frame::NaturalPlus);
  CHECK(p8.e.q_zero.real() == Catch::Approx(std::sqrt(std::cos(kPi / 4))));
  CHECK(p8.e.q_plus.real() ==
        Catch::Approx(-std::sqrt(2.0) * std::sin(kPi / 8)));
  CHECK(std::abs(p8.e.q_minus) == 0.0);
  // The mirror gauge carries the circular content on e_{-1} instead.
  const Polarization m8 = polarization_from_ellipticity(kPi / 8, Frame::NaturalMinus);
  CHECK(m8.e.q_minus.real() ==
        Catch::Approx(-std::sqrt(2.0) * std::sin(kPi / 8)));
  CHECK(std::abs(m8.e.q_plus) == 0.0);

  CHECK_THROWS_AS(polarization_from_ellipticity(0.26 * kPi, Frame::NaturalPlus),
                  std::invalid_argument);
}

TEST_CASE("polarization invariants across the ellipticity range", "[polarization]") {
  for (Frame f : {Frame::Conventional, Frame::NaturalPlus, Frame::NaturalMinus}) {
    for (double eps = -kPi / 4; eps <= kPi / 4 + 1e-12; eps += kPi / 16) {
      const Polarization p = polarization_from_ellipticity(eps, f);
      const Complex x = dot(p.e, p.e);
      const Complex unit = dot(p.e.conjugated(), p.e);
      CHECK(std::abs(unit - 1.0) < 1e-14);           // (e*.e) = 1
      CHECK(std::abs(x.imag()) < 1e-14);             // Im(e.e) = 0
      CHECK(x.real() == Catch::Approx(std::cos(2 * eps)).margin(1e-14));
    }
  }
}

TEST_CASE("conventional frame matches its Cartesian definition", "[polarization]") {
  const double eps = 0.3;
  const Polarization p = polarization_from_ellipticity(eps, Frame::Conventional);
  const Eigen::Vector3cd c = to_cartesian(p.e);
  CHECK(std::abs(c(0) - std::cos(eps)) < 1e-15);
  CHECK(std::abs(c(1) - Complex(0.0, std::sin(eps))) < 1e-15);
  CHECK(std::abs(c(2)) < 1e-15);
}

TEST_CASE("cartesian round trip and vector algebra", "[polarization]") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const ComplexVector3 a = random_vector(rng), b = random_vector(rng);
    // Round trip.
    const ComplexVector3 back = from_cartesian(to_cartesian(a));
    CHECK(std::abs(back.q_plus - a.q_plus) < 1e-14);
    CHECK(std::abs(back.q_zero - a.q_zero) < 1e-14);
    CHECK(std::abs(back.q_minus - a.q_minus) < 1e-14);
    // Spherical dot equals the plain Cartesian dot.
    const Complex cart = to_cartesian(a).transpose() * to_cartesian(b);
    CHECK(std::abs(dot(a, b) - cart) < 1e-13);
    // Conjugate vector corresponds to componentwise Cartesian conjugation.
    CHECK((to_cartesian(a.conjugated()) - to_cartesian(a).conjugate()).norm() < 1e-14);
    // Cross product against the component formula.
    CHECK((to_cartesian(cross(a, b)) - plain_cross(to_cartesian(a), to_cartesian(b)))
              .norm() < 1e-13);
  }
}

TEST_CASE("natural frame angle", "[polarization]") {
  CHECK(natural_frame_angle(kPi / 4) == Catch::Approx(0.0).margin(1e-12));
  CHECK(natural_frame_angle(0.0) == Catch::Approx(kPi / 2));
  CHECK(natural_frame_angle(kPi / 8) == Catch::Approx(1.1437).margin(5e-5));
  CHECK(natural_frame_angle(kPi / 8) ==
        Catch::Approx(std::acos(std::tan(kPi / 8))).epsilon(1e-14));
  CHECK(natural_frame_angle(-kPi / 8) == natural_frame_angle(kPi / 8));
}

// ---------------------------------------------------------------------------
// Tensor powers
// ---------------------------------------------------------------------------

TEST_CASE("tensor_power rank 1 returns the vector components", "[polarization]") {
  std::mt19937 rng(3);
  const ComplexVector3 a = random_vector(rng);
  const SphericalTensor t = tensor_power(a, 1);
  CHECK(t.component(2) == a.q_plus);
  CHECK(t.component(0) == a.q_zero);
  CHECK(t.component(-2) == a.q_minus);
}

TEST_CASE("tensor_power of a single circular component is stretched", "[polarization]") {
  const ComplexVector3 a(1.0, 0.0, 0.0);  // pure a_{+1}
  for (int l : {2, 3, 5, 8}) {
    const SphericalTensor t = tensor_power(a, l);
    for (int two_m = 2 * l; two_m >= -2 * l; two_m -= 2) {
      if (two_m == 2 * l)
        CHECK(std::abs(t.component(two_m) - 1.0) < 1e-14);  // stretched CGs are 1
      else
        CHECK(std::abs(t.component(two_m)) == 0.0);
    }
  }
}

TEST_CASE("tensor_power rank 2 against the CG-literal oracle", "[polarization]") {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const ComplexVector3 a = random_vector(rng);
    const std::array<Complex, 5> expected = oracle_rank2(a);
    const SphericalTensor t = tensor_power(a, 2);
    for (int k = 0; k < 5; ++k)
      CHECK(std::abs(t.components()[static_cast<std::size_t>(k)] -
                     expected[static_cast<std::size_t>(k)]) < 1e-14);
  }
  // e_0 direction: only M = 0 survives, with value C^{20}_{1010} = sqrt(2/3).
  const SphericalTensor t0 = tensor_power(ComplexVector3(0.0, 1.0, 0.0), 2);
  CHECK(std::abs(t0.component(0) - std::sqrt(2.0 / 3.0)) < 1e-14);
  CHECK(std::abs(t0.component(2)) + std::abs(t0.component(4)) == 0.0);
}

TEST_CASE("tensor_power argument validation", "[polarization]") {
  CHECK_THROWS_AS(tensor_power(ComplexVector3(1, 0, 0), 0), std::invalid_argument);
  CHECK_THROWS_AS(tensor_power(ComplexVector3(1, 0, 0), 42), std::out_of_range);
}

// ---------------------------------------------------------------------------
// Spherical harmonics of complex directions
// ---------------------------------------------------------------------------

TEST_CASE("harmonics of real directions match associated Legendre", "[polarization]") {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  // z axis: n_{LM} = delta_{M0}.
  const ComplexVector3 zhat(0.0, 1.0, 0.0);
  for (int l : {1, 2, 5}) {
    const SphericalTensor n = spherical_harmonic(zhat, l);
    for (int two_m = 2 * l; two_m >= -2 * l; two_m -= 2)
      CHECK(std::abs(n.component(two_m) - (two_m == 0 ? 1.0 : 0.0)) < 1e-13);
  }
  // Generic directions.
  for (int trial = 0; trial < 6; ++trial) {
    const double theta = u(rng) / 1.2, phi = u(rng);
    const Eigen::Vector3d dir(std::sin(theta) * std::cos(phi),
                              std::sin(theta) * std::sin(phi), std::cos(theta));
    const ComplexVector3 a = from_cartesian(dir.cast<Complex>());
    for (int l : {1, 2, 3, 4}) {
      const SphericalTensor n = spherical_harmonic(a, l);
      for (int m = -l; m <= l; ++m)
        CHECK(std::abs(n.component(2 * m) - oracle_real_harmonic(l, m, theta, phi)) <
              1e-12);
    }
  }
}

TEST_CASE("harmonics are scale invariant", "[polarization]") {
  std::mt19937 rng(29);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 8; ++trial) {
    // Real Cartesian direction ((a.a) > 0), imaginary scale 2.3i: the
    // principal square-root branches agree.
    const ComplexVector3 a =
        from_cartesian(Eigen::Vector3d(u(rng), u(rng), u(rng)).cast<Complex>());
    const ComplexVector3 scaled = Complex(0.0, 2.3) * a;
    // Complex direction, positive real scale (always branch-safe).
    const ComplexVector3 b = random_vector(rng);
    const ComplexVector3 b_scaled = Complex(1.7, 0.0) * b;
    for (int l : {1, 2, 3, 4}) {
      CHECK(max_component_distance(spherical_harmonic(a, l),
                                   spherical_harmonic(scaled, l)) < 1e-12);
      CHECK(max_component_distance(spherical_harmonic(b, l),
                                   spherical_harmonic(b_scaled, l)) < 1e-12);
    }
  }
}

TEST_CASE("harmonics reject circular directions", "[polarization]") {
  const Polarization p = polarization_from_ellipticity(kPi / 4, Frame::NaturalPlus);
  CHECK_THROWS_AS(spherical_harmonic(p.e, 2), std::domain_error);
  CHECK_THROWS_AS(spherical_harmonic(ComplexVector3(), 1), std::domain_error);
}

// ---------------------------------------------------------------------------
// Spherical dot products and sum rules
// ---------------------------------------------------------------------------

TEST_CASE("spherical_dot basics", "[polarization]") {
  const SphericalTensor z(ComplexVector3(0.0, 1.0, 0.0));
  CHECK(std::abs(spherical_dot(z, z) - 1.0) < 1e-15);
  const SphericalTensor r2(obesteady::AngularMomentum(4));
  CHECK_THROWS_AS(spherical_dot(z, r2), std::invalid_argument);
}

TEST_CASE("harmonic self-contraction gives P_L(1) = 1", "[polarization]") {
  std::mt19937 rng(41);
  const ComplexVector3 a = random_vector(rng);
  for (int l : {1, 2, 3, 5})
    CHECK(std::abs(spherical_dot(spherical_harmonic(a, l), spherical_harmonic(a, l)) -
                   1.0) < 1e-11);
}

TEST_CASE("harmonic dot sum rule equals Legendre of the angle", "[polarization]") {
  std::mt19937 rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    const ComplexVector3 a = random_vector(rng), b = random_vector(rng);
    const Complex ab =
        std::sqrt(dot(a, a)) * std::sqrt(dot(b, b));  // same branch as harmonics
    const Complex cosw = dot(a, b) / ab;
    for (int l = 1; l <= 6; ++l) {
      const Complex lhs =
          spherical_dot(spherical_harmonic(a, l), spherical_harmonic(b, l));
      const Complex rhs = obesteady::legendre_p(l, cosw);
      CHECK(std::abs(lhs - rhs) < 1e-10 * std::max(1.0, std::abs(rhs)));
    }
  }
}

TEST_CASE("tensor power norm follows the scaled Legendre form", "[polarization]") {
  // ({e}_J . {e*}_J) = (J!/(2J-1)!!) Q_J((e.e)) for a unit polarization vector.
  for (double eps : {0.0, 0.2, kPi / 8, kPi / 4}) {
    const Polarization p = polarization_from_ellipticity(eps, Frame::NaturalPlus);
    const double x = std::cos(2 * eps);
    double coeff = 1.0;  // J!/(2J-1)!!
    for (int j = 1; j <= 8; ++j) {
      coeff *= static_cast<double>(j) / (2 * j - 1);
      const Complex lhs = spherical_dot(tensor_power(p.e, j),
                                        tensor_power(p.e.conjugated(), j));
      const double rhs = coeff * obesteady::ScaledLegendre::evaluate(j, x);
      CHECK(std::abs(lhs - rhs) < 1e-12 * std::max(1.0, std::abs(rhs)));
    }
  }
}

// ---------------------------------------------------------------------------
// Product and expansion identities
// ---------------------------------------------------------------------------

TEST_CASE("coupling a vector onto its own power at equal rank vanishes",
          "[polarization]") {
  std::mt19937 rng(47);
  std::uniform_real_distribution<double> u(-kPi / 4, kPi / 4);
  for (int j = 1; j <= 8; ++j) {
    const double eps = u(rng);
    const Polarization p = polarization_from_ellipticity(eps, Frame::NaturalPlus);
    const SphericalTensor coupled = tensor_product(
        SphericalTensor(p.e), tensor_power(p.e, j), obesteady::AngularMomentum(2 * j));
    double worst = 0.0;
    for (const Complex& c : coupled.components()) worst = std::max(worst, std::abs(c));
    CHECK(worst < 1e-13);
  }
}

TEST_CASE("power products collapse to a single power", "[polarization]") {
  // {{e}_L (x) {e}_J}_K = C^{K0}_{L0 J0}
  //     sqrt(L! J! (2K-1)!! x^{L+J-K} / (K! (2L-1)!! (2J-1)!!)) {e}_K
  std::mt19937 rng(53);
  std::uniform_real_distribution<double> u(-kPi / 4 + 0.05, kPi / 4 - 0.05);
  const double eps = u(rng);
  const Polarization p = polarization_from_ellipticity(eps, Frame::NaturalPlus);
  const double x = std::cos(2 * eps);
  auto dfact = [](int n) {  // n!! with (-1)!! = 1
    double f = 1.0;
    for (int k = n; k >= 2; k -= 2) f *= k;
    return f;
  };
  auto fact = [](int n) {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
  };
  for (int l = 1; l <= 3; ++l)
    for (int j = l; j + l <= 6; ++j)
      for (int k = j - l; k <= j + l; ++k) {
        if (k < 1) continue;
        const SphericalTensor lhs = tensor_product(
            tensor_power(p.e, l), tensor_power(p.e, j), obesteady::AngularMomentum(2 * k));
        if ((l + j - k) % 2 != 0) {
          // Odd total: the coupling vanishes identically.
          double worst = 0.0;
          for (const Complex& c : lhs.components())
            worst = std::max(worst, std::abs(c));
          CHECK(worst < 1e-13);
          continue;
        }
        const double cg = obesteady::clebsch_gordan(
            obesteady::AngularMomentum(2 * l), 0, obesteady::AngularMomentum(2 * j), 0,
            obesteady::AngularMomentum(2 * k), 0);
        const double scale =
            cg * std::sqrt(fact(l) * fact(j) * dfact(2 * k - 1) *
                           std::pow(x, l + j - k) /
                           (fact(k) * dfact(2 * l - 1) * dfact(2 * j - 1)));
        const SphericalTensor rk = tensor_power(p.e, k);
        double worst = 0.0;
        for (int two_m = 2 * k; two_m >= -2 * k; two_m -= 2)
          worst = std::max(worst, std::abs(lhs.component(two_m) -
                                           scale * rk.component(two_m)));
        CHECK(worst < 1e-12);
      }
}

TEST_CASE("harmonic products obey the CG expansion", "[polarization]") {
  // n_{l1 m1}(a) n_{l2 m2}(a) = sum_L C^{L0}_{l1 0 l2 0} C^{LM}_{l1 m1 l2 m2} n_{LM}(a)
  std::mt19937 rng(59);
  for (int trial = 0; trial < 4; ++trial) {
    const ComplexVector3 a = random_vector(rng);
    for (int l1 = 1; l1 <= 3; ++l1)
      for (int l2 = 1; l2 <= 3; ++l2) {
        const SphericalTensor n1 = spherical_harmonic(a, l1);
        const SphericalTensor n2 = spherical_harmonic(a, l2);
        for (int m1 = -l1; m1 <= l1; ++m1)
          for (int m2 = -l2; m2 <= l2; ++m2) {
            const int m = m1 + m2;
            Complex rhs = 0.0;
            for (int L = std::abs(l1 - l2); L <= l1 + l2; ++L) {
              if (std::abs(m) > L || L == 0) {
                if (L == 0 && m == 0) {
                  // n_0 = 1: the scalar term contributes directly.
                  rhs += obesteady::clebsch_gordan(
                             obesteady::AngularMomentum(2 * l1), 0,
                             obesteady::AngularMomentum(2 * l2), 0,
                             obesteady::AngularMomentum(0), 0) *
                         obesteady::clebsch_gordan(
                             obesteady::AngularMomentum(2 * l1), 2 * m1,
                             obesteady::AngularMomentum(2 * l2), 2 * m2,
                             obesteady::AngularMomentum(0), 0);
                }
                continue;
              }
              rhs += obesteady::clebsch_gordan(obesteady::AngularMomentum(2 * l1), 0,
                                               obesteady::AngularMomentum(2 * l2), 0,
                                               obesteady::AngularMomentum(2 * L), 0) *
                     obesteady::clebsch_gordan(obesteady::AngularMomentum(2 * l1),
                                               2 * m1,
                                               obesteady::AngularMomentum(2 * l2),
                                               2 * m2, obesteady::AngularMomentum(2 * L),
                                               2 * m) *
                     spherical_harmonic(a, L).component(2 * m);
            }
            const Complex lhs = n1.component(2 * m1) * n2.component(2 * m2);
            CHECK(std::abs(lhs - rhs) < 1e-10 * std::max(1.0, std::abs(lhs)));
          }
      }
  }
}

// ---------------------------------------------------------------------------
// Circular pair
// ---------------------------------------------------------------------------

TEST_CASE("circular pair satisfies its defining conditions", "[polarization]") {
  for (Frame f : {Frame::Conventional, Frame::NaturalPlus, Frame::NaturalMinus}) {
    for (double eps : {0.05, 0.2, kPi / 8, 0.7}) {
      const Polarization p = polarization_from_ellipticity(eps, f);
      const auto [c1, c2] = circular_pair(p);
      const double ax = std::abs(dot(p.e, p.e));
      for (const ComplexVector3& c : {c1, c2}) {
        CHECK(std::abs(dot(c, c)) < 1e-12);                       // circular
        CHECK(std::abs(dot(p.e, c)) < 1e-12);                     // normal to e
        CHECK(std::abs(dot(c.conjugated(), c) - 1.0) < 1e-12);    // unit norm
      }
      // Overlap power law.
      CHECK(std::abs(dot(c1.conjugated(), c2) - (1.0 - ax) / (1.0 + ax)) < 1e-12);
    }
  }
}

TEST_CASE("circular pair matches the Cartesian oracle", "[polarization]") {
  for (double eps : {0.1, 0.35, 0.7}) {
    const Polarization p = polarization_from_ellipticity(eps, Frame::Conventional);
    const auto [c1, c2] = circular_pair(p);
    const auto [o1, o2] = oracle_circular_pair(eps);
    CHECK((to_cartesian(c1) - o1).norm() < 1e-12);
    CHECK((to_cartesian(c2) - o2).norm() < 1e-12);
  }
}

TEST_CASE("circular pair degenerates at circular polarization", "[polarization]") {
  const Polarization p = polarization_from_ellipticity(kPi / 4, Frame::NaturalPlus);
  const auto [c1, c2] = circular_pair(p);
  // Same direction up to a phase: |(c1*.c2)| = 1.
  CHECK(std::abs(std::abs(dot(c1.conjugated(), c2)) - 1.0) < 1e-12);
}

TEST_CASE("circular pair falls back to opposite circular vectors at linear",
          "[polarization]") {
  for (Frame f : {Frame::Conventional, Frame::NaturalPlus}) {
    const Polarization p = polarization_from_ellipticity(0.0, f);
    const auto [c1, c2] = circular_pair(p);
    for (const ComplexVector3& c : {c1, c2}) {
      CHECK(std::abs(dot(c, c)) < 1e-12);
      CHECK(std::abs(dot(p.e, c)) < 1e-12);
      CHECK(std::abs(dot(c.conjugated(), c) - 1.0) < 1e-12);
    }
    CHECK(std::abs(dot(c1.conjugated(), c2)) < 1e-12);  // orthogonal pair
  }
  // Continuity: the eps -> 0 limit of the generic formula matches the fallback
  // in the natural frame.
  const auto [f1, f2] =
      circular_pair(polarization_from_ellipticity(0.0, Frame::NaturalPlus));
  const auto [g1, g2] =
      circular_pair(polarization_from_ellipticity(1e-7, Frame::NaturalPlus));
  CHECK((to_cartesian(f1) - to_cartesian(g1)).norm() < 1e-6);
  CHECK((to_cartesian(f2) - to_cartesian(g2)).norm() < 1e-6);
}
