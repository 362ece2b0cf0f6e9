#pragma once

// Complex polarization vectors and spherical-tensor algebra.
//
// Everything works in covariant spherical components a_q (q = +1, 0, -1) with
//   dot product        (a.b)  = sum_q (-1)^q a_q b_{-q}
//   conjugate vector   (a*)_q = (-1)^q conj(a_{-q})
// so that (a*.a) = sum_q |a_q|^2 is the squared norm. A field polarization is
// parametrized by the ellipticity angle eps in [-pi/4, pi/4] (tan|eps| = minor
// over major ellipse axis; eps = 0 linear, +-pi/4 circular) in one of three
// frames:
//   Conventional — ellipse axes along x/y:  e = e_x cos(eps) + i e_y sin(eps)
//   NaturalPlus  — quantization axis tilted so e splits into one linear and
//                  one circular part, covariant e_{+1} = -sqrt(2) sin(eps),
//                  e_0 = sqrt(cos 2 eps), e_{-1} = 0
//   NaturalMinus — mirror gauge of NaturalPlus (the circular content carried
//                  by e_{-1} instead): e_{-1} = -sqrt(2) sin(eps), e_{+1} = 0
// All three give (e.e) = cos 2 eps and unit norm. Rank-L tensor powers {a}_L
// and scale-invariant harmonics n_L(a) = a^{-L} sqrt((2L-1)!!/L!) {a}_L of
// complex directions are built by iterated Clebsch-Gordan coupling; formulas
// that would divide by (a.a) at circular polarization must use the tensor
// powers together with ScaledLegendre instead of the harmonics.

#include <array>
#include <complex>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "obesteady/angular.hpp"

namespace obesteady {

using Complex = std::complex<double>;

//! A complex 3-vector stored by covariant spherical components.
struct ComplexVector3 {
  Complex q_plus{0.0, 0.0};   //!< a_{+1}
  Complex q_zero{0.0, 0.0};   //!< a_0
  Complex q_minus{0.0, 0.0};  //!< a_{-1}

  ComplexVector3() = default;
  ComplexVector3(Complex a_plus, Complex a_zero, Complex a_minus)
      : q_plus(a_plus), q_zero(a_zero), q_minus(a_minus) {}

  //! Covariant component a_q, q in {+1, 0, -1}.
  Complex component(int q) const {
    if (q == 1) return q_plus;
    if (q == 0) return q_zero;
    if (q == -1) return q_minus;
    throw std::invalid_argument("ComplexVector3: component index must be +1, 0 or -1");
  }

  //! The conjugate vector, (a*)_q = (-1)^q conj(a_{-q}).
  ComplexVector3 conjugated() const {
    return ComplexVector3(-std::conj(q_minus), std::conj(q_zero), -std::conj(q_plus));
  }

  friend ComplexVector3 operator+(const ComplexVector3& a, const ComplexVector3& b) {
    return ComplexVector3(a.q_plus + b.q_plus, a.q_zero + b.q_zero,
                          a.q_minus + b.q_minus);
  }
  friend ComplexVector3 operator-(const ComplexVector3& a, const ComplexVector3& b) {
    return ComplexVector3(a.q_plus - b.q_plus, a.q_zero - b.q_zero,
                          a.q_minus - b.q_minus);
  }
  friend ComplexVector3 operator*(Complex s, const ComplexVector3& a) {
    return ComplexVector3(s * a.q_plus, s * a.q_zero, s * a.q_minus);
  }
};

//! Spherical dot product (a.b) = sum_q (-1)^q a_q b_{-q} (no conjugation).
inline Complex dot(const ComplexVector3& a, const ComplexVector3& b) {
  return a.q_zero * b.q_zero - a.q_plus * b.q_minus - a.q_minus * b.q_plus;
}

//! Norm sqrt((a*.a)) = sqrt(sum_q |a_q|^2).
inline double norm(const ComplexVector3& a) {
  return std::sqrt(std::norm(a.q_plus) + std::norm(a.q_zero) + std::norm(a.q_minus));
}

//! Cartesian components (x, y, z); a_x = (a_{-1} - a_{+1})/sqrt2, etc.
inline Eigen::Vector3cd to_cartesian(const ComplexVector3& a) {
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  return Eigen::Vector3cd((a.q_minus - a.q_plus) * inv_sqrt2,
                          Complex(0.0, 1.0) * (a.q_plus + a.q_minus) * inv_sqrt2,
                          a.q_zero);
}

//! Covariant spherical components of a Cartesian vector.
inline ComplexVector3 from_cartesian(const Eigen::Vector3cd& v) {
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const Complex i(0.0, 1.0);
  return ComplexVector3(-(v.x() + i * v.y()) * inv_sqrt2, v.z(),
                        (v.x() - i * v.y()) * inv_sqrt2);
}

//! Vector cross product [a x b], bilinear in both arguments. (Eigen's
//! .cross() conjugates the components of a complex cross product and cannot
//! be used here.)
inline ComplexVector3 cross(const ComplexVector3& a, const ComplexVector3& b) {
  const Eigen::Vector3cd u = to_cartesian(a), v = to_cartesian(b);
  return from_cartesian(Eigen::Vector3cd(u.y() * v.z() - u.z() * v.y(),
                                         u.z() * v.x() - u.x() * v.z(),
                                         u.x() * v.y() - u.y() * v.x()));
}

//! Coordinate frame in which an elliptical polarization is expressed.
enum class Frame { Conventional, NaturalPlus, NaturalMinus };

//! A unit field polarization with its ellipticity parametrization.
struct Polarization {
  ComplexVector3 e;        //!< covariant components of the unit vector
  double ellipticity = 0;  //!< eps in [-pi/4, pi/4]
  Frame frame = Frame::NaturalPlus;
};

//! Build the unit polarization vector for ellipticity eps in the given frame.
//! (e.e) = cos 2 eps and (e*.e) = 1 in every frame.
inline Polarization polarization_from_ellipticity(double epsilon, Frame frame) {
  constexpr double quarter_pi = 0.78539816339744830961;
  if (!(std::abs(epsilon) <= quarter_pi + 1e-15))
    throw std::invalid_argument(
        "polarization_from_ellipticity: ellipticity must satisfy |eps| <= pi/4");
  Polarization p;
  p.ellipticity = epsilon;
  p.frame = frame;
  const double c = std::cos(epsilon), s = std::sin(epsilon);
  // cos(2 eps) >= 0 on the allowed range; snap the ~1e-16 rounding residue of
  // cos(pi/2) so circular polarization has an exactly vanishing e_0.
  const double cos2eps = std::cos(2.0 * epsilon);
  const double root = std::sqrt(std::abs(cos2eps) < 1e-15 ? 0.0 : std::max(0.0, cos2eps));
  switch (frame) {
    case Frame::Conventional:
      p.e = ComplexVector3(-(c - s) / std::sqrt(2.0), 0.0, (c + s) / std::sqrt(2.0));
      break;
    case Frame::NaturalPlus:
      p.e = ComplexVector3(-std::sqrt(2.0) * s, root, 0.0);
      break;
    case Frame::NaturalMinus:
      p.e = ComplexVector3(0.0, root, -std::sqrt(2.0) * s);
      break;
  }
  return p;
}

//! Rotation angle between the conventional and natural quantization axes,
//! cos(theta) = |tan(eps)|; pi/2 at linear, 0 at circular polarization.
//! Evaluated as theta = asin(sqrt(cos 2 eps)/cos eps), which is exact at both
//! endpoints (acos of |tan eps| loses half the digits near circular).
inline double natural_frame_angle(double epsilon) {
  constexpr double quarter_pi = 0.78539816339744830961;
  if (!(std::abs(epsilon) <= quarter_pi + 1e-15))
    throw std::invalid_argument(
        "natural_frame_angle: ellipticity must satisfy |eps| <= pi/4");
  const double cos2eps = std::cos(2.0 * epsilon);
  if (std::abs(cos2eps) < 1e-15) return 0.0;
  return std::asin(
      std::min(1.0, std::sqrt(std::max(0.0, cos2eps)) / std::cos(epsilon)));
}

//! An irreducible spherical tensor of (possibly half-integer) rank L with
//! components stored in descending projection order M = +L ... -L.
class SphericalTensor {
 public:
  SphericalTensor(AngularMomentum rank, std::vector<Complex> components)
      : rank_(rank), components_(std::move(components)) {
    detail::check_j(rank_, "SphericalTensor");
    if (static_cast<int>(components_.size()) != rank_.multiplicity())
      throw std::invalid_argument("SphericalTensor: component count must be 2L+1");
  }

  explicit SphericalTensor(AngularMomentum rank)
      : SphericalTensor(rank, std::vector<Complex>(rank.multiplicity(), Complex{})) {}

  //! Rank-1 tensor whose components are the covariant components of a.
  explicit SphericalTensor(const ComplexVector3& a)
      : rank_(AngularMomentum(2)), components_{a.q_plus, a.q_zero, a.q_minus} {}

  AngularMomentum rank() const { return rank_; }

  //! Component T_{LM} addressed by 2M.
  Complex component(int two_m) const {
    detail::check_jm(rank_, two_m, "SphericalTensor");
    return components_[static_cast<std::size_t>(projection_index(rank_, two_m))];
  }
  Complex& component(int two_m) {
    detail::check_jm(rank_, two_m, "SphericalTensor");
    return components_[static_cast<std::size_t>(projection_index(rank_, two_m))];
  }

  const std::vector<Complex>& components() const { return components_; }

 private:
  AngularMomentum rank_;
  std::vector<Complex> components_;
};

//! Clebsch-Gordan coupling {s (x) t}_{KM} = sum C^{KM}_{l1 m1 l2 m2} s_{m1} t_{m2}.
inline SphericalTensor tensor_product(const SphericalTensor& s,
                                      const SphericalTensor& t,
                                      AngularMomentum rank) {
  const AngularMomentum l1 = s.rank(), l2 = t.rank();
  if (!detail::triangle_ok(l1, l2, rank))
    throw std::invalid_argument("tensor_product: target rank violates the triangle rule");
  SphericalTensor out(rank);
  for (int two_m = rank.two_j; two_m >= -rank.two_j; two_m -= 2) {
    Complex sum = 0.0;
    for (int two_m1 = -l1.two_j; two_m1 <= l1.two_j; two_m1 += 2) {
      const int two_m2 = two_m - two_m1;
      if (std::abs(two_m2) > l2.two_j) continue;
      const double cg = clebsch_gordan(l1, two_m1, l2, two_m2, rank, two_m);
      if (cg != 0.0) sum += cg * s.component(two_m1) * t.component(two_m2);
    }
    out.component(two_m) = sum;
  }
  return out;
}

//! L-fold tensor power {a}_L = {...{{a (x) a}_2 (x) a}_3 ... (x) a}_L.
inline SphericalTensor tensor_power(const ComplexVector3& a, int rank) {
  if (rank < 1) throw std::invalid_argument("tensor_power: rank must be >= 1");
  if (2 * rank > 2 * ScaledLegendre::kMaxDegree)
    throw std::out_of_range("tensor_power: rank out of supported range");
  const SphericalTensor a1(a);
  SphericalTensor out = a1;
  for (int l = 1; l < rank; ++l)
    out = tensor_product(out, a1, AngularMomentum(2 * (l + 1)));
  return out;
}

//! Scale-invariant spherical harmonic of a complex direction,
//!   n_{LM}(a) = a^{-L} sqrt((2L-1)!!/L!) {a}_{LM},  a = sqrt((a.a)),
//! with the principal branch of the square root. Throws for circular
//! directions (a.a) = 0, where no finite harmonic exists; formulas with a
//! finite circular limit must be arranged around tensor_power instead.
inline SphericalTensor spherical_harmonic(const ComplexVector3& a, int rank) {
  const Complex aa = dot(a, a);
  const double n2 = std::norm(a.q_plus) + std::norm(a.q_zero) + std::norm(a.q_minus);
  if (std::abs(aa) <= 1e-12 * n2 || n2 == 0.0)
    throw std::domain_error(
        "spherical_harmonic: direction with (a.a) = 0 has no finite harmonic");
  SphericalTensor t = tensor_power(a, rank);
  long double log_coeff = 0.0L;  // (2L-1)!!/L!
  for (int l = 1; l <= rank; ++l)
    log_coeff += std::log(static_cast<long double>(2 * l - 1) / l);
  const Complex scale =
      std::sqrt(static_cast<double>(std::exp(log_coeff))) *
      std::pow(aa, -0.5 * rank);
  SphericalTensor out(t.rank());
  for (int two_m = t.rank().two_j; two_m >= -t.rank().two_j; two_m -= 2)
    out.component(two_m) = scale * t.component(two_m);
  return out;
}

//! Scalar contraction (s.t) = sum_M (-1)^M s_{LM} t_{L,-M} of equal-rank tensors.
inline Complex spherical_dot(const SphericalTensor& s, const SphericalTensor& t) {
  if (s.rank() != t.rank())
    throw std::invalid_argument("spherical_dot: tensors must have equal rank");
  Complex sum = 0.0;
  for (int two_m = s.rank().two_j; two_m >= -s.rank().two_j; two_m -= 2)
    sum += static_cast<double>(detail::phase_from_two(two_m)) * s.component(two_m) *
           t.component(-two_m);
  return sum;
}

//! The two independent circular directions normal to the polarization vector:
//!   C^{(1,2)} = ([e x [e x e*]] +- i sqrt((e.e)) [e x e*])
//!               / sqrt((1 - |e.e|^2)(1 + |e.e|)),
//! each satisfying (C.C) = 0, (e.C) = 0 and (C*.C) = 1, with overlap
//! (C1*.C2) = (1 - |e.e|)/(1 + |e.e|). At linear polarization the pair is
//! degenerate and the continuity limit is returned: the two opposite circular
//! vectors in the plane normal to e.
inline std::pair<ComplexVector3, ComplexVector3> circular_pair(const Polarization& p) {
  const Complex i(0.0, 1.0);
  const double sin_eps = std::sin(p.ellipticity);
  if (std::abs(sin_eps) < 1e-150) {
    // Linear polarization: e = exp(i phi) u with u a real unit vector. Build
    // a right-handed triad (u, v, w) and return the opposite circular vectors
    // (v -+ i w)/sqrt2 (the +- limit of the closed formula), phase restored.
    const Eigen::Vector3cd ec = to_cartesian(p.e);
    int k = 0;
    ec.cwiseAbs().maxCoeff(&k);
    const Complex phase = ec(k) / std::abs(ec(k));
    const Eigen::Vector3d u = (ec / phase).real().normalized();
    int least = 0;
    u.cwiseAbs().minCoeff(&least);
    Eigen::Vector3d axis = Eigen::Vector3d::Zero();
    axis(least) = 1.0;
    const Eigen::Vector3d v = (axis - axis.dot(u) * u).normalized();
    const Eigen::Vector3d w = u.cross(v);
    const Eigen::Vector3cd c1 = phase * (v - i * w) / std::sqrt(2.0);
    const Eigen::Vector3cd c2 = -phase * (v + i * w) / std::sqrt(2.0);
    return {from_cartesian(c1), from_cartesian(c2)};
  }
  const ComplexVector3 estar = p.e.conjugated();
  const ComplexVector3 e_x_estar = cross(p.e, estar);
  const ComplexVector3 outer = cross(p.e, e_x_estar);
  const Complex circ = i * std::sqrt(dot(p.e, p.e));
  // (1 - x)(1 + x)^2 with x = |(e.e)| = cos(2 eps), written via the
  // ellipticity so the near-linear difference 1 - x never cancels:
  // denominator = sqrt(2 sin^2(eps) * 4 cos^4(eps)).
  const double cos_eps = std::cos(p.ellipticity);
  const double denom =
      2.0 * std::sqrt(2.0) * std::abs(sin_eps) * cos_eps * cos_eps;
  const ComplexVector3 c1 =
      (1.0 / denom) * (outer + circ * e_x_estar);
  const ComplexVector3 c2 =
      (1.0 / denom) * (outer - circ * e_x_estar);
  return {c1, c2};
}

}  // namespace obesteady
