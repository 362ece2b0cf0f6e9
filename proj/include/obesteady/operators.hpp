#pragma once

// Transition operators for a closed dipole line Jg -> Je.
//
// All operators are dense complex matrices indexed by Zeeman projection in
// descending order mu = +J ... -J, wrapped in a LevelOperator that remembers
// which level (ground/excited) each side acts on.  Provided builders:
//   dipole_components     D_q, the three spherical dipole components whose
//                         matrix elements are Clebsch-Gordan coefficients
//   coupling_operator     V = sum_q (-1)^q e_{-q} D_q for a polarization e
//   tensor_wigner_operator T_LM, the unit spherical tensor operators
//   v_l_operator          rank-L contraction sum_M (-1)^M T_LM n_{L,-M}(a),
//                         the rank-L generalization of the coupling operator
//   raising_operators     the pair (W, W~) that ladders between the natural
//                         bases (rank 0 for J->J, rank 2J+1 for J->J+1)
//   inverse_coupling      V^-1 and (V^dag V)^-1 for J->J half-integer, built
//                         from the invariant odd-rank expansion
//   x_operator            X with V X = W for J->J+1, built from the invariant
//                         even/odd-rank expansion over ground-state tensors
//   expansion_coefficient closed-form coefficients C_L of those expansions
//   structure_constant    E(L,K) coupling rank L to rank K in products with
//                         the rank-1 operator
//   light_shifts          AC Stark operators delta*S*VdagV / -delta*S*VVdag
//
// Each *_scaled variant multiplies the rank-L harmonic by (a.a)^{L/2}; the
// scaled forms stay finite for circular polarization, where (e.e) = 0 makes
// the harmonic normalization singular. Functions that normally return the
// harmonic normalization reroute to the scaled form at a circular direction
// and report it through a `rescaled` flag.

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "obesteady/angular.hpp"
#include "obesteady/polarization.hpp"

namespace obesteady {

//! Which of the two Zeeman manifolds an operator index runs over.
enum class Level { Ground, Excited };

//! One side of an operator: the level kind together with its momentum.
struct LevelTag {
  Level level = Level::Ground;
  AngularMomentum j;

  static LevelTag ground(AngularMomentum jg) { return {Level::Ground, jg}; }
  static LevelTag excited(AngularMomentum je) { return {Level::Excited, je}; }

  friend bool operator==(LevelTag a, LevelTag b) {
    return a.level == b.level && a.j == b.j;
  }
  friend bool operator!=(LevelTag a, LevelTag b) { return !(a == b); }
};

namespace detail {

inline const char* level_name(Level level) {
  return level == Level::Ground ? "ground" : "excited";
}

//! Atomic momenta are validated up to kMaxTwoJ (tensor ranks may go higher).
inline void check_atomic_j(AngularMomentum j, const char* where) {
  check_j(j, where);
  if (j.two_j > kMaxTwoJ)
    throw std::out_of_range(std::string(where) + ": atomic two_j exceeds " +
                            std::to_string(kMaxTwoJ));
}

}  // namespace detail

//! Raised when a closed-form inverse is requested for a coupling operator
//! that circular polarization has made singular (a J -> J transition pumps
//! all population into the uncoupled edge state).
class singular_coupling_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

//! Dense complex matrix between two tagged Zeeman manifolds, rows indexed by
//! the bra projections and columns by the ket projections, both descending.
class LevelOperator {
 public:
  LevelOperator(LevelTag bra, LevelTag ket)
      : bra_(bra),
        ket_(ket),
        entries_(Eigen::MatrixXcd::Zero(bra.j.multiplicity(), ket.j.multiplicity())) {
    detail::check_atomic_j(bra_.j, "LevelOperator");
    detail::check_atomic_j(ket_.j, "LevelOperator");
  }

  LevelOperator(LevelTag bra, LevelTag ket, Eigen::MatrixXcd entries)
      : bra_(bra), ket_(ket), entries_(std::move(entries)) {
    detail::check_atomic_j(bra_.j, "LevelOperator");
    detail::check_atomic_j(ket_.j, "LevelOperator");
    if (entries_.rows() != bra_.j.multiplicity() ||
        entries_.cols() != ket_.j.multiplicity())
      throw std::invalid_argument(
          "LevelOperator: matrix dimensions do not match the level momenta");
  }

  static LevelOperator identity(LevelTag tag) {
    return LevelOperator(
        tag, tag, Eigen::MatrixXcd::Identity(tag.j.multiplicity(), tag.j.multiplicity()));
  }

  LevelTag bra() const { return bra_; }
  LevelTag ket() const { return ket_; }
  const Eigen::MatrixXcd& entries() const { return entries_; }
  Eigen::MatrixXcd& entries() { return entries_; }

  //! Entry addressed by bra/ket projections (as 2m), not matrix indices.
  Complex element(int two_m_bra, int two_m_ket) const {
    return entries_(projection_index(bra_.j, two_m_bra),
                    projection_index(ket_.j, two_m_ket));
  }
  Complex& element(int two_m_bra, int two_m_ket) {
    return entries_(projection_index(bra_.j, two_m_bra),
                    projection_index(ket_.j, two_m_ket));
  }

  //! Hermitian conjugate; swaps the levels the operator acts between.
  LevelOperator adjoint() const {
    return LevelOperator(ket_, bra_, entries_.adjoint());
  }

  Complex trace() const {
    if (bra_ != ket_)
      throw std::invalid_argument("LevelOperator: trace requires equal bra and ket levels");
    return entries_.trace();
  }

  friend LevelOperator operator*(const LevelOperator& a, const LevelOperator& b) {
    if (a.ket_ != b.bra_)
      throw std::invalid_argument(
          std::string("LevelOperator: cannot multiply ") +
          detail::level_name(a.ket_.level) + "-ket by " +
          detail::level_name(b.bra_.level) + "-bra operator of different level or momentum");
    return LevelOperator(a.bra_, b.ket_, a.entries_ * b.entries_);
  }

  friend LevelOperator operator+(const LevelOperator& a, const LevelOperator& b) {
    if (a.bra_ != b.bra_ || a.ket_ != b.ket_)
      throw std::invalid_argument("LevelOperator: cannot add operators between different levels");
    return LevelOperator(a.bra_, a.ket_, a.entries_ + b.entries_);
  }

  friend LevelOperator operator-(const LevelOperator& a, const LevelOperator& b) {
    if (a.bra_ != b.bra_ || a.ket_ != b.ket_)
      throw std::invalid_argument(
          "LevelOperator: cannot subtract operators between different levels");
    return LevelOperator(a.bra_, a.ket_, a.entries_ - b.entries_);
  }

  friend LevelOperator operator*(Complex s, const LevelOperator& a) {
    return LevelOperator(a.bra_, a.ket_, s * a.entries_);
  }
  friend LevelOperator operator*(const LevelOperator& a, Complex s) { return s * a; }

 private:
  LevelTag bra_;
  LevelTag ket_;
  Eigen::MatrixXcd entries_;
};

//! Spherical dipole components [D_{-1}, D_0, D_{+1}] of a closed Jg -> Je
//! line; <Je mu|D_q|Jg m> is the Clebsch-Gordan coefficient C^{Je mu}_{Jg m 1 q}.
//! They satisfy sum_q D_q D_q^dag = identity on the excited level and
//! sum_q D_q^dag D_q = ((2Je+1)/(2Jg+1)) identity on the ground level.
inline std::array<LevelOperator, 3> dipole_components(AngularMomentum jg,
                                                      AngularMomentum je) {
  detail::check_atomic_j(jg, "dipole_components");
  detail::check_atomic_j(je, "dipole_components");
  const AngularMomentum one(2);
  if (jg.two_j == 0 && je.two_j == 0)
    throw std::invalid_argument("dipole_components: Jg = Je = 0 carries no dipole line");
  if (!detail::triangle_ok(jg, one, je))
    throw std::invalid_argument("dipole_components: |Je - Jg| must be 0 or 1");

  const LevelTag g = LevelTag::ground(jg), e = LevelTag::excited(je);
  std::array<LevelOperator, 3> d = {LevelOperator(e, g), LevelOperator(e, g),
                                    LevelOperator(e, g)};
  for (int q = -1; q <= 1; ++q) {
    LevelOperator& dq = d[static_cast<std::size_t>(q + 1)];
    for (int two_mg = jg.two_j; two_mg >= -jg.two_j; two_mg -= 2) {
      const int two_me = two_mg + 2 * q;
      if (two_me < -je.two_j || two_me > je.two_j) continue;
      dq.element(two_me, two_mg) =
          clebsch_gordan(jg, two_mg, one, 2 * q, je, two_me);
    }
  }
  return d;
}

//! Coupling operator V = sum_q (-1)^q e_{-q} D_q of a polarization with the
//! dipole line; it drives the ground level into the excited level.
inline LevelOperator coupling_operator(AngularMomentum jg, AngularMomentum je,
                                       const Polarization& p) {
  const auto d = dipole_components(jg, je);
  LevelOperator v(LevelTag::excited(je), LevelTag::ground(jg));
  for (int q = -1; q <= 1; ++q) {
    const double sign = (q == 0) ? 1.0 : -1.0;
    v.entries() += sign * p.e.component(-q) * d[static_cast<std::size_t>(q + 1)].entries();
  }
  return v;
}

//! Unit spherical tensor operator T_LM between two tagged levels,
//! <Ja mu_a|T_LM|Jb mu_b> = (-1)^{Jb - mu_b} C^{LM}_{Ja mu_a; Jb -mu_b}.
//! The set is trace-orthonormal: Tr{T_LM T_L'M'^dag} = delta_LL' delta_MM'.
inline LevelOperator tensor_wigner_operator(LevelTag a, LevelTag b, int rank,
                                            int two_m) {
  if (rank < 0)
    throw std::invalid_argument("tensor_wigner_operator: rank must be >= 0");
  const AngularMomentum l(2 * rank);
  detail::check_jm(l, two_m, "tensor_wigner_operator");
  if (!detail::triangle_ok(a.j, b.j, l))
    throw std::invalid_argument(
        "tensor_wigner_operator: rank violates the triangle rule of the two momenta");

  LevelOperator t(a, b);
  for (int two_mb = b.j.two_j; two_mb >= -b.j.two_j; two_mb -= 2) {
    const int two_ma = two_mb + two_m;
    if (two_ma < -a.j.two_j || two_ma > a.j.two_j) continue;
    t.element(two_ma, two_mb) =
        detail::phase_from_two(b.j.two_j - two_mb) *
        clebsch_gordan(a.j, two_ma, b.j, -two_mb, l, two_m);
  }
  return t;
}

namespace detail {

//! True for directions with (a.a) = 0 (circularly polarized), where the
//! harmonic normalization 1/(a.a)^{L/2} has no finite value.
inline bool is_circular_direction(const ComplexVector3& a) {
  const double n2 = std::norm(a.q_plus) + std::norm(a.q_zero) + std::norm(a.q_minus);
  return n2 == 0.0 || std::abs(dot(a, a)) <= 1e-12 * n2;
}

//! sqrt((2L-1)!!/L!), the normalization relating {a}_L to the harmonic.
inline double sqrt_tensor_power_norm(int rank) {
  long double log_coeff = 0.0L;
  for (int l = 1; l <= rank; ++l)
    log_coeff += std::log(static_cast<long double>(2 * l - 1) / l);
  return static_cast<double>(std::exp(0.5L * log_coeff));
}

//! sum_M (-1)^M T^{ab}_{LM} t_{L,-M} for a rank-L spherical tensor t.
inline LevelOperator contract_wigner_tensor(LevelTag a, LevelTag b,
                                            const SphericalTensor& t) {
  const int two_l = t.rank().two_j;
  LevelOperator out(a, b);
  for (int two_m = two_l; two_m >= -two_l; two_m -= 2) {
    const Complex coeff = static_cast<double>(phase_from_two(two_m)) *
                          t.component(-two_m);
    if (coeff == Complex{}) continue;
    out.entries() +=
        coeff * tensor_wigner_operator(a, b, two_l / 2, two_m).entries();
  }
  return out;
}

}  // namespace detail

//! Scaled rank-L coupling operator
//!   sqrt((2L-1)!!/L!) sum_M (-1)^M T^{ab}_{LM} {a}_{L,-M},
//! i.e. (a.a)^{L/2} times the harmonic-normalized v_l_operator. Polynomial in
//! the components of a, hence finite for circular directions as well.
inline LevelOperator v_l_operator_scaled(LevelTag a, LevelTag b, int rank,
                                         const ComplexVector3& dir) {
  if (rank < 0) throw std::invalid_argument("v_l_operator_scaled: rank must be >= 0");
  if (rank == 0) return tensor_wigner_operator(a, b, 0, 0);
  const SphericalTensor power = tensor_power(dir, rank);
  LevelOperator out = detail::contract_wigner_tensor(a, b, power);
  out.entries() *= detail::sqrt_tensor_power_norm(rank);
  return out;
}

//! A constructed operator together with a flag telling whether the harmonic
//! normalization had to be replaced by its (a.a)^{L/2}-scaled form because
//! the direction was circular.
struct RankedOperator {
  LevelOperator op;
  bool rescaled = false;
};

//! Rank-L coupling operator V_L^{ab}(a) = sum_M (-1)^M T^{ab}_{LM} n_{L,-M}(a).
//! Scale-invariant in a; obeys [V_L^{ab}(a)]^dag = (-1)^{Ja-Jb} V_L^{ba}(a*).
//! For circular a (where the harmonic normalization diverges) the scaled form
//! is returned instead and `rescaled` is set.
inline RankedOperator v_l_operator(LevelTag a, LevelTag b, int rank,
                                   const ComplexVector3& dir) {
  if (rank < 0) throw std::invalid_argument("v_l_operator: rank must be >= 0");
  if (rank == 0) return {tensor_wigner_operator(a, b, 0, 0), false};
  if (detail::is_circular_direction(dir))
    return {v_l_operator_scaled(a, b, rank, dir), true};
  const SphericalTensor harmonic = spherical_harmonic(dir, rank);
  return {detail::contract_wigner_tensor(a, b, harmonic), false};
}

//! AC Stark (light shift) operators of the ground and excited level,
//!   E_g = delta S V^dag V,   E_e = -delta S V V^dag,
//! for detuning delta and saturation parameter S.
inline std::pair<LevelOperator, LevelOperator> light_shifts(const LevelOperator& v,
                                                            double delta,
                                                            double saturation) {
  if (!(saturation >= 0.0))
    throw std::invalid_argument("light_shifts: saturation parameter must be >= 0");
  if (v.bra().level != Level::Excited || v.ket().level != Level::Ground)
    throw std::invalid_argument(
        "light_shifts: expected a coupling operator driving ground to excited");
  const Complex gs(delta * saturation, 0.0);
  LevelOperator ground(v.ket(), v.ket(), gs * (v.entries().adjoint() * v.entries()));
  LevelOperator excited(v.bra(), v.bra(), -gs * (v.entries() * v.entries().adjoint()));
  return {std::move(ground), std::move(excited)};
}

namespace detail {

//! J -> J with half-integer J: square coupling matrix, invertible away from
//! circular polarization.
inline bool is_equal_half_integer_line(AngularMomentum jg, AngularMomentum je) {
  return jg == je && !jg.is_integer();
}

//! J -> J+1: the class with unique steady state for every polarization.
inline bool is_step_up_line(AngularMomentum jg, AngularMomentum je) {
  return je.two_j == jg.two_j + 2;
}

}  // namespace detail

//! The raising pair (W, W~) between the natural bases of the two levels:
//! rank-0 operators for J -> J half-integer (unit-matrix shaped), rank-(2J+1)
//! operators for J -> J+1. Other transition classes have no raising pair
//! (their steady state is spanned by dark states instead).
struct RaisingOperators {
  LevelOperator w;
  LevelOperator w_tilde;
  bool rescaled = false;
};

inline RaisingOperators raising_operators(AngularMomentum jg, AngularMomentum je,
                                          const ComplexVector3& e) {
  detail::check_atomic_j(jg, "raising_operators");
  detail::check_atomic_j(je, "raising_operators");
  const LevelTag g = LevelTag::ground(jg), x = LevelTag::excited(je);
  if (detail::is_equal_half_integer_line(jg, je)) {
    return {tensor_wigner_operator(x, g, 0, 0), tensor_wigner_operator(g, x, 0, 0),
            false};
  }
  if (detail::is_step_up_line(jg, je)) {
    const int rank = jg.two_j + 1;
    RankedOperator w = v_l_operator(x, g, rank, e);
    RankedOperator wt = v_l_operator(g, x, rank, e);
    return {std::move(w.op), std::move(wt.op), w.rescaled};
  }
  throw std::invalid_argument(
      "raising_operators: defined only for J->J half-integer and J->J+1 lines");
}

//! Scaled raising pair, multiplied by (e.e)^{(2J+1)/2} on J -> J+1 lines so
//! the entries stay finite at circular polarization (rank-0 operators of the
//! J -> J half-integer class are returned unchanged).
inline RaisingOperators raising_operators_scaled(AngularMomentum jg,
                                                 AngularMomentum je,
                                                 const ComplexVector3& e) {
  detail::check_atomic_j(jg, "raising_operators");
  detail::check_atomic_j(je, "raising_operators");
  const LevelTag g = LevelTag::ground(jg), x = LevelTag::excited(je);
  if (detail::is_equal_half_integer_line(jg, je)) {
    return {tensor_wigner_operator(x, g, 0, 0), tensor_wigner_operator(g, x, 0, 0),
            false};
  }
  if (detail::is_step_up_line(jg, je)) {
    const int rank = jg.two_j + 1;
    return {v_l_operator_scaled(x, g, rank, e), v_l_operator_scaled(g, x, rank, e),
            true};
  }
  throw std::invalid_argument(
      "raising_operators: defined only for J->J half-integer and J->J+1 lines");
}

//! Closed-form coefficient C_L of the invariant rank expansions:
//! for J -> J half-integer the expansion of the inverse coupling over odd
//! ranks L = 1, 3, ..., 2J (even-rank coefficients vanish); for J -> J+1 the
//! expansion of the X operator over ranks L = 2J, 2J-2, ... (the coefficients
//! of the opposite parity vanish). Ranks outside 0..2J (inverse) or 0..2J+1
//! (X expansion) are an error.
inline double expansion_coefficient(AngularMomentum jg, AngularMomentum je,
                                    int rank) {
  detail::check_atomic_j(jg, "expansion_coefficient");
  detail::check_atomic_j(je, "expansion_coefficient");
  using detail::log_factorial;
  const int two_j = jg.two_j;  // = 2J of the ground level

  if (detail::is_equal_half_integer_line(jg, je)) {
    if (rank < 0 || rank > two_j)
      throw std::out_of_range("expansion_coefficient: rank outside 0..2J");
    if (rank % 2 == 0) return 0.0;
    // (L-1)!!/L!! with L = 2t+1; double factorials via (2k)!! = 2^k k! and
    // (2k+1)!! = (2k+1)!/(2^k k!).
    const auto log_double_factorial = [](int n) -> long double {
      if (n <= 0) return 0.0L;  // (-1)!! = 0!! = 1
      const int k = n / 2;
      if (n % 2 == 0) return k * std::log(2.0L) + log_factorial(k);
      return log_factorial(n) - k * std::log(2.0L) - log_factorial(k);
    };
    const int l = rank;
    const long double log_value =
        log_double_factorial(l - 1) - log_double_factorial(l) +
        0.5L * (std::log(static_cast<long double>(2 * l + 1)) +
                std::log(static_cast<long double>(two_j)) +
                std::log(static_cast<long double>(two_j + 1)) +
                std::log(static_cast<long double>(two_j + 2)) - std::log(3.0L) +
                log_double_factorial(two_j + l) + log_double_factorial(two_j - l - 1) -
                log_double_factorial(two_j - l) - log_double_factorial(two_j + l + 1));
    const double sign = (((l - 1) / 2) % 2 == 0) ? 1.0 : -1.0;
    return sign * static_cast<double>(std::exp(log_value));
  }

  if (detail::is_step_up_line(jg, je)) {
    if (rank < 0 || rank > two_j + 1)
      throw std::out_of_range("expansion_coefficient: rank outside 0..2J+1");
    if (rank > two_j || (two_j - rank) % 2 != 0) return 0.0;
    const int l = rank;
    const long double log_value =
        0.5L * (std::log(static_cast<long double>(2 * l + 1)) +
                std::log(static_cast<long double>(two_j + 3)) - std::log(3.0L) -
                std::log(static_cast<long double>(two_j + 1)) +
                log_factorial(two_j - l) + log_factorial(two_j + l + 1) -
                log_factorial(2 * two_j + 1));
    return static_cast<double>(std::exp(log_value));
  }

  throw std::invalid_argument(
      "expansion_coefficient: defined only for J->J half-integer and J->J+1 lines");
}

//! Structure constant E(L,K) of the product of the rank-1 coupling operator
//! with a rank-L one: the rank-K term carries
//!   E(L,K) = -+ sqrt(3(2L+1)) {K 1 L; J J J'} C^{K0}_{10 L0}
//! with J' = J (upper sign exponent 2J+L+1) for the J -> J half-integer class
//! and J' = J+1 (exponent 2J+L) for J -> J+1. E(L,L) = 0 always, so products
//! couple neighboring ranks only.
inline double structure_constant(AngularMomentum jg, AngularMomentum je, int l,
                                 int k) {
  detail::check_atomic_j(jg, "structure_constant");
  detail::check_atomic_j(je, "structure_constant");
  if (l < 0 || k < 0)
    throw std::out_of_range("structure_constant: ranks must be >= 0");
  if (std::abs(k - l) > 1 || k == l) return 0.0;

  int phase_exponent = 0;
  AngularMomentum j_other;
  if (detail::is_equal_half_integer_line(jg, je)) {
    phase_exponent = jg.two_j + l + 1;
    j_other = jg;
  } else if (detail::is_step_up_line(jg, je)) {
    phase_exponent = jg.two_j + l;
    j_other = je;
  } else {
    throw std::invalid_argument(
        "structure_constant: defined only for J->J half-integer and J->J+1 lines");
  }

  const AngularMomentum rank_k(2 * k), rank_l(2 * l), one(2);
  const double six_j = wigner_6j(rank_k, one, rank_l, jg, jg, j_other);
  const double cg = clebsch_gordan(one, 0, rank_l, 0, rank_k, 0);
  const double sign = (phase_exponent % 2 == 0) ? 1.0 : -1.0;
  return sign * std::sqrt(3.0 * (2 * l + 1)) * six_j * cg;
}

//! Inverse of the coupling operator of a J -> J half-integer line, together
//! with (V^dag V)^-1, from the invariant odd-rank expansion
//!   V^-1 = sqrt(3/((e.e)(2J+1))) sum_{L odd} C_L V_L^{ge}(e).
//! Circular polarization makes V singular and raises singular_coupling_error.
struct InverseCoupling {
  LevelOperator v_inverse;       //!< V^-1, drives excited back to ground
  LevelOperator vdagv_inverse;   //!< (V^dag V)^-1 on the ground level
};

inline InverseCoupling inverse_coupling(AngularMomentum jg, AngularMomentum je,
                                        const Polarization& p) {
  if (!detail::is_equal_half_integer_line(jg, je))
    throw std::invalid_argument(
        "inverse_coupling: only J->J half-integer couplings have a square inverse");
  if (detail::is_circular_direction(p.e))
    throw singular_coupling_error(
        "dark-exception: circular polarization leaves the edge state uncoupled; "
        "the coupling operator is singular");

  const LevelTag g = LevelTag::ground(jg), x = LevelTag::excited(je);
  const Complex ee = dot(p.e, p.e);
  LevelOperator inverse(g, x);
  for (int l = 1; l <= jg.two_j; l += 2) {
    const double c_l = expansion_coefficient(jg, je, l);
    inverse.entries() += c_l * v_l_operator(g, x, l, p.e).op.entries();
  }
  inverse.entries() *= std::sqrt(3.0 / (ee * static_cast<double>(jg.two_j + 1)));

  LevelOperator vdagv_inverse(g, g, inverse.entries() * inverse.entries().adjoint());
  return {std::move(inverse), std::move(vdagv_inverse)};
}

//! Scaled X operator of a J -> J+1 line: (e.e)^{(2J+1)/2} X as a polynomial
//!   X_s = sqrt(3/(2J+3)) sum_L C_L (e.e)^{(2J-L)/2} V_L^{gg,s}(e)
//! over scaled ground-state tensors; finite at circular polarization, and
//! V X_s = W_s holds with the scaled raising operator W_s.
inline LevelOperator x_operator_scaled(AngularMomentum jg, AngularMomentum je,
                                       const ComplexVector3& e) {
  if (!detail::is_step_up_line(jg, je))
    throw std::invalid_argument("x_operator: defined only for J->J+1 lines");
  const LevelTag g = LevelTag::ground(jg);
  const Complex ee = dot(e, e);
  LevelOperator x(g, g);
  for (int l = jg.two_j; l >= 0; l -= 2) {
    const double c_l = expansion_coefficient(jg, je, l);
    Complex power(1.0, 0.0);  // (e.e)^{(2J-L)/2}, an integer power
    for (int n = 0; n < (jg.two_j - l) / 2; ++n) power *= ee;
    x.entries() += c_l * power * v_l_operator_scaled(g, g, l, e).entries();
  }
  x.entries() *= std::sqrt(3.0 / static_cast<double>(jg.two_j + 3));
  return x;
}

//! X operator of a J -> J+1 line, the unique solution of V X = W, from the
//! invariant expansion X = sqrt(3/((e.e)(2J+3))) sum_L C_L V_L^{gg}(e).
//! At circular polarization the scaled form (e.e)^{(2J+1)/2} X is returned
//! with the `rescaled` flag set (X itself diverges there while every
//! steady-state combination of it stays finite).
inline RankedOperator x_operator(AngularMomentum jg, AngularMomentum je,
                                 const ComplexVector3& e) {
  if (!detail::is_step_up_line(jg, je))
    throw std::invalid_argument("x_operator: defined only for J->J+1 lines");
  if (detail::is_circular_direction(e))
    return {x_operator_scaled(jg, je, e), true};
  const LevelTag g = LevelTag::ground(jg);
  const Complex ee = dot(e, e);
  LevelOperator x(g, g);
  for (int l = jg.two_j; l >= 0; l -= 2) {
    const double c_l = expansion_coefficient(jg, je, l);
    x.entries() += c_l * v_l_operator(g, g, l, e).op.entries();
  }
  x.entries() *= std::sqrt(3.0 / (ee * static_cast<double>(jg.two_j + 3)));
  return {std::move(x), false};
}

}  // namespace obesteady
