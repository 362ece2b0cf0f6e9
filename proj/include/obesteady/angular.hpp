#pragma once
// Angular-momentum algebra on an exact half-integer representation.
//
// Every spin is carried as twice its value (`two_j`), so j = 3/2 is the exact
// integer 3 and no floating-point comparison of half-integers ever happens.
// Projections are likewise passed as `two_m` and are enumerated in descending
// order m = +j ... -j throughout the library; `projection_index` defines the
// storage order used by every matrix in the package.
//
// Contents:
//   * clebsch_gordan  — Condon-Shortley Clebsch-Gordan coefficient <j1 m1, j2 m2|j m>
//   * wigner_6j       — 6-j symbol via the Racah single-sum form
//   * wigner_d_small  — reduced rotation matrix d^j_{m'm}(theta)
//   * legendre_p      — Legendre polynomial (real or complex argument)
//   * ScaledLegendre  — Q_L(x) = x^L P_L(1/x) as an explicit even polynomial,
//                       finite at x = 0 (used where 1/x would blow up)
//
// All coefficient routines use one shared log-factorial table with explicit
// sign tracking and long-double accumulation of the alternating sums; the
// supported range is two_j <= 40 with a relative accuracy target of 1e-12.

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace obesteady {

//! An angular momentum stored exactly as 2j.
struct AngularMomentum {
  int two_j = 0;

  constexpr AngularMomentum() = default;
  constexpr explicit AngularMomentum(int two_j_value) : two_j(two_j_value) {}

  //! j as a floating-point value (exact for half-integers).
  constexpr double value() const { return 0.5 * two_j; }
  //! Number of Zeeman sublevels, 2j + 1.
  constexpr int multiplicity() const { return two_j + 1; }
  //! True when j is an integer (2j even).
  constexpr bool is_integer() const { return two_j % 2 == 0; }

  friend constexpr bool operator==(AngularMomentum a, AngularMomentum b) {
    return a.two_j == b.two_j;
  }
  friend constexpr bool operator!=(AngularMomentum a, AngularMomentum b) {
    return a.two_j != b.two_j;
  }
};

//! Largest atomic momentum (as 2j) the coefficient routines are validated for
//! at the 1e-12 relative-accuracy target.
inline constexpr int kMaxTwoJ = 40;

//! Hard cap accepted by the coefficient routines. Tensor powers of a vector
//! reach rank 2J+1 for J up to kMaxTwoJ/2, so couplings must be computable
//! somewhat beyond the validated atomic range.
inline constexpr int kHardMaxTwoJ = 2 * kMaxTwoJ + 4;

//! Row/column index of projection m in the descending order m = +j ... -j.
inline int projection_index(AngularMomentum j, int two_m) {
  return (j.two_j - two_m) / 2;
}

//! Projection (as 2m) stored at `index` in the descending order.
inline int projection_at(AngularMomentum j, int index) {
  return j.two_j - 2 * index;
}

namespace detail {

//! log(n!) in long double; table built once, covers every factorial reachable
//! from two_j <= 40 arguments with room to spare.
inline long double log_factorial(int n) {
  static const std::vector<long double> table = [] {
    std::vector<long double> t(401);
    t[0] = 0.0L;
    for (int i = 1; i < static_cast<int>(t.size()); ++i)
      t[i] = t[i - 1] + std::log(static_cast<long double>(i));
    return t;
  }();
  if (n < 0) throw std::domain_error("log_factorial: negative argument");
  if (n >= static_cast<int>(table.size()))
    throw std::domain_error("log_factorial: argument out of table range");
  return table[static_cast<std::size_t>(n)];
}

//! (-1)^k for an exact integer carried as 2k (throws if k is half-integer).
inline int phase_from_two(int two_k) {
  if (two_k % 2 != 0)
    throw std::invalid_argument("phase_from_two: phase exponent is not an integer");
  return ((two_k / 2) % 2 == 0) ? 1 : -1;
}

inline void check_j(AngularMomentum j, const char* where) {
  if (j.two_j < 0)
    throw std::invalid_argument(std::string(where) + ": negative angular momentum");
  if (j.two_j > kHardMaxTwoJ)
    throw std::out_of_range(std::string(where) + ": two_j exceeds supported range " +
                            std::to_string(kHardMaxTwoJ));
}

inline void check_jm(AngularMomentum j, int two_m, const char* where) {
  check_j(j, where);
  if ((j.two_j - two_m) % 2 != 0)
    throw std::invalid_argument(std::string(where) +
                                ": projection parity does not match j");
  if (two_m < -j.two_j || two_m > j.two_j)
    throw std::invalid_argument(std::string(where) + ": |m| exceeds j");
}

//! Triangle rule on three spins; also requires integer perimeter.
inline bool triangle_ok(AngularMomentum a, AngularMomentum b, AngularMomentum c) {
  if ((a.two_j + b.two_j + c.two_j) % 2 != 0) return false;
  return c.two_j >= std::abs(a.two_j - b.two_j) && c.two_j <= a.two_j + b.two_j;
}

//! log of the triangle coefficient Delta(a,b,c), all arguments as 2j.
inline long double log_triangle(int two_a, int two_b, int two_c) {
  return 0.5L * (log_factorial((two_a + two_b - two_c) / 2) +
                 log_factorial((two_a - two_b + two_c) / 2) +
                 log_factorial((-two_a + two_b + two_c) / 2) -
                 log_factorial((two_a + two_b + two_c) / 2 + 1));
}

}  // namespace detail

namespace testing {

//! Deliberate sign-convention fault, used by the `verify` command as a
//! negative control: when armed, clebsch_gordan() returns the value of the
//! mirrored-phase convention instead. Never enable outside self-checks.
inline std::atomic<bool>& cg_sign_error_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}
inline void inject_cg_sign_error(bool on) { cg_sign_error_flag().store(on); }

}  // namespace testing

//! Clebsch-Gordan coefficient <j1 m1, j2 m2 | j m> (Condon-Shortley phases).
//! Returns 0 for violated selection rules (m1+m2 != m or triangle failure);
//! throws for unphysical (j, m) pairs or out-of-range spins.
inline double clebsch_gordan(AngularMomentum j1, int two_m1,
                             AngularMomentum j2, int two_m2,
                             AngularMomentum j, int two_m) {
  detail::check_jm(j1, two_m1, "clebsch_gordan");
  detail::check_jm(j2, two_m2, "clebsch_gordan");
  detail::check_jm(j, two_m, "clebsch_gordan");
  if (two_m1 + two_m2 != two_m) return 0.0;
  if (!detail::triangle_ok(j1, j2, j)) return 0.0;

  using detail::log_factorial;
  const long double prefactor =
      0.5L * std::log(static_cast<long double>(j.two_j + 1)) +
      detail::log_triangle(j1.two_j, j2.two_j, j.two_j) +
      0.5L * (log_factorial((j.two_j + two_m) / 2) +
              log_factorial((j.two_j - two_m) / 2) +
              log_factorial((j1.two_j - two_m1) / 2) +
              log_factorial((j1.two_j + two_m1) / 2) +
              log_factorial((j2.two_j - two_m2) / 2) +
              log_factorial((j2.two_j + two_m2) / 2));

  // Summation bounds follow from the factorial arguments being >= 0.
  const int a = (j1.two_j + j2.two_j - j.two_j) / 2;   // j1+j2-j
  const int b = (j1.two_j - two_m1) / 2;               // j1-m1
  const int c = (j2.two_j + two_m2) / 2;               // j2+m2
  const int d = (j.two_j - j2.two_j + two_m1) / 2;     // j-j2+m1
  const int e = (j.two_j - j1.two_j - two_m2) / 2;     // j-j1-m2
  const int k_min = std::max({0, -d, -e});
  const int k_max = std::min({a, b, c});

  long double sum = 0.0L;
  for (int k = k_min; k <= k_max; ++k) {
    const long double log_term = log_factorial(k) + log_factorial(a - k) +
                                 log_factorial(b - k) + log_factorial(c - k) +
                                 log_factorial(d + k) + log_factorial(e + k);
    const long double term = std::exp(prefactor - log_term);
    sum += (k % 2 == 0) ? term : -term;
  }

  double result = static_cast<double>(sum);
  if (testing::cg_sign_error_flag().load(std::memory_order_relaxed))
    result *= detail::phase_from_two(j1.two_j + j2.two_j - j.two_j);
  return result;
}

//! Wigner 6-j symbol {j1 j2 j3; j4 j5 j6} via the Racah single-sum form.
//! Returns 0 when any of the four triads violates the triangle rule.
inline double wigner_6j(AngularMomentum j1, AngularMomentum j2, AngularMomentum j3,
                        AngularMomentum j4, AngularMomentum j5, AngularMomentum j6) {
  for (AngularMomentum j : {j1, j2, j3, j4, j5, j6}) detail::check_j(j, "wigner_6j");
  if (!detail::triangle_ok(j1, j2, j3) || !detail::triangle_ok(j1, j5, j6) ||
      !detail::triangle_ok(j4, j2, j6) || !detail::triangle_ok(j4, j5, j3))
    return 0.0;

  using detail::log_factorial;
  const long double log_delta =
      detail::log_triangle(j1.two_j, j2.two_j, j3.two_j) +
      detail::log_triangle(j1.two_j, j5.two_j, j6.two_j) +
      detail::log_triangle(j4.two_j, j2.two_j, j6.two_j) +
      detail::log_triangle(j4.two_j, j5.two_j, j3.two_j);

  const int s123 = (j1.two_j + j2.two_j + j3.two_j) / 2;
  const int s156 = (j1.two_j + j5.two_j + j6.two_j) / 2;
  const int s426 = (j4.two_j + j2.two_j + j6.two_j) / 2;
  const int s453 = (j4.two_j + j5.two_j + j3.two_j) / 2;
  const int p1245 = (j1.two_j + j2.two_j + j4.two_j + j5.two_j) / 2;
  const int p2356 = (j2.two_j + j3.two_j + j5.two_j + j6.two_j) / 2;
  const int p3164 = (j3.two_j + j1.two_j + j6.two_j + j4.two_j) / 2;

  const int t_min = std::max({s123, s156, s426, s453});
  const int t_max = std::min({p1245, p2356, p3164});

  long double sum = 0.0L;
  for (int t = t_min; t <= t_max; ++t) {
    const long double log_term =
        log_factorial(t + 1) -
        (log_factorial(t - s123) + log_factorial(t - s156) +
         log_factorial(t - s426) + log_factorial(t - s453) +
         log_factorial(p1245 - t) + log_factorial(p2356 - t) +
         log_factorial(p3164 - t));
    const long double term = std::exp(log_delta + log_term);
    sum += (t % 2 == 0) ? term : -term;
  }
  return static_cast<double>(sum);
}

//! Reduced rotation matrix element d^j_{m'm}(theta) (rotation about Oy,
//! Varshalovich sign conventions: d^{1/2} = [[cos t/2, -sin t/2],[sin t/2, cos t/2]]).
inline double wigner_d_small(AngularMomentum j, int two_m_row, int two_m_col,
                             double theta) {
  detail::check_jm(j, two_m_row, "wigner_d_small");
  detail::check_jm(j, two_m_col, "wigner_d_small");
  using detail::log_factorial;

  const int jp_mr = (j.two_j + two_m_row) / 2;  // j + m'
  const int jm_mr = (j.two_j - two_m_row) / 2;  // j - m'
  const int jp_mc = (j.two_j + two_m_col) / 2;  // j + m
  const int jm_mc = (j.two_j - two_m_col) / 2;  // j - m
  const int mr_minus_mc = (two_m_row - two_m_col) / 2;

  const long double log_norm =
      0.5L * (log_factorial(jp_mr) + log_factorial(jm_mr) +
              log_factorial(jp_mc) + log_factorial(jm_mc));

  const double c = std::cos(0.5 * theta);
  const double s = std::sin(0.5 * theta);

  const int s_min = std::max(0, -mr_minus_mc);
  const int s_max = std::min(jp_mc, jm_mr);

  long double sum = 0.0L;
  for (int k = s_min; k <= s_max; ++k) {
    const int pow_c = jp_mc + jm_mr - 2 * k;  // 2j + m - m' - 2k
    const int pow_s = mr_minus_mc + 2 * k;
    // std::pow(x, 0) == 1 covers the 0^0 interval endpoints.
    const long double mag =
        std::exp(log_norm -
                 (log_factorial(jp_mc - k) + log_factorial(k) +
                  log_factorial(mr_minus_mc + k) + log_factorial(jm_mr - k))) *
        std::pow(static_cast<long double>(c), pow_c) *
        std::pow(static_cast<long double>(s), pow_s);
    const int sign = ((mr_minus_mc + k) % 2 == 0) ? 1 : -1;
    sum += sign * mag;
  }
  return static_cast<double>(sum);
}

//! Full reduced rotation matrix, rows/columns in descending projection order.
inline Eigen::MatrixXd wigner_d_matrix(AngularMomentum j, double theta) {
  const int n = j.multiplicity();
  Eigen::MatrixXd d(n, n);
  for (int r = 0; r < n; ++r)
    for (int col = 0; col < n; ++col)
      d(r, col) = wigner_d_small(j, projection_at(j, r), projection_at(j, col), theta);
  return d;
}

//! Legendre polynomial P_L(z) by upward recurrence (real or complex argument).
template <typename Scalar>
inline Scalar legendre_p(int degree, Scalar z) {
  if (degree < 0) throw std::invalid_argument("legendre_p: negative degree");
  Scalar p_prev = Scalar(1);
  if (degree == 0) return p_prev;
  Scalar p = z;
  for (int l = 1; l < degree; ++l) {
    const Scalar p_next =
        (Scalar(2 * l + 1) * z * p - Scalar(l) * p_prev) / Scalar(l + 1);
    p_prev = p;
    p = p_next;
  }
  return p;
}

//! Q_L(x) = x^L P_L(1/x), expanded as an explicit polynomial in x^2 so that it
//! stays finite at x = 0 (Q_L(0) = (2L-1)!!/L!, the leading P_L coefficient).
//! Satisfies (L+1) Q_{L+1}(x) = (2L+1) Q_L(x) - L x^2 Q_{L-1}(x), and Q_L(1) = 1.
class ScaledLegendre {
 public:
  static constexpr int kMaxDegree = 41;

  //! Even-power coefficients c_k of Q_L(x) = sum_k c_k x^{2k}.
  static const std::vector<double>& coefficients(int degree) {
    if (degree < 0 || degree > kMaxDegree)
      throw std::out_of_range("ScaledLegendre: degree out of supported range");
    static const std::vector<std::vector<double>> table = build_table();
    return table[static_cast<std::size_t>(degree)];
  }

  //! Evaluate Q_L(x) by running the three-term recurrence at the evaluation
  //! point (forward-stable on [0, 1]; summing the monomial coefficients
  //! instead loses ~8 digits near x = 1 for large L).
  static double evaluate(int degree, double x) {
    return static_cast<double>(evaluate_impl<long double>(degree, x));
  }

  //! Complex-argument evaluation of Q_L(x).
  static std::complex<double> evaluate(int degree, std::complex<double> x) {
    const std::complex<long double> q =
        evaluate_impl<std::complex<long double>>(degree, x);
    return {static_cast<double>(q.real()), static_cast<double>(q.imag())};
  }

 private:
  template <class Scalar, class Arg>
  static Scalar evaluate_impl(int degree, Arg x) {
    if (degree < 0 || degree > kMaxDegree)
      throw std::out_of_range("ScaledLegendre: degree out of supported range");
    const Scalar x2 = Scalar(x) * Scalar(x);
    Scalar prev = Scalar(1.0L), cur = Scalar(1.0L);  // Q_0, Q_1
    for (int l = 1; l < degree; ++l) {
      const Scalar next =
          ((2.0L * l + 1.0L) * cur - Scalar(static_cast<long double>(l)) * x2 * prev) /
          Scalar(static_cast<long double>(l + 1));
      prev = cur;
      cur = next;
    }
    return degree == 0 ? prev : cur;
  }

  static std::vector<std::vector<double>> build_table() {
    std::vector<std::vector<long double>> q(kMaxDegree + 1);
    q[0] = {1.0L};
    q[1] = {1.0L};
    for (int l = 1; l < kMaxDegree; ++l) {
      // (l+1) Q_{l+1} = (2l+1) Q_l - l x^2 Q_{l-1}, acting on x^2 coefficients.
      std::vector<long double> next(static_cast<std::size_t>((l + 1) / 2) + 1, 0.0L);
      for (std::size_t k = 0; k < q[l].size(); ++k)
        next[k] += (2.0L * l + 1.0L) * q[l][k];
      for (std::size_t k = 0; k < q[l - 1].size(); ++k)
        next[k + 1] -= static_cast<long double>(l) * q[l - 1][k];
      for (long double& ck : next) ck /= (l + 1);
      q[l + 1] = std::move(next);
    }
    std::vector<std::vector<double>> out(q.size());
    for (std::size_t l = 0; l < q.size(); ++l)
      out[l].assign(q[l].begin(), q[l].end());
    return out;
  }
};

}  // namespace obesteady
