#pragma once

// Closed-form steady state of a closed dipole line Jg -> Je driven by
// resonant elliptically polarized light.
//
// The qualitative behaviour is set by the transition class:
//   J -> J-1              two dark ground states; the steady state is any
//                         mixture inside that plane and is NOT unique
//   J -> J,  integer J    one dark state; the steady state is that pure state
//   J -> J,  half-int J   no dark state (except circular polarization);
//                         the excited level is populated isotropically
//   J -> J+1              no dark state; anisotropic steady state
// Provided routines:
//   classify              map (Jg, Je) to its transition class
//   dark_subspace         orthonormal basis of uncoupled ground states
//   dark_pair_overlap     overlap of the two stretched states whose
//                         combinations span the J -> J-1 dark plane
//   natural_basis         eigenbases of V^dag V / V V^dag with canonical
//                         ordering, degeneracies split by the raising ladder
//   steady_state          full density matrix in closed form (classes
//                         J -> J, J -> J+1) or the dark projector (J -> J
//                         integer); J -> J-1 raises (not unique)
//   normalization_constants  alpha_0, alpha_1 from the rank expansions
//   excited_population    pi_e = S~ / (1 + 2 S~),  S~ = S alpha_1/alpha_0
//   saturation_intensity_ratio  alpha_0/alpha_1, the polarization-dependent
//                         rescaling of the two-level saturation intensity
//   normalized_absorption low-saturation absorption relative to an
//                         unpolarized ensemble
//   branching_matrix      spontaneous branching ratios between natural bases
//   broadband_map         (R, L) stimulated rate and shift of a phase-diffusing
//                         field and the effective saturation parameter
//
// Density matrices are written in the Zeeman basis (descending projection,
// the library-wide convention).  The optical coherence is reported in the
// rotating frame as rho_eg with the convention
//   rho_eg = zeta (V rho_gg - rho_ee V),  zeta = i Omega / (mu + gamma/2 - i delta),
// i.e. the sign that solves the coherence equation of motion; with it the
// optical-pumping feeding term gamma S V rho_gg V^dag enters the population
// balance with a positive rate.  (The opposite overall sign corresponds to
// the redefinition Omega -> -Omega and leaves every population, spectrum and
// |rho_eg| unchanged.)

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "obesteady/angular.hpp"
#include "obesteady/operators.hpp"
#include "obesteady/polarization.hpp"

namespace obesteady {

//! The four qualitatively different classes of a closed dipole line.
enum class TransitionClass {
  DarkTwoDim,     //!< J -> J-1: two dark states, steady state not unique
  DarkUnique,     //!< J -> J, integer J: a single dark state
  NoDarkHalfInt,  //!< J -> J, half-integer J: no dark state, isotropic rho_ee
  NoDarkPlus,     //!< J -> J+1: no dark state
};

//! Short machine-readable tag for a transition class.
inline const char* transition_class_name(TransitionClass c) {
  switch (c) {
    case TransitionClass::DarkTwoDim: return "dark_two_dim";
    case TransitionClass::DarkUnique: return "dark_unique";
    case TransitionClass::NoDarkHalfInt: return "no_dark_half_int";
    case TransitionClass::NoDarkPlus: return "no_dark_plus";
  }
  throw std::logic_error("transition_class_name: unknown class");
}

//! A classified closed dipole line.
struct TransitionSpec {
  AngularMomentum jg;
  AngularMomentum je;
  TransitionClass transition_class = TransitionClass::NoDarkPlus;
  int dark_dimension = 0;  //!< dimension of the uncoupled ground subspace
};

//! Classify a closed line by the pair of angular momenta. Throws
//! std::invalid_argument unless Je - Jg is -1, 0 or +1 (with Jg = Je = 0
//! excluded: a 0 -> 0 line carries no dipole).
inline TransitionSpec classify(AngularMomentum jg, AngularMomentum je) {
  detail::check_atomic_j(jg, "classify");
  detail::check_atomic_j(je, "classify");
  if (jg.two_j == 0 && je.two_j == 0)
    throw std::invalid_argument("classify: a 0 -> 0 line has no dipole coupling");
  const int diff = je.two_j - jg.two_j;
  if (diff == -2) return {jg, je, TransitionClass::DarkTwoDim, 2};
  if (diff == 2) return {jg, je, TransitionClass::NoDarkPlus, 0};
  if (diff == 0) {
    if (jg.is_integer()) return {jg, je, TransitionClass::DarkUnique, 1};
    return {jg, je, TransitionClass::NoDarkHalfInt, 0};
  }
  throw std::invalid_argument(
      "classify: dipole selection rules require |Je - Jg| <= 1 with equal parity");
}

//! Driving-field parameters in the rotating frame. The Rabi frequency is
//! complex (its phase is the optical phase); gamma is the excited-state decay
//! rate; bandwidth is the phase-diffusion rate mu of a broadband field
//! (zero for monochromatic light).
struct FieldParams {
  Complex rabi{0.0, 0.0};
  double detuning = 0.0;
  double gamma = 1.0;
  double bandwidth = 0.0;

  void validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
      throw std::invalid_argument("FieldParams: gamma must be positive and finite");
    if (!(bandwidth >= 0.0) || !std::isfinite(bandwidth))
      throw std::invalid_argument("FieldParams: bandwidth must be >= 0 and finite");
    if (!std::isfinite(detuning))
      throw std::invalid_argument("FieldParams: detuning must be finite");
    if (!std::isfinite(rabi.real()) || !std::isfinite(rabi.imag()))
      throw std::invalid_argument("FieldParams: Rabi frequency must be finite");
  }

  //! Monochromatic saturation parameter S = |Omega|^2 / (gamma^2/4 + delta^2).
  double saturation() const {
    return std::norm(rabi) / (0.25 * gamma * gamma + detuning * detuning);
  }

  //! Stimulated rate and light shift of a phase-diffusing field packed as
  //! R + iL = |Omega|^2 / (mu + gamma/2 - i delta). At mu = 0 this reduces to
  //! R = gamma S / 2, L = delta S.
  Complex broadband_rl() const {
    return std::norm(rabi) / Complex(bandwidth + 0.5 * gamma, -detuning);
  }

  //! Saturation parameter entering the steady populations: S itself for a
  //! monochromatic field, 2R/gamma for a phase-diffusing one (the branch keeps
  //! the mu = 0 case bit-exact with saturation()).
  double effective_saturation() const {
    if (bandwidth == 0.0) return saturation();
    return 2.0 * broadband_rl().real() / gamma;
  }

  //! Prefactor zeta of the steady optical coherence
  //! rho_eg = zeta (V rho_gg - rho_ee V).
  Complex coherence_prefactor() const {
    return Complex(0.0, 1.0) * rabi / Complex(bandwidth + 0.5 * gamma, -detuning);
  }

  //! Field with the Rabi frequency chosen real >= 0 to reach a prescribed
  //! monochromatic saturation parameter at the given detuning.
  static FieldParams from_saturation(double s, double detuning = 0.0,
                                     double gamma = 1.0, double bandwidth = 0.0) {
    if (!(s >= 0.0) || !std::isfinite(s))
      throw std::invalid_argument("FieldParams: saturation must be >= 0 and finite");
    FieldParams f;
    f.detuning = detuning;
    f.gamma = gamma;
    f.bandwidth = bandwidth;
    f.validate();
    f.rabi = std::sqrt(s * (0.25 * gamma * gamma + detuning * detuning));
    return f;
  }
};

//! Internal density matrix of the two-level manifold, stored blockwise.
//! rho_gg is (2Jg+1) x (2Jg+1), rho_ee is (2Je+1) x (2Je+1) and the optical
//! coherence block rho_eg is (2Je+1) x (2Jg+1); rho_ge is its adjoint.
struct DensityMatrix {
  Eigen::MatrixXcd rho_gg;
  Eigen::MatrixXcd rho_ee;
  Eigen::MatrixXcd rho_eg;

  double total_trace() const {
    return rho_gg.trace().real() + rho_ee.trace().real();
  }
};

//! Raised when a dark subspace is requested for a line/polarization without
//! dark states.
class no_dark_state_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

//! Raised when the steady state retains memory of the initial conditions
//! (J -> J-1: any mixture within the dark plane is stationary).
class non_unique_steady_state_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace detail {

//! Dark-state constructions assume the scalar invariant (e.e) is real, which
//! holds in every frame reachable by polarization_from_ellipticity and under
//! real rotations of those frames.
inline void require_real_scalar_invariant(const ComplexVector3& e, const char* where) {
  const double n2 =
      std::norm(e.q_plus) + std::norm(e.q_zero) + std::norm(e.q_minus);
  if (std::abs(dot(e, e).imag()) > 1e-12 * std::max(1.0, n2))
    throw std::domain_error(std::string(where) +
                            ": (e.e) must be real (rotate the phase convention "
                            "of the polarization vector first)");
}

//! Unit spin axis n = i [c x c*] of a circular vector (or the net-circulation
//! axis of any elliptical one).
inline Eigen::Vector3d spin_axis(const ComplexVector3& c, const char* where) {
  const ComplexVector3 s = Complex(0.0, 1.0) * cross(c, c.conjugated());
  const Eigen::Vector3d n = to_cartesian(s).real();
  const double len = n.norm();
  if (len < 1e-8)
    throw std::domain_error(std::string(where) +
                            ": polarization carries no circulation axis");
  return n / len;
}

//! Zeeman amplitudes of the state |j, m_edge> quantized along the given axis,
//! i.e. the m_edge column of the rotation R(phi, theta, 0) taking z to axis.
inline Eigen::VectorXcd rotated_edge_state(AngularMomentum j, int two_m_edge,
                                           const Eigen::Vector3d& axis) {
  const double theta = std::acos(std::clamp(axis.z(), -1.0, 1.0));
  const double phi = std::atan2(axis.y(), axis.x());
  Eigen::VectorXcd a(j.multiplicity());
  for (int idx = 0; idx < j.multiplicity(); ++idx) {
    const int two_mu = projection_at(j, idx);
    a(idx) = std::exp(Complex(0.0, -0.5 * static_cast<double>(two_mu) * phi)) *
             wigner_d_small(j, two_mu, two_m_edge, theta);
  }
  return a;
}

//! Unit-normalized ground state with amplitudes a_mu = (-1)^mu {c}_{J,-mu}
//! built from the J-fold tensor power of a circular vector c: the stretched
//! state |J, J> along the spin axis of c.
inline Eigen::VectorXcd stretched_tensor_state(const ComplexVector3& c,
                                               AngularMomentum j) {
  const SphericalTensor t = tensor_power(c, j.two_j / 2);
  Eigen::VectorXcd a(j.multiplicity());
  for (int idx = 0; idx < j.multiplicity(); ++idx) {
    const int two_mu = projection_at(j, idx);
    a(idx) = static_cast<double>(phase_from_two(two_mu)) * t.component(-two_mu);
  }
  a.normalize();
  return a;
}

//! Below this value of |(e.e)| the two circular components of the field are
//! treated as degenerate and the J -> J-1 dark plane is returned in the
//! rotated-edge basis (the +-combinations would divide by 1 - w with
//! 1 - w ~ 4J|(e.e)|, which is still accurate at the threshold but
//! meaningless beyond it).
inline constexpr double kDegeneratePairTol = 1e-8;

//! The two stretched dark states of a J -> J-1 line, one per circular
//! component of the field, as raw (non-orthogonal) unit vectors. The second
//! is rephased so their overlap is real >= 0. Requires non-circular light.
inline std::pair<Eigen::VectorXcd, Eigen::VectorXcd> stretched_dark_pair(
    const TransitionSpec& spec, const Polarization& pol) {
  const auto [c1, c2] = circular_pair(pol);
  Eigen::VectorXcd psi1, psi2;
  if (spec.jg.is_integer()) {
    psi1 = stretched_tensor_state(c1, spec.jg);
    psi2 = stretched_tensor_state(c2, spec.jg);
  } else {
    psi1 = rotated_edge_state(spec.jg, spec.jg.two_j,
                              spin_axis(c1, "dark_subspace"));
    psi2 = rotated_edge_state(spec.jg, spec.jg.two_j,
                              spin_axis(c2, "dark_subspace"));
  }
  const Complex w = psi1.dot(psi2);
  if (std::abs(w) > 1e-14) psi2 *= std::conj(w) / std::abs(w);
  return {std::move(psi1), std::move(psi2)};
}

}  // namespace detail

//! Orthonormal basis of the ground states decoupled from the light.
//!
//! J -> J-1: two states. For elliptical light these are the normalized
//! +-combinations (Psi_1 +- Psi_2)/sqrt(2(1 +- w)) of the stretched states
//! Psi_k = |J, J> along the spin axes of the two circular field components
//! (overlap w = ((1 - |e.e|)/(1 + |e.e|))^J); integer J builds them from
//! tensor powers of the circular vectors, half-integer J from rotations.
//! Within |e.e| <= 1e-8 of circular the pair is degenerate and the
//! orthonormal basis {|J, J>, |J, J-1>} along the remaining axis is returned.
//!
//! J -> J integer: the single coherent-tensor state a_mu = (-1)^mu N {e}_{J,-mu}.
//!
//! J -> J half-integer: dark only for circular light (the edge state along
//! the spin axis); otherwise raises no_dark_state_error, as does J -> J+1
//! always.
inline std::vector<Eigen::VectorXcd> dark_subspace(const TransitionSpec& spec,
                                                   const Polarization& pol) {
  detail::require_real_scalar_invariant(pol.e, "dark_subspace");
  const Complex ee = dot(pol.e, pol.e);
  switch (spec.transition_class) {
    case TransitionClass::DarkUnique: {
      const int j = spec.jg.two_j / 2;
      const SphericalTensor t = tensor_power(pol.e, j);
      // |a|^2 sums to (J!/(2J-1)!!) Q_J((e.e)) with Q_L the scaled Legendre
      // polynomial, strictly positive on [0, 1].
      double norm_sq = ScaledLegendre::evaluate(j, ee.real());
      for (int l = 1; l <= j; ++l)
        norm_sq *= static_cast<double>(l) / static_cast<double>(2 * l - 1);
      Eigen::VectorXcd a(spec.jg.multiplicity());
      const double scale = 1.0 / std::sqrt(norm_sq);
      for (int idx = 0; idx < spec.jg.multiplicity(); ++idx) {
        const int two_mu = projection_at(spec.jg, idx);
        a(idx) = static_cast<double>(detail::phase_from_two(two_mu)) * scale *
                 t.component(-two_mu);
      }
      return {std::move(a)};
    }
    case TransitionClass::DarkTwoDim: {
      if (std::abs(ee) <= detail::kDegeneratePairTol) {
        const Eigen::Vector3d n = detail::spin_axis(pol.e, "dark_subspace");
        return {detail::rotated_edge_state(spec.jg, spec.jg.two_j, n),
                detail::rotated_edge_state(spec.jg, spec.jg.two_j - 2, n)};
      }
      auto [psi1, psi2] = detail::stretched_dark_pair(spec, pol);
      const double w = psi1.dot(psi2).real();
      Eigen::VectorXcd plus = (psi1 + psi2) / std::sqrt(2.0 * (1.0 + w));
      Eigen::VectorXcd minus = (psi1 - psi2) / std::sqrt(2.0 * (1.0 - w));
      return {std::move(plus), std::move(minus)};
    }
    case TransitionClass::NoDarkHalfInt: {
      if (detail::is_circular_direction(pol.e))
        return {detail::rotated_edge_state(
            spec.jg, spec.jg.two_j, detail::spin_axis(pol.e, "dark_subspace"))};
      throw no_dark_state_error(
          "dark_subspace: a J -> J half-integer line has no dark state away "
          "from circular polarization");
    }
    case TransitionClass::NoDarkPlus:
      throw no_dark_state_error(
          "dark_subspace: a J -> J+1 line couples every ground state");
  }
  throw std::logic_error("dark_subspace: unknown class");
}

//! Overlap w = <Psi_1|Psi_2> of the two stretched dark states of a J -> J-1
//! line (rephased real >= 0); equals ((1 - |e.e|)/(1 + |e.e|))^J. Returns 1
//! within the circular-degeneracy tolerance. Other classes are an error.
inline double dark_pair_overlap(const TransitionSpec& spec, const Polarization& pol) {
  if (spec.transition_class != TransitionClass::DarkTwoDim)
    throw std::invalid_argument(
        "dark_pair_overlap: stretched pairs exist only on J -> J-1 lines");
  detail::require_real_scalar_invariant(pol.e, "dark_pair_overlap");
  if (std::abs(dot(pol.e, pol.e)) <= detail::kDegeneratePairTol) return 1.0;
  const auto [psi1, psi2] = detail::stretched_dark_pair(spec, pol);
  return psi1.dot(psi2).real();
}

//! Natural bases of a line: eigenvectors of V^dag V (ground) and V V^dag
//! (excited) with V = sum_k lambda_k |e_k><g_k|.
struct NaturalBasis {
  //! Eigenvalues lambda_k^2 of V^dag V, descending.
  Eigen::VectorXd lambdas_sq;
  //! Ground eigenvectors as columns, ordered like lambdas_sq.
  Eigen::MatrixXcd ground_states;
  //! Excited eigenvectors as columns; the first `paired` columns are
  //! V g_k / lambda_k, the rest span the kernel of V^dag.
  Eigen::MatrixXcd excited_states;
  //! Steady excited-state weights nu_k^2 (eigenvalues of the scaled W W^dag)
  //! aligned with excited_states; empty for classes without raising operators
  //! (J -> J-1 and J -> J integer).
  Eigen::VectorXd nus_sq;
  //! Number of columns with lambda_k^2 above the pairing tolerance.
  int paired = 0;
};

namespace detail {

//! Clusters of indices [begin, end) whose descending values differ by less
//! than the gap tolerance.
inline std::vector<std::pair<int, int>> descending_clusters(
    const Eigen::VectorXd& values, int count, double gap) {
  std::vector<std::pair<int, int>> out;
  int begin = 0;
  for (int k = 1; k <= count; ++k) {
    if (k == count || values(k - 1) - values(k) > gap) {
      out.emplace_back(begin, k);
      begin = k;
    }
  }
  return out;
}

}  // namespace detail

//! Build the natural bases of a line for a given polarization.
//!
//! lambda_k^2 are sorted descending; columns with lambda_k^2 <= 1e-12 are
//! kernel states of V (ground) / V^dag (excited). On J -> J half-integer and
//! J -> J+1 lines, degenerate lambda^2 clusters (absolute gap 1e-11) are
//! simultaneously rotated to diagonalize the scaled W W^dag, splitting the
//! degeneracy by the steady excited weights nu_k^2 (sorted descending within
//! each cluster). Phases are canonical: the largest-magnitude entry of each
//! ground column is real positive, paired excited columns are V g / lambda.
inline NaturalBasis natural_basis(const TransitionSpec& spec, const Polarization& pol) {
  const Eigen::MatrixXcd v =
      coupling_operator(spec.jg, spec.je, pol).entries();
  const int ng = spec.jg.multiplicity();
  const int ne = spec.je.multiplicity();
  constexpr double kPairTol = 1e-12;
  constexpr double kClusterGap = 1e-11;

  NaturalBasis nb;
  nb.lambdas_sq.resize(ng);
  nb.ground_states.resize(ng, ng);
  nb.excited_states.resize(ne, ne);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es_g(v.adjoint() * v);
  for (int k = 0; k < ng; ++k) {
    nb.lambdas_sq(k) = std::max(0.0, es_g.eigenvalues()(ng - 1 - k));
    nb.ground_states.col(k) = es_g.eigenvectors().col(ng - 1 - k);
  }
  nb.paired = 0;
  while (nb.paired < ng && nb.paired < ne && nb.lambdas_sq(nb.paired) > kPairTol)
    ++nb.paired;

  if (nb.paired < ne) {
    // Kernel of V^dag: the zero-eigenvalue subspace of V V^dag.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es_e(v * v.adjoint());
    for (int k = 0; k < ne - nb.paired; ++k)
      nb.excited_states.col(nb.paired + k) = es_e.eigenvectors().col(k);
  }
  for (int k = 0; k < nb.paired; ++k)
    nb.excited_states.col(k) =
        v * nb.ground_states.col(k) / std::sqrt(nb.lambdas_sq(k));

  const bool has_raising =
      spec.transition_class == TransitionClass::NoDarkHalfInt ||
      spec.transition_class == TransitionClass::NoDarkPlus;
  if (has_raising) {
    const Eigen::MatrixXcd ws =
        raising_operators_scaled(spec.jg, spec.je, pol.e).w.entries();
    const Eigen::MatrixXcd ww = ws * ws.adjoint();
    nb.nus_sq.resize(ne);

    auto clusters =
        detail::descending_clusters(nb.lambdas_sq, nb.paired, kClusterGap);
    if (nb.paired < ne) clusters.emplace_back(nb.paired, ne);
    for (const auto& [begin, end] : clusters) {
      const int size = end - begin;
      Eigen::MatrixXcd block = nb.excited_states.middleCols(begin, size).adjoint() *
                               ww * nb.excited_states.middleCols(begin, size);
      block = 0.5 * (block + block.adjoint()).eval();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es_b(block);
      Eigen::MatrixXcd u(size, size);
      for (int k = 0; k < size; ++k) {
        u.col(k) = es_b.eigenvectors().col(size - 1 - k);
        nb.nus_sq(begin + k) = std::max(0.0, es_b.eigenvalues()(size - 1 - k));
      }
      nb.excited_states.middleCols(begin, size) *= u;
      if (end <= nb.paired) nb.ground_states.middleCols(begin, size) *= u;
    }
  }

  // Canonical phases: largest-magnitude entry of each ground column real
  // positive; paired excited columns rebuilt from the fixed ground columns
  // (this preserves V = sum lambda |e><g| exactly), kernel columns fixed
  // directly.
  for (int k = 0; k < ng; ++k) {
    int imax = 0;
    nb.ground_states.col(k).cwiseAbs().maxCoeff(&imax);
    const Complex z = nb.ground_states(imax, k);
    if (std::abs(z) > 0.0) nb.ground_states.col(k) *= std::conj(z) / std::abs(z);
  }
  for (int k = 0; k < nb.paired; ++k)
    nb.excited_states.col(k) =
        v * nb.ground_states.col(k) / std::sqrt(nb.lambdas_sq(k));
  for (int k = nb.paired; k < ne; ++k) {
    int imax = 0;
    nb.excited_states.col(k).cwiseAbs().maxCoeff(&imax);
    const Complex z = nb.excited_states(imax, k);
    if (std::abs(z) > 0.0) nb.excited_states.col(k) *= std::conj(z) / std::abs(z);
  }
  return nb;
}

//! Normalization constants of the steady state.  alpha_1 = Tr(rho_ee-shape),
//! alpha_0 = Tr(rho_gg-shape at S -> 0); the steady total excited population
//! is S~/(1 + 2 S~) with S~ = S alpha_1/alpha_0. On J -> J+1 lines both are
//! reported in the (e.e)^(2J+1)-scaled convention (finite at circular, ratios
//! unchanged); on J -> J half-integer lines alpha_0 diverges at circular
//! polarization (returned as +infinity: a dark state forms and absorption
//! stops). Dark classes (J -> J-1, J -> J integer) report zeros.
struct NormalizationConstants {
  double alpha0 = 0.0;
  double alpha1 = 0.0;
};

inline NormalizationConstants normalization_constants(const TransitionSpec& spec,
                                                      double epsilon) {
  constexpr double kQuarterPi = 0.78539816339744830961;
  if (!(std::abs(epsilon) <= kQuarterPi + 1e-12))
    throw std::invalid_argument(
        "normalization_constants: ellipticity must satisfy |eps| <= pi/4");
  double x = std::cos(2.0 * epsilon);
  if (std::abs(x) < 1e-15) x = 0.0;
  const int two_j = spec.jg.two_j;
  switch (spec.transition_class) {
    case TransitionClass::DarkTwoDim:
    case TransitionClass::DarkUnique:
      return {0.0, 0.0};
    case TransitionClass::NoDarkHalfInt: {
      NormalizationConstants nc;
      nc.alpha1 = static_cast<double>(two_j + 1);
      if (x == 0.0) {
        nc.alpha0 = std::numeric_limits<double>::infinity();
        return nc;
      }
      double sum = 0.0;
      for (int l = 1; l <= two_j; l += 2) {
        const double cl = expansion_coefficient(spec.jg, spec.je, l);
        sum += cl * cl * legendre_p(l, 1.0 / x);
      }
      nc.alpha0 = 3.0 * sum / (static_cast<double>(two_j + 1) * x);
      return nc;
    }
    case TransitionClass::NoDarkPlus: {
      NormalizationConstants nc;
      nc.alpha1 = ScaledLegendre::evaluate(two_j + 1, x);
      double sum = 0.0;
      for (int l = two_j; l >= 0; l -= 2) {
        const double cl = expansion_coefficient(spec.jg, spec.je, l);
        double power = 1.0;  // x^(2J - L), an even integer power
        for (int n = 0; n < two_j - l; ++n) power *= x;
        sum += cl * cl * ScaledLegendre::evaluate(l, x) * power;
      }
      nc.alpha0 = 3.0 * sum / static_cast<double>(two_j + 3);
      return nc;
    }
  }
  throw std::logic_error("normalization_constants: unknown class");
}

//! Steady state of a line under stationary driving.
struct SteadyStateResult {
  DensityMatrix rho;
  Eigen::VectorXd lambdas_sq;  //!< natural-basis coupling strengths, descending
  Eigen::VectorXd nus_sq;      //!< natural excited weights (raising classes)
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  double beta = 0.0;  //!< 1 / (alpha0 + 2 S alpha1)
  double pi_e = 0.0;  //!< total excited population Tr rho_ee
  int dark_dimension = 0;
};

//! Closed-form steady state.
//!
//! J -> J half-integer: rho_ee = beta S, rho_gg = beta ((V^dag V)^-1 + S),
//! rho_eg = zeta beta (V^-1)^dag; circular polarization raises
//! singular_coupling_error (a dark state forms).
//! J -> J+1: rho_ee = beta S Ws Ws^dag, rho_gg = beta (Xs Xs^dag + S Ws~ Ws~^dag),
//! rho_eg = zeta beta Ws Xs^dag in the scaled convention (finite everywhere).
//! J -> J integer: the dark projector (populations only; no optical coherence).
//! J -> J-1: raises non_unique_steady_state_error (the dark plane retains
//! memory of the initial state; integrate the equations of motion instead).
//!
//! A phase-diffusing field (bandwidth > 0) replaces S by 2R/gamma and the
//! coherence prefactor by zeta(mu); bandwidth = 0 reproduces the
//! monochromatic result exactly.
inline SteadyStateResult steady_state(const TransitionSpec& spec,
                                      const Polarization& pol,
                                      const FieldParams& field) {
  field.validate();
  const double s = field.effective_saturation();
  const Complex zeta = field.coherence_prefactor();
  const int ng = spec.jg.multiplicity();
  const int ne = spec.je.multiplicity();

  SteadyStateResult out;
  out.dark_dimension = spec.dark_dimension;
  switch (spec.transition_class) {
    case TransitionClass::DarkTwoDim:
      throw non_unique_steady_state_error(
          "steady_state: a J -> J-1 line keeps any mixture within its dark "
          "plane stationary; integrate the equations of motion from a chosen "
          "initial state instead");
    case TransitionClass::DarkUnique: {
      const Eigen::VectorXcd psi = dark_subspace(spec, pol).front();
      out.rho.rho_gg = psi * psi.adjoint();
      out.rho.rho_ee = Eigen::MatrixXcd::Zero(ne, ne);
      out.rho.rho_eg = Eigen::MatrixXcd::Zero(ne, ng);
      break;
    }
    case TransitionClass::NoDarkHalfInt: {
      const InverseCoupling inv = inverse_coupling(spec.jg, spec.je, pol);
      const Eigen::MatrixXcd& a_inv = inv.vdagv_inverse.entries();
      out.alpha1 = static_cast<double>(ng);
      out.alpha0 = a_inv.trace().real();
      out.beta = 1.0 / (out.alpha0 + 2.0 * s * out.alpha1);
      out.rho.rho_ee = (out.beta * s) * Eigen::MatrixXcd::Identity(ne, ne);
      out.rho.rho_gg =
          out.beta * (a_inv + s * Eigen::MatrixXcd::Identity(ng, ng));
      out.rho.rho_eg = (zeta * out.beta) * inv.v_inverse.entries().adjoint();
      break;
    }
    case TransitionClass::NoDarkPlus: {
      const RaisingOperators raising =
          raising_operators_scaled(spec.jg, spec.je, pol.e);
      const Eigen::MatrixXcd& ws = raising.w.entries();
      const Eigen::MatrixXcd& wts = raising.w_tilde.entries();
      const Eigen::MatrixXcd xs =
          x_operator_scaled(spec.jg, spec.je, pol.e).entries();
      const Eigen::MatrixXcd ww = ws * ws.adjoint();
      const Eigen::MatrixXcd xx = xs * xs.adjoint();
      out.alpha1 = ww.trace().real();
      out.alpha0 = xx.trace().real();
      out.beta = 1.0 / (out.alpha0 + 2.0 * s * out.alpha1);
      out.rho.rho_ee = (out.beta * s) * ww;
      out.rho.rho_gg = out.beta * (xx + s * (wts * wts.adjoint()));
      out.rho.rho_eg = (zeta * out.beta) * (ws * xs.adjoint());
      break;
    }
  }
  out.rho.rho_gg = 0.5 * (out.rho.rho_gg + out.rho.rho_gg.adjoint()).eval();
  out.rho.rho_ee = 0.5 * (out.rho.rho_ee + out.rho.rho_ee.adjoint()).eval();
  out.pi_e = out.rho.rho_ee.trace().real();

  const NaturalBasis nb = natural_basis(spec, pol);
  out.lambdas_sq = nb.lambdas_sq;
  out.nus_sq = nb.nus_sq;
  return out;
}

//! Total steady excited population pi_e = S~/(1 + 2 S~), S~ = S alpha1/alpha0,
//! as a function of ellipticity and the saturation parameter. Dark classes
//! return 0 (all population pools in dark states), as does a J -> J
//! half-integer line at circular polarization.
inline double excited_population(const TransitionSpec& spec, double epsilon,
                                 double saturation) {
  if (!(saturation >= 0.0) || !std::isfinite(saturation))
    throw std::invalid_argument(
        "excited_population: saturation must be >= 0 and finite");
  if (spec.transition_class == TransitionClass::DarkTwoDim ||
      spec.transition_class == TransitionClass::DarkUnique)
    return 0.0;
  const NormalizationConstants nc = normalization_constants(spec, epsilon);
  if (!std::isfinite(nc.alpha0)) return 0.0;
  const double s_tilde = saturation * nc.alpha1 / nc.alpha0;
  return s_tilde / (1.0 + 2.0 * s_tilde);
}

//! Polarization-dependent saturation intensity relative to the two-level
//! value, I_sat(eps)/I_0 = alpha0/alpha1. Dark classes saturate at no
//! intensity at all (+infinity), as does a J -> J half-integer line at
//! circular polarization.
inline double saturation_intensity_ratio(const TransitionSpec& spec, double epsilon) {
  if (spec.transition_class == TransitionClass::DarkTwoDim ||
      spec.transition_class == TransitionClass::DarkUnique)
    return std::numeric_limits<double>::infinity();
  const NormalizationConstants nc = normalization_constants(spec, epsilon);
  return nc.alpha0 / nc.alpha1;
}

//! Low-saturation absorption normalized to an unpolarized ensemble,
//! (alpha1/alpha0) * 3 (2Jg+1)/(2Je+1): 1 at linear polarization for
//! J -> J half-integer lines (<= 1 elsewhere) and >= 1 on J -> J+1 lines.
//! Dark classes absorb nothing in steady state.
inline double normalized_absorption(const TransitionSpec& spec, double epsilon) {
  if (spec.transition_class == TransitionClass::DarkTwoDim ||
      spec.transition_class == TransitionClass::DarkUnique)
    return 0.0;
  const NormalizationConstants nc = normalization_constants(spec, epsilon);
  if (!std::isfinite(nc.alpha0)) return 0.0;
  return (nc.alpha1 / nc.alpha0) * 3.0 *
         static_cast<double>(spec.jg.two_j + 1) /
         static_cast<double>(spec.je.two_j + 1);
}

//! Spontaneous-emission branching between the natural bases.
struct BranchingMatrix {
  //! w(i, j) = sum_q |<e_j|D_q|g_i>|^2, the probability that natural excited
  //! state j decays into natural ground state i; columns sum to 1.
  Eigen::MatrixXd w;
  //! Normalized stationary excited distribution nu^2 / sum nu^2 (raising
  //! classes only, empty otherwise).
  Eigen::VectorXd stationary;
  //! max_i |sum_j w(i, j) stationary(j) - stationary(i)| over paired indices:
  //! the steady excited weights are reproduced by one emission-excitation
  //! cycle.
  double stationarity_residual = 0.0;
};

inline BranchingMatrix branching_matrix(const TransitionSpec& spec,
                                        const Polarization& pol) {
  const NaturalBasis nb = natural_basis(spec, pol);
  const auto d = dipole_components(spec.jg, spec.je);
  const int ng = spec.jg.multiplicity();
  const int ne = spec.je.multiplicity();
  BranchingMatrix out;
  out.w = Eigen::MatrixXd::Zero(ng, ne);
  for (const LevelOperator& dq : d) {
    const Eigen::MatrixXcd amp =
        nb.excited_states.adjoint() * dq.entries() * nb.ground_states;
    out.w += amp.cwiseAbs2().transpose();
  }
  if (nb.nus_sq.size() > 0) {
    const double total = nb.nus_sq.sum();
    out.stationary = nb.nus_sq / total;
    double residual = 0.0;
    for (int i = 0; i < nb.paired; ++i) {
      const double cycled = out.w.row(i).dot(out.stationary);
      residual = std::max(residual, std::abs(cycled - out.stationary(i)));
    }
    out.stationarity_residual = residual;
  }
  return out;
}

//! Two-level map of a phase-diffusing (broadband) field: the stimulated rate
//! R and light shift L, R + iL = |Omega|^2/(mu + gamma/2 - i delta), and the
//! effective saturation parameter 2R/gamma that replaces S in the steady
//! populations.
struct BroadbandParameters {
  double stimulated_rate = 0.0;
  double light_shift = 0.0;
  double s_effective = 0.0;
};

inline BroadbandParameters broadband_map(const FieldParams& field) {
  field.validate();
  const Complex rl = field.broadband_rl();
  return {rl.real(), rl.imag(), field.effective_saturation()};
}

}  // namespace obesteady
