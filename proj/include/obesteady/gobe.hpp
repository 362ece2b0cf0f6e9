#pragma once

// Brute-force cross-check of the closed-form steady states: the generalized
// optical Bloch generator on the full (ground + excited) manifold, fixed-step
// time integration, steady states by direct null-space solve, and a
// Monte-Carlo validator for light with a finite bandwidth modelled as a
// phase-diffusing carrier.
//
// The generator acts on the column-major vectorization of the full density
// matrix written in the rotating frame.  Its block action is
//
//   (d/dt + gamma/2 - i delta) rho_eg = i Omega (V rho_gg - rho_ee V)
//   (d/dt + gamma/2 + i delta) rho_ge = i Omega^* (V^dag rho_ee - rho_gg V^dag)
//   (d/dt + gamma) rho_ee            = i (Omega V rho_ge - Omega^* rho_eg V^dag)
//   (d/dt) rho_gg                    = gamma sum_q D_q^dag rho_ee D_q
//                                      + i (Omega^* V^dag rho_eg - Omega rho_ge V)
//
// which describes generalized damped Rabi oscillations, optical nutation and
// optical pumping on a closed line.  The total population is conserved: the
// trace functional is an exact left null vector of the generator, so the
// number of stationary states equals the dark-space freedom of the line (one
// for a unique steady state, four complex dimensions for the J -> J-1 plane).
//
// Provided routines:
//   build_liouvillian        dense n^2 x n^2 generator (n = ng + ne)
//   integrate                fixed-step 4th-order Runge-Kutta propagation
//   numeric_steady_state     unique null vector, trace-normalized and
//                            Hermitian-symmetrized
//   liouvillian_spectrum     eigenvalues of the generator (all have
//                            non-positive real part)
//   null_space_dimension     kernel dimension by singular-value count
//   phase_path               one realization of the diffusing carrier phase
//   phase_diffusion_average  ensemble average over phase realizations with
//                            per-entry statistical error bars
//
// For a phase-diffusing carrier Omega(t) = Omega exp(-i psi(t)) with
// independent Gaussian increments <d psi^2> = 2 mu dt the field correlation
// decays as <Omega^*(t) Omega(t - tau)> = |Omega|^2 exp(-mu tau), and the
// stochastically averaged populations solve the monochromatic equations with
// the stimulated rate and light shift R + i L = |Omega|^2 / (mu + gamma/2 -
// i delta); the ensemble average produced here converges to that closed-form
// solution and reports the Monte-Carlo error bars alongside.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "obesteady/angular.hpp"
#include "obesteady/operators.hpp"
#include "obesteady/polarization.hpp"
#include "obesteady/steadystate.hpp"

namespace obesteady {

//! Dense generator of the optical Bloch dynamics, acting on the column-major
//! vectorization of the full (ground + excited) density matrix.  Ground
//! sublevels come first (projection descending), then excited sublevels.
struct Liouvillian {
  Eigen::MatrixXcd generator;  //!< n^2 x n^2 with n = ground_dim + excited_dim
  int ground_dim = 0;
  int excited_dim = 0;

  int dim() const { return ground_dim + excited_dim; }
};

//! Raised when a fixed-step integration ends before the state is stationary
//! to the requested tolerance.
class convergence_error : public std::runtime_error {
 public:
  convergence_error(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}

  double residual() const { return residual_; }

 private:
  double residual_;
};

namespace detail {

//! Assemble the full (ng + ne) x (ng + ne) matrix from level blocks.
inline Eigen::MatrixXcd full_from_blocks(const DensityMatrix& rho) {
  const int ng = static_cast<int>(rho.rho_gg.rows());
  const int ne = static_cast<int>(rho.rho_ee.rows());
  Eigen::MatrixXcd full = Eigen::MatrixXcd::Zero(ng + ne, ng + ne);
  full.topLeftCorner(ng, ng) = rho.rho_gg;
  full.bottomRightCorner(ne, ne) = rho.rho_ee;
  full.block(ng, 0, ne, ng) = rho.rho_eg;
  full.block(0, ng, ng, ne) = rho.rho_eg.adjoint();
  return full;
}

//! Split the full matrix back into level blocks.
inline DensityMatrix blocks_from_full(const Eigen::MatrixXcd& full, int ng) {
  const int ne = static_cast<int>(full.rows()) - ng;
  DensityMatrix rho;
  rho.rho_gg = full.topLeftCorner(ng, ng);
  rho.rho_ee = full.bottomRightCorner(ne, ne);
  rho.rho_eg = full.block(ng, 0, ne, ng);
  return rho;
}

inline Eigen::VectorXcd vectorize(const Eigen::MatrixXcd& m) {
  return Eigen::Map<const Eigen::VectorXcd>(m.data(), m.size());
}

inline Eigen::MatrixXcd devectorize(const Eigen::VectorXcd& v, int n) {
  return Eigen::Map<const Eigen::MatrixXcd>(v.data(), n, n);
}

//! vec of the identity: the trace functional as a bra on vectorized matrices.
inline Eigen::VectorXcd trace_functional(int n) {
  return vectorize(Eigen::MatrixXcd::Identity(n, n));
}

//! Superoperator of the map rho -> -i (H rho - rho H) for Hermitian or
//! general H (column-major convention: vec(A X B) = (B^T kron A) vec X).
inline Eigen::MatrixXcd commutator_superoperator(const Eigen::MatrixXcd& h) {
  const int n = static_cast<int>(h.rows());
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(n, n);
  return std::complex<double>(0, -1) *
         (Eigen::kroneckerProduct(id, h) -
          Eigen::kroneckerProduct(h.transpose(), id))
             .eval();
}

//! The Rabi-independent and Rabi-linear parts of the generator:
//!   L(Omega) = drift + Omega * stimulated + conj(Omega) * stimulated_conj.
//! Splitting them out lets a time-dependent carrier phase be applied per
//! step without rebuilding the spontaneous-decay part.
struct LiouvillianParts {
  Eigen::MatrixXcd drift;             //!< detuning + spontaneous decay/feeding
  Eigen::MatrixXcd stimulated;        //!< multiplies Omega
  Eigen::MatrixXcd stimulated_conj;   //!< multiplies conj(Omega)
  int ground_dim = 0;
  int excited_dim = 0;
};

inline LiouvillianParts liouvillian_parts(const TransitionSpec& spec,
                                          const Polarization& pol,
                                          double detuning, double gamma) {
  const int ng = spec.jg.multiplicity();
  const int ne = spec.je.multiplicity();
  const int n = ng + ne;
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(n, n);

  // Level projector and coupling operators embedded in the full space.
  Eigen::MatrixXcd excited_projector = Eigen::MatrixXcd::Zero(n, n);
  excited_projector.bottomRightCorner(ne, ne) =
      Eigen::MatrixXcd::Identity(ne, ne);

  Eigen::MatrixXcd raising = Eigen::MatrixXcd::Zero(n, n);
  raising.block(ng, 0, ne, ng) =
      coupling_operator(spec.jg, spec.je, pol).entries();

  LiouvillianParts parts;
  parts.ground_dim = ng;
  parts.excited_dim = ne;

  // Detuning term of the rotating frame: H_at = -delta * Pi_e.
  parts.drift = commutator_superoperator(-detuning * excited_projector);

  // Spontaneous decay: jump operators sqrt(gamma) D_q^dag (lowering), one per
  // spherical emission polarization.  Their completeness sum_q D_q D_q^dag =
  // Pi_e makes the anticommutator part exactly -gamma/2 {Pi_e, rho}, i.e.
  // -gamma rho_ee on the excited block and -gamma/2 on the coherences, while
  // the sandwich term feeds the ground block with gamma sum_q D_q^dag rho_ee
  // D_q.
  const auto dq = dipole_components(spec.jg, spec.je);
  for (const auto& component : dq) {
    Eigen::MatrixXcd lowering = Eigen::MatrixXcd::Zero(n, n);
    lowering.block(0, ng, ng, ne) = component.entries().adjoint();
    const Eigen::MatrixXcd rate = lowering.adjoint() * lowering;
    parts.drift += gamma * (Eigen::kroneckerProduct(lowering.conjugate(),
                                                    lowering) -
                            0.5 * Eigen::kroneckerProduct(id, rate) -
                            0.5 * Eigen::kroneckerProduct(rate.transpose(), id))
                       .eval();
  }

  // Stimulated coupling: H_int = -(Omega R + conj(Omega) R^dag) with R the
  // embedded raising operator, so the coherence equation picks up
  // + i Omega (V rho_gg - rho_ee V).
  parts.stimulated = commutator_superoperator(-raising);
  parts.stimulated_conj = commutator_superoperator(-raising.adjoint());
  return parts;
}

}  // namespace detail

//! Build the dense monochromatic generator.  The finite-bandwidth case is an
//! ensemble property (see phase_diffusion_average), not a single generator,
//! so a nonzero bandwidth is rejected here.
inline Liouvillian build_liouvillian(const TransitionSpec& spec,
                                     const Polarization& pol,
                                     const FieldParams& field) {
  field.validate();
  if (field.bandwidth != 0.0) {
    throw std::invalid_argument(
        "build_liouvillian: the generator is monochromatic; model a finite "
        "bandwidth with phase_diffusion_average instead");
  }
  const detail::LiouvillianParts parts =
      detail::liouvillian_parts(spec, pol, field.detuning, field.gamma);
  Liouvillian liouville;
  liouville.ground_dim = parts.ground_dim;
  liouville.excited_dim = parts.excited_dim;
  liouville.generator = parts.drift + field.rabi * parts.stimulated +
                        std::conj(field.rabi) * parts.stimulated_conj;
  return liouville;
}

//! Residual of total-population conservation: the infinity norm of the trace
//! functional applied from the left, which vanishes identically for a closed
//! line.
inline double trace_functional_residual(const Liouvillian& liouville) {
  const Eigen::VectorXcd t = detail::trace_functional(liouville.dim());
  return (t.adjoint() * liouville.generator).cwiseAbs().maxCoeff();
}

//! Eigenvalues of the generator.  Stability of the closed line requires all
//! real parts to be non-positive; the kernel carries the stationary states.
inline Eigen::VectorXcd liouvillian_spectrum(const Liouvillian& liouville) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(liouville.generator,
                                                     false);
  return solver.eigenvalues();
}

//! Kernel dimension by singular-value count: one stationary state for the
//! lines with a unique steady state, four (a full 2x2 Hermitian block of
//! freedom) for the J -> J-1 dark plane.
inline int null_space_dimension(const Liouvillian& liouville,
                                double tolerance = 1e-10) {
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(liouville.generator);
  const auto& sv = svd.singularValues();
  int dimension = 0;
  for (int k = 0; k < sv.size(); ++k)
    if (sv(k) <= tolerance * std::max(1.0, sv(0))) ++dimension;
  return dimension;
}

//! Fixed-step integration setup.  Times are absolute (same units as
//! 1/gamma); the horizon must cover both the spontaneous and the optical
//! pumping time scales: gamma t_end >= 50 and gamma S t_end >= 50.
struct IntegratorConfig {
  double dt = 0.0;
  double t_end = 0.0;
  double tolerance = 1e-9;  //!< stationarity: max entry of L vec(rho) at t_end
  std::string method = "rk4";

  void validate(const FieldParams& field) const {
    if (!(dt > 0.0)) {
      throw std::invalid_argument("IntegratorConfig: dt must be positive");
    }
    if (method != "rk4") {
      throw std::invalid_argument(
          "IntegratorConfig: unknown method \"" + method + "\"");
    }
    const double s = field.saturation();
    if (field.gamma * t_end < 50.0 || (s > 0.0 && field.gamma * s * t_end < 50.0)) {
      throw std::invalid_argument(
          "IntegratorConfig: horizon too short for the steady-state regime "
          "(need gamma t_end >= 50 and gamma S t_end >= 50)");
    }
  }

  //! Default step and horizon for a field: the step resolves the Rabi
  //! oscillation at large saturation, the horizon covers the optical-pumping
  //! scale 1/(gamma S) at small saturation.
  static IntegratorConfig for_field(const FieldParams& field) {
    IntegratorConfig cfg;
    const double s = field.saturation();
    cfg.dt = 0.002 / field.gamma * std::min(1.0, s > 0.0 ? 1.0 / s : 1.0);
    cfg.t_end = 50.0 / field.gamma * std::max(1.0, s > 0.0 ? 1.0 / s : 1.0);
    return cfg;
  }
};

//! Endpoint of a propagation together with its conservation diagnostics.
struct IntegrationResult {
  Eigen::MatrixXcd final_state;     //!< full rotating-frame matrix
  double stationarity_residual = 0; //!< max entry of L vec(rho) at the end
  double trace_drift = 0;           //!< |Tr rho(t_end) - Tr rho(0)|
  double hermiticity_defect = 0;    //!< max over steps of max|rho - rho^dag|
  long steps = 0;
};

//! Propagate a full density matrix with classic fixed-step 4th-order
//! Runge-Kutta.  Throws convergence_error when the endpoint is not
//! stationary to the configured tolerance; pick a longer horizon for slowly
//! pumping parameters (rates scale like gamma S times the weakest branching
//! weight).
inline IntegrationResult integrate(const Liouvillian& liouville,
                                   const Eigen::MatrixXcd& rho0,
                                   const IntegratorConfig& cfg,
                                   const FieldParams& field) {
  cfg.validate(field);
  const int n = liouville.dim();
  if (rho0.rows() != n || rho0.cols() != n) {
    throw std::invalid_argument("integrate: initial state has wrong dimension");
  }
  if ((rho0 - rho0.adjoint()).cwiseAbs().maxCoeff() > 1e-12 ||
      std::abs(rho0.trace().real() - 1.0) > 1e-12 ||
      std::abs(rho0.trace().imag()) > 1e-12) {
    throw std::invalid_argument(
        "integrate: initial state must be Hermitian with unit trace");
  }

  const Eigen::MatrixXcd& l = liouville.generator;
  Eigen::VectorXcd v = detail::vectorize(rho0);
  const double initial_trace = rho0.trace().real();

  IntegrationResult result;
  result.steps = static_cast<long>(std::ceil(cfg.t_end / cfg.dt - 1e-12));
  const double dt = cfg.dt;
  Eigen::VectorXcd k1, k2, k3, k4;
  for (long step = 0; step < result.steps; ++step) {
    k1.noalias() = l * v;
    k2.noalias() = l * (v + (0.5 * dt) * k1);
    k3.noalias() = l * (v + (0.5 * dt) * k2);
    k4.noalias() = l * (v + dt * k3);
    v += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const Eigen::MatrixXcd rho = detail::devectorize(v, n);
    result.hermiticity_defect =
        std::max(result.hermiticity_defect,
                 (rho - rho.adjoint()).cwiseAbs().maxCoeff());
  }

  result.final_state = detail::devectorize(v, n);
  result.trace_drift =
      std::abs(result.final_state.trace().real() - initial_trace) +
      std::abs(result.final_state.trace().imag());
  result.stationarity_residual = (l * v).cwiseAbs().maxCoeff();
  if (result.stationarity_residual > cfg.tolerance) {
    throw convergence_error(
        "integrate: endpoint not stationary (residual " +
            std::to_string(result.stationarity_residual) + " > tolerance " +
            std::to_string(cfg.tolerance) + "); extend t_end",
        result.stationarity_residual);
  }
  return result;
}

//! Unique stationary state of the generator, found by solving L x = 0 with
//! the normalization Tr x = 1.  Because the trace functional is a left null
//! vector, the population rows of L sum to zero, so replacing one population
//! row by the trace row keeps the full row space and adds the normalization:
//! the replaced system is nonsingular exactly when the kernel of L is
//! one-dimensional.  A J -> J-1 generator keeps a two-dimensional dark plane
//! (four-dimensional kernel), and the trace-replaced system then remains
//! consistent, so the LU solve would quietly return an arbitrary dark
//! mixture; that geometry is rejected up front instead.
inline DensityMatrix numeric_steady_state(const Liouvillian& liouville,
                                          double tolerance = 1e-9) {
  if (liouville.excited_dim == liouville.ground_dim - 2) {
    throw non_unique_steady_state_error(
        "numeric_steady_state: a J -> J-1 generator keeps a dark plane, so "
        "its kernel is four-dimensional and no unique steady state exists; "
        "integrate from a chosen initial state instead");
  }
  const int n = liouville.dim();
  const int size = n * n;
  Eigen::MatrixXcd a = liouville.generator;
  const Eigen::VectorXcd trace_row = detail::trace_functional(n);
  a.row(size - 1) = trace_row.adjoint();  // replaces an excited population row
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(size);
  b(size - 1) = 1.0;

  Eigen::VectorXcd x = Eigen::PartialPivLU<Eigen::MatrixXcd>(a).solve(b);
  double residual = (liouville.generator * x).cwiseAbs().maxCoeff();
  if (!std::isfinite(residual) || residual > tolerance) {
    // Slow, rank-revealing fallback: either the system is genuinely
    // degenerate (dark plane) or badly conditioned.
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(a);
    if (!lu.isInvertible() || null_space_dimension(liouville) > 1) {
      throw non_unique_steady_state_error(
          "numeric_steady_state: the generator kernel is degenerate (dark "
          "plane of a J -> J-1 line); integrate from an initial state "
          "instead");
    }
    x = lu.solve(b);
    residual = (liouville.generator * x).cwiseAbs().maxCoeff();
    if (!std::isfinite(residual) || residual > tolerance) {
      throw std::runtime_error(
          "numeric_steady_state: null-space solve residual " +
          std::to_string(residual) + " exceeds tolerance");
    }
  }

  Eigen::MatrixXcd rho = detail::devectorize(x, n);
  rho = 0.5 * (rho + rho.adjoint()).eval();
  rho /= rho.trace().real();
  return detail::blocks_from_full(rho, liouville.ground_dim);
}

//! One realization of the diffusing carrier phase on a fixed step grid:
//! psi_0 = 0 and independent Gaussian increments with variance 2 mu dt, the
//! diffusion member of the independent-increment family.  Successive values
//! give the piecewise-constant phase used during each integration step, so
//! the discrete field correlation is exactly |Omega|^2 exp(-mu k dt).
inline std::vector<double> phase_path(double bandwidth, double dt, long steps,
                                      std::mt19937_64& rng) {
  std::vector<double> psi(static_cast<std::size_t>(steps) + 1, 0.0);
  if (bandwidth == 0.0) return psi;
  std::normal_distribution<double> increment(0.0, std::sqrt(2.0 * bandwidth * dt));
  for (long k = 0; k < steps; ++k)
    psi[static_cast<std::size_t>(k) + 1] = psi[static_cast<std::size_t>(k)] + increment(rng);
  return psi;
}

//! Ensemble setup for the phase-diffusion validator.
struct EnsembleConfig {
  int realizations = 400;
  std::uint64_t seed = 0;
  double dt = 0.0;     //!< 0 selects an automatic step
  double t_end = 0.0;  //!< 0 selects an automatic horizon

  void validate(const FieldParams& field, double chosen_dt) const {
    if (realizations < 100) {
      throw std::invalid_argument(
          "EnsembleConfig: ensemble too small (need at least 100 "
          "realizations)");
    }
    if (chosen_dt * field.bandwidth > 0.1) {
      throw std::invalid_argument(
          "EnsembleConfig: bandwidth too large for the step size (need "
          "dt * mu <= 0.1)");
    }
  }
};

//! Ensemble mean of the level populations under a phase-diffusing carrier,
//! with entrywise Monte-Carlo standard errors of the mean.
struct PhaseDiffusionAverage {
  Eigen::MatrixXcd mean_rho_gg;
  Eigen::MatrixXcd mean_rho_ee;
  Eigen::MatrixXd std_error_gg;  //!< per-entry standard error (complex scatter)
  Eigen::MatrixXd std_error_ee;
  double pi_e_mean = 0;
  double pi_e_std_error = 0;
  int realizations = 0;
};

//! Monte-Carlo average over phase realizations Omega(t) = Omega e^{-i psi(t)}.
//! Each realization starts from the unpolarized ground state, is propagated
//! with a piecewise-constant phase per step, and is time-averaged over the
//! second half of the horizon; means and standard errors are taken across
//! realizations (independent, so the reduction is order-free).  The
//! degenerate case mu = 0 reproduces the monochromatic steady state.
inline PhaseDiffusionAverage phase_diffusion_average(
    const TransitionSpec& spec, const Polarization& pol,
    const FieldParams& field, const EnsembleConfig& ensemble) {
  field.validate();
  const double mu = field.bandwidth;
  const double gamma = field.gamma;
  const double s = field.saturation();

  double dt = ensemble.dt;
  if (dt == 0.0) {
    dt = 0.005 / gamma * std::min(1.0, s > 0.0 ? 1.0 / s : 1.0);
    if (mu > 0.0) dt = std::min(dt, 0.05 / mu);
  }
  double t_end = ensemble.t_end;
  if (t_end == 0.0)
    t_end = 50.0 / gamma * std::max(1.0, s > 0.0 ? 1.0 / s : 1.0);
  ensemble.validate(field, dt);

  const detail::LiouvillianParts parts =
      detail::liouvillian_parts(spec, pol, field.detuning, gamma);
  const int ng = parts.ground_dim;
  const int ne = parts.excited_dim;
  const int n = ng + ne;
  const long steps = static_cast<long>(std::ceil(t_end / dt - 1e-12));
  const long tail_start = steps / 2;

  Eigen::MatrixXcd rho0 = Eigen::MatrixXcd::Zero(n, n);
  rho0.topLeftCorner(ng, ng) =
      Eigen::MatrixXcd::Identity(ng, ng) / static_cast<double>(ng);
  const Eigen::VectorXcd v0 = detail::vectorize(rho0);

  // Per-realization tail averages; accumulated with compensated summation so
  // the reduction is independent of the realization order.
  Eigen::VectorXcd sum = Eigen::VectorXcd::Zero(n * n);
  Eigen::VectorXcd sum_comp = Eigen::VectorXcd::Zero(n * n);
  Eigen::VectorXd sq_sum = Eigen::VectorXd::Zero(n * n);
  Eigen::VectorXd sq_comp = Eigen::VectorXd::Zero(n * n);
  std::vector<Eigen::VectorXcd> tails;
  tails.reserve(static_cast<std::size_t>(ensemble.realizations));

  Eigen::MatrixXcd l(n * n, n * n);
  Eigen::VectorXcd v, k1, k2, k3, k4, tail;
  for (int r = 0; r < ensemble.realizations; ++r) {
    std::seed_seq seq{static_cast<std::uint64_t>(ensemble.seed),
                      static_cast<std::uint64_t>(r)};
    std::mt19937_64 rng(seq);
    const std::vector<double> psi = phase_path(mu, dt, steps, rng);

    v = v0;
    tail = Eigen::VectorXcd::Zero(n * n);
    long tail_count = 0;
    for (long step = 0; step < steps; ++step) {
      const std::complex<double> omega =
          field.rabi * std::exp(std::complex<double>(
                           0.0, -psi[static_cast<std::size_t>(step)]));
      l = parts.drift + omega * parts.stimulated +
          std::conj(omega) * parts.stimulated_conj;
      k1.noalias() = l * v;
      k2.noalias() = l * (v + (0.5 * dt) * k1);
      k3.noalias() = l * (v + (0.5 * dt) * k2);
      k4.noalias() = l * (v + dt * k3);
      v += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (step >= tail_start) {
        tail += v;
        ++tail_count;
      }
    }
    tail /= static_cast<double>(tail_count);
    tails.push_back(tail);

    // Kahan-compensated elementwise accumulation.
    for (int i = 0; i < n * n; ++i) {
      const std::complex<double> y = tail(i) - sum_comp(i);
      const std::complex<double> t = sum(i) + y;
      sum_comp(i) = (t - sum(i)) - y;
      sum(i) = t;
    }
  }

  const double count = static_cast<double>(ensemble.realizations);
  const Eigen::VectorXcd mean = sum / count;
  for (const auto& t : tails) {
    for (int i = 0; i < n * n; ++i) {
      const double y = std::norm(t(i) - mean(i)) - sq_comp(i);
      const double tt = sq_sum(i) + y;
      sq_comp(i) = (tt - sq_sum(i)) - y;
      sq_sum(i) = tt;
    }
  }

  const Eigen::MatrixXcd mean_full = detail::devectorize(mean, n);
  Eigen::MatrixXd scatter =
      (sq_sum / (count * (count - 1.0))).cwiseSqrt().reshaped(n, n);

  PhaseDiffusionAverage out;
  out.realizations = ensemble.realizations;
  out.mean_rho_gg = mean_full.topLeftCorner(ng, ng);
  out.mean_rho_ee = mean_full.bottomRightCorner(ne, ne);
  out.std_error_gg = scatter.topLeftCorner(ng, ng);
  out.std_error_ee = scatter.bottomRightCorner(ne, ne);
  out.pi_e_mean = out.mean_rho_ee.trace().real();
  // The excited populations of one realization are positively correlated, so
  // the conservative error bar for their sum adds the per-entry errors.
  out.pi_e_std_error = out.std_error_ee.diagonal().sum();
  return out;
}

}  // namespace obesteady
