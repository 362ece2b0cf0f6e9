// obe-steady: steady states of closed dipole lines under elliptically
// polarized driving, from the command line.
//
// Subcommands:
//   steady     one steady state: density-matrix blocks, natural weights,
//              normalization constants and the excited population
//   scan       ellipticity sweep of the low-saturation absorption measures
//   dark       dark (non-coupled) ground states at a given polarization
//   broadband  stimulated rate / light shift map of a phase-diffusing field
//   verify     the library's cross-validation matrix
//
// Conventions: all frequencies are in units of the natural width gamma
// (gamma = 1 internally); angular momenta are given as fractions ("3/2") or
// decimals ("1.5"); grids are "lo:hi:n" inclusive linear spacings.  Output is
// deterministic for a fixed configuration and seed: JSON uses round-trip-exact
// shortest representations, CSV prints 17 significant digits.
//
// Exit codes: 0 success; 1 verification failure; 2 steady state not unique
// (needs --initial); 64 usage or parse error; 65 numeric failure (circular
// polarization singularity or non-converged integration).

#include <algorithm>
#include <cctype>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "obesteady/gobe.hpp"
#include "obesteady/steadystate.hpp"
#include "obesteady/verification.hpp"

namespace {

using json = nlohmann::ordered_json;
using obesteady::AngularMomentum;
using obesteady::Complex;
using obesteady::FieldParams;
using obesteady::Frame;
using obesteady::Polarization;
using obesteady::TransitionClass;
using obesteady::TransitionSpec;

constexpr int kExitVerifyFailure = 1;
constexpr int kExitNonUnique = 2;
constexpr int kExitUsage = 64;
constexpr int kExitNumeric = 65;

//! Usage-level failure (bad flag value, wrong class for a subcommand, ...).
class usage_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Parsing helpers
// ---------------------------------------------------------------------------

//! Angular momentum from "3/2", "1.5", "2", ... to an exact 2j.
AngularMomentum parse_momentum(const std::string& text, const char* flag) {
  const auto fail = [&]() -> AngularMomentum {
    throw usage_error(std::string(flag) + ": expected a half-integer like " +
                      "\"2\", \"3/2\" or \"1.5\", got \"" + text + "\"");
  };
  if (text.empty()) return fail();
  const auto slash = text.find('/');
  try {
    if (slash != std::string::npos) {
      const long num = std::stol(text.substr(0, slash));
      const long den = std::stol(text.substr(slash + 1));
      if (num < 0 || (den != 1 && den != 2)) return fail();
      return AngularMomentum(static_cast<int>(den == 1 ? 2 * num : num));
    }
    const auto dot = text.find('.');
    if (dot == std::string::npos) {
      const long whole = std::stol(text);
      if (whole < 0) return fail();
      return AngularMomentum(static_cast<int>(2 * whole));
    }
    const std::string frac = text.substr(dot + 1);
    const long whole = dot == 0 ? 0 : std::stol(text.substr(0, dot));
    if (whole < 0) return fail();
    if (frac == "0" || frac == "00")
      return AngularMomentum(static_cast<int>(2 * whole));
    if (frac == "5" || frac == "50")
      return AngularMomentum(static_cast<int>(2 * whole + 1));
    return fail();
  } catch (const std::logic_error&) {  // stol failures
    return fail();
  }
}

double parse_real(const std::string& text, const char* flag) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::logic_error&) {
    throw usage_error(std::string(flag) + ": expected a real number, got \"" +
                      text + "\"");
  }
}

//! A real value or an inclusive linear grid "lo:hi:n".
std::vector<double> parse_grid(const std::string& text, const char* flag) {
  const auto first = text.find(':');
  if (first == std::string::npos) return {parse_real(text, flag)};
  const auto second = text.find(':', first + 1);
  if (second == std::string::npos || text.find(':', second + 1) != std::string::npos)
    throw usage_error(std::string(flag) +
                      ": grid must be \"lo:hi:n\", got \"" + text + "\"");
  const double lo = parse_real(text.substr(0, first), flag);
  const double hi = parse_real(text.substr(first + 1, second - first - 1), flag);
  long n = 0;
  try {
    n = std::stol(text.substr(second + 1));
  } catch (const std::logic_error&) {
    n = 0;
  }
  if (n < 1)
    throw usage_error(std::string(flag) + ": grid point count must be >= 1");
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i)
    grid.push_back(n == 1 ? lo
                          : lo + (hi - lo) * static_cast<double>(i) /
                                     static_cast<double>(n - 1));
  return grid;
}

double parse_scalar(const std::string& text, const char* flag) {
  const auto grid = parse_grid(text, flag);
  if (grid.size() != 1)
    throw usage_error(std::string(flag) +
                      ": expected a single value, not a grid");
  return grid.front();
}

Frame parse_frame(const std::string& text) {
  if (text == "natural-plus") return Frame::NaturalPlus;
  if (text == "natural-minus") return Frame::NaturalMinus;
  if (text == "conventional") return Frame::Conventional;
  throw usage_error(
      "--frame: expected conventional, natural-plus or natural-minus, got \"" +
      text + "\"");
}

// ---------------------------------------------------------------------------
// Serialization helpers
// ---------------------------------------------------------------------------

std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

//! JSON value for a real that may be infinite (JSON numbers cannot be).
json finite_or_string(double v) {
  if (std::isfinite(v)) return v;
  return format17(v);
}

std::string momentum_string(AngularMomentum j) {
  if (j.two_j % 2 == 0) return std::to_string(j.two_j / 2);
  return std::to_string(j.two_j) + "/2";
}

const char* class_tag(TransitionClass c) {
  switch (c) {
    case TransitionClass::DarkTwoDim: return "step-down";
    case TransitionClass::DarkUnique: return "equal-integer";
    case TransitionClass::NoDarkHalfInt: return "equal-half-integer";
    case TransitionClass::NoDarkPlus: return "step-up";
  }
  return "unknown";
}

const char* frame_tag(Frame f) {
  switch (f) {
    case Frame::Conventional: return "conventional";
    case Frame::NaturalPlus: return "natural-plus";
    case Frame::NaturalMinus: return "natural-minus";
  }
  return "unknown";
}

json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

json matrix_json(const Eigen::MatrixXcd& m) {
  json re = json::array();
  json im = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json rrow = json::array();
    json irow = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      rrow.push_back(m(i, j).real());
      irow.push_back(m(i, j).imag());
    }
    re.push_back(std::move(rrow));
    im.push_back(std::move(irow));
  }
  return json{{"re", std::move(re)}, {"im", std::move(im)}};
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json blocks_json(const obesteady::DensityMatrix& rho) {
  return json{{"rho_gg", matrix_json(rho.rho_gg)},
              {"rho_ee", matrix_json(rho.rho_ee)},
              {"rho_eg", matrix_json(rho.rho_eg)}};
}

json transition_json(const TransitionSpec& spec) {
  return json{{"jg", momentum_string(spec.jg)},
              {"je", momentum_string(spec.je)},
              {"two_jg", spec.jg.two_j},
              {"two_je", spec.je.two_j},
              {"class", class_tag(spec.transition_class)},
              {"dark_dimension", spec.dark_dimension}};
}

json polarization_json(const Polarization& pol) {
  return json{{"epsilon", pol.ellipticity},
              {"frame", frame_tag(pol.frame)},
              {"e",
               {{"q_plus", complex_json(pol.e.q_plus)},
                {"q_zero", complex_json(pol.e.q_zero)},
                {"q_minus", complex_json(pol.e.q_minus)}}}};
}

json field_json(const FieldParams& field) {
  return json{{"saturation", field.saturation()},
              {"detuning", field.detuning},
              {"bandwidth", field.bandwidth},
              {"gamma", field.gamma},
              {"rabi", complex_json(field.rabi)},
              {"effective_saturation", field.effective_saturation()}};
}

//! Write to --out (or stdout when empty); content must already end in '\n'.
void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream os(out_path, std::ios::binary);
  if (!os) throw usage_error("--out: cannot open \"" + out_path + "\"");
  os << content;
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

//! Flat key,value CSV fallback used by subcommands whose natural shape is a
//! document rather than a table.
std::string dump_flat_csv(const json& j, const std::string& schema) {
  std::ostringstream os;
  os << "# schema: " << schema << "\n";
  os << "key,value\n";
  for (const auto& [path, value] : j.flatten().items()) {
    os << path << ',';
    if (value.is_number_float())
      os << format17(value.get<double>());
    else if (value.is_string())
      os << '"' << value.get<std::string>() << '"';
    else
      os << value.dump();
    os << '\n';
  }
  return os.str();
}

void emit_document(const std::string& out_path, const std::string& format,
                   const json& j, const std::string& schema) {
  if (format == "json")
    emit(out_path, dump_json(j));
  else if (format == "csv")
    emit(out_path, dump_flat_csv(j, schema));
  else
    throw usage_error("--format: expected json or csv, got \"" + format + "\"");
}

// ---------------------------------------------------------------------------
// Shared option plumbing
// ---------------------------------------------------------------------------

struct CommonArgs {
  std::string jg;
  std::string je;
  std::string epsilon = "0";
  std::string frame = "natural-plus";
  std::string saturation = "0";
  std::string detuning = "0";
  std::string bandwidth = "0";
  std::string rabi;        //!< |Omega| in gamma units (alternative to S)
  std::string rabi_phase = "0";
  std::string format = "json";
  std::string out;
};

void add_line_flags(CLI::App* cmd, CommonArgs* a) {
  cmd->add_option("--jg", a->jg, "ground angular momentum (\"3/2\", \"1.5\", \"2\")")
      ->required();
  cmd->add_option("--je", a->je, "excited angular momentum")->required();
  cmd->add_option("--epsilon", a->epsilon,
                  "ellipticity in [-pi/4, pi/4] (scan: grid \"lo:hi:n\")");
  cmd->add_option("--frame", a->frame,
                  "quantization frame: conventional | natural-plus | natural-minus");
}

void add_field_flags(CLI::App* cmd, CommonArgs* a) {
  auto* sat = cmd->add_option("--saturation", a->saturation,
                              "saturation parameter S (>= 0)");
  cmd->add_option("--detuning", a->detuning, "detuning delta in gamma units");
  cmd->add_option("--bandwidth", a->bandwidth,
                  "phase-diffusion bandwidth mu in gamma units (>= 0)");
  auto* rabi = cmd->add_option(
      "--rabi", a->rabi, "Rabi magnitude |Omega| in gamma units (alternative to --saturation)");
  cmd->add_option("--rabi-phase", a->rabi_phase, "Rabi phase in radians")
      ->needs(rabi);
  sat->excludes(rabi);
  rabi->excludes(sat);
}

void add_output_flags(CLI::App* cmd, CommonArgs* a) {
  cmd->add_option("--format", a->format, "output format: json | csv");
  cmd->add_option("--out", a->out, "write output to this file instead of stdout");
}

TransitionSpec spec_from(const CommonArgs& a) {
  try {
    return obesteady::classify(parse_momentum(a.jg, "--jg"),
                               parse_momentum(a.je, "--je"));
  } catch (const std::invalid_argument& e) {
    throw usage_error(e.what());
  }
}

Polarization polarization_from(const CommonArgs& a, double epsilon) {
  try {
    return obesteady::polarization_from_ellipticity(epsilon, parse_frame(a.frame));
  } catch (const std::invalid_argument& e) {
    throw usage_error(e.what());
  }
}

FieldParams field_from(const CommonArgs& a) {
  const double detuning = parse_scalar(a.detuning, "--detuning");
  const double bandwidth = parse_scalar(a.bandwidth, "--bandwidth");
  try {
    if (!a.rabi.empty()) {
      FieldParams f;
      f.detuning = detuning;
      f.bandwidth = bandwidth;
      const double mag = parse_scalar(a.rabi, "--rabi");
      const double phase = parse_scalar(a.rabi_phase, "--rabi-phase");
      if (!(mag >= 0.0)) throw std::invalid_argument("--rabi: magnitude must be >= 0");
      f.rabi = std::polar(mag, phase);
      f.validate();
      return f;
    }
    return FieldParams::from_saturation(parse_scalar(a.saturation, "--saturation"),
                                        detuning, 1.0, bandwidth);
  } catch (const std::invalid_argument& e) {
    throw usage_error(e.what());
  }
}

// ---------------------------------------------------------------------------
// steady
// ---------------------------------------------------------------------------

struct SteadyArgs : CommonArgs {
  std::string initial;  //!< "unpolarized" or a JSON file with rho blocks
  std::string dt = "0";
  std::string t_end = "0";
};

Eigen::MatrixXcd initial_state_from(const std::string& source, int ng, int ne) {
  const int n = ng + ne;
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(n, n);
  if (source == "unpolarized") {
    rho.topLeftCorner(ng, ng) =
        Eigen::MatrixXcd::Identity(ng, ng) / static_cast<double>(ng);
    return rho;
  }
  std::ifstream is(source);
  if (!is)
    throw usage_error("--initial: cannot open \"" + source +
                      "\" (pass \"unpolarized\" or a JSON file)");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw usage_error("--initial: " + std::string(e.what()));
  }
  const auto read_block = [&](const char* name, int rows, int cols,
                              int row0, int col0, bool required) {
    if (!j.contains(name)) {
      if (required) throw usage_error(std::string("--initial: missing ") + name);
      return;
    }
    const json& b = j.at(name);
    const json& re = b.at("re");
    const json* im = b.contains("im") ? &b.at("im") : nullptr;
    if (static_cast<int>(re.size()) != rows)
      throw usage_error(std::string("--initial: ") + name + " must be " +
                        std::to_string(rows) + "x" + std::to_string(cols));
    for (int i = 0; i < rows; ++i) {
      if (static_cast<int>(re.at(i).size()) != cols)
        throw usage_error(std::string("--initial: ") + name + " must be " +
                          std::to_string(rows) + "x" + std::to_string(cols));
      for (int k = 0; k < cols; ++k)
        rho(row0 + i, col0 + k) =
            Complex(re.at(i).at(k).get<double>(),
                    im ? im->at(i).at(k).get<double>() : 0.0);
    }
  };
  try {
    read_block("rho_gg", ng, ng, 0, 0, true);
    read_block("rho_ee", ne, ne, ng, ng, true);
    read_block("rho_eg", ne, ng, ng, 0, false);
  } catch (const json::exception& e) {
    throw usage_error("--initial: " + std::string(e.what()));
  }
  // The lower-left block mirrors the upper-right one.
  rho.topRightCorner(ng, ne) = rho.block(ng, 0, ne, ng).adjoint();
  return rho;
}

int cmd_steady(const SteadyArgs& a) {
  const TransitionSpec spec = spec_from(a);
  const double epsilon = parse_scalar(a.epsilon, "--epsilon");
  const Polarization pol = polarization_from(a, epsilon);
  const FieldParams field = field_from(a);

  json doc{{"schema_version", "obe-steady.steady.v1"},
           {"transition", transition_json(spec)},
           {"polarization", polarization_json(pol)},
           {"field", field_json(field)}};

  if (spec.transition_class == TransitionClass::DarkTwoDim && a.initial.empty()) {
    doc["non_unique"] = true;
    doc["error"] =
        "steady state is not unique: a J -> J-1 line keeps any mixture within "
        "its two-dimensional dark plane; pass --initial (\"unpolarized\" or a "
        "JSON file) to integrate from a definite state";
    emit_document(a.out, a.format, doc, "obe-steady.steady.v1");
    return kExitNonUnique;
  }

  if (!a.initial.empty()) {
    // Integration route: propagate the equations of motion to stationarity.
    if (field.bandwidth != 0.0)
      throw usage_error(
          "--initial integrates the deterministic equations of motion, which "
          "require --bandwidth 0 (use the broadband subcommand for mu > 0)");
    const int ng = spec.jg.multiplicity();
    const int ne = spec.je.multiplicity();
    const Eigen::MatrixXcd rho0 = initial_state_from(a.initial, ng, ne);
    obesteady::IntegratorConfig cfg = obesteady::IntegratorConfig::for_field(field);
    const double dt = parse_scalar(a.dt, "--dt");
    const double t_end = parse_scalar(a.t_end, "--t-end");
    if (dt > 0.0) cfg.dt = dt;
    if (t_end > 0.0) cfg.t_end = t_end;

    const obesteady::Liouvillian liouville =
        obesteady::build_liouvillian(spec, pol, field);
    obesteady::IntegrationResult result;
    try {
      result = obesteady::integrate(liouville, rho0, cfg, field);
    } catch (const obesteady::convergence_error& e) {
      doc["error"] = std::string("integration did not reach stationarity: ") +
                     e.what() + " (try a longer --t-end)";
      emit_document(a.out, a.format, doc, "obe-steady.steady.v1");
      return kExitNumeric;
    } catch (const std::invalid_argument& e) {
      throw usage_error(e.what());
    }

    obesteady::DensityMatrix rho;
    rho.rho_gg = result.final_state.topLeftCorner(ng, ng);
    rho.rho_ee = result.final_state.bottomRightCorner(ne, ne);
    rho.rho_eg = result.final_state.block(ng, 0, ne, ng);
    const obesteady::NaturalBasis nb = obesteady::natural_basis(spec, pol);

    doc["method"] = "integration";
    doc["integration"] = json{{"dt", cfg.dt},
                              {"t_end", cfg.t_end},
                              {"steps", result.steps},
                              {"stationarity_residual", result.stationarity_residual},
                              {"trace_drift", result.trace_drift},
                              {"hermiticity_defect", result.hermiticity_defect}};
    json ss = blocks_json(rho);
    ss["lambdas_sq"] = vector_json(nb.lambdas_sq);
    ss["nus_sq"] = vector_json(nb.nus_sq);
    ss["pi_e"] = rho.rho_ee.trace().real();
    doc["steady_state"] = std::move(ss);
    emit_document(a.out, a.format, doc, "obe-steady.steady.v1");
    return 0;
  }

  obesteady::SteadyStateResult result;
  try {
    result = obesteady::steady_state(spec, pol, field);
  } catch (const obesteady::singular_coupling_error& e) {
    doc["error"] = std::string("dark-exception: circular polarization (") +
                   e.what() + ")";
    emit_document(a.out, a.format, doc, "obe-steady.steady.v1");
    return kExitNumeric;
  }

  doc["method"] = "closed-form";
  json ss = blocks_json(result.rho);
  ss["lambdas_sq"] = vector_json(result.lambdas_sq);
  ss["nus_sq"] = vector_json(result.nus_sq);
  ss["alpha0"] = finite_or_string(result.alpha0);
  ss["alpha1"] = result.alpha1;
  ss["beta"] = result.beta;
  ss["pi_e"] = result.pi_e;
  doc["steady_state"] = std::move(ss);
  emit_document(a.out, a.format, doc, "obe-steady.steady.v1");
  return 0;
}

// ---------------------------------------------------------------------------
// scan
// ---------------------------------------------------------------------------

int thread_budget() {
  unsigned n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* cap = std::getenv("OBE_STEADY_THREADS")) {
    try {
      const long v = std::stol(cap);
      if (v >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(v));
    } catch (const std::logic_error&) {
      throw usage_error("OBE_STEADY_THREADS: expected a positive integer");
    }
  }
  return static_cast<int>(n);
}

struct ScanRow {
  double epsilon = 0;
  double alpha_ratio = 0;     //!< alpha1/alpha0
  double pi_e = 0;
  double pi_e_normalized = 0; //!< pi_e over the unpolarized low-S value S(2Je+1)/(3(2Jg+1))
  double isat_ratio = 0;      //!< alpha0/alpha1
};

int cmd_scan(const CommonArgs& a) {
  const TransitionSpec spec = spec_from(a);
  if (spec.transition_class != TransitionClass::NoDarkHalfInt &&
      spec.transition_class != TransitionClass::NoDarkPlus)
    throw usage_error(
        "scan: the absorption measures are defined for lines with a unique "
        "bright steady state (J -> J half-integer or J -> J+1); " +
        std::string(class_tag(spec.transition_class)) +
        " lines pool all population in dark states");
  if (!a.rabi.empty())
    throw usage_error("scan: use --saturation (the scan columns are "
                      "parametrized by S, not by a complex Rabi amplitude)");
  const std::vector<double> epsilons = parse_grid(a.epsilon, "--epsilon");
  for (double eps : epsilons) (void)polarization_from(a, eps);  // range check
  const double s = parse_scalar(a.saturation, "--saturation");
  if (!(s >= 0.0) || !std::isfinite(s))
    throw usage_error("--saturation: must be >= 0 and finite");
  const double unpolarized_low_s =
      static_cast<double>(spec.je.two_j + 1) /
      (3.0 * static_cast<double>(spec.jg.two_j + 1));

  std::vector<ScanRow> rows(epsilons.size());
  const auto fill_row = [&](std::size_t i) {
    const double eps = epsilons[i];
    ScanRow& row = rows[i];
    row.epsilon = eps;
    const obesteady::NormalizationConstants nc =
        obesteady::normalization_constants(spec, eps);
    row.alpha_ratio = std::isfinite(nc.alpha0) ? nc.alpha1 / nc.alpha0 : 0.0;
    row.isat_ratio = obesteady::saturation_intensity_ratio(spec, eps);
    row.pi_e = obesteady::excited_population(spec, eps, s);
    // Normalization divisor: the unpolarized excited population in the
    // low-saturation limit, S (2Je+1)/(3 (2Jg+1)); at S = 0 the quotient is
    // replaced by its limit, the normalized absorption.
    row.pi_e_normalized = s > 0.0
                              ? row.pi_e / (s * unpolarized_low_s)
                              : obesteady::normalized_absorption(spec, eps);
    return row;
  };

  // Rows are independent; split them across a bounded thread pool and emit in
  // input order.
  const int threads = std::min<int>(thread_budget(),
                                    static_cast<int>(epsilons.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < epsilons.size(); ++i) fill_row(i);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = static_cast<std::size_t>(t); i < epsilons.size();
             i += static_cast<std::size_t>(threads))
          fill_row(i);
      });
    for (auto& th : pool) th.join();
  }

  if (a.format == "csv") {
    std::ostringstream os;
    os << "# schema: obe-steady.scan.v1\n";
    os << "epsilon,alpha_ratio,pi_e,pi_e_normalized,isat_ratio\n";
    for (const ScanRow& r : rows)
      os << format17(r.epsilon) << ',' << format17(r.alpha_ratio) << ','
         << format17(r.pi_e) << ',' << format17(r.pi_e_normalized) << ','
         << format17(r.isat_ratio) << '\n';
    emit(a.out, os.str());
    return 0;
  }
  if (a.format != "json")
    throw usage_error("--format: expected json or csv, got \"" + a.format + "\"");

  json jrows = json::array();
  for (const ScanRow& r : rows)
    jrows.push_back(json::array({r.epsilon, r.alpha_ratio, r.pi_e,
                                 r.pi_e_normalized,
                                 finite_or_string(r.isat_ratio)}));
  const json doc{{"schema_version", "obe-steady.scan.v1"},
                 {"transition", transition_json(spec)},
                 {"saturation", s},
                 {"columns", json::array({"epsilon", "alpha_ratio", "pi_e",
                                          "pi_e_normalized", "isat_ratio"})},
                 {"rows", std::move(jrows)}};
  emit(a.out, dump_json(doc));
  return 0;
}

// ---------------------------------------------------------------------------
// dark
// ---------------------------------------------------------------------------

int cmd_dark(const CommonArgs& a) {
  const TransitionSpec spec = spec_from(a);
  const double epsilon = parse_scalar(a.epsilon, "--epsilon");
  const Polarization pol = polarization_from(a, epsilon);

  std::vector<Eigen::VectorXcd> kets;
  try {
    kets = obesteady::dark_subspace(spec, pol);
  } catch (const obesteady::no_dark_state_error&) {
    // Bright line at this polarization: an empty listing, not a failure.
  }

  const Eigen::MatrixXcd v =
      obesteady::coupling_operator(spec.jg, spec.je, pol).entries();
  json jkets = json::array();
  for (const Eigen::VectorXcd& psi : kets) {
    json re = json::array();
    json im = json::array();
    for (Eigen::Index i = 0; i < psi.size(); ++i) {
      re.push_back(psi(i).real());
      im.push_back(psi(i).imag());
    }
    jkets.push_back(json{{"re", std::move(re)},
                         {"im", std::move(im)},
                         {"coupling_residual", (v * psi).norm()}});
  }

  json doc{{"schema_version", "obe-steady.dark.v1"},
           {"transition", transition_json(spec)},
           {"polarization", polarization_json(pol)},
           {"dark_dimension", static_cast<int>(kets.size())},
           {"kets", std::move(jkets)}};
  if (spec.transition_class == TransitionClass::DarkTwoDim) {
    const double ee = std::abs(obesteady::dot(pol.e, pol.e));
    doc["pair_overlap"] = obesteady::dark_pair_overlap(spec, pol);
    doc["pair_overlap_closed_form"] =
        std::pow((1.0 - ee) / (1.0 + ee), 0.5 * spec.jg.two_j);
  }
  emit_document(a.out, a.format, doc, "obe-steady.dark.v1");
  return 0;
}

// ---------------------------------------------------------------------------
// broadband
// ---------------------------------------------------------------------------

int cmd_broadband(const CommonArgs& a) {
  const FieldParams field = field_from(a);
  const obesteady::BroadbandParameters bb = obesteady::broadband_map(field);
  json doc{{"schema_version", "obe-steady.broadband.v1"},
           {"field", field_json(field)},
           {"broadband",
            {{"stimulated_rate", bb.stimulated_rate},
             {"light_shift", bb.light_shift},
             {"effective_saturation", bb.s_effective}}}};

  if (!a.jg.empty() || !a.je.empty()) {
    if (a.jg.empty() || a.je.empty())
      throw usage_error("broadband: pass both --jg and --je for a steady state");
    const TransitionSpec spec = spec_from(a);
    const double epsilon = parse_scalar(a.epsilon, "--epsilon");
    const Polarization pol = polarization_from(a, epsilon);
    doc["transition"] = transition_json(spec);
    doc["polarization"] = polarization_json(pol);
    if (spec.transition_class == TransitionClass::DarkTwoDim) {
      doc["non_unique"] = true;
      doc["error"] =
          "steady state is not unique on a J -> J-1 line (dark plane)";
      emit_document(a.out, a.format, doc, "obe-steady.broadband.v1");
      return kExitNonUnique;
    }
    obesteady::SteadyStateResult result;
    try {
      result = obesteady::steady_state(spec, pol, field);
    } catch (const obesteady::singular_coupling_error& e) {
      doc["error"] = std::string("dark-exception: circular polarization (") +
                     e.what() + ")";
      emit_document(a.out, a.format, doc, "obe-steady.broadband.v1");
      return kExitNumeric;
    }
    json ss = blocks_json(result.rho);
    ss["pi_e"] = result.pi_e;
    doc["steady_state"] = std::move(ss);
  }
  emit_document(a.out, a.format, doc, "obe-steady.broadband.v1");
  return 0;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::string max_j = "4";
  std::string dark_max_j = "8";
  double tolerance = 1e-8;
  int pairs = 20;
  int realizations = 400;
  bool skip_monte_carlo = false;
  bool inject_cg_sign_error = false;
  std::uint64_t seed = 0;
  std::string format = "json";
  std::string out;
};

int cmd_verify(const VerifyArgs& a) {
  obesteady::VerifyOptions opts;
  opts.max_two_j = parse_momentum(a.max_j, "--max-j").two_j;
  opts.dark_max_two_j = parse_momentum(a.dark_max_j, "--dark-max-j").two_j;
  opts.oracle_tolerance = a.tolerance;
  opts.identity_pairs = a.pairs;
  opts.mc_realizations = a.realizations;
  opts.run_monte_carlo = !a.skip_monte_carlo;
  opts.inject_cg_sign_error = a.inject_cg_sign_error;
  opts.seed = a.seed;
  if (opts.max_two_j < 2) throw usage_error("--max-j: must be >= 1");
  if (opts.identity_pairs < 1) throw usage_error("--pairs: must be >= 1");

  // Human-readable progress on stderr as each check completes; the JSON
  // report (byte-stable for a fixed configuration) on stdout or --out.
  json checks = json::array();
  bool all_passed = true;
  const auto report = [&](const obesteady::CheckResult& r) {
    all_passed = all_passed && r.passed;
    std::fprintf(stderr, "%-4s %-55s observed %.3e bound %.3e\n",
                 r.passed ? "ok" : "FAIL", r.name.c_str(), r.observed, r.bound);
    if (!r.passed) std::fprintf(stderr, "     %s\n", r.detail.c_str());
    checks.push_back(json{{"name", r.name},
                          {"passed", r.passed},
                          {"observed", finite_or_string(r.observed)},
                          {"bound", r.bound},
                          {"detail", r.detail}});
  };
  report(obesteady::check_product_identities(opts));
  report(obesteady::check_dark_residuals(opts));
  report(obesteady::check_two_level_limit(opts));
  report(obesteady::check_excited_isotropy(opts));
  report(obesteady::check_light_shift_commutation(opts));
  report(obesteady::check_truncation_ratio(opts));
  report(obesteady::check_absorption_shapes(opts));
  report(obesteady::check_branching_stationarity(opts));
  report(obesteady::check_broadband_zero_width(opts));
  report(obesteady::check_oracle_agreement(opts));
  if (opts.run_monte_carlo) report(obesteady::check_phase_diffusion_mc(opts));

  const json doc{{"schema_version", "obe-steady.verify.v1"},
                 {"options",
                  {{"max_two_j", opts.max_two_j},
                   {"dark_max_two_j", opts.dark_max_two_j},
                   {"oracle_tolerance", opts.oracle_tolerance},
                   {"identity_pairs", opts.identity_pairs},
                   {"mc_realizations", opts.mc_realizations},
                   {"run_monte_carlo", opts.run_monte_carlo},
                   {"inject_cg_sign_error", opts.inject_cg_sign_error},
                   {"seed", opts.seed}}},
                 {"checks", std::move(checks)},
                 {"all_passed", all_passed}};
  emit_document(a.out, a.format, doc, "obe-steady.verify.v1");
  std::fprintf(stderr, "%s\n", all_passed ? "all checks passed" : "FAILURES above");
  return all_passed ? 0 : kExitVerifyFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "steady states of closed atomic dipole lines under elliptically "
      "polarized light"};
  app.require_subcommand(1);

  SteadyArgs steady_args;
  auto* steady = app.add_subcommand(
      "steady", "compute one steady state (closed form, or integration with --initial)");
  add_line_flags(steady, &steady_args);
  add_field_flags(steady, &steady_args);
  add_output_flags(steady, &steady_args);
  steady->add_option("--initial", steady_args.initial,
                     "initial state for the integration route: \"unpolarized\" "
                     "or a JSON file with rho_gg/rho_ee (and optional rho_eg) "
                     "blocks; required on J -> J-1 lines");
  steady->add_option("--dt", steady_args.dt, "integration step (0 = automatic)");
  steady->add_option("--t-end", steady_args.t_end,
                     "integration horizon (0 = automatic)");

  CommonArgs scan_args;
  scan_args.epsilon = "0:0.7853981633974483:50";
  auto* scan = app.add_subcommand(
      "scan", "sweep ellipticity: absorption measures of a bright line");
  add_line_flags(scan, &scan_args);
  add_field_flags(scan, &scan_args);
  add_output_flags(scan, &scan_args);

  CommonArgs dark_args;
  auto* dark = app.add_subcommand(
      "dark", "list the non-coupled (dark) ground states at a polarization");
  add_line_flags(dark, &dark_args);
  add_output_flags(dark, &dark_args);

  CommonArgs bb_args;
  auto* broadband = app.add_subcommand(
      "broadband", "stimulated rate / light shift map of a phase-diffusing field");
  broadband->add_option("--jg", bb_args.jg,
                        "ground momentum (with --je: also emit the steady state)");
  broadband->add_option("--je", bb_args.je, "excited momentum");
  broadband->add_option("--epsilon", bb_args.epsilon, "ellipticity");
  broadband->add_option("--frame", bb_args.frame, "quantization frame");
  add_field_flags(broadband, &bb_args);
  add_output_flags(broadband, &bb_args);

  VerifyArgs verify_args;
  auto* verify = app.add_subcommand(
      "verify", "run the cross-validation matrix (closed forms vs independent routes)");
  verify->add_option("--max-j", verify_args.max_j,
                     "largest momentum in the oracle sweep");
  verify->add_option("--dark-max-j", verify_args.dark_max_j,
                     "largest momentum in the dark-state sweep");
  verify->add_option("--tolerance", verify_args.tolerance,
                     "bound for the closed-form vs kernel agreement");
  verify->add_option("--pairs", verify_args.pairs,
                     "random direction pairs per product identity");
  verify->add_option("--realizations", verify_args.realizations,
                     "Monte-Carlo ensemble size");
  verify->add_flag("--skip-monte-carlo", verify_args.skip_monte_carlo,
                   "skip the (slow) phase-diffusion ensemble check");
  verify->add_flag("--inject-cg-sign-error", verify_args.inject_cg_sign_error,
                   "negative control: corrupt the recoupling phase of the "
                   "independent expansion route; the identity check must fail");
  verify->add_option("--seed", verify_args.seed, "Monte-Carlo seed");
  verify->add_option("--format", verify_args.format, "output format: json | csv");
  verify->add_option("--out", verify_args.out, "write the JSON report to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the parse message
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (steady->parsed()) return cmd_steady(steady_args);
    if (scan->parsed()) return cmd_scan(scan_args);
    if (dark->parsed()) return cmd_dark(dark_args);
    if (broadband->parsed()) return cmd_broadband(bb_args);
    if (verify->parsed()) return cmd_verify(verify_args);
  } catch (const usage_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const obesteady::convergence_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  }
  return kExitUsage;  // unreachable with require_subcommand(1)
}
