#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qsd/process.hpp"
#include "qsd/zoo/certificate.hpp"

namespace qsd::zoo {

struct CriterionReport {
  std::string name;
  Verdict verdict = Verdict::kInconclusive;
  std::string detail;
};

/// Rates of a birth-death process on Z_+^d \ {0}; death rates vanish where x_i = 0.
struct BirthDeathParams {
  int dimension = 1;
  std::function<double(const LatticePoint& x, int i)> birth;
  std::function<double(const LatticePoint& x, int i)> death;
  /// Canonical parameter text, part of the model digest.
  std::string description;

  /// b_i(x) = c + k x_i^a and d_i(x) = c' + k' x_i^a' (death forced to 0 at x_i = 0).
  static BirthDeathParams affine_power(int dimension, std::array<double, 3> birth, std::array<double, 3> death);
  /// One-dimensional: b_x = b, d_x = d for x >= 2, with b_1 and killing d_1 at x = 1.
  static BirthDeathParams constant(double b, double d, double b1, double d1);
  /// One-dimensional: b_x = a |sin(x pi / 2)| x + c, d_x = k x.
  static BirthDeathParams sine(double a, double c, double k);
};

struct GaltonWatsonParams {
  std::vector<double> offspring;  // p(0), ..., p(n_max)
  double alpha = 0.0;

  double mean() const;
};

struct MultiTypeGWParams {
  struct Outcome {
    std::vector<std::int64_t> children;  // count per type
    double probability = 0.0;
  };
  std::vector<double> rates;                  // lambda_i
  std::vector<std::vector<Outcome>> offspring;  // p_i
  double alpha = 0.0;

  int types() const noexcept { return static_cast<int>(rates.size()); }
};

struct DiffusionParams {
  int dimension = 1;
  int noise_dimension = 1;
  std::function<RealPoint(const RealPoint&)> drift;
  std::function<DispersionMatrix(const RealPoint&)> dispersion;
  std::function<double(const State&)> kappa;
  double kappa_sup = 0.0;
  double beta = 0.0;
  double gamma_ell = 0.0;
  double rho = 0.0;
  double step_size = 1e-2;
  /// Radius of the ball on which C is fitted; drift_check probes twice as far.
  double fit_radius = 20.0;
  std::string description;

  /// b(x) = -k x, sigma = s I, kappa = c + c' exp(-|x|^2 / 2).
  static DiffusionParams linear(int dimension, double k, double s, double kappa_const, double kappa_bump, double beta,
                                double gamma_ell, double rho, double step_size);
};

/// A model from the zoo with its certificate and the criterion evaluations behind it.
struct BuiltModel {
  std::string family;
  KilledModel model;
  DriftCertificate certificate;
  std::vector<CriterionReport> criteria;
  /// Natural starting / reference states (e.g. x = 1 for GW).
  std::vector<State> reference_states;
  /// Monotone transform of V whose level sets are the oracle truncations (lattice models).
  StateFunction truncation_gauge;
  std::optional<GaltonWatsonParams> galton_watson;
  /// Open interval for the 1-D finite-difference oracle.
  std::optional<std::pair<double, double>> oracle_interval;
};

/// Birth-death process with the absorption at 0 recast as kappa(x) = sum_i d_i(x) 1_{x = e_i}.
///
/// Criteria (3.1) and (3.2) are evaluated on growing shells and reported as
/// PASS / INCONCLUSIVE. The certificate is V = |x| when (3.1) passes, otherwise
/// V = exp(eps |x|_1) with eps maximizing the drift margin; construction is
/// refused when no such V has asymptotic rate above kappa_sup.
BuiltModel build_bd(const BirthDeathParams& params);

BuiltModel build_gw(const GaltonWatsonParams& params);

BuiltModel build_mtgw(const MultiTypeGWParams& params);

BuiltModel build_diffusion(const DiffusionParams& params);

/// Evaluates lim_{|x| -> inf} f(x) = +inf on shells |x|_1 = R at geometric radii.
///
/// e(R) is the minimum of f over the shell, taken at R_max / 64, R_max / 16,
/// R_max / 4 and R_max. PASS when e is non-decreasing over these checkpoints
/// and e(R_max) >= 2 |e(R_max / 64)| + 1; INCONCLUSIVE otherwise.
CriterionReport diverges_on_shells(const std::string& name, int dimension, std::int64_t max_radius,
                                   const std::function<double(const LatticePoint&)>& f);

}  // namespace qsd::zoo
