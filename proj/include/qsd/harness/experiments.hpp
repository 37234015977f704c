#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qsd/harness/results.hpp"
#include "qsd/oracle/truncation.hpp"
#include "qsd/zoo/families.hpp"

namespace qsd::harness {

struct RunContext {
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// 64-bit seed for a sub-task, a pure function of the master seed and the path.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

/// Default truncation for a zoo model: gauge level sets starting at 32, doubling.
oracle::TruncationPolicy default_truncation(const zoo::BuiltModel& built);

/// QSD oracle for a zoo model: level-set truncation for lattice models, a
/// finite-difference grid on the model's oracle interval for 1-D diffusions.
/// Throws ModelError for multi-dimensional diffusions.
oracle::OracleResult solve_model_qsd(const zoo::BuiltModel& built, const oracle::TruncationPolicy& policy,
                                     std::size_t diffusion_cells = 800);
oracle::OracleResult solve_model_qsd(const zoo::BuiltModel& built);

/// Bounded test function with its declared sup norm.
struct TestFunction {
  std::string name;
  zoo::StateFunction f;
  double sup = 1.0;

  static TestFunction indicator_le(double level);  // 1_{x_1 <= level}
  static TestFunction constant(double c);
  static TestFunction first_coordinate();          // f(x) = x_1, unbounded (sup = inf)
};

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double slope_se = 0.0;  // 0 with two points
};

/// Least-squares line y = intercept + slope x.
LineFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

// ---------------------------------------------------------------- conditional decay

struct DecayOptions {
  std::vector<double> times;
  /// Monte Carlo mode with this many replicas per time; oracle mode when empty.
  std::optional<std::size_t> replicas;
  /// TV values below this are excluded from the regression (numerical floor).
  double tv_floor = 1e-13;
};

struct DecayResult {
  ResultTable table;
  std::vector<double> times;  // times kept (degenerate ones dropped)
  std::vector<double> tv;
  double gamma_hat = 0.0;  // minus the slope of log TV against t
  double gamma_hat_se = 0.0;
  double intercept = 0.0;
  std::optional<double> gamma_oracle;
};

/// TV(P_mu0(Y_t in . | t < tau), nu_QSD) over `times` and the fitted decay rate.
DecayResult run_conditional_decay(const zoo::BuiltModel& built, const oracle::OracleResult& oracle,
                                  const oracle::Vector<double>& mu0, const DecayOptions& options,
                                  const RunContext& ctx);

// ---------------------------------------------------------------- martingale identity

struct MartingaleOptions {
  std::vector<std::int64_t> x0;
  std::vector<double> times;
  std::size_t replicas = 100'000;
};

struct MartingaleRow {
  std::int64_t x0 = 0;
  double t = 0.0;
  double estimate = 0.0;  // e^{(1-m)t} E[Y_t 1_{t < tau}]
  double std_error = 0.0;
};

struct MartingaleResult {
  ResultTable table;
  std::vector<MartingaleRow> rows;
};

/// Galton-Watson only: checks E_x(Y_t) = e^{(m-1)t} x.
MartingaleResult run_martingale_check(const zoo::BuiltModel& built, const MartingaleOptions& options,
                                      const RunContext& ctx);

// ---------------------------------------------------------------- ergodic moment bound

struct MomentOptions {
  std::size_t n = 100;
  double burn_in = 50.0;
  double horizon = 500.0;
  double sample_dt = 1.0;
  std::size_t batches = 20;
  std::optional<State> initial;  // default: the model's first reference state
};

struct MomentResult {
  ResultTable table;
  double average = 0.0;  // time average of sum_i V(X^i_t)
  double std_error = 0.0;
  double bound = 0.0;  // C / (lambda1 - kappa_sup N / (N - 1))
  bool pass = false;
};

/// Refuses N below min_particles(certificate).
MomentResult run_moment_bound(const zoo::BuiltModel& built, const MomentOptions& options, const RunContext& ctx);

// ---------------------------------------------------------------- N^{-alpha} convergence

struct ConvergenceOptions {
  std::vector<std::size_t> n_grid;
  std::size_t samples = 40;
  double burn_in = 50.0;
  double sample_gap = 25.0;
  TestFunction f = TestFunction::indicator_le(3);
  std::optional<State> initial;
  std::size_t batches = 20;
};

struct ConvergenceRow {
  std::size_t n = 0;
  double error = 0.0;  // mean over samples of |X^N(f) - nu(f)|
  double std_error = 0.0;
  double reference = 0.0;  // nu_QSD(f), or the FV mean at 4N in proxy mode
};

struct ConvergenceResult {
  ResultTable table;
  std::vector<ConvergenceRow> rows;
  std::optional<double> alpha_hat;
  std::optional<double> alpha_theory;
  /// error[k+1] <= error[k] + 2 pooled standard errors for every k.
  bool decreasing = false;
  bool proxy = false;
};

/// `oracle` may be null; the reference is then the FV estimate at 4N (labelled as a proxy).
ConvergenceResult run_qsd_convergence(const zoo::BuiltModel& built, const oracle::OracleResult* oracle,
                                      const ConvergenceOptions& options, const RunContext& ctx);

// ---------------------------------------------------------------- propagation of chaos

struct ChaosOptions {
  std::vector<std::size_t> n_grid;
  std::vector<double> times;
  std::size_t replicas = 400;
  TestFunction f = TestFunction::indicator_le(3);
  std::optional<State> initial;
};

struct ChaosRow {
  std::size_t n = 0;
  double t = 0.0;
  double difference = 0.0;  // mean over replicas of |mu^N_t(f) - E(f(Y_t) | t < tau)|
  double std_error = 0.0;
  double reference = 0.0;   // oracle conditioned mean
};

struct ChaosResult {
  ResultTable table;
  std::vector<ChaosRow> rows;
  double d0 = 0.0;  // smallest d0 with difference <= d0 ||f|| e^{kappa t} / sqrt(N) on every row
  std::vector<double> t_star;  // ln N / (2 (kappa_sup + gamma)) per N
};

ChaosResult run_unconditioned_vs_fv(const zoo::BuiltModel& built, const oracle::OracleResult& oracle,
                                    const ChaosOptions& options, const RunContext& ctx);

/// Mean of values and the batch-means standard error with `batches` contiguous batches.
std::pair<double, double> batch_means(const std::vector<double>& values, std::size_t batches);

/// Mean and standard error (sample sd / sqrt(n)) of independent values.
std::pair<double, double> replica_mean(const std::vector<double>& values);

}  // namespace qsd::harness
