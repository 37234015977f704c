#include "qsd/harness/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qsd/fleming_viot.hpp"
#include "qsd/format.hpp"
#include "qsd/log.hpp"
#include "qsd/oracle/uniformization.hpp"
#include "qsd/parallel.hpp"

namespace qsd::harness {

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  RandomStream r(seed);
  for (auto p : path) r = r.split(p);
  return r();
}

oracle::TruncationPolicy default_truncation(const zoo::BuiltModel&) {
  oracle::TruncationPolicy policy;
  policy.v_max_initial = 32.0;
  policy.growth = 2.0;
  return policy;
}

oracle::OracleResult solve_model_qsd(const zoo::BuiltModel& built, const oracle::TruncationPolicy& policy,
                                     std::size_t diffusion_cells) {
  const auto& model = built.model;
  if (model.is_jump()) return oracle::solve_qsd(model, built.truncation_gauge, built.reference_states, policy);
  if (model.dimension() != 1 || !built.oracle_interval) {
    throw ModelError("no QSD oracle for multi-dimensional diffusions");
  }
  const auto [lo, hi] = *built.oracle_interval;
  oracle::OracleResult out;
  out.generator = oracle::discretize_diffusion_1d(model, lo, hi, diffusion_cells);
  out.solution = oracle::leading_eigentriple(out.generator, policy.eigen);
  out.v_max = hi;
  out.stabilized = true;
  out.history.emplace_back(hi, out.solution.lambda0);
  if (out.solution.leakage > 1e-3 * out.solution.lambda0) {
    warn("diffusion grid (" + fmt17(lo) + ", " + fmt17(hi) + ") is too narrow: QSD leaks " +
         fmt17(out.solution.leakage) + " through the ends");
  }
  return out;
}

oracle::OracleResult solve_model_qsd(const zoo::BuiltModel& built) {
  return solve_model_qsd(built, default_truncation(built));
}

TestFunction TestFunction::indicator_le(double level) {
  return {"ind_le(" + fmt17(level) + ")",
          [level](const State& x) { return x.coordinates()[0] <= level ? 1.0 : 0.0; }, 1.0};
}

TestFunction TestFunction::constant(double c) {
  return {"const(" + fmt17(c) + ")", [c](const State&) { return c; }, std::abs(c)};
}

TestFunction TestFunction::first_coordinate() {
  return {"x1", [](const State& x) { return x.coordinates()[0]; }, std::numeric_limits<double>::infinity()};
}

LineFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw ModelError("linear_fit needs at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw ModelError("linear_fit: abscissae are all equal");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (n > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - fit.intercept - fit.slope * x[i];
      rss += r * r;
    }
    fit.slope_se = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  return fit;
}

std::pair<double, double> batch_means(const std::vector<double>& values, std::size_t batches) {
  const std::size_t n = values.size();
  if (n == 0) throw ModelError("batch_means: no values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  const std::size_t b = std::min(batches, n);
  if (b < 2) return {mean, 0.0};
  std::vector<double> bm(b, 0.0);
  for (std::size_t k = 0; k < b; ++k) {
    const std::size_t lo = n * k / b, hi = n * (k + 1) / b;
    for (std::size_t i = lo; i < hi; ++i) bm[k] += values[i];
    bm[k] /= static_cast<double>(hi - lo);
  }
  double grand = 0.0;
  for (double v : bm) grand += v;
  grand /= static_cast<double>(b);
  double ss = 0.0;
  for (double v : bm) ss += (v - grand) * (v - grand);
  return {mean, std::sqrt(ss / static_cast<double>(b - 1) / static_cast<double>(b))};
}

std::pair<double, double> replica_mean(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n == 0) throw ModelError("replica_mean: no values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  if (n < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n))};
}

namespace {

ResultTable new_table(const zoo::BuiltModel& built, const RunContext& ctx) {
  ResultTable t;
  t.toolkit_version = QSD_VERSION;
  t.seed = ctx.seed;
  t.model_digest = hex64(fnv1a64(built.model.description()));
  return t;
}

State initial_state(const zoo::BuiltModel& built, const std::optional<State>& initial) {
  if (initial) {
    built.model.require_in_state_space(*initial);
    return *initial;
  }
  if (built.reference_states.empty()) throw ModelError("model has no reference state; set an initial state");
  return built.reference_states.front();
}

double integrate(const oracle::Support& support, const oracle::Vector<double>& law, const TestFunction& f) {
  double sum = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) sum += law[static_cast<Eigen::Index>(i)] * f.f(support[i]);
  return sum;
}

void require_sorted(const std::vector<double>& times, const char* what) {
  if (times.empty()) throw ModelError(std::string(what) + ": time grid is empty");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!(times[k] >= 0.0) || (k > 0 && !(times[k] > times[k - 1]))) {
      throw ModelError(std::string(what) + ": times must be non-negative and strictly increasing");
    }
  }
}

}  // namespace

DecayResult run_conditional_decay(const zoo::BuiltModel& built, const oracle::OracleResult& oracle,
                                  const oracle::Vector<double>& mu0, const DecayOptions& options,
                                  const RunContext& ctx) {
  require_sorted(options.times, "conditional decay");
  const auto& gen = oracle.generator;
  const auto& nu = oracle.solution.nu;
  const bool mc = options.replicas.has_value();
  if (mc && !built.model.is_jump()) throw ModelError("Monte Carlo conditional decay needs a lattice model");
  if (mc && *options.replicas < 1) throw ModelError("replicas must be >= 1");

  DecayResult out;
  out.table = new_table(built, ctx);
  out.gamma_oracle = oracle.solution.gamma;
  const std::string mode = mc ? "monte-carlo" : "oracle";

  std::optional<InitialLaw> law;
  if (mc) {
    std::vector<State> atoms;
    std::vector<double> weights;
    for (std::size_t i = 0; i < gen.support.size(); ++i) {
      if (mu0[static_cast<Eigen::Index>(i)] > 0.0) {
        atoms.push_back(gen.support[i]);
        weights.push_back(mu0[static_cast<Eigen::Index>(i)]);
      }
    }
    law = InitialLaw::discrete(std::move(atoms), std::move(weights));
  }

  for (std::size_t k = 0; k < options.times.size(); ++k) {
    const double t = options.times[k];
    double tv = 0.0;
    try {
      if (mc) {
        const auto est = conditional_law_estimate(built.model, *law, t, *options.replicas,
                                                  RandomStream(derive_seed(ctx.seed, {k})), ctx.threads);
        if (est.degenerate()) throw DegenerateConditioning("no surviving replica");
        tv = oracle::tv_distance(est.survivors, gen.support, nu);
        out.table.add("conditional-decay", "survival_fraction", Params()("t", t)("mode", mode),
                      static_cast<double>(est.survivor_count) / static_cast<double>(est.replicas),
                      0.0, "not-estimated");
      } else {
        const auto prop = oracle::propagate(gen, mu0, t);
        tv = oracle::tv_distance(prop.law, nu);
        out.table.add("conditional-decay", "survival_probability", Params()("t", t)("mode", mode),
                      std::exp(prop.log_mass), 0.0, "exact");
      }
    } catch (const DegenerateConditioning& e) {
      warn("conditional decay: dropping t = " + fmt17(t) + " (" + e.what() + ")");
      continue;
    }
    out.times.push_back(t);
    out.tv.push_back(tv);
    out.table.add("conditional-decay", "tv_to_qsd", Params()("t", t)("mode", mode), tv, 0.0,
                  mc ? "not-estimated" : "exact");
  }

  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < out.times.size(); ++k) {
    if (out.tv[k] > options.tv_floor) {
      xs.push_back(out.times[k]);
      ys.push_back(std::log(out.tv[k]));
    }
  }
  if (xs.size() < 2) throw ModelError("conditional decay: fewer than two usable times for the regression");
  const LineFit fit = linear_fit(xs, ys);
  out.gamma_hat = -fit.slope;
  out.gamma_hat_se = fit.slope_se;
  out.intercept = fit.intercept;
  out.table.add("conditional-decay", "gamma_hat", Params()("mode", mode)("points", xs.size()), out.gamma_hat,
                fit.slope_se, "regression", out.gamma_oracle);
  out.table.add("conditional-decay", "log_tv_intercept", Params()("mode", mode), fit.intercept, 0.0, "regression");
  return out;
}

MartingaleResult run_martingale_check(const zoo::BuiltModel& built, const MartingaleOptions& options,
                                      const RunContext& ctx) {
  if (!built.galton_watson) throw ModelError("the martingale check is defined for Galton-Watson models only");
  if (options.replicas < 1) throw ModelError("replicas must be >= 1");
  if (options.x0.empty() || options.times.empty()) throw ModelError("martingale check needs x0 and time grids");
  const double m = built.galton_watson->mean();
  MartingaleResult out;
  out.table = new_table(built, ctx);
  std::size_t cell = 0;
  for (auto x0 : options.x0) {
    const State start(lattice({x0}));
    built.model.require_in_state_space(start);
    for (double t : options.times) {
      if (!(t >= 0.0)) throw ModelError("martingale check: times must be >= 0");
      MartingaleRow row{x0, t, static_cast<double>(x0), 0.0};
      if (t > 0.0) {
        const double scale = std::exp((1.0 - m) * t);
        const RandomStream base(derive_seed(ctx.seed, {cell}));
        std::vector<double> values(options.replicas);
        parallel_for(options.replicas, ctx.threads, [&](std::size_t r) {
          RandomStream stream = base.split(r);
          const auto traj = simulate_killed(built.model, start, t, stream, PathRecording::kEndpoints);
          values[r] = traj.alive() ? scale * static_cast<double>(traj.final_state().lattice()[0]) : 0.0;
        });
        std::tie(row.estimate, row.std_error) = replica_mean(values);
      }
      const std::string params = Params()("x0", x0)("t", t);
      out.table.add("martingale", "scaled_mean", params, row.estimate, row.std_error, t > 0.0 ? "replica" : "exact",
                    static_cast<double>(x0));
      out.table.add("martingale", "deviation", params, row.estimate - static_cast<double>(x0), row.std_error,
                    t > 0.0 ? "replica" : "exact", 0.0);
      out.rows.push_back(row);
      ++cell;
    }
  }
  return out;
}

MomentResult run_moment_bound(const zoo::BuiltModel& built, const MomentOptions& options, const RunContext& ctx) {
  const auto& cert = built.certificate;
  const std::size_t threshold = zoo::min_particles(cert);
  const double n = static_cast<double>(options.n);
  if (options.n < threshold) {
    throw ModelError("N = " + std::to_string(options.n) + " violates the ergodicity threshold N > lambda1 / (lambda1 - "
                     "kappa_sup) = " + fmt17(cert.lambda1 / (cert.lambda1 - cert.kappa_sup)) + "; need N >= " +
                     std::to_string(threshold));
  }
  if (!(options.burn_in >= 0.0) || !(options.horizon > options.burn_in) || !(options.sample_dt > 0.0)) {
    throw ModelError("moment bound: need 0 <= burn_in < horizon and sample_dt > 0");
  }
  const State x0 = initial_state(built, options.initial);
  auto ens = fv_init(built.model, options.n, std::vector<State>(options.n, x0), derive_seed(ctx.seed, {0}),
                     FvInitOptions{threshold});
  std::vector<double> values;
  for (std::size_t k = 0;; ++k) {
    const double t = options.burn_in + static_cast<double>(k) * options.sample_dt;
    if (t > options.horizon * (1.0 + 1e-12)) break;
    ens.advance_to(t);
    double sum = 0.0;
    for (const auto& x : ens.positions()) sum += cert.V(x);
    values.push_back(sum);
  }
  MomentResult out;
  out.table = new_table(built, ctx);
  std::tie(out.average, out.std_error) = batch_means(values, options.batches);
  out.bound = cert.C / (cert.lambda1 - cert.kappa_sup * n / (n - 1.0));
  out.pass = out.average <= out.bound + 3.0 * out.std_error;
  const std::string params = Params()("N", options.n)("burn_in", options.burn_in)("horizon", options.horizon)(
      "samples", values.size());
  out.table.add("moment-bound", "sum_V_time_average", params, out.average, out.std_error, "batch-means", out.bound);
  out.table.add("moment-bound", "stationary_bound", params, out.bound, 0.0, "exact");
  out.table.add("moment-bound", "min_particles", params, static_cast<double>(threshold), 0.0, "exact");
  out.table.add("moment-bound", "rebirth_rate", params, static_cast<double>(ens.rebirth_count()) / ens.time(), 0.0,
                "not-estimated", n * cert.kappa_sup);
  out.table.add("moment-bound", "pass", params, out.pass ? 1.0 : 0.0, 0.0, "exact");
  return out;
}

ConvergenceResult run_qsd_convergence(const zoo::BuiltModel& built, const oracle::OracleResult* oracle,
                                      const ConvergenceOptions& options, const RunContext& ctx) {
  if (options.n_grid.empty()) throw ModelError("qsd convergence: N grid is empty");
  for (std::size_t k = 0; k < options.n_grid.size(); ++k) {
    if (options.n_grid[k] < 2 || (k > 0 && options.n_grid[k] <= options.n_grid[k - 1])) {
      throw ModelError("qsd convergence: N grid must be increasing with N >= 2");
    }
  }
  if (options.samples < 1) throw ModelError("qsd convergence: samples must be >= 1");
  const State x0 = initial_state(built, options.initial);
  const auto& f = options.f;

  ConvergenceResult out;
  out.table = new_table(built, ctx);
  out.proxy = oracle == nullptr;
  std::optional<double> nu_f;
  if (oracle) nu_f = integrate(oracle->solution.support, oracle->solution.nu, f);

  auto sample_values = [&](std::size_t n, std::uint64_t seed) {
    const auto samples =
        stationary_samples(built.model, n, x0, options.burn_in, options.sample_gap, options.samples, seed);
    std::vector<double> v;
    v.reserve(samples.size());
    for (const auto& m : samples) v.push_back(empirical_integral(m, f.f));
    return v;
  };

  const std::size_t grid = options.n_grid.size();
  out.rows.resize(grid);
  parallel_for(grid, ctx.threads, [&](std::size_t k) {
    const std::size_t n = options.n_grid[k];
    const auto values = sample_values(n, derive_seed(ctx.seed, {k}));
    double reference = 0.0;
    if (nu_f) {
      reference = *nu_f;
    } else {
      reference = replica_mean(sample_values(4 * n, derive_seed(ctx.seed, {k, 1}))).first;
    }
    std::vector<double> errors;
    errors.reserve(values.size());
    for (double v : values) errors.push_back(std::abs(v - reference));
    auto [mean, se] = batch_means(errors, options.batches);
    out.rows[k] = {n, mean, se, reference};
  });

  const std::string ref_label = out.proxy ? "fv-4N-proxy" : "oracle";
  if (nu_f) out.table.add("qsd-convergence", "nu_f", Params()("f", f.name), *nu_f, 0.0, "exact");
  for (const auto& row : out.rows) {
    out.table.add("qsd-convergence", "mean_abs_error",
                  Params()("N", row.n)("f", f.name)("samples", options.samples)("reference", ref_label), row.error,
                  row.std_error, "batch-means");
    if (out.proxy) {
      out.table.add("qsd-convergence", "proxy_reference", Params()("N", row.n)("f", f.name), row.reference, 0.0,
                    "not-estimated");
    }
  }
  out.decreasing = true;
  for (std::size_t k = 0; k + 1 < grid; ++k) {
    const auto& a = out.rows[k];
    const auto& b = out.rows[k + 1];
    const double pooled = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
    if (b.error > a.error + 2.0 * pooled) out.decreasing = false;
  }
  std::vector<double> lx, ly;
  for (const auto& row : out.rows) {
    if (row.error > 0.0) {
      lx.push_back(std::log(static_cast<double>(row.n)));
      ly.push_back(std::log(row.error));
    }
  }
  if (oracle && oracle->solution.gamma) {
    const double g = *oracle->solution.gamma;
    out.alpha_theory = g / (2.0 * (built.certificate.kappa_sup + g));
  }
  if (lx.size() >= 2) {
    const LineFit fit = linear_fit(lx, ly);
    out.alpha_hat = -fit.slope;
    out.table.add("qsd-convergence", "alpha_hat", Params()("f", f.name), *out.alpha_hat, fit.slope_se, "regression",
                  out.alpha_theory);
  }
  out.table.add("qsd-convergence", "decreasing", Params()("f", f.name), out.decreasing ? 1.0 : 0.0, 0.0, "exact");
  return out;
}

ChaosResult run_unconditioned_vs_fv(const zoo::BuiltModel& built, const oracle::OracleResult& oracle,
                                    const ChaosOptions& options, const RunContext& ctx) {
  require_sorted(options.times, "propagation of chaos");
  if (options.n_grid.empty() || options.replicas < 1) throw ModelError("propagation of chaos: empty N grid or replicas");
  const State x0 = initial_state(built, options.initial);
  const auto& gen = oracle.generator;
  const auto& f = options.f;
  const auto mu0 = oracle::dirac<double>(gen.support, x0);

  std::vector<double> reference;
  for (double t : options.times) reference.push_back(integrate(gen.support, oracle::conditioned_law(gen, mu0, t), f));

  ChaosResult out;
  out.table = new_table(built, ctx);
  const double kappa = built.certificate.kappa_sup;
  const double t_max = options.times.back();
  for (std::size_t k = 0; k < options.times.size(); ++k) {
    out.table.add("propagation-of-chaos", "conditioned_mean", Params()("t", options.times[k])("f", f.name),
                  reference[k], 0.0, "exact");
  }
  for (std::size_t a = 0; a < options.n_grid.size(); ++a) {
    const std::size_t n = options.n_grid[a];
    std::vector<std::vector<double>> diffs(options.times.size(), std::vector<double>(options.replicas));
    parallel_for(options.replicas, ctx.threads, [&](std::size_t r) {
      auto ens = fv_init(built.model, n, std::vector<State>(n, x0), derive_seed(ctx.seed, {a, r}));
      const auto snaps = fv_run(ens, t_max, options.times);
      for (std::size_t k = 0; k < snaps.size(); ++k) {
        diffs[k][r] = std::abs(empirical_integral(snaps[k].measure, f.f) - reference[k]);
      }
    });
    for (std::size_t k = 0; k < options.times.size(); ++k) {
      const double t = options.times[k];
      auto [mean, se] = replica_mean(diffs[k]);
      out.rows.push_back({n, t, mean, se, reference[k]});
      out.table.add("propagation-of-chaos", "abs_difference",
                    Params()("N", n)("t", t)("f", f.name)("replicas", options.replicas), mean, se, "replica");
      if (std::isfinite(f.sup) && f.sup > 0.0) {
        out.d0 = std::max(out.d0, mean * std::sqrt(static_cast<double>(n)) / (f.sup * std::exp(kappa * t)));
      }
    }
    if (oracle.solution.gamma) {
      const double ts = std::log(static_cast<double>(n)) / (2.0 * (kappa + *oracle.solution.gamma));
      out.t_star.push_back(ts);
      out.table.add("propagation-of-chaos", "t_star", Params()("N", n), ts, 0.0, "exact");
    }
  }
  out.table.add("propagation-of-chaos", "d0_envelope", Params()("f", f.name), out.d0, 0.0, "not-estimated");
  return out;
}

}  // namespace qsd::harness
