#include "qsd/zoo/families.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <unordered_set>

#include "qsd/format.hpp"
#include "qsd/log.hpp"
#include "qsd/zoo/perron.hpp"

namespace qsd::zoo {

namespace {

bool in_punctured_orthant(const LatticePoint& x) { return (x.array() >= 0).all() && x.sum() >= 1; }

bool is_unit_vector(const LatticePoint& x, int i) {
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (x[k] != (k == i ? 1 : 0)) return false;
  }
  return true;
}

void shell_points(int d, std::int64_t remaining, LatticePoint& x, int i,
                  const std::function<void(const LatticePoint&)>& visit) {
  if (i == d - 1) {
    x[i] = remaining;
    visit(x);
    return;
  }
  for (std::int64_t k = remaining; k >= 0; --k) {
    x[i] = k;
    shell_points(d, remaining - k, x, i + 1, visit);
  }
}

double binomial(std::int64_t n, int k) {
  double c = 1.0;
  for (int j = 1; j <= k; ++j) c = c * static_cast<double>(n - k + j) / j;
  return c;
}

/// Largest radius (a multiple of 64, at most 4096) whose shells hold at most `max_points` states.
std::int64_t shell_radius_for(int d, double max_points) {
  std::int64_t r = 4096;
  while (r > 64 && binomial(r + d - 1, d - 1) > max_points) r -= 64;
  return r;
}

std::vector<State> states_between(int d, std::int64_t lo, std::int64_t hi) {
  std::vector<State> out;
  LatticePoint x(d);
  for (std::int64_t r = lo; r <= hi; ++r) shell_points(d, r, x, 0, [&](const LatticePoint& p) { out.emplace_back(p); });
  return out;
}

/// Maximizes f on [lo, hi] by golden-section search (f assumed unimodal).
double golden_section_max(const std::function<double(double)>& f, double lo, double hi, double tol) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  const double mid = 0.5 * (a + b);
  // The maximum may sit on the boundary of the search interval.
  double best = mid, fbest = f(mid);
  for (double e : {lo, hi}) {
    const double fe = f(e);
    if (fe > fbest) {
      best = e;
      fbest = fe;
    }
  }
  return best;
}

CriterionReport pass(std::string name, std::string detail) {
  return {std::move(name), Verdict::kPass, std::move(detail)};
}

}  // namespace

CriterionReport diverges_on_shells(const std::string& name, int dimension, std::int64_t max_radius,
                                   const std::function<double(const LatticePoint&)>& f) {
  if (max_radius < 64) throw ModelError("diverges_on_shells: radius below 64");
  std::vector<std::int64_t> radii = {max_radius / 64, max_radius / 16, max_radius / 4, max_radius};
  std::vector<double> envelope;
  LatticePoint x(dimension);
  for (std::int64_t r : radii) {
    double e = std::numeric_limits<double>::infinity();
    shell_points(dimension, r, x, 0, [&](const LatticePoint& p) { e = std::min(e, f(p)); });
    envelope.push_back(e);
  }
  bool monotone = true;
  for (std::size_t k = 1; k < envelope.size(); ++k) monotone = monotone && envelope[k] >= envelope[k - 1];
  const bool grows = envelope.back() >= 2.0 * std::abs(envelope.front()) + 1.0;
  std::string detail = "shell minima";
  for (std::size_t k = 0; k < radii.size(); ++k) {
    detail += " e(" + std::to_string(radii[k]) + ")=" + fmt17(envelope[k]);
  }
  return {name, monotone && grows ? Verdict::kPass : Verdict::kInconclusive, detail};
}

// ---------------------------------------------------------------- birth-death

BirthDeathParams BirthDeathParams::affine_power(int dimension, std::array<double, 3> b, std::array<double, 3> d) {
  BirthDeathParams p;
  p.dimension = dimension;
  p.birth = [b](const LatticePoint& x, int i) { return b[0] + b[1] * std::pow(static_cast<double>(x[i]), b[2]); };
  p.death = [d](const LatticePoint& x, int i) {
    return x[i] == 0 ? 0.0 : d[0] + d[1] * std::pow(static_cast<double>(x[i]), d[2]);
  };
  p.description = "birth-death affine-power d=" + std::to_string(dimension) + " birth=" + fmt17({b[0], b[1], b[2]}) +
                  " death=" + fmt17({d[0], d[1], d[2]});
  return p;
}

BirthDeathParams BirthDeathParams::constant(double b, double d, double b1, double d1) {
  BirthDeathParams p;
  p.dimension = 1;
  p.birth = [b, b1](const LatticePoint& x, int) { return x[0] == 1 ? b1 : b; };
  p.death = [d, d1](const LatticePoint& x, int) { return x[0] == 0 ? 0.0 : (x[0] == 1 ? d1 : d); };
  p.description = "birth-death constant b=" + fmt17(b) + " d=" + fmt17(d) + " b1=" + fmt17(b1) + " d1=" + fmt17(d1);
  return p;
}

BirthDeathParams BirthDeathParams::sine(double a, double c, double k) {
  BirthDeathParams p;
  p.dimension = 1;
  p.birth = [a, c](const LatticePoint& x, int) {
    const auto i = x[0];
    // |sin(i pi / 2)| is 1 for odd i and 0 for even i.
    return a * static_cast<double>(i % 2 != 0 ? i : 0) + c;
  };
  p.death = [k](const LatticePoint& x, int) { return k * static_cast<double>(x[0]); };
  p.description = "birth-death sine a=" + fmt17(a) + " c=" + fmt17(c) + " k=" + fmt17(k);
  return p;
}

BuiltModel build_bd(const BirthDeathParams& params) {
  const int d = params.dimension;
  if (d < 1 || d > kMaxDimension) throw ModelError("birth-death dimension must be in [1, 8]");
  if (!params.birth || !params.death) throw ModelError("birth-death model needs birth and death rates");
  auto birth = params.birth;
  auto death = [f = params.death](const LatticePoint& x, int i) { return x[i] == 0 ? 0.0 : f(x, i); };

  const std::int64_t fit_radius = std::min<std::int64_t>(64, lattice_radius_for(d, 6000));
  const std::int64_t probe_radius = std::min<std::int64_t>(4 * fit_radius, lattice_radius_for(d, 40000));
  std::vector<State> fit_window = lattice_ball(d, fit_radius);
  std::vector<State> probe = lattice_ball(d, probe_radius);

  for (const auto& s : probe) {
    const auto& x = s.lattice();
    for (int i = 0; i < d; ++i) {
      const double b = birth(x, i), dd = death(x, i);
      if (!(b > 0.0) || !std::isfinite(b)) throw ModelError("birth rate b_" + std::to_string(i + 1) + " not > 0 at " + s.to_string());
      if (x[i] >= 1 && (!(dd > 0.0) || !std::isfinite(dd))) {
        throw ModelError("death rate d_" + std::to_string(i + 1) + " not > 0 at " + s.to_string());
      }
    }
  }

  JumpDynamics dyn;
  dyn.dimension = d;
  dyn.contains = in_punctured_orthant;
  dyn.enumerate_jumps = [d, birth, death](const LatticePoint& x, std::vector<Jump>& out) {
    out.clear();
    for (int i = 0; i < d; ++i) {
      LatticePoint up = x;
      ++up[i];
      out.push_back({std::move(up), birth(x, i)});
      if (x[i] >= 1 && !is_unit_vector(x, i)) {
        LatticePoint down = x;
        --down[i];
        out.push_back({std::move(down), death(x, i)});
      }
    }
  };
  double kappa_sup = 0.0;
  for (int i = 0; i < d; ++i) kappa_sup = std::max(kappa_sup, death(unit_lattice(d, i), i));
  KillingRate killing(
      [d, death](const State& s) {
        const auto& x = s.lattice();
        for (int i = 0; i < d; ++i) {
          if (is_unit_vector(x, i)) return death(x, i);
        }
        return 0.0;
      },
      kappa_sup);
  KilledModel model(std::move(dyn), std::move(killing), params.description);

  // Asymptotic criteria on growing shells.
  const std::int64_t shell_radius = shell_radius_for(d, 1e5);
  constexpr double kDelta = 1.001;
  auto criterion1 = diverges_on_shells("(1/|x|) sum_i (d_i - b_i) -> +inf", d, shell_radius, [&](const LatticePoint& x) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += death(x, i) - birth(x, i);
    return s / static_cast<double>(x.sum());
  });
  auto criterion2 = diverges_on_shells("sum_i (d_i - delta b_i) -> +inf, delta = " + fmt17(kDelta), d, shell_radius,
                                       [&](const LatticePoint& x) {
                                         double s = 0.0;
                                         for (int i = 0; i < d; ++i) s += death(x, i) - kDelta * birth(x, i);
                                         return s;
                                       });

  DriftCertificate cert;
  cert.kappa_sup = kappa_sup;
  cert.fit_window = fit_window;
  cert.probe = probe;
  StateFunction gauge = [](const State& s) { return static_cast<double>(s.lattice().sum()); };
  if (criterion1.verdict == Verdict::kPass) {
    cert.family = "V(x) = |x|";
    cert.V = gauge;
    // LV/V -> -inf, so any lambda1 above kappa_sup is eventually dominated.
    cert.asymptotic_rate = std::numeric_limits<double>::infinity();
    cert.lambda1 = kappa_sup + 1.0;
  } else {
    // V = exp(eps |x|_1): LV/V = sum_i b_i (e^eps - 1) + d_i (e^-eps - 1) away from the axes' ends.
    std::vector<State> tail = states_between(d, fit_radius / 2, fit_radius);
    auto margin = [&](double eps) {
      double worst = -std::numeric_limits<double>::infinity();
      for (const auto& s : tail) {
        const auto& x = s.lattice();
        double r = 0.0;
        for (int i = 0; i < d; ++i) r += birth(x, i) * std::expm1(eps) + death(x, i) * std::expm1(-eps);
        worst = std::max(worst, r);
      }
      return -worst;
    };
    const double eps = golden_section_max(margin, 1e-3, 1.0, 1e-7);
    const double rate = margin(eps);
    if (!(rate > kappa_sup)) {
      throw ModelError("birth-death model refused: (3.1) " + std::string(to_string(criterion1.verdict)) + ", (3.2) " +
                       to_string(criterion2.verdict) + ", and no exponential V = exp(eps |x|) has drift rate above "
                       "kappa_sup = " + fmt17(kappa_sup) + " (best eps = " + fmt17(eps) + ", rate " + fmt17(rate) +
                       ")");
    }
    cert.family = "V(x) = exp(" + fmt17(eps) + " |x|_1)";
    cert.V = [eps](const State& s) { return std::exp(eps * static_cast<double>(s.lattice().sum())); };
    cert.asymptotic_rate = rate;
    cert.lambda1 = 0.5 * (kappa_sup + rate);
  }
  cert.C = fit_drift_constant(model, cert, cert.fit_window);

  std::vector<State> refs;
  for (int i = 0; i < d; ++i) refs.emplace_back(unit_lattice(d, i));
  BuiltModel out{"birth-death", std::move(model), std::move(cert), {}, std::move(refs), gauge, std::nullopt,
                 std::nullopt};
  out.criteria.push_back(pass("rates positive on the probe window", "|x|_1 <= " + std::to_string(probe_radius)));
  out.criteria.push_back(std::move(criterion1));
  out.criteria.push_back(std::move(criterion2));
  return out;
}

// ---------------------------------------------------------------- Galton-Watson

double GaltonWatsonParams::mean() const {
  double m = 0.0;
  for (std::size_t n = 0; n < offspring.size(); ++n) m += static_cast<double>(n) * offspring[n];
  return m;
}

BuiltModel build_gw(const GaltonWatsonParams& params) {
  const auto& p = params.offspring;
  if (p.size() < 2) throw ModelError("offspring law needs at least p(0) and p(1)");
  double total = 0.0, upper = 0.0;
  for (std::size_t n = 0; n < p.size(); ++n) {
    if (!(p[n] >= 0.0) || !std::isfinite(p[n])) throw ModelError("offspring probabilities must be finite and >= 0");
    total += p[n];
    if (n >= 2) upper += p[n];
  }
  if (std::abs(total - 1.0) > 1e-12) throw ModelError("offspring law sums to " + fmt17(total) + ", not 1");
  if (!(p[0] > 0.0)) throw ModelError("offspring law needs p(0) > 0");
  if (!(upper > 0.0)) throw ModelError("offspring law needs p({2,3,...}) > 0");
  const double m = params.mean();
  if (!(m < 1.0)) throw ModelError("m >= 1: offspring mean " + fmt17(m) + " is not subcritical");
  const double alpha_min = p[0] / (1.0 - m);
  if (!(params.alpha > alpha_min)) {
    throw ModelError("alpha = " + fmt17(params.alpha) + " must exceed p(0)/(1-m) = " + fmt17(alpha_min));
  }

  JumpDynamics dyn;
  dyn.dimension = 1;
  dyn.contains = in_punctured_orthant;
  dyn.enumerate_jumps = [p](const LatticePoint& x, std::vector<Jump>& out) {
    out.clear();
    const double size = static_cast<double>(x[0]);
    for (std::size_t n = 0; n < p.size(); ++n) {
      if (n == 1 || p[n] == 0.0) continue;
      const std::int64_t target = x[0] + static_cast<std::int64_t>(n) - 1;
      if (target == 0) continue;  // absorption, carried by kappa
      out.push_back({lattice({target}), size * p[n]});
    }
  };
  dyn.rate_bound_hint = [](const LatticePoint& x) { return static_cast<double>(x[0]); };
  const double p0 = p[0];
  KillingRate killing([p0](const State& s) { return s.lattice()[0] == 1 ? p0 : 0.0; }, p0);
  KilledModel model(std::move(dyn), std::move(killing),
                    "galton-watson offspring=" + fmt17(p) + " alpha=" + fmt17(params.alpha));

  DriftCertificate cert;
  const double alpha = params.alpha;
  cert.family = "V(x) = x^" + fmt17(alpha);
  cert.V = [alpha](const State& s) { return std::pow(static_cast<double>(s.lattice()[0]), alpha); };
  cert.kappa_sup = p0;
  cert.asymptotic_rate = alpha * (1.0 - m);
  cert.lambda1 = 0.5 * (p0 + cert.asymptotic_rate);
  cert.fit_window = lattice_ball(1, 500);
  cert.probe = lattice_ball(1, 2000);
  cert.C = fit_drift_constant(model, cert, cert.fit_window);

  BuiltModel out{"galton-watson",
                 std::move(model),
                 std::move(cert),
                 {},
                 {State(lattice({1}))},
                 [](const State& s) { return static_cast<double>(s.lattice()[0]); },
                 params,
                 std::nullopt};
  out.criteria.push_back(pass("offspring law", "p(0) = " + fmt17(p0) + ", p({2,...}) = " + fmt17(upper)));
  out.criteria.push_back(pass("subcritical m < 1", "m = " + fmt17(m)));
  out.criteria.push_back(pass("alpha > p(0)/(1-m)", fmt17(params.alpha) + " > " + fmt17(alpha_min)));
  return out;
}

// ---------------------------------------------------------------- multi-type Galton-Watson

BuiltModel build_mtgw(const MultiTypeGWParams& params) {
  const int d = params.types();
  if (d < 1 || d > kMaxDimension) throw ModelError("multi-type GW needs 1 to 8 types");
  if (static_cast<int>(params.offspring.size()) != d) throw ModelError("one offspring law per type is required");
  DenseMatrix<double> mean = DenseMatrix<double>::Zero(d, d);
  std::vector<double> p0(static_cast<std::size_t>(d), 0.0);
  for (int i = 0; i < d; ++i) {
    const double lambda = params.rates[static_cast<std::size_t>(i)];
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ModelError("reproduction rates must be > 0");
    double total = 0.0;
    for (const auto& o : params.offspring[static_cast<std::size_t>(i)]) {
      if (static_cast<int>(o.children.size()) != d) throw ModelError("offspring vectors must have one entry per type");
      if (!(o.probability >= 0.0)) throw ModelError("offspring probabilities must be >= 0");
      total += o.probability;
      bool empty = true;
      for (int j = 0; j < d; ++j) {
        if (o.children[static_cast<std::size_t>(j)] < 0) throw ModelError("offspring counts must be >= 0");
        if (o.children[static_cast<std::size_t>(j)] > 0) empty = false;
        mean(i, j) += lambda * static_cast<double>(o.children[static_cast<std::size_t>(j)]) * o.probability;
      }
      if (empty) p0[static_cast<std::size_t>(i)] += o.probability;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw ModelError("offspring law of type " + std::to_string(i + 1) + " sums to " + fmt17(total));
    }
  }
  DenseMatrix<double> q = mean;
  for (int i = 0; i < d; ++i) q(i, i) -= params.rates[static_cast<std::size_t>(i)];
  const PerronPair<double> pp = perron(q);
  if (!(pp.rho < 0.0)) throw ModelError("Perron root rho = " + fmt17(pp.rho) + " >= 0: not subcritical");
  const double p0_max = *std::max_element(p0.begin(), p0.end());
  const double alpha_min = p0_max / (-pp.rho);
  if (!(params.alpha > alpha_min)) {
    throw ModelError("alpha = " + fmt17(params.alpha) + " must exceed max_i p_i(0)/(-rho) = " + fmt17(alpha_min));
  }
  double kappa_sup = 0.0;
  for (int i = 0; i < d; ++i) kappa_sup = std::max(kappa_sup, params.rates[static_cast<std::size_t>(i)] * p0[static_cast<std::size_t>(i)]);
  const double rate = params.alpha * (-pp.rho);
  if (!(rate > kappa_sup)) {
    throw ModelError("alpha (-rho) = " + fmt17(rate) + " does not exceed the maximal killing rate " + fmt17(kappa_sup));
  }

  auto rates = params.rates;
  auto laws = params.offspring;
  JumpDynamics dyn;
  dyn.dimension = d;
  dyn.contains = in_punctured_orthant;
  dyn.enumerate_jumps = [d, rates, laws](const LatticePoint& x, std::vector<Jump>& out) {
    out.clear();
    for (int i = 0; i < d; ++i) {
      if (x[i] == 0) continue;
      const double base = rates[static_cast<std::size_t>(i)] * static_cast<double>(x[i]);
      for (const auto& o : laws[static_cast<std::size_t>(i)]) {
        if (o.probability == 0.0) continue;
        LatticePoint y = x;
        --y[i];
        for (int j = 0; j < d; ++j) y[j] += o.children[static_cast<std::size_t>(j)];
        if (y.sum() == 0 || (y.array() == x.array()).all()) continue;
        out.push_back({std::move(y), base * o.probability});
      }
    }
  };
  std::vector<double> kill_at(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) kill_at[static_cast<std::size_t>(i)] = rates[static_cast<std::size_t>(i)] * p0[static_cast<std::size_t>(i)];
  KillingRate killing(
      [d, kill_at](const State& s) {
        const auto& x = s.lattice();
        for (int i = 0; i < d; ++i) {
          if (is_unit_vector(x, i)) return kill_at[static_cast<std::size_t>(i)];
        }
        return 0.0;
      },
      kappa_sup);
  std::string description = "multitype-galton-watson rates=" + fmt17(params.rates) + " alpha=" + fmt17(params.alpha);
  for (int i = 0; i < d; ++i) {
    description += " p" + std::to_string(i + 1) + "={";
    for (const auto& o : laws[static_cast<std::size_t>(i)]) {
      description += "(";
      for (auto c : o.children) description += std::to_string(c) + ";";
      description += fmt17(o.probability) + ")";
    }
    description += "}";
  }
  KilledModel model(std::move(dyn), std::move(killing), description);

  // Irreducibility on the window |x|_1 <= 20: every state reaches e_1 and is reached from it.
  constexpr std::int64_t kWindow = 20;
  const std::vector<State> window = lattice_ball(d, kWindow);
  std::unordered_map<State, std::vector<std::size_t>, StateHash> index;
  for (std::size_t k = 0; k < window.size(); ++k) index[window[k]].push_back(k);
  std::vector<std::vector<std::size_t>> forward(window.size()), backward(window.size());
  std::vector<Jump> jumps;
  for (std::size_t k = 0; k < window.size(); ++k) {
    model.jumps().enumerate_jumps(window[k].lattice(), jumps);
    for (const auto& j : jumps) {
      auto it = index.find(State(j.target));
      if (j.rate <= 0.0 || it == index.end()) continue;
      forward[k].push_back(it->second.front());
      backward[it->second.front()].push_back(k);
    }
  }
  auto reach_all = [&](const std::vector<std::vector<std::size_t>>& g) {
    std::vector<char> seen(window.size(), 0);
    std::deque<std::size_t> queue{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!queue.empty()) {
      const auto v = queue.front();
      queue.pop_front();
      for (auto w : g[v]) {
        if (!seen[w]) {
          seen[w] = 1;
          ++count;
          queue.push_back(w);
        }
      }
    }
    return count == window.size();
  };
  CriterionReport irreducible{"irreducible on |x|_1 <= 20", Verdict::kPass, std::to_string(window.size()) + " states"};
  if (!(reach_all(forward) && reach_all(backward))) {
    irreducible.verdict = Verdict::kInconclusive;
    irreducible.detail = "not all states communicate inside the window; paths may leave it";
    warn("multi-type GW irreducibility scan inconclusive on |x|_1 <= 20");
  }

  const Eigen::VectorXd v = pp.v;
  const double vmin = v.minCoeff();
  DriftCertificate cert;
  const double alpha = params.alpha;
  StateFunction gauge = [v, vmin](const State& s) {
    const auto& x = s.lattice();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) sum += v[i] * static_cast<double>(x[i]);
    return sum / vmin;
  };
  cert.family = "V(x) = (sum_i v_i x_i / min v)^" + fmt17(alpha) + ", v = " +
                fmt17(std::vector<double>(v.data(), v.data() + v.size()));
  cert.V = [gauge, alpha](const State& s) { return std::pow(gauge(s), alpha); };
  cert.kappa_sup = kappa_sup;
  cert.asymptotic_rate = rate;
  cert.lambda1 = 0.5 * (kappa_sup + rate);
  cert.fit_window = lattice_ball(d, lattice_radius_for(d, 6000));
  cert.probe = lattice_ball(d, lattice_radius_for(d, 25000));
  cert.C = fit_drift_constant(model, cert, cert.fit_window);

  BuiltModel out{"multitype-galton-watson", std::move(model), std::move(cert), {}, {State(unit_lattice(d, 0))},
                 gauge, std::nullopt, std::nullopt};
  out.criteria.push_back(pass("Perron root rho < 0", "rho = " + fmt17(pp.rho)));
  out.criteria.push_back(pass("alpha > max_i p_i(0)/(-rho)", fmt17(alpha) + " > " + fmt17(alpha_min)));
  out.criteria.push_back(std::move(irreducible));
  return out;
}

// ---------------------------------------------------------------- diffusions

DiffusionParams DiffusionParams::linear(int dimension, double k, double s, double kappa_const, double kappa_bump,
                                        double beta, double gamma_ell, double rho, double step_size) {
  DiffusionParams p;
  p.dimension = dimension;
  p.noise_dimension = dimension;
  p.drift = [k](const RealPoint& x) -> RealPoint { return -k * x; };
  p.dispersion = [s, dimension](const RealPoint&) -> DispersionMatrix {
    return s * DispersionMatrix::Identity(dimension, dimension);
  };
  if (kappa_const < 0.0 || kappa_bump < 0.0) throw ModelError("killing coefficients must be >= 0");
  p.kappa = [kappa_const, kappa_bump](const State& x) {
    return kappa_const + kappa_bump * std::exp(-0.5 * x.real().squaredNorm());
  };
  p.kappa_sup = kappa_const + kappa_bump;
  p.beta = beta;
  p.gamma_ell = gamma_ell;
  p.rho = rho;
  p.step_size = step_size;
  p.description = "diffusion linear d=" + std::to_string(dimension) + " k=" + fmt17(k) + " sigma=" + fmt17(s) +
                  " kappa=" + fmt17(kappa_const) + "+" + fmt17(kappa_bump) + "*exp(-|x|^2/2) beta=" + fmt17(beta) +
                  " gamma=" + fmt17(gamma_ell) + " rho=" + fmt17(rho) + " h=" + fmt17(step_size);
  return p;
}

namespace {

std::vector<RealPoint> probe_directions(int d) {
  std::vector<RealPoint> dirs;
  for (int i = 0; i < d; ++i) {
    RealPoint e = RealPoint::Zero(d);
    e[i] = 1.0;
    dirs.push_back(e);
    dirs.push_back(-e);
  }
  if (d > 1) {
    dirs.push_back(RealPoint::Ones(d).normalized());
    dirs.push_back(-RealPoint::Ones(d).normalized());
    RandomStream rng(0xd1f);
    for (int k = 0; k < 4 * d; ++k) {
      RealPoint u(d);
      for (int i = 0; i < d; ++i) u[i] = rng.normal();
      dirs.push_back(u.normalized());
    }
  }
  return dirs;
}

/// Points r u for r on a uniform grid of (0, radius] and u in `dirs`.
std::vector<State> radial_probe(const std::vector<RealPoint>& dirs, double r_min, double radius, int steps) {
  std::vector<State> out;
  for (int k = 0; k <= steps; ++k) {
    const double r = r_min + (radius - r_min) * k / steps;
    for (const auto& u : dirs) out.emplace_back(RealPoint(r * u));
  }
  return out;
}

}  // namespace

BuiltModel build_diffusion(const DiffusionParams& params) {
  const int d = params.dimension;
  if (d < 1 || d > kMaxDimension) throw ModelError("diffusion dimension must be in [1, 8]");
  if (!params.drift || !params.dispersion || !params.kappa) throw ModelError("diffusion needs drift, dispersion and kappa");
  const double kappa = params.kappa_sup;
  const double beta = params.beta, gamma = params.gamma_ell, rho = params.rho;
  if (!(beta > 0.0)) throw ModelError("diffusion refused: no inward drift strength beta > 0");
  if (!(gamma > 0.0)) throw ModelError("ellipticity constant gamma must be > 0");
  if (!(rho > 0.0)) throw ModelError("Lyapunov exponent rho must be > 0");
  if (!(beta * beta > 2.0 * gamma * kappa)) {
    throw ModelError("beta^2 = " + fmt17(beta * beta) + " must exceed 2 gamma kappa_sup = " + fmt17(2 * gamma * kappa));
  }
  const double lhs = rho * rho * gamma / 2.0 + kappa;
  if (!(lhs < beta * rho)) {
    throw ModelError("rho^2 gamma/2 + kappa_sup = " + fmt17(lhs) + " must be below beta rho = " + fmt17(beta * rho));
  }

  DiffusionDynamics dyn;
  dyn.dimension = d;
  dyn.noise_dimension = params.noise_dimension;
  dyn.drift = params.drift;
  dyn.dispersion = params.dispersion;
  dyn.step_size = params.step_size;
  KilledModel model(std::move(dyn), KillingRate(params.kappa, kappa), params.description);

  const double fit_radius = params.fit_radius;
  if (!(fit_radius > 0.0)) throw ModelError("fit_radius must be > 0");
  const auto dirs = probe_directions(d);
  const double r_min = std::min(0.05, fit_radius / 100.0);
  std::vector<State> fit_window = radial_probe(dirs, r_min, fit_radius, 400);
  std::vector<State> probe = radial_probe(dirs, r_min, 2.0 * fit_radius, 800);

  // Drift and ellipticity conditions on the probe.
  double drift_tail = -std::numeric_limits<double>::infinity();
  double ellipticity = 0.0;
  for (const auto& s : probe) {
    const RealPoint& x = s.real();
    const double r = x.norm();
    const DispersionMatrix sigma = params.dispersion(x);
    const double axx = (sigma.transpose() * x).squaredNorm();
    ellipticity = std::max(ellipticity, axx / (r * r));
    if (r >= fit_radius) drift_tail = std::max(drift_tail, params.drift(x).dot(x) / r);
  }
  if (!(drift_tail <= -beta)) {
    throw ModelError("diffusion refused: <b(x),x>/|x| reaches " + fmt17(drift_tail) + " > -beta = " + fmt17(-beta) +
                     " for |x| >= " + fmt17(fit_radius));
  }
  if (!(ellipticity <= gamma * (1.0 + 1e-12))) {
    throw ModelError("sum a_ij x_i x_j / <x,x> reaches " + fmt17(ellipticity) + " > gamma = " + fmt17(gamma));
  }

  // Boundary of rho^2 gamma/2 + kappa < (beta - 2 eps) rho by bisection; eps is half of it.
  auto slack = [&](double e) { return (beta - 2.0 * e) * rho - lhs; };
  double lo = 0.0, hi = beta / 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (slack(mid) > 0.0 ? lo : hi) = mid;
  }
  const double eps = 0.5 * lo;

  DriftCertificate cert;
  cert.family = "V(x) = exp(" + fmt17(rho) + " |x|)";
  cert.V = [rho](const State& s) { return std::exp(rho * s.real().norm()); };
  auto drift = params.drift;
  auto dispersion = params.dispersion;
  cert.LV = [rho, drift, dispersion](const State& s) {
    const RealPoint& x = s.real();
    const double r = x.norm();
    if (r == 0.0) throw ModelError("V = exp(rho |x|) is not differentiable at the origin");
    const double v = std::exp(rho * r);
    const DispersionMatrix sigma = dispersion(x);
    const DispersionMatrix a = sigma * sigma.transpose();
    const double axx = x.dot(a * x);
    const double second = rho * rho * axx / (r * r) - rho * axx / (r * r * r) + rho * a.trace() / r;
    return v * (rho * drift(x).dot(x) / r + 0.5 * second);
  };
  cert.kappa_sup = kappa;
  cert.asymptotic_rate = kappa + 2.0 * eps * rho;
  cert.lambda1 = kappa + eps * rho;
  cert.fit_window = std::move(fit_window);
  cert.probe = std::move(probe);
  cert.C = fit_drift_constant(model, cert, cert.fit_window);

  std::optional<std::pair<double, double>> interval;
  if (d == 1) interval = std::make_pair(-fit_radius / 2.0, fit_radius / 2.0);
  BuiltModel out{"diffusion", std::move(model), std::move(cert), {}, {State(RealPoint(RealPoint::Zero(d)))}, {}, std::nullopt,
                 interval};
  out.criteria.push_back(pass("beta^2 > 2 gamma kappa_sup", fmt17(beta * beta) + " > " + fmt17(2 * gamma * kappa)));
  out.criteria.push_back(pass("rho^2 gamma/2 + kappa_sup < beta rho", fmt17(lhs) + " < " + fmt17(beta * rho)));
  out.criteria.push_back(pass("<b(x),x>/|x| <= -beta on the probe tail", "max " + fmt17(drift_tail)));
  out.criteria.push_back(pass("sum a_ij x_i x_j <= gamma <x,x> on the probe", "max ratio " + fmt17(ellipticity)));
  out.criteria.push_back(pass("eps from bisection", "eps = " + fmt17(eps)));
  return out;
}

}  // namespace qsd::zoo
