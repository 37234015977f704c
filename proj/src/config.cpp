#include "qsd/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "qsd/format.hpp"
#include "qsd/oracle/uniformization.hpp"

namespace qsd::config {

namespace {

/// A YAML mapping being consumed key by key; finish() rejects leftovers.
class Section {
 public:
  Section(YAML::Node node, std::string path, const std::string* source)
      : node_(std::move(node)), path_(std::move(path)), source_(source) {
    if (!node_.IsMap()) fail(node_, path_, "expected a mapping");
  }

  bool has(const std::string& key) const { return static_cast<bool>(node_[key]); }

  YAML::Node raw(const std::string& key) {
    seen_.insert(key);
    YAML::Node n = node_[key];
    if (!n) fail(node_, join(key), "missing required key");
    return n;
  }

  template <typename T>
  T req(const std::string& key) {
    return convert<T>(raw(key), join(key));
  }

  template <typename T>
  std::optional<T> maybe(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return req<T>(key);
  }

  template <typename T>
  T opt(const std::string& key, T fallback) {
    return has(key) ? req<T>(key) : fallback;
  }

  Section child(const std::string& key) { return Section(raw(key), join(key), source_); }

  std::optional<Section> maybe_child(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return child(key);
  }

  /// Rejects keys outside `allowed` before any required key is looked up.
  void only(std::initializer_list<const char*> allowed) const {
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      bool ok = false;
      for (const char* a : allowed) ok = ok || key == a;
      if (!ok) fail(kv.first, join(key), "unknown key");
    }
  }

  void finish() const {
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) fail(kv.first, join(key), "unknown key");
    }
  }

  [[noreturn]] void fail(const YAML::Node& at, const std::string& path, const std::string& message) const {
    const auto mark = at.Mark();
    std::string where = *source_;
    if (mark.line >= 0) where += ":" + std::to_string(mark.line + 1) + ":" + std::to_string(mark.column + 1);
    throw ConfigError(where + ": " + (path.empty() ? std::string("<root>") : path) + ": " + message);
  }

  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const YAML::Node& node() const { return node_; }
  const std::string* source() const { return source_; }

  template <typename T>
  T convert(const YAML::Node& n, const std::string& path) const {
    try {
      if constexpr (std::is_same_v<T, double>) {
        const double v = n.as<double>();
        if (!std::isfinite(v)) fail(n, path, "expected a finite number");
        return v;
      } else if constexpr (std::is_same_v<T, std::vector<double>>) {
        if (!n.IsSequence()) fail(n, path, "expected a list of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < n.size(); ++i) out.push_back(convert<double>(n[i], path + "[" + std::to_string(i) + "]"));
        return out;
      } else if constexpr (std::is_same_v<T, std::size_t>) {
        const auto v = n.as<long long>();
        if (v < 0) fail(n, path, "expected a non-negative integer");
        return static_cast<std::size_t>(v);
      } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
        if (!n.IsSequence()) fail(n, path, "expected a list of integers");
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < n.size(); ++i) {
          out.push_back(convert<std::size_t>(n[i], path + "[" + std::to_string(i) + "]"));
        }
        return out;
      } else if constexpr (std::is_same_v<T, std::vector<std::int64_t>>) {
        if (!n.IsSequence()) fail(n, path, "expected a list of integers");
        std::vector<std::int64_t> out;
        for (std::size_t i = 0; i < n.size(); ++i) out.push_back(n[i].as<std::int64_t>());
        return out;
      } else {
        return n.as<T>();
      }
    } catch (const YAML::BadConversion&) {
      fail(n, path, "value has the wrong type");
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  const std::string* source_;
  std::set<std::string> seen_;
};

template <typename... Allowed>
void require_one_of(Section& s, const std::string& key, const std::string& value, std::initializer_list<const char*> allowed) {
  for (const char* a : allowed) {
    if (value == a) return;
  }
  std::string list;
  for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
  s.fail(s.node()[key], s.join(key), "'" + value + "' is not one of: " + list);
}

std::array<double, 3> affine_power_rate(Section s) {
  s.only({"constant", "coefficient", "exponent"});
  std::array<double, 3> out{s.req<double>("constant"), s.req<double>("coefficient"), s.req<double>("exponent")};
  s.finish();
  return out;
}

ModelSpec parse_model(Section s) {
  ModelSpec spec;
  spec.family = s.req<std::string>("family");
  require_one_of(s, "family", spec.family, {"birth-death", "galton-watson", "multitype-galton-watson", "diffusion"});
  if (spec.family == "galton-watson") {
    s.only({"family", "offspring", "alpha"});
    zoo::GaltonWatsonParams p;
    p.offspring = s.req<std::vector<double>>("offspring");
    p.alpha = s.req<double>("alpha");
    spec.params = p;
  } else if (spec.family == "birth-death") {
    const auto form = s.req<std::string>("form");
    require_one_of(s, "form", form, {"affine-power", "constant", "sine"});
    if (form == "affine-power") {
      s.only({"family", "form", "dimension", "birth", "death"});
      const auto d = s.req<std::size_t>("dimension");
      if (d < 1 || d > static_cast<std::size_t>(kMaxDimension)) {
        s.fail(s.node()["dimension"], s.join("dimension"), "must be in [1, 8]");
      }
      spec.params = zoo::BirthDeathParams::affine_power(static_cast<int>(d), affine_power_rate(s.child("birth")),
                                                        affine_power_rate(s.child("death")));
    } else if (form == "constant") {
      s.only({"family", "form", "b", "d", "b1", "d1"});
      spec.params = zoo::BirthDeathParams::constant(s.req<double>("b"), s.req<double>("d"), s.req<double>("b1"),
                                                    s.req<double>("d1"));
    } else {
      s.only({"family", "form", "a", "c", "k"});
      spec.params = zoo::BirthDeathParams::sine(s.req<double>("a"), s.req<double>("c"), s.req<double>("k"));
    }
  } else if (spec.family == "multitype-galton-watson") {
    s.only({"family", "rates", "alpha", "offspring"});
    zoo::MultiTypeGWParams p;
    p.rates = s.req<std::vector<double>>("rates");
    p.alpha = s.req<double>("alpha");
    const YAML::Node laws = s.raw("offspring");
    const std::string path = s.join("offspring");
    if (!laws.IsSequence()) s.fail(laws, path, "expected one list of outcomes per type");
    for (std::size_t i = 0; i < laws.size(); ++i) {
      const std::string type_path = path + "[" + std::to_string(i) + "]";
      if (!laws[i].IsSequence()) s.fail(laws[i], type_path, "expected a list of outcomes");
      std::vector<zoo::MultiTypeGWParams::Outcome> outcomes;
      for (std::size_t k = 0; k < laws[i].size(); ++k) {
        Section o(laws[i][k], type_path + "[" + std::to_string(k) + "]", s.source());
        o.only({"children", "probability"});
        outcomes.push_back({o.req<std::vector<std::int64_t>>("children"), o.req<double>("probability")});
        o.finish();
      }
      p.offspring.push_back(std::move(outcomes));
    }
    spec.params = p;
  } else {
    const auto form = s.req<std::string>("form");
    require_one_of(s, "form", form, {"linear"});
    s.only({"family", "form", "dimension", "drift_rate", "sigma", "kappa", "beta", "gamma", "rho", "step_size",
            "fit_radius"});
    const auto d = s.req<std::size_t>("dimension");
    if (d < 1 || d > static_cast<std::size_t>(kMaxDimension)) {
      s.fail(s.node()["dimension"], s.join("dimension"), "must be in [1, 8]");
    }
    Section kappa = s.child("kappa");
    kappa.only({"constant", "bump"});
    const double kc = kappa.req<double>("constant");
    const double kb = kappa.req<double>("bump");
    kappa.finish();
    auto p = zoo::DiffusionParams::linear(static_cast<int>(d), s.req<double>("drift_rate"), s.req<double>("sigma"), kc,
                                          kb, s.req<double>("beta"), s.req<double>("gamma"), s.req<double>("rho"),
                                          s.req<double>("step_size"));
    p.fit_radius = s.opt<double>("fit_radius", 20.0);
    spec.params = p;
  }
  s.finish();
  return spec;
}

OracleSpec parse_oracle(std::optional<Section> s) {
  OracleSpec spec;
  if (!s) return spec;
  spec.policy_from_config = true;
  s->only({"v_max_initial", "growth", "lambda_tol", "max_states", "max_rounds", "v_max", "tolerance", "max_iterations",
           "gap", "diffusion_cells"});
  auto& p = spec.policy;
  p.v_max_initial = s->opt<double>("v_max_initial", 32.0);
  p.growth = s->opt<double>("growth", 2.0);
  p.lambda_tol = s->opt<double>("lambda_tol", 1e-4);
  p.max_states = s->opt<std::size_t>("max_states", 200'000);
  p.max_rounds = s->opt<std::size_t>("max_rounds", 16);
  p.fixed_v_max = s->maybe<double>("v_max");
  p.eigen.tol = s->opt<double>("tolerance", 1e-11);
  p.eigen.max_iter = s->opt<std::size_t>("max_iterations", 5'000'000);
  p.eigen.compute_gap = s->opt<bool>("gap", true);
  spec.diffusion_cells = s->opt<std::size_t>("diffusion_cells", 800);
  if (!(p.growth > 1.0)) s->fail(s->node()["growth"], s->join("growth"), "must be > 1");
  s->finish();
  return spec;
}

FvSpec parse_fv(Section s) {
  s.only({"particles", "horizon", "observation_times", "initial"});
  FvSpec spec;
  spec.particles = s.req<std::size_t>("particles");
  spec.horizon = s.req<double>("horizon");
  spec.observation_times = s.opt<std::vector<double>>("observation_times", {});
  spec.initial = s.maybe<std::vector<double>>("initial");
  s.finish();
  return spec;
}

FunctionSpec parse_function(Section s) {
  FunctionSpec f;
  f.kind = s.req<std::string>("kind");
  require_one_of(s, "kind", f.kind, {"indicator_le", "constant", "first_coordinate"});
  if (f.kind == "first_coordinate") {
    s.only({"kind"});
  } else {
    s.only({"kind", "value"});
  }
  if (f.kind != "first_coordinate") f.value = s.req<double>("value");
  s.finish();
  return f;
}

ExperimentSpec parse_experiment(Section s) {
  ExperimentSpec e;
  e.kind = s.req<std::string>("kind");
  require_one_of(s, "kind", e.kind,
                 {"conditional-decay", "martingale", "moment-bound", "qsd-convergence", "propagation-of-chaos"});
  e.initial = s.maybe<std::vector<double>>("initial");
  if (e.kind == "conditional-decay") {
    s.only({"kind", "initial", "times", "replicas"});
    e.times = s.req<std::vector<double>>("times");
    e.replicas = s.maybe<std::size_t>("replicas");
  } else if (e.kind == "martingale") {
    s.only({"kind", "initial", "x0", "times", "replicas"});
    e.x0 = s.req<std::vector<std::int64_t>>("x0");
    e.times = s.req<std::vector<double>>("times");
    e.replicas = s.req<std::size_t>("replicas");
  } else if (e.kind == "moment-bound") {
    s.only({"kind", "initial", "particles", "horizon", "burn_in", "sample_dt", "batches"});
    e.particles = s.req<std::size_t>("particles");
    e.horizon = s.req<double>("horizon");
    e.burn_in = s.maybe<double>("burn_in");
    e.sample_dt = s.opt<double>("sample_dt", 1.0);
    e.batches = s.opt<std::size_t>("batches", 20);
  } else if (e.kind == "qsd-convergence") {
    s.only({"kind", "initial", "n_grid", "samples", "burn_in", "sample_gap", "batches", "function"});
    e.n_grid = s.req<std::vector<std::size_t>>("n_grid");
    e.samples = s.opt<std::size_t>("samples", 40);
    e.burn_in = s.maybe<double>("burn_in");
    e.sample_gap = s.maybe<double>("sample_gap");
    e.batches = s.opt<std::size_t>("batches", 20);
    if (auto f = s.maybe_child("function")) e.function = parse_function(*f);
  } else {
    s.only({"kind", "initial", "n_grid", "times", "replicas", "function"});
    e.n_grid = s.req<std::vector<std::size_t>>("n_grid");
    e.times = s.req<std::vector<double>>("times");
    e.replicas = s.req<std::size_t>("replicas");
    if (auto f = s.maybe_child("function")) e.function = parse_function(*f);
  }
  s.finish();
  return e;
}

RuntimeSpec parse_runtime(std::optional<Section> s) {
  RuntimeSpec r;
  if (!s) return r;
  s->only({"seed", "threads", "out", "format"});
  r.seed = s->opt<std::uint64_t>("seed", 0);
  r.threads = s->opt<unsigned>("threads", 1);
  r.out = s->opt<std::string>("out", ".");
  r.format = s->opt<std::string>("format", "csv");
  require_one_of(*s, "format", r.format, {"csv", "json", "both"});
  s->finish();
  return r;
}

}  // namespace

ConfigDocument parse_config(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                      ": parse error: " + e.msg);
  }
  ConfigDocument doc;
  doc.source = source;
  if (!root || root.IsNull()) throw ConfigError(source + ": empty document");
  Section top(root, "", &doc.source);
  top.only({"model", "oracle", "fv", "experiment", "runtime"});
  doc.model = parse_model(top.child("model"));
  doc.oracle = parse_oracle(top.maybe_child("oracle"));
  if (auto fv = top.maybe_child("fv")) doc.fv = parse_fv(*fv);
  if (auto ex = top.maybe_child("experiment")) doc.experiment = parse_experiment(*ex);
  doc.runtime = parse_runtime(top.maybe_child("runtime"));
  top.finish();

  std::string canonical;
  for (const char* key : {"model", "oracle", "fv", "experiment"}) {
    if (!root[key]) continue;
    YAML::Emitter em;
    em << root[key];
    canonical += std::string(key) + ":\n" + em.c_str() + "\n";
  }
  doc.digest = hex64(fnv1a64(canonical));
  return doc;
}

ConfigDocument load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

zoo::BuiltModel build_model(const ModelSpec& spec) {
  return std::visit(
      [](const auto& p) -> zoo::BuiltModel {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, zoo::BirthDeathParams>) return zoo::build_bd(p);
        if constexpr (std::is_same_v<P, zoo::GaltonWatsonParams>) return zoo::build_gw(p);
        if constexpr (std::is_same_v<P, zoo::MultiTypeGWParams>) return zoo::build_mtgw(p);
        if constexpr (std::is_same_v<P, zoo::DiffusionParams>) return zoo::build_diffusion(p);
      },
      spec.params);
}

State make_state(const zoo::BuiltModel& built, const std::vector<double>& c) {
  const int d = built.model.dimension();
  if (static_cast<int>(c.size()) != d) {
    throw ModelError("initial state has " + std::to_string(c.size()) + " coordinates, the model needs " +
                     std::to_string(d));
  }
  State s;
  if (built.model.is_jump()) {
    LatticePoint x(d);
    for (int i = 0; i < d; ++i) {
      if (c[static_cast<std::size_t>(i)] != std::floor(c[static_cast<std::size_t>(i)])) {
        throw ModelError("lattice coordinates must be integers");
      }
      x[i] = static_cast<std::int64_t>(c[static_cast<std::size_t>(i)]);
    }
    s = State(x);
  } else {
    RealPoint x(d);
    for (int i = 0; i < d; ++i) x[i] = c[static_cast<std::size_t>(i)];
    s = State(x);
  }
  built.model.require_in_state_space(s);
  return s;
}

harness::TestFunction make_function(const FunctionSpec& spec) {
  if (spec.kind == "indicator_le") return harness::TestFunction::indicator_le(spec.value);
  if (spec.kind == "constant") return harness::TestFunction::constant(spec.value);
  return harness::TestFunction::first_coordinate();
}

harness::ResultTable run_experiment(const ConfigDocument& doc, const zoo::BuiltModel& built,
                                    const harness::RunContext& ctx) {
  if (!doc.experiment) throw ConfigError(doc.source + ": experiment: missing section");
  const auto& e = *doc.experiment;
  std::optional<State> initial;
  if (e.initial) initial = make_state(built, *e.initial);

  const bool has_oracle = built.model.is_jump() || built.model.dimension() == 1;
  std::optional<oracle::OracleResult> orc;
  auto need_oracle = [&]() -> const oracle::OracleResult& {
    if (!orc) {
      const auto policy = doc.oracle.policy_from_config ? doc.oracle.policy : harness::default_truncation(built);
      orc = harness::solve_model_qsd(built, policy, doc.oracle.diffusion_cells);
    }
    return *orc;
  };
  auto gap_scale = [&](const char* what) {
    if (!has_oracle || !need_oracle().solution.gamma) {
      throw ModelError(std::string("no spectral gap available to set ") + what + "; give it explicitly");
    }
    return 1.0 / *need_oracle().solution.gamma;
  };

  harness::ResultTable table;
  if (e.kind == "conditional-decay") {
    const auto& o = need_oracle();
    const State x0 = initial.value_or(built.reference_states.front());
    harness::DecayOptions opts;
    opts.times = e.times;
    opts.replicas = e.replicas;
    table = harness::run_conditional_decay(built, o, oracle::dirac<double>(o.generator.support, x0), opts, ctx).table;
  } else if (e.kind == "martingale") {
    table = harness::run_martingale_check(built, {e.x0, e.times, *e.replicas}, ctx).table;
  } else if (e.kind == "moment-bound") {
    harness::MomentOptions opts;
    opts.n = e.particles;
    opts.horizon = e.horizon;
    opts.burn_in = e.burn_in ? *e.burn_in : 10.0 * gap_scale("burn_in");
    opts.sample_dt = e.sample_dt;
    opts.batches = e.batches;
    opts.initial = initial;
    table = harness::run_moment_bound(built, opts, ctx).table;
  } else if (e.kind == "qsd-convergence") {
    harness::ConvergenceOptions opts;
    opts.n_grid = e.n_grid;
    opts.samples = e.samples;
    opts.burn_in = e.burn_in ? *e.burn_in : 10.0 * gap_scale("burn_in");
    opts.sample_gap = e.sample_gap ? *e.sample_gap : 5.0 * gap_scale("sample_gap");
    opts.batches = e.batches;
    opts.f = make_function(e.function);
    opts.initial = initial;
    table = harness::run_qsd_convergence(built, has_oracle ? &need_oracle() : nullptr, opts, ctx).table;
  } else {
    harness::ChaosOptions opts;
    opts.n_grid = e.n_grid;
    opts.times = e.times;
    opts.replicas = *e.replicas;
    opts.f = make_function(e.function);
    opts.initial = initial;
    table = harness::run_unconditioned_vs_fv(built, need_oracle(), opts, ctx).table;
  }
  table.config_digest = doc.digest;
  return table;
}

}  // namespace qsd::config
