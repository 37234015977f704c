// qsdfv: command-line front end for the QSD toolkit.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "qsd/config.hpp"
#include "qsd/errors.hpp"
#include "qsd/fleming_viot.hpp"
#include "qsd/format.hpp"
#include "qsd/harness/experiments.hpp"
#include "qsd/harness/results.hpp"
#include "qsd/oracle/truncation.hpp"
#include "qsd/zoo/certificate.hpp"

namespace fs = std::filesystem;
using namespace qsd;

namespace {

constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out;
};

config::ConfigDocument load(const Options& o) {
  auto doc = config::load_config(o.config);
  if (o.seed) doc.runtime.seed = *o.seed;
  if (o.threads) doc.runtime.threads = *o.threads;
  if (o.out) doc.runtime.out = *o.out;
  if (doc.runtime.threads == 0) throw ConfigError("--threads must be at least 1");
  return doc;
}

fs::path output_dir(const config::ConfigDocument& doc) {
  fs::path dir(doc.runtime.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.flush();
  if (!out) throw Error("cannot write " + path.string());
}

int cmd_check(const config::ConfigDocument& doc) {
  std::optional<zoo::BuiltModel> maybe_built;
  try {
    maybe_built.emplace(config::build_model(doc.model));
  } catch (const ModelError& e) {
    std::cout << "family: " << doc.model.family << "\nresult: FAIL\nreason: " << e.what() << "\n";
    return kExitFail;
  }
  const auto& built = *maybe_built;
  const auto& cert = built.certificate;
  std::cout << "family: " << built.family << "\n"
            << "model: " << built.model.description() << "\n"
            << "certificate: " << cert.family << "\n"
            << "lambda1: " << fmt17(cert.lambda1) << "\n"
            << "C: " << fmt17(cert.C) << "\n"
            << "kappa_sup: " << fmt17(cert.kappa_sup) << "\n"
            << "min_particles: " << zoo::min_particles(cert) << "\n";
  for (const auto& c : built.criteria) {
    std::cout << "criterion " << c.name << ": " << zoo::to_string(c.verdict);
    if (!c.detail.empty()) std::cout << " (" << c.detail << ")";
    std::cout << "\n";
  }
  const auto v = zoo::drift_check(built.model, cert);
  std::cout << "drift_check: " << zoo::to_string(v.verdict) << " (max slack " << fmt17(v.max_slack) << " at "
            << v.argmax.to_string() << ", tolerance " << fmt17(v.tolerance) << ", " << v.checked << " states)\n"
            << "result: " << zoo::to_string(v.verdict) << "\n";
  return v.verdict == zoo::Verdict::kPass ? 0 : kExitFail;
}

int cmd_qsd(const config::ConfigDocument& doc) {
  const auto built = config::build_model(doc.model);
  const auto policy = doc.oracle.policy_from_config ? doc.oracle.policy : harness::default_truncation(built);
  const auto result = harness::solve_model_qsd(built, policy, doc.oracle.diffusion_cells);
  std::ostringstream table;
  oracle::write_qsd_table(table, result.solution);
  const auto path = output_dir(doc) / "qsd.csv";
  write_file(path, table.str());
  const auto& s = result.solution;
  std::cout << "lambda0: " << fmt17(s.lambda0) << "\n"
            << "gamma: " << (s.gamma ? fmt17(*s.gamma) : std::string("none")) << "\n"
            << "truncation_size: " << s.support.size() << "\n"
            << "leakage: " << fmt17(s.leakage) << "\n"
            << "written: " << path.string() << "\n";
  return 0;
}

int cmd_fv(const config::ConfigDocument& doc) {
  if (!doc.fv) throw ConfigError(doc.source + ": fv: missing section");
  const auto& spec = *doc.fv;
  const auto built = config::build_model(doc.model);
  const State x0 = spec.initial ? config::make_state(built, *spec.initial) : built.reference_states.front();
  FvInitOptions init;
  init.min_particles = zoo::min_particles(built.certificate);
  auto ensemble = fv_init(built.model, spec.particles, std::vector<State>(spec.particles, x0), doc.runtime.seed, init);
  const auto snapshots = fv_run(ensemble, spec.horizon, spec.observation_times);

  const int d = built.model.dimension();
  std::string text = "# toolkit=qsdfv " QSD_VERSION "\n# seed=" + std::to_string(doc.runtime.seed) +
                     "\n# model_digest=" + hex64(fnv1a64(built.model.description())) +
                     "\n# config_digest=" + doc.digest + "\ntime,particle";
  for (int i = 1; i <= d; ++i) text += ",x" + std::to_string(i);
  text += "\n";
  for (const auto& snap : snapshots) {
    const auto& atoms = snap.measure.atoms();
    for (std::size_t p = 0; p < atoms.size(); ++p) {
      text += fmt17(snap.time) + "," + std::to_string(p);
      const RealPoint c = atoms[p].coordinates();
      for (int i = 0; i < d; ++i) text += "," + fmt17(c[i]);
      text += "\n";
    }
  }
  const auto dir = output_dir(doc);
  write_file(dir / "fv_snapshots.csv", text);
  const std::string summary = "particles,horizon,snapshots,rebirth_count\n" + std::to_string(spec.particles) + "," +
                              fmt17(spec.horizon) + "," + std::to_string(snapshots.size()) + "," +
                              std::to_string(ensemble.rebirth_count()) + "\n";
  write_file(dir / "fv_summary.csv", summary);
  std::cout << "rebirth_count: " << ensemble.rebirth_count() << "\n"
            << "snapshots: " << snapshots.size() << "\n"
            << "written: " << (dir / "fv_snapshots.csv").string() << "\n";
  return 0;
}

int cmd_experiment(const config::ConfigDocument& doc) {
  if (!doc.experiment) throw ConfigError(doc.source + ": experiment: missing section");
  const auto built = config::build_model(doc.model);
  const auto table = config::run_experiment(doc, built, {doc.runtime.seed, doc.runtime.threads});
  const auto dir = output_dir(doc);
  const auto& kind = doc.experiment->kind;
  if (doc.runtime.format != "json") harness::emit(table, harness::Format::kCsv, dir / (kind + ".csv"));
  if (doc.runtime.format != "csv") harness::emit(table, harness::Format::kJson, dir / (kind + ".json"));

  bool pass = true;
  for (const char* q : {"pass", "decreasing"}) {
    for (const auto* r : table.select(q)) {
      std::cout << q << " [" << r->params << "]: " << (r->estimate == 1.0 ? "PASS" : "FAIL") << "\n";
      pass = pass && r->estimate == 1.0;
    }
  }
  std::cout << "records: " << table.records.size() << "\nwritten: " << (dir / kind).string() << ".*\n";
  return pass ? 0 : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fleming-Viot particle systems and quasi-stationary distribution oracles"};
  app.require_subcommand(1);
  Options opt;
  auto add_flags = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "Config document (YAML)")->required();
    sub->add_option("--seed", opt.seed, "Master seed, overrides runtime.seed");
    sub->add_option("--threads", opt.threads, "Worker threads, overrides runtime.threads");
    sub->add_option("--out", opt.out, "Output directory, overrides runtime.out");
  };
  auto* check = app.add_subcommand("check", "Build the model and verify its drift certificate");
  auto* qsd_cmd = app.add_subcommand("qsd", "Solve the truncated QSD and write its table");
  auto* fv = app.add_subcommand("fv", "Run a Fleming-Viot system and write snapshots");
  auto* experiment = app.add_subcommand("experiment", "Run the configured experiment and write result tables");
  for (auto* sub : {check, qsd_cmd, fv, experiment}) add_flags(sub);
  CLI11_PARSE(app, argc, argv);

  try {
    const auto doc = load(opt);
    if (*check) return cmd_check(doc);
    if (*qsd_cmd) return cmd_qsd(doc);
    if (*fv) return cmd_fv(doc);
    return cmd_experiment(doc);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ConvergenceError& e) {
    std::cerr << "not converged: " << e.what() << "\n";
    return kExitFail;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFail;
  }
}
