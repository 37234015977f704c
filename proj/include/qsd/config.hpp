#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qsd/harness/experiments.hpp"
#include "qsd/oracle/truncation.hpp"
#include "qsd/zoo/families.hpp"

namespace qsd::config {

using ModelParams = std::variant<zoo::BirthDeathParams, zoo::GaltonWatsonParams, zoo::MultiTypeGWParams,
                                 zoo::DiffusionParams>;

struct ModelSpec {
  std::string family;
  ModelParams params;
};

struct OracleSpec {
  oracle::TruncationPolicy policy;
  bool policy_from_config = false;
  std::size_t diffusion_cells = 800;
};

struct FvSpec {
  std::size_t particles = 0;
  double horizon = 0.0;
  std::vector<double> observation_times;
  std::optional<std::vector<double>> initial;
};

struct FunctionSpec {
  std::string kind = "indicator_le";  // indicator_le | constant | first_coordinate
  double value = 3.0;
};

struct ExperimentSpec {
  std::string kind;
  std::vector<double> times;
  std::optional<std::vector<double>> initial;
  std::optional<std::size_t> replicas;
  std::vector<std::int64_t> x0;
  std::size_t particles = 0;
  std::vector<std::size_t> n_grid;
  std::optional<double> burn_in;
  std::optional<double> sample_gap;
  double horizon = 0.0;
  double sample_dt = 1.0;
  std::size_t samples = 40;
  std::size_t batches = 20;
  FunctionSpec function;
};

struct RuntimeSpec {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string out = ".";
  std::string format = "csv";  // csv | json | both
};

struct ConfigDocument {
  std::string source;
  ModelSpec model;
  OracleSpec oracle;
  std::optional<FvSpec> fv;
  std::optional<ExperimentSpec> experiment;
  RuntimeSpec runtime;
  /// FNV-1a digest of the model, oracle, fv and experiment sections (runtime knobs excluded).
  std::string digest;
};

/// Parses a YAML document. Invalid documents raise ConfigError whose message
/// starts with "source:line:column: key.path".
ConfigDocument parse_config(const std::string& text, const std::string& source = "<config>");
ConfigDocument load_config(const std::filesystem::path& path);

zoo::BuiltModel build_model(const ModelSpec& spec);

/// Coordinates converted to a state of the model's kind; throws ModelError outside E.
State make_state(const zoo::BuiltModel& built, const std::vector<double>& coordinates);

harness::TestFunction make_function(const FunctionSpec& spec);

/// Runs the configured experiment; the table carries the config digest.
harness::ResultTable run_experiment(const ConfigDocument& doc, const zoo::BuiltModel& built,
                                    const harness::RunContext& ctx);

}  // namespace qsd::config
