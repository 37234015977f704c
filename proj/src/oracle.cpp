#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "qsd/format.hpp"
#include "qsd/log.hpp"
#include "qsd/oracle/truncation.hpp"
#include "qsd/oracle/uniformization.hpp"

namespace qsd::oracle {

double tv_distance(const EmpiricalMeasure& p, const Support& support, const Vector<double>& q) {
  if (static_cast<std::size_t>(q.size()) != support.size()) throw ModelError("tv_distance: size mismatch");
  if (p.empty()) throw ModelError("tv_distance: empty empirical measure");
  if (std::abs(q.sum() - 1.0) > 1e-9) throw ModelError("tv_distance: reference vector is not normalized");
  Vector<double> diff = -q;
  double outside = 0.0;
  for (const auto& [state, mass] : p.masses()) {
    if (auto idx = support.find(state)) {
      diff[static_cast<Eigen::Index>(*idx)] += mass;
    } else {
      outside += mass;
    }
  }
  return 0.5 * (diff.lpNorm<1>() + outside);
}

double tv_distance(const EmpiricalMeasure& p, const EmpiricalMeasure& q) {
  if (p.empty() || q.empty()) throw ModelError("tv_distance: empty empirical measure");
  auto mp = p.masses();
  for (const auto& [state, mass] : q.masses()) mp[state] -= mass;
  double sum = 0.0;
  for (const auto& kv : mp) sum += std::abs(kv.second);
  return 0.5 * sum;
}

Vector<double> histogram(const EmpiricalMeasure& m, const Support& support) {
  Vector<double> h = Vector<double>::Zero(static_cast<Eigen::Index>(support.size()));
  for (const auto& [state, mass] : m.masses()) {
    if (auto idx = support.find(state)) h[static_cast<Eigen::Index>(*idx)] += mass;
  }
  return h;
}

OracleResult solve_qsd(const KilledModel& model, const std::function<double(const State&)>& lyapunov,
                       const std::vector<State>& seeds, const TruncationPolicy& policy) {
  if (!model.is_jump()) throw ModelError("solve_qsd needs a lattice (jump) model");
  OracleResult result;
  EigenOptions quick = policy.eigen;
  quick.compute_gap = false;

  double v_max = policy.fixed_v_max.value_or(policy.v_max_initial);
  std::optional<double> previous;
  const std::size_t rounds = policy.fixed_v_max ? 1 : policy.max_rounds;
  for (std::size_t round = 0; round < rounds; ++round, v_max *= policy.growth) {
    Support support = level_set_support(model, lyapunov, v_max, seeds, policy.max_states);
    auto gen = build_truncated_generator<double>(model, std::move(support));
    auto sol = leading_eigentriple(gen, quick);
    result.history.emplace_back(v_max, sol.lambda0);
    const bool done = previous && std::abs(sol.lambda0 - *previous) < policy.lambda_tol;
    previous = sol.lambda0;
    result.generator = std::move(gen);
    result.v_max = v_max;
    if (done || policy.fixed_v_max) {
      result.stabilized = done;
      break;
    }
  }
  if (!policy.fixed_v_max && !result.stabilized) {
    warn("decay rate did not stabilize within " + std::to_string(policy.max_rounds) + " truncation rounds");
  }
  result.solution = leading_eigentriple(result.generator, policy.eigen);
  const auto& sol = result.solution;
  if (sol.leakage > 1e-3 * sol.lambda0) {
    warn("truncation {V <= " + fmt17(result.v_max) + "} is too small: QSD leaks " + fmt17(sol.leakage) +
         " through the boundary (max truncation outflow " + fmt17(sol.max_truncation_outflow) + ")");
  }
  return result;
}

void write_qsd_table(std::ostream& out, const QsdSolution<double>& solution) {
  out << "# qsd-table v1\n";
  out << "# lambda0=" << fmt17(solution.lambda0) << '\n';
  out << "# gamma=" << (solution.gamma ? fmt17(*solution.gamma) : std::string("none")) << '\n';
  out << "# residual=" << fmt17(solution.residual) << '\n';
  out << "# truncation_size=" << solution.support.size() << '\n';
  out << "# leakage=" << fmt17(solution.leakage) << '\n';
  const auto d = solution.support.empty() ? 0 : solution.support[0].dimension();
  for (Eigen::Index k = 0; k < d; ++k) out << 'x' << (k + 1) << ',';
  out << "nu,eta\n";
  for (std::size_t i = 0; i < solution.support.size(); ++i) {
    const RealPoint c = solution.support[i].coordinates();
    for (Eigen::Index k = 0; k < c.size(); ++k) out << fmt17(c[k]) << ',';
    const auto ii = static_cast<Eigen::Index>(i);
    out << fmt17(solution.nu[ii]) << ',' << fmt17(solution.eta[ii]) << '\n';
  }
}

QsdTable read_qsd_table(std::istream& in) {
  QsdTable table;
  std::string line;
  bool header_row_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2);
      const std::string value = line.substr(eq + 1);
      if (key == "lambda0") table.header.lambda0 = std::stod(value);
      if (key == "gamma" && value != "none") table.header.gamma = std::stod(value);
      if (key == "residual") table.header.residual = std::stod(value);
      if (key == "truncation_size") table.header.truncation_size = std::stoul(value);
      if (key == "leakage") table.header.leakage = std::stod(value);
      continue;
    }
    if (!header_row_seen) {
      header_row_seen = true;
      continue;
    }
    std::vector<double> fields;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) fields.push_back(std::stod(cell));
    if (fields.size() < 3) throw ModelError("malformed qsd table row: " + line);
    table.eta.push_back(fields.back());
    table.nu.push_back(fields[fields.size() - 2]);
    fields.resize(fields.size() - 2);
    table.coordinates.push_back(std::move(fields));
  }
  return table;
}

}  // namespace qsd::oracle
