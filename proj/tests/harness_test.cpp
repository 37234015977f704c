#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>

#include "qsd/harness/experiments.hpp"
#include "qsd/harness/results.hpp"
#include "qsd/oracle/uniformization.hpp"
#include "qsd/zoo/families.hpp"

namespace qsd::harness {
namespace {

zoo::BuiltModel gw() { return zoo::build_gw({{0.6, 0.0, 0.4}, 4.0}); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ResultTable sample_table() {
  ResultTable t;
  t.toolkit_version = "9.9.9";
  t.seed = 18446744073709551615ull;
  t.model_digest = "0123456789abcdef";
  t.config_digest = "fedcba9876543210";
  t.add("exp", "q1", Params()("N", 100)("t", 0.1), 1.0 / 3.0, 1e-17, "replica", 0.1 + 0.2);
  t.add("exp", "q2", Params()("f", "ind_le(3)"), -2.5e-300, 0.0, "exact");
  t.add("exp", "q3", "", 12345678901234.5, 7.0, "batch-means", std::nullopt);
  return t;
}

TEST(Statistics, LinearFitExact) {
  const auto fit = linear_fit({0, 1, 2, 3}, {1, 3, 5, 7});
  EXPECT_DOUBLE_EQ(fit.slope, 2.0);
  EXPECT_DOUBLE_EQ(fit.intercept, 1.0);
  EXPECT_DOUBLE_EQ(fit.slope_se, 0.0);
  EXPECT_THROW(linear_fit({1}, {1}), ModelError);
  EXPECT_THROW(linear_fit({1, 1}, {1, 2}), ModelError);
}

TEST(Statistics, LinearFitStandardError) {
  // y = (0, 1, 1, 3) on x = (0, 1, 2, 3): slope 0.9, residuals (0.1, 0.2, -0.7, 0.4), rss 0.7.
  const auto fit = linear_fit({0, 1, 2, 3}, {0, 1, 1, 3});
  EXPECT_NEAR(fit.slope, 0.9, 1e-15);
  EXPECT_NEAR(fit.intercept, -0.1, 1e-15);
  EXPECT_NEAR(fit.slope_se, std::sqrt(0.7 / 2 / 5), 1e-15);
}

TEST(Statistics, BatchMeans) {
  std::vector<double> v;
  for (int i = 1; i <= 40; ++i) v.push_back(i);
  const auto [mean, se] = batch_means(v, 4);
  EXPECT_DOUBLE_EQ(mean, 20.5);
  EXPECT_NEAR(se, std::sqrt(500.0 / 3 / 4), 1e-12);
  EXPECT_EQ(batch_means({5.0}, 20).second, 0.0);
}

TEST(Statistics, ReplicaMean) {
  const auto [mean, se] = replica_mean({1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(mean, 2.5);
  EXPECT_NEAR(se, std::sqrt(5.0 / 3 / 4), 1e-15);
}

TEST(Seeds, DeriveSeedIsPureAndSpreads) {
  EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 50; ++a) {
    for (std::uint64_t b = 0; b < 50; ++b) seen.insert(derive_seed(7, {a, b}));
  }
  EXPECT_EQ(seen.size(), 2500u);
  EXPECT_NE(derive_seed(1, {0}), derive_seed(2, {0}));
}

TEST(Results, ParamsRejectsDelimiters) {
  EXPECT_EQ(Params()("N", 5)("t", 0.5).str(), "N=5;t=0.5");
  EXPECT_THROW(Params()("a=b", 1), Error);
  EXPECT_THROW(Params()("a", "x;y"), Error);
  EXPECT_THROW(Params()("a", "x,y"), Error);
  EXPECT_THROW(Params()("a", "q\""), Error);
}

TEST(Results, AddRejectsInvalidNumbers) {
  ResultTable t;
  EXPECT_THROW(t.add("e", "q", "", 1.0, -1.0, "exact"), Error);
  EXPECT_THROW(t.add("e", "q", "", std::numeric_limits<double>::quiet_NaN(), 0.0, "exact"), Error);
}

TEST(Results, CsvRoundTripIsExact) {
  const auto t = sample_table();
  const auto back = parse_csv(to_csv(t));
  EXPECT_EQ(back, t);
  EXPECT_EQ(to_csv(back), to_csv(t));
}

TEST(Results, JsonRoundTripIsExact) {
  const auto t = sample_table();
  const auto back = parse_json(to_json(t));
  EXPECT_EQ(back, t);
  EXPECT_EQ(to_json(back), to_json(t));
}

TEST(Results, EmitIsDeterministic) {
  const auto dir = std::filesystem::temp_directory_path() / "qsd-harness-emit";
  std::filesystem::create_directories(dir);
  const auto t = sample_table();
  emit(t, Format::kCsv, dir / "a.csv");
  emit(t, Format::kCsv, dir / "b.csv");
  emit(t, Format::kJson, dir / "a.json");
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  EXPECT_EQ(parse_json(slurp(dir / "a.json")), t);
  EXPECT_THROW(emit(t, Format::kCsv, dir / "missing" / "x.csv"), Error);
  std::filesystem::remove_all(dir);
}

TEST(Results, CsvHeaderCarriesProvenance) {
  const auto csv = to_csv(sample_table());
  EXPECT_EQ(csv.rfind("# toolkit=qsdfv 9.9.9\n", 0), 0u);
  EXPECT_NE(csv.find("# config_digest=fedcba9876543210\n"), std::string::npos);
  EXPECT_NE(csv.find("experiment,quantity,params,estimate,std_error,se_method,reference,seed\n"), std::string::npos);
}

TEST(Experiments, DecayMatchesClosedForm) {
  const auto built = gw();
  const auto orc = solve_model_qsd(built);
  const auto mu0 = oracle::dirac<double>(orc.generator.support, State(lattice({1})));
  DecayOptions opt;
  opt.times = {0, 5, 10, 15, 20, 25, 30};
  const auto r = run_conditional_decay(built, orc, mu0, opt, {1, 1});
  ASSERT_EQ(r.tv.size(), 7u);
  EXPECT_NEAR(r.tv[0], 2.0 / 3.0, 1e-8);  // delta_1 against nu(1) = 1/3
  for (std::size_t k = 1; k < r.tv.size(); ++k) EXPECT_LT(r.tv[k], r.tv[k - 1]);
  ASSERT_TRUE(r.gamma_oracle);
  // The late-time slope approaches the spectral gap.
  EXPECT_NEAR(r.gamma_hat, *r.gamma_oracle, 0.2 * *r.gamma_oracle);
}

TEST(Experiments, DecayMonteCarloModeAgreesWithOracle) {
  const auto built = gw();
  const auto orc = solve_model_qsd(built);
  const auto mu0 = oracle::dirac<double>(orc.generator.support, State(lattice({1})));
  DecayOptions opt;
  opt.times = {1, 3};
  opt.replicas = 40000;
  const auto mc = run_conditional_decay(built, orc, mu0, opt, {5, 2});
  opt.replicas.reset();
  const auto exact = run_conditional_decay(built, orc, mu0, opt, {5, 1});
  for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(mc.tv[k], exact.tv[k], 0.02);
  const auto surv = mc.table.select("survival_fraction");
  ASSERT_EQ(surv.size(), 2u);
  const auto exact_surv = exact.table.select("survival_probability");
  const double p = exact_surv[0]->estimate;
  EXPECT_NEAR(surv[0]->estimate, p, 5 * std::sqrt(p * (1 - p) / 40000));
}

TEST(Experiments, MartingaleSmallRunAndThreadInvariance) {
  const auto built = gw();
  MartingaleOptions opt{{1, 5}, {0, 1, 3}, 4000};
  const auto a = run_martingale_check(built, opt, {11, 1});
  const auto b = run_martingale_check(built, opt, {11, 4});
  EXPECT_EQ(to_csv(a.table), to_csv(b.table));
  for (const auto& row : a.rows) {
    if (row.t == 0) {
      EXPECT_EQ(row.estimate, double(row.x0));
      EXPECT_EQ(row.std_error, 0.0);
    } else {
      EXPECT_NEAR(row.estimate, double(row.x0), 5 * row.std_error);
    }
  }
}

TEST(Experiments, MartingaleRefusesOtherFamilies) {
  const auto bd = zoo::build_bd(zoo::BirthDeathParams::constant(1, 2, 1, 0.15));
  EXPECT_THROW(run_martingale_check(bd, {{1}, {1}, 10}, {1, 1}), ModelError);
}

TEST(Experiments, MomentBoundRefusesTooFewParticles) {
  MomentOptions opt;
  opt.n = 7;
  try {
    run_moment_bound(gw(), opt, {1, 1});
    FAIL();
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("8"), std::string::npos);
  }
}

TEST(Experiments, MomentBoundHolds) {
  MomentOptions opt;
  opt.n = 20;
  opt.horizon = 200;
  const auto r = run_moment_bound(gw(), opt, {3, 1});
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.bound, r.table.select("stationary_bound")[0]->estimate, 0.0);
  // C / (lambda1 - kappa N / (N - 1)) with lambda1 = 0.7, kappa = 0.6.
  const auto& c = gw().certificate;
  EXPECT_NEAR(r.bound, c.C / (0.7 - 0.6 * 20.0 / 19.0), 1e-9 * r.bound);
}

TEST(Experiments, ConvergenceProxyModeWithoutOracle) {
  ConvergenceOptions opt;
  opt.n_grid = {10, 20};
  opt.samples = 10;
  opt.burn_in = 20;
  opt.sample_gap = 5;
  opt.batches = 5;
  const auto r = run_qsd_convergence(gw(), nullptr, opt, {1, 2});
  EXPECT_TRUE(r.proxy);
  EXPECT_EQ(r.rows.size(), 2u);
  EXPECT_FALSE(r.alpha_theory);
}

TEST(Experiments, ChaosThreadInvariance) {
  const auto built = gw();
  const auto orc = solve_model_qsd(built);
  ChaosOptions opt;
  opt.n_grid = {20, 40};
  opt.times = {1, 2};
  opt.replicas = 50;
  const auto a = run_unconditioned_vs_fv(built, orc, opt, {9, 1});
  const auto b = run_unconditioned_vs_fv(built, orc, opt, {9, 3});
  EXPECT_EQ(to_json(a.table), to_json(b.table));
  EXPECT_EQ(a.rows.size(), 4u);
  EXPECT_GT(a.d0, 0.0);
}

TEST(TestFunctions, Definitions) {
  const auto ind = TestFunction::indicator_le(3);
  EXPECT_EQ(ind.f(State(lattice({3}))), 1.0);
  EXPECT_EQ(ind.f(State(lattice({4}))), 0.0);
  EXPECT_EQ(ind.sup, 1.0);
  EXPECT_EQ(TestFunction::first_coordinate().f(State(real_point({2.5}))), 2.5);
  EXPECT_EQ(TestFunction::constant(2).f(State(lattice({9}))), 2.0);
}

}  // namespace
}  // namespace qsd::harness
