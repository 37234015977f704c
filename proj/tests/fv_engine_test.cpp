#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

#include "qsd/fleming_viot.hpp"
#include "qsd/log.hpp"
#include "test_models.hpp"

namespace qsd {
namespace {

bool same(const State& a, const State& b) {
  if (a.is_lattice() != b.is_lattice()) return false;
  if (a.is_lattice()) return (a.lattice().array() == b.lattice().array()).all();
  return (a.real().array() == b.real().array()).all();
}

TEST(FlemingViot, RefusesFewerThanTwoParticles) {
  const KilledModel m(testing::reflected_walk(1, 2), KillingRate::constant(0.1));
  EXPECT_THROW(fv_init(m, 1, std::vector<State>{State(lattice({1}))}, 1), ModelError);
  EXPECT_THROW(fv_init(m, 0, std::vector<State>{}, 1), ModelError);
  EXPECT_THROW(fv_init(m, 3, std::vector<State>(2, State(lattice({1}))), 1), ModelError);
}

TEST(FlemingViot, RejectsInitialStatesOutsideE) {
  const KilledModel m(testing::reflected_walk(1, 2), KillingRate::constant(0.1));
  EXPECT_THROW(fv_init(m, 2, std::vector<State>(2, State(lattice({0}))), 1), ModelError);
}

class ZeroKilling : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(ZeroKilling, JumpEnsembleEqualsIndependentRuns) {
  const std::uint64_t seed = GetParam();
  const KilledModel m(testing::reflected_walk(1.0, 1.3), KillingRate::zero());
  const std::size_t n = 20;
  auto ens = fv_init(m, n, std::vector<State>(n, State(lattice({2}))), seed);
  ens.advance_to(25.0);
  EXPECT_EQ(ens.rebirth_count(), 0u);
  for (std::size_t i = 0; i < n; ++i) {
    RandomStream rng = RandomStream::for_replica(seed, i);
    const auto path = simulate_killed(m, State(lattice({2})), 25.0, rng, PathRecording::kEndpoints);
    ASSERT_TRUE(same(path.final_state(), ens.positions()[i])) << "particle " << i;
  }
}

TEST_P(ZeroKilling, DiffusionEnsembleEqualsIndependentRuns) {
  const std::uint64_t seed = GetParam();
  const KilledModel m(testing::ornstein_uhlenbeck(2, 1.0, 0.7, 0.01), KillingRate::zero());
  const std::size_t n = 10;
  const State x0(real_point({0.5, -0.25}));
  auto ens = fv_init(m, n, std::vector<State>(n, x0), seed);
  ens.advance_to(2.0);
  EXPECT_EQ(ens.rebirth_count(), 0u);
  for (std::size_t i = 0; i < n; ++i) {
    RandomStream rng = RandomStream::for_replica(seed, i);
    const auto path = simulate_killed(m, x0, 2.0, rng, PathRecording::kEndpoints);
    ASSERT_TRUE(same(path.final_state(), ens.positions()[i])) << "particle " << i;
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, ZeroKilling, ::testing::Values(0u, 1u, 42u, 1234567u));

TEST(FlemingViot, SameSeedSameRun) {
  const auto m = testing::two_state(1.0, 0.5, 0.2, 1.0);
  auto a = fv_init(m, 30, std::vector<State>(30, State(lattice({1}))), 5);
  auto b = fv_init(m, 30, std::vector<State>(30, State(lattice({1}))), 5);
  auto c = fv_init(m, 30, std::vector<State>(30, State(lattice({1}))), 6);
  a.advance_to(10.0);
  b.advance(4.0);
  b.advance(6.0);
  c.advance_to(10.0);
  EXPECT_EQ(a.positions(), b.positions());
  EXPECT_EQ(a.rebirth_count(), b.rebirth_count());
  EXPECT_NE(a.rebirth_count(), 0u);
  EXPECT_TRUE(a.positions() != c.positions() || a.rebirth_count() != c.rebirth_count());
}

TEST(FlemingViot, ParticlesStayInE) {
  const KilledModel m(testing::reflected_walk(1.0, 2.0),
                      KillingRate([](const State& s) { return s.lattice()[0] == 1 ? 2.0 : 0.0; }, 2.0));
  auto ens = fv_init(m, 50, std::vector<State>(50, State(lattice({1}))), 3);
  for (int k = 1; k <= 20; ++k) {
    ens.advance_to(k);
    for (const auto& x : ens.positions()) ASSERT_TRUE(m.contains(x));
  }
  EXPECT_GT(ens.rebirth_count(), 0u);
}

TEST(FlemingViot, TwoStateStationaryMeasureApproachesQsd) {
  // Independent oracle: left Perron vector of the 2x2 killed generator in closed form.
  const double a = 1.0, b = 0.5, k1 = 0.2, k2 = 1.0;
  const double a11 = -(a + k1), a22 = -(b + k2);
  const double tr = a11 + a22, det = a11 * a22 - a * b;
  const double l1 = tr / 2 + std::sqrt(tr * tr / 4 - det);
  const double ratio = (l1 - a11) / b;  // nu_2 / nu_1
  const double nu1 = 1.0 / (1.0 + ratio);

  const auto m = testing::two_state(a, b, k1, k2);
  const std::size_t n = 400;
  const auto samples = stationary_samples(m, n, State(lattice({1})), 20.0, 2.0, 400, 77);
  double frac = 0;
  for (const auto& s : samples) {
    frac += empirical_integral(s, [](const State& x) { return x.lattice()[0] == 1 ? 1.0 : 0.0; });
  }
  frac /= static_cast<double>(samples.size());
  EXPECT_NEAR(frac, nu1, 0.01);
}

TEST(FlemingViot, RunValidatesObservationTimes) {
  const auto m = testing::two_state(1.0, 0.5, 0.2, 1.0);
  auto ens = fv_init(m, 4, std::vector<State>(4, State(lattice({1}))), 1);
  EXPECT_THROW(fv_run(ens, 5.0, {2.0, 1.0}), ModelError);
  EXPECT_THROW(fv_run(ens, 5.0, {6.0}), ModelError);
  const auto snaps = fv_run(ens, 5.0, {1.0, 3.0});
  ASSERT_EQ(snaps.size(), 2u);
  EXPECT_EQ(snaps[1].time, 3.0);
  EXPECT_EQ(snaps[1].measure.size(), 4u);
  EXPECT_EQ(ens.time(), 5.0);
  EXPECT_THROW(ens.advance_to(4.0), ModelError);
}

TEST(FlemingViot, DiffusionAdvancesInWholeSteps) {
  const KilledModel m(testing::ornstein_uhlenbeck(1, 1.0, 1.0, 0.01), KillingRate::constant(0.1));
  auto ens = fv_init(m, 4, std::vector<State>(4, State(real_point({0.0}))), 1);
  EXPECT_THROW(ens.advance(0.015), ModelError);
  EXPECT_NO_THROW(ens.advance(0.05));
}

TEST(FlemingViot, WarnsBelowCertificateThreshold) {
  std::vector<std::string> seen;
  auto previous = set_warning_handler([&](const std::string& m) { seen.push_back(m); });
  const auto m = testing::two_state(1.0, 0.5, 0.2, 1.0);
  FvInitOptions opt;
  opt.min_particles = 8;
  (void)fv_init(m, 4, std::vector<State>(4, State(lattice({1}))), 1, opt);
  set_warning_handler(previous);
  ASSERT_EQ(seen.size(), 1u);
  EXPECT_NE(seen[0].find("N >= 8"), std::string::npos);
}

TEST(FlemingViot, DiffusionRebirthsHappenAtTheKillingRate) {
  // With constant kappa each particle dies with probability 1 - e^{-kappa h} per step.
  const double kappa = 0.5, h = 0.01, t = 20.0;
  const std::size_t n = 200;
  const KilledModel m(testing::ornstein_uhlenbeck(1, 1.0, 1.0, h), KillingRate::constant(kappa));
  auto ens = fv_init(m, n, std::vector<State>(n, State(real_point({0.0}))), 9);
  ens.advance_to(t);
  const double p = -std::expm1(-kappa * h);
  const double trials = n * t / h;
  EXPECT_NEAR(double(ens.rebirth_count()), trials * p, 4 * std::sqrt(trials * p * (1 - p)));
}

}  // namespace
}  // namespace qsd
