#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "qsd/empirical.hpp"
#include "qsd/parallel.hpp"
#include "qsd/process.hpp"
#include "qsd/random.hpp"
#include "test_models.hpp"

namespace qsd {
namespace {

TEST(RandomStream, SameKeySameSequence) {
  RandomStream a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(RandomStream, SplitIsPureAndDistinct) {
  RandomStream root(7);
  const auto before = root.counter();
  RandomStream c1 = root.split(1), c1_again = root.split(1), c2 = root.split(2);
  EXPECT_EQ(root.counter(), before);
  EXPECT_TRUE(c1 == c1_again);
  std::set<std::uint64_t> firsts;
  for (std::uint64_t i = 0; i < 1000; ++i) firsts.insert(root.split(i)());
  EXPECT_EQ(firsts.size(), 1000u);
  EXPECT_NE(c1(), c2());
}

TEST(RandomStream, ForReplicaMatchesSplit) {
  EXPECT_TRUE(RandomStream::for_replica(9, 3) == RandomStream(9).split(3));
}

TEST(RandomStream, MomentsOfStandardDraws) {
  RandomStream rng(123);
  const int n = 200000;
  double su = 0, se = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    se += rng.exponential();
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  // Four standard errors of each sample mean.
  EXPECT_NEAR(su / n, 0.5, 4 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(se / n, 1.0, 4 * std::sqrt(1.0 / n));
  EXPECT_NEAR(sn / n, 0.0, 4 * std::sqrt(1.0 / n));
  EXPECT_NEAR(sn2 / n, 1.0, 4 * std::sqrt(2.0 / n));
}

TEST(RandomStream, BelowIsUniform) {
  RandomStream rng(5);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto k = rng.below(7);
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  double chi2 = 0;
  for (int c : counts) chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
  EXPECT_LT(chi2, 22.46);  // 0.999 quantile of chi^2 with 6 degrees of freedom
}

TEST(RandomStream, ShuffleIsPermutation) {
  RandomStream rng(1);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  shuffle(w.begin(), w.end(), rng);
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}

TEST(ParallelFor, ResultIndependentOfThreads) {
  auto run = [](unsigned threads) {
    std::vector<double> slots(1000);
    parallel_for(slots.size(), threads, [&](std::size_t i) { slots[i] = RandomStream(3).split(i).uniform(); });
    return slots;
  };
  const auto one = run(1);
  EXPECT_EQ(one, run(2));
  EXPECT_EQ(one, run(7));
}

TEST(ParallelFor, RethrowsLowestFailingBlock) {
  try {
    parallel_for(100, 4, [](std::size_t i) {
      if (i == 30 || i == 80) throw std::runtime_error("block " + std::to_string(i));
    });
    FAIL() << "no exception";
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "block 30");
  }
}

TEST(State, KindsAndEquality) {
  const State a(lattice({1, 2})), b(lattice({1, 2})), c(real_point({1.0, 2.0}));
  EXPECT_TRUE(a.is_lattice());
  EXPECT_FALSE(c.is_lattice());
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a == c);
  EXPECT_EQ(StateHash{}(a), StateHash{}(b));
  EXPECT_THROW((void)a.real(), ModelError);
  EXPECT_EQ(a.coordinates(), c.coordinates());
}

TEST(KilledModel, RejectsStatesOutsideE) {
  const KilledModel m(testing::reflected_walk(1, 2), KillingRate::constant(0.5));
  EXPECT_NO_THROW(m.require_in_state_space(State(lattice({1}))));
  EXPECT_THROW(m.require_in_state_space(State(lattice({0}))), ModelError);
  EXPECT_THROW(m.require_in_state_space(State(real_point({1.0}))), ModelError);
}

TEST(KillingRate, RejectsValuesAboveTheBound) {
  const KillingRate k([](const State&) { return 2.0; }, 1.0);
  EXPECT_THROW((void)k(State(lattice({1}))), ModelError);
  EXPECT_THROW(KillingRate::constant(-1.0), ModelError);
}

TEST(Gillespie, HoldingTimeMeanIsInverseTotalRate) {
  const auto walk = testing::reflected_walk(1.0, 2.0);
  RandomStream rng(11);
  const int n = 100000;
  double sum = 0;
  int ups = 0;
  for (int i = 0; i < n; ++i) {
    auto step = sample_holding_and_jump(walk, lattice({4}), rng);
    sum += step.holding_time;
    ups += step.next[0] == 5;
  }
  EXPECT_NEAR(sum / n, 1.0 / 3.0, 4 * (1.0 / 3.0) / std::sqrt(n));
  EXPECT_NEAR(ups / double(n), 1.0 / 3.0, 4 * std::sqrt(2.0 / 9.0 / n));
}

TEST(Gillespie, AbsorbingStateNeverJumps) {
  JumpDynamics stuck;
  stuck.enumerate_jumps = [](const LatticePoint&, std::vector<Jump>& out) { out.clear(); };
  RandomStream rng(1);
  auto step = sample_holding_and_jump(stuck, lattice({1}), rng);
  EXPECT_TRUE(std::isinf(step.holding_time));
}

TEST(SimulateKilled, ConstantKillingSurvivalIsExponential) {
  // With kappa = c everywhere, P(t < tau) = exp(-c t) whatever the jumps do.
  const double c = 0.3, t = 2.0;
  const KilledModel m(testing::reflected_walk(1, 2), KillingRate::constant(c));
  const RandomStream root(99);
  const int n = 20000;
  int alive = 0;
  for (int r = 0; r < n; ++r) {
    RandomStream rng = root.split(r);
    alive += simulate_killed(m, State(lattice({2})), t, rng, PathRecording::kEndpoints).alive();
  }
  const double p = std::exp(-c * t);
  EXPECT_NEAR(alive / double(n), p, 4 * std::sqrt(p * (1 - p) / n));
}

TEST(SimulateKilled, TwoStateSurvivalMatchesMatrixExponential) {
  // Independent oracle: P_1(t < tau) = e_1^T exp(A t) 1 from the 2x2 eigen-decomposition.
  const double a = 1.0, b = 0.5, k1 = 0.2, k2 = 1.0, t = 1.5;
  const double a11 = -(a + k1), a12 = a, a21 = b, a22 = -(b + k2);
  const double tr = a11 + a22, det = a11 * a22 - a12 * a21;
  const double l1 = tr / 2 + std::sqrt(tr * tr / 4 - det), l2 = tr / 2 - std::sqrt(tr * tr / 4 - det);
  // exp(At) = (e^{l1 t}(A - l2 I) - e^{l2 t}(A - l1 I)) / (l1 - l2); apply to 1 and read row 1.
  const double row1_a_minus = a11 + a12;
  const double expected =
      (std::exp(l1 * t) * (row1_a_minus - l2) - std::exp(l2 * t) * (row1_a_minus - l1)) / (l1 - l2);
  const auto m = testing::two_state(a, b, k1, k2);
  const int n = 40000;
  int alive = 0;
  for (int r = 0; r < n; ++r) {
    RandomStream rng = RandomStream(5).split(r);
    alive += simulate_killed(m, State(lattice({1})), t, rng, PathRecording::kEndpoints).alive();
  }
  EXPECT_NEAR(alive / double(n), expected, 4 * std::sqrt(expected * (1 - expected) / n));
}

TEST(SimulateKilled, KillingIsMonotoneInKappa) {
  // Same stream: the path is drawn independently of kappa, so a larger kappa kills no later.
  const auto walk = testing::reflected_walk(1.0, 1.5);
  const KilledModel low(walk, KillingRate([](const State& s) { return 0.1 + 0.05 * (s.lattice()[0] % 3); }, 0.2));
  const KilledModel high(walk, KillingRate([](const State& s) { return 0.3 + 0.1 * (s.lattice()[0] % 2); }, 0.4));
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    RandomStream r1(seed), r2(seed);
    const auto a = simulate_killed(low, State(lattice({3})), 40.0, r1, PathRecording::kEndpoints);
    const auto b = simulate_killed(high, State(lattice({3})), 40.0, r2, PathRecording::kEndpoints);
    const double ta = a.kill_time.value_or(INFINITY), tb = b.kill_time.value_or(INFINITY);
    ASSERT_LE(tb, ta) << "seed " << seed;
  }
}

TEST(SimulateKilled, FullPathIsConsistent) {
  const KilledModel m(testing::reflected_walk(1, 2), KillingRate::zero());
  RandomStream rng(17);
  const auto traj = simulate_killed(m, State(lattice({2})), 30.0, rng);
  ASSERT_TRUE(traj.alive());
  ASSERT_GE(traj.path.size(), 10u);
  EXPECT_EQ(traj.path.back().time, 30.0);
  EXPECT_EQ(traj.path.front().time, 0.0);
  for (std::size_t i = 1; i < traj.path.size(); ++i) {
    EXPECT_GE(traj.path[i].time, traj.path[i - 1].time);
    EXPECT_TRUE(m.contains(traj.path[i].state));
  }
}

TEST(SimulateKilled, EulerMeanOfOrnsteinUhlenbeck) {
  // E X_{nh} = (1 - k h)^n x0 for the Euler scheme of dX = -k X dt + s dW.
  const double k = 1.0, h = 0.01, x0 = 2.0, t = 1.0;
  const KilledModel m(testing::ornstein_uhlenbeck(1, k, 1.0, h), KillingRate::zero());
  const int n = 20000;
  double sum = 0, sum2 = 0;
  for (int r = 0; r < n; ++r) {
    RandomStream rng = RandomStream(8).split(r);
    const double x = simulate_killed(m, State(real_point({x0})), t, rng, PathRecording::kEndpoints)
                         .final_state()
                         .real()[0];
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n, sd = std::sqrt(sum2 / n - mean * mean);
  EXPECT_NEAR(mean, std::pow(1 - k * h, 100) * x0, 4 * sd / std::sqrt(n));
}

TEST(SimulateKilled, DiffusionKillingProbabilityPerStep) {
  const double c = 0.5, t = 2.0;
  const KilledModel m(testing::ornstein_uhlenbeck(1, 1.0, 1.0, 0.01), KillingRate::constant(c));
  const int n = 20000;
  int alive = 0;
  for (int r = 0; r < n; ++r) {
    RandomStream rng = RandomStream(4).split(r);
    alive += simulate_killed(m, State(real_point({0.0})), t, rng, PathRecording::kEndpoints).alive();
  }
  const double p = std::exp(-c * t);  // per-step survival e^{-ch} compounds exactly
  EXPECT_NEAR(alive / double(n), p, 4 * std::sqrt(p * (1 - p) / n));
}

TEST(ConditionalLaw, ThreadCountDoesNotMatter) {
  const auto m = testing::two_state(1.0, 0.5, 0.2, 1.0);
  const auto law = InitialLaw::dirac(State(lattice({1})));
  const auto a = conditional_law_estimate(m, law, 3.0, 5000, RandomStream(1), 1);
  const auto b = conditional_law_estimate(m, law, 3.0, 5000, RandomStream(1), 3);
  EXPECT_EQ(a.survivor_count, b.survivor_count);
  EXPECT_EQ(a.survivors.atoms(), b.survivors.atoms());
}

TEST(ConditionalLaw, AllKilledIsDegenerate) {
  const KilledModel m(testing::reflected_walk(1, 2), KillingRate::constant(50.0));
  const auto est =
      conditional_law_estimate(m, InitialLaw::dirac(State(lattice({1}))), 5.0, 100, RandomStream(1));
  EXPECT_TRUE(est.degenerate());
}

TEST(InitialLaw, DiscreteWeights) {
  const auto law = InitialLaw::discrete({State(lattice({1})), State(lattice({2}))}, {0.25, 0.75});
  RandomStream rng(3);
  int twos = 0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) twos += law.sample(rng).lattice()[0] == 2;
  EXPECT_NEAR(twos / double(n), 0.75, 4 * std::sqrt(0.75 * 0.25 / n));
  EXPECT_THROW(InitialLaw::discrete({State(lattice({1}))}, {-1.0}), ModelError);
}

TEST(Empirical, PoolAndIntegral) {
  const EmpiricalMeasure a({State(lattice({1})), State(lattice({3}))});
  const EmpiricalMeasure b({State(lattice({5})), State(lattice({7}))});
  const auto p = pool({a, b});
  EXPECT_EQ(p.size(), 4u);
  EXPECT_DOUBLE_EQ(empirical_integral(p, [](const State& s) { return double(s.lattice()[0]); }), 4.0);
  EXPECT_DOUBLE_EQ(p.total_mass(), 1.0);
}

}  // namespace
}  // namespace qsd
