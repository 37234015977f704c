#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "qsd/random.hpp"
#include "qsd/zoo/certificate.hpp"
#include "qsd/zoo/families.hpp"
#include "qsd/zoo/perron.hpp"

namespace qsd::zoo {
namespace {

const CriterionReport& criterion(const BuiltModel& b, const std::string& needle) {
  for (const auto& c : b.criteria) {
    if (c.name.find(needle) != std::string::npos) return c;
  }
  throw std::runtime_error("no criterion matching " + needle);
}

MultiTypeGWParams two_type_example() {
  MultiTypeGWParams p;
  p.rates = {1, 1};
  p.alpha = 4;
  p.offspring = {{{{0, 0}, 0.6}, {{0, 2}, 0.4}}, {{{0, 0}, 0.6}, {{2, 0}, 0.4}}};
  return p;
}

// ---------------------------------------------------------------- perron

TEST(Perron, TwoByTwoClosedForm) {
  DenseMatrix<double> q(2, 2);
  q << -1, 0.8, 0.8, -1;
  const auto pp = perron(q);
  EXPECT_NEAR(pp.rho, -0.2, 1e-12);
  EXPECT_NEAR(pp.v[0], 0.5, 1e-12);
  EXPECT_NEAR(pp.v[1], 0.5, 1e-12);

  q << -2, 1, 3, -0.5;
  const double expected = (-2 - 0.5) / 2 + std::sqrt(std::pow((-2 + 0.5) / 2, 2) + 3.0);
  EXPECT_NEAR(perron(q).rho, expected, 1e-11);
}

TEST(Perron, RandomIrreducibleMatricesAgreeWithDenseSolver) {
  RandomStream rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    const int d = 2 + static_cast<int>(rng.below(5));
    DenseMatrix<double> q(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) q(i, j) = i == j ? -3 * rng.uniform() : 0.05 + rng.uniform();
    }
    const auto pp = perron(q);
    Eigen::EigenSolver<Eigen::MatrixXd> es(q, false);
    const double top = es.eigenvalues().real().maxCoeff();
    EXPECT_NEAR(pp.rho, top, 1e-10);
    EXPECT_NEAR(pp.v.sum(), 1.0, 1e-14);
    EXPECT_GT(pp.v.minCoeff(), 0.0);
    const Eigen::VectorXd res = q * pp.v - pp.rho * pp.v;
    EXPECT_LT(res.lpNorm<Eigen::Infinity>() / pp.v.lpNorm<Eigen::Infinity>(), 1e-10);
  }
}

TEST(Perron, LongDoubleScalar) {
  DenseMatrix<long double> q(2, 2);
  q << -1, 0.8L, 0.8L, -1;
  EXPECT_NEAR(static_cast<double>(perron<long double>(q, 1e-16L).rho), -0.2, 1e-15);
}

TEST(Perron, RejectsInvalidMatrices) {
  DenseMatrix<double> reducible(2, 2);
  reducible << -1, 1, 0, -1;
  EXPECT_THROW(perron(reducible), ModelError);
  DenseMatrix<double> negative(2, 2);
  negative << -1, -0.1, 1, -1;
  EXPECT_THROW(perron(negative), ModelError);
  EXPECT_THROW(perron(DenseMatrix<double>(2, 3)), ModelError);
}

// ---------------------------------------------------------------- min_particles

TEST(MinParticles, Examples) {
  EXPECT_EQ(min_particles(0.7, 0.6), 8u);
  EXPECT_EQ(min_particles(1.0, 0.0), 2u);
  EXPECT_EQ(min_particles(2.0, 1.0), 3u);  // N = 2 gives equality 2 = 1 * 2 / 1
  EXPECT_THROW(min_particles(0.5, 0.6), ModelError);
}

TEST(MinParticles, IsTheSmallestValidN) {
  RandomStream rng(77);
  for (int trial = 0; trial < 2000; ++trial) {
    const double kappa = 2 * rng.uniform();
    const double lambda1 = kappa + 0.01 + rng.uniform();
    const std::size_t n = min_particles(lambda1, kappa);
    auto valid = [&](std::size_t m) { return m >= 2 && lambda1 > kappa * double(m) / double(m - 1); };
    ASSERT_TRUE(valid(n)) << lambda1 << " " << kappa;
    if (n > 2) ASSERT_FALSE(valid(n - 1)) << lambda1 << " " << kappa;
  }
}

// ---------------------------------------------------------------- Galton-Watson

TEST(GaltonWatson, DefaultCertificate) {
  const auto b = build_gw({{0.6, 0.0, 0.4}, 4.0});
  EXPECT_NEAR(b.certificate.kappa_sup, 0.6, 1e-15);
  EXPECT_NEAR(b.certificate.asymptotic_rate, 0.8, 1e-12);  // alpha (1 - m)
  EXPECT_NEAR(b.certificate.lambda1, 0.7, 1e-12);
  EXPECT_EQ(min_particles(b.certificate), 8u);
  EXPECT_EQ(drift_check(b.model, b.certificate).verdict, Verdict::kPass);
}

TEST(GaltonWatson, GeneratorActionByHand) {
  const auto b = build_gw({{0.6, 0.0, 0.4}, 4.0});
  const auto V = [](const State& s) { return std::pow(double(s.lattice()[0]), 4); };
  // x = 3: 1.2 (4^4 - 3^4) + 1.8 (2^4 - 3^4) = 93. x = 1: the death goes to the cemetery.
  EXPECT_NEAR(jump_generator_action(b.model, V, State(lattice({3}))), 93.0, 1e-12);
  EXPECT_NEAR(jump_generator_action(b.model, V, State(lattice({1}))), 6.0, 1e-12);
}

TEST(GaltonWatson, ValidationMessages) {
  try {
    build_gw({{0.2, 0.4, 0.4}, 4.0});
    FAIL();
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("m >= 1"), std::string::npos);
  }
  EXPECT_THROW(build_gw({{0.0, 0.5, 0.5}, 4.0}), ModelError);  // p(0) = 0
  EXPECT_THROW(build_gw({{0.6, 0.4}, 4.0}), ModelError);       // no branching
  EXPECT_THROW(build_gw({{0.6, 0.0, 0.5}, 4.0}), ModelError);  // sums to 1.1
  EXPECT_THROW(build_gw({{0.6, 0.0, 0.4}, 2.0}), ModelError);  // alpha <= p0 / (1 - m) = 3
}

TEST(GaltonWatson, DriftCheckDetectsWrongConstants) {
  auto b = build_gw({{0.6, 0.0, 0.4}, 4.0});
  auto cert = b.certificate;
  cert.C = 1.0;
  const auto v = drift_check(b.model, cert);
  EXPECT_EQ(v.verdict, Verdict::kFail);
  EXPECT_GT(v.max_slack, 0.0);
  cert = b.certificate;
  cert.lambda1 = 0.5;  // below kappa_sup
  EXPECT_THROW(drift_check(b.model, cert), ModelError);
}

// ---------------------------------------------------------------- birth-death

TEST(BirthDeath, LinearCriterionGivesNormCertificate) {
  for (int d : {1, 2, 3}) {
    for (double c : {0.5, 2.0}) {
      for (double k : {0.5, 1.0}) {
        const auto b = build_bd(BirthDeathParams::affine_power(d, {c, 0, 0}, {0, k, 2}));
        ASSERT_EQ(criterion(b, "(1/|x|)").verdict, Verdict::kPass);
        EXPECT_EQ(b.certificate.family, "V(x) = |x|");
        EXPECT_EQ(drift_check(b.model, b.certificate).verdict, Verdict::kPass) << d << " " << c << " " << k;
      }
    }
  }
}

TEST(BirthDeath, ProportionalRatesUseTheRatioCriterion) {
  // b = x, d = 2x: (1/|x|)(d - b) -> 1, so the linear criterion is inconclusive; d/b = 2 > 1.
  const auto b = build_bd(BirthDeathParams::affine_power(1, {0, 1, 1}, {0, 2, 1}));
  EXPECT_EQ(criterion(b, "(1/|x|)").verdict, Verdict::kInconclusive);
  EXPECT_EQ(criterion(b, "delta").verdict, Verdict::kPass);
  EXPECT_NE(b.certificate.family.find("exp"), std::string::npos);
  EXPECT_EQ(drift_check(b.model, b.certificate).verdict, Verdict::kPass);
}

TEST(BirthDeath, ConstantRatesCertificate) {
  // Neither criterion holds, but (sqrt d - sqrt b)^2 = 0.1716 > d1 = 0.15 allows V = exp(eps x), eps = ln sqrt 2.
  const auto b = build_bd(BirthDeathParams::constant(1, 2, 1, 0.15));
  EXPECT_EQ(criterion(b, "(1/|x|)").verdict, Verdict::kInconclusive);
  EXPECT_EQ(criterion(b, "delta").verdict, Verdict::kInconclusive);
  EXPECT_NEAR(b.certificate.asymptotic_rate, 3 - 2 * std::sqrt(2.0), 1e-6);
  EXPECT_EQ(drift_check(b.model, b.certificate).verdict, Verdict::kPass);
  EXPECT_EQ(min_particles(b.certificate), 15u);
}

TEST(BirthDeath, ConstantRatesWithTooMuchKillingAreRefused) {
  EXPECT_THROW(build_bd(BirthDeathParams::constant(1, 2, 1, 0.2)), ModelError);
}

TEST(BirthDeath, KillingOnlyAtUnitVectors) {
  const auto b = build_bd(BirthDeathParams::affine_power(2, {1, 0, 0}, {0, 1, 1}));
  EXPECT_EQ(b.model.killing()(State(lattice({1, 0}))), 1.0);
  EXPECT_EQ(b.model.killing()(State(lattice({1, 1}))), 0.0);
  EXPECT_FALSE(b.model.contains(State(lattice({0, 0}))));
  EXPECT_EQ(b.certificate.kappa_sup, 1.0);
}

TEST(BirthDeath, NonPositiveBirthRateIsRefused) {
  EXPECT_THROW(build_bd(BirthDeathParams::affine_power(1, {0, 0, 0}, {0, 1, 1})), ModelError);
}

TEST(Shells, DivergenceHeuristic) {
  const auto norm = [](const LatticePoint& x) { return double(x.sum()); };
  const auto flat = [](const LatticePoint&) { return 1.0; };
  EXPECT_EQ(diverges_on_shells("norm", 2, 256, norm).verdict, Verdict::kPass);
  EXPECT_EQ(diverges_on_shells("flat", 2, 256, flat).verdict, Verdict::kInconclusive);
}

// ---------------------------------------------------------------- multi-type

TEST(MultiType, ExampleCertificate) {
  const auto b = build_mtgw(two_type_example());
  EXPECT_NEAR(b.certificate.asymptotic_rate, 0.8, 1e-9);  // alpha (-rho)
  EXPECT_EQ(drift_check(b.model, b.certificate).verdict, Verdict::kPass);
  EXPECT_EQ(min_particles(b.certificate), 8u);
  EXPECT_EQ(criterion(b, "Perron").verdict, Verdict::kPass);
}

TEST(MultiType, Refusals) {
  auto p = two_type_example();
  p.alpha = 2.0;
  EXPECT_THROW(build_mtgw(p), ModelError);
  p = two_type_example();
  p.offspring[0][1].probability = 0.1;  // no longer sums to 1
  EXPECT_THROW(build_mtgw(p), ModelError);
  p = two_type_example();
  p.offspring = {{{{0, 0}, 0.2}, {{0, 2}, 0.8}}, {{{0, 0}, 0.2}, {{2, 0}, 0.8}}};  // rho = 0.6
  EXPECT_THROW(build_mtgw(p), ModelError);
}

// ---------------------------------------------------------------- diffusion

TEST(Diffusion, DefaultCertificate) {
  const auto b = build_diffusion(DiffusionParams::linear(1, 1, 1, 0.1, 0, 1, 1, 0.2, 0.01));
  EXPECT_EQ(drift_check(b.model, b.certificate).verdict, Verdict::kPass);
  EXPECT_GT(b.certificate.lambda1, 0.1);
  EXPECT_EQ(min_particles(b.certificate), 7u);
  ASSERT_TRUE(b.oracle_interval);
}

TEST(Diffusion, AnalyticGeneratorMatchesFiniteDifferences) {
  for (int d : {1, 2, 3}) {
    const auto b = build_diffusion(DiffusionParams::linear(d, 1.3, 0.8, 0.05, 0.05, 1, 1, 0.2, 0.01));
    const auto& V = b.certificate.V;
    const auto& dyn = b.model.diffusion();
    RandomStream rng(d);
    for (int k = 0; k < 10; ++k) {
      RealPoint x(d);
      for (int i = 0; i < d; ++i) x[i] = 4 * rng.normal();
      const double h = 1e-3;
      const RealPoint drift = dyn.drift(x);
      const DispersionMatrix s = dyn.dispersion(x);
      const Eigen::MatrixXd a = s * s.transpose();
      double lv = 0;
      for (int i = 0; i < d; ++i) {
        RealPoint xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        lv += drift[i] * (V(State(xp)) - V(State(xm))) / (2 * h);
        for (int j = 0; j < d; ++j) {
          auto shifted = [&](double si, double sj) {
            RealPoint y = x;
            y[i] += si;
            y[j] += sj;
            return V(State(y));
          };
          const double dij = (shifted(h, h) - shifted(h, -h) - shifted(-h, h) + shifted(-h, -h)) / (4 * h * h);
          lv += 0.5 * a(i, j) * dij;
        }
      }
      const double analytic = b.certificate.LV(State(x));
      EXPECT_NEAR(analytic, lv, 1e-5 * (1 + std::abs(lv))) << "d = " << d << " x = " << State(x).to_string();
    }
  }
}

TEST(Diffusion, Refusals) {
  // beta^2 = 0.04 <= 2 gamma kappa = 0.2.
  EXPECT_THROW(build_diffusion(DiffusionParams::linear(1, 1, 1, 0.1, 0, 0.2, 1, 0.2, 0.01)), ModelError);
  // rho too large: rho^2 gamma / 2 + kappa >= beta rho.
  EXPECT_THROW(build_diffusion(DiffusionParams::linear(1, 1, 1, 0.1, 0, 1, 1, 1.9, 0.01)), ModelError);
  // Declared beta larger than the actual inward drift.
  EXPECT_THROW(build_diffusion(DiffusionParams::linear(1, 0.01, 1, 0.1, 0, 1, 1, 0.2, 0.01)), ModelError);
}

TEST(Diffusion, TwoDimensionalBumpKilling) {
  const auto b = build_diffusion(DiffusionParams::linear(2, 1, 1, 0.05, 0.05, 1, 1, 0.2, 0.01));
  EXPECT_NEAR(b.model.killing()(State(real_point({0.0, 0.0}))), 0.1, 1e-15);
  EXPECT_NEAR(b.certificate.kappa_sup, 0.1, 1e-15);
  EXPECT_EQ(drift_check(b.model, b.certificate).verdict, Verdict::kPass);
}

// ---------------------------------------------------------------- lattice helpers

TEST(Lattice, BallSizesAndOrder) {
  const auto ball = lattice_ball(2, 3);
  // |x|_1 <= 3 in Z_+^2 without the origin: 10 - 1 points.
  EXPECT_EQ(ball.size(), 9u);
  for (std::size_t i = 1; i < ball.size(); ++i) {
    EXPECT_LE(ball[i - 1].lattice().sum(), ball[i].lattice().sum());
  }
  EXPECT_GE(lattice_radius_for(1, 100), 99);
}

}  // namespace
}  // namespace qsd::zoo
