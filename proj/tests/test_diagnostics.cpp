#include <gtest/gtest.h>

#include <random>

#include "mfe/core.hpp"
#include "mfe/diagnostics.hpp"
#include "support/oracles.hpp"

using namespace mfe;

namespace {

Field liouville_field(const DiscreteDomain& d, double delta) {
  return Field::from_function(d, [&](Point p) { return oracle::liouville_u(delta, std::hypot(p.x, p.y)); });
}

// lambda * mu(B(0,R)) for the Liouville profile on the unit disk.
double liouville_ball_mass(double delta, double R) { return k8Pi * delta * R * R / (1.0 + delta * R * R); }

Field bump(const DiscreteDomain& d, Point c, double height, double width) {
  return Field::from_function(d, [&](Point p) {
    const double r2 = (p.x - c.x) * (p.x - c.x) + (p.y - c.y) * (p.y - c.y);
    return height * std::exp(-r2 / (width * width));
  });
}

}  // namespace

TEST(Thresholds, ReferenceValues) {
  const Thresholds t = thresholds(0.3, 1.0);
  EXPECT_NEAR(t.sigma_gamma, 0.4 / 0.18, 1e-12);
  EXPECT_NEAR(t.lambda_bar, 4 * kPi / 0.39, 1e-12);
  EXPECT_NEAR(t.lambda_bar, 32.221, 1e-3);
  ASSERT_EQ(t.candidates.size(), 3u);
  EXPECT_NEAR(t.candidates[1], k8Pi / 0.09, 1e-9);
  EXPECT_NEAR(t.candidates[2], k8Pi * 2.0 / (1.3 * 1.3), 1e-12);
  EXPECT_DOUBLE_EQ(t.lambda_bar_P_scaled, k8Pi);
  EXPECT_TRUE(t.admissible);
  EXPECT_DOUBLE_EQ(t.window[0], k8Pi);
  EXPECT_DOUBLE_EQ(t.window[1], t.lambda_bar);

  const Thresholds neg = thresholds(-0.4, 0.5);
  EXPECT_EQ(neg.candidates.size(), 2u);
  EXPECT_NEAR(neg.lambda_bar, 4 * kPi / (0.4 * 1.2), 1e-12);

  const Thresholds big = thresholds(0.6, 0.5);
  EXPECT_TRUE(std::isnan(big.sigma_gamma));
  EXPECT_FALSE(big.admissible);
  EXPECT_FALSE(thresholds(0.3, 0.0).admissible);
  EXPECT_NEAR(thresholds(0.0, 2.0).lambda_bar, 16 * kPi, 1e-12);
  EXPECT_THROW(thresholds(1.5, 0.1), ValidationError);
  EXPECT_THROW(thresholds(0.2, -1.0), ValidationError);
}

TEST(Thresholds, SecondBoundEqualsEightPiAtTheCriticalSigma) {
  for (double g : {0.05, 0.2, 0.3, 0.45, -0.1, -0.35}) {
    const double sg = (1 - 2 * std::abs(g)) / (2 * g * g);
    EXPECT_NEAR(thresholds(g, sg).sigma_gamma, sg, 1e-12);
    EXPECT_NEAR(4 * kPi / (std::abs(g) * (1 + std::abs(g) * sg)), k8Pi, 1e-12);
    EXPECT_FALSE(thresholds(g, sg).admissible);
    EXPECT_TRUE(thresholds(g, 0.999 * sg).admissible);
  }
}

TEST(Thresholds, NearHalfGamma) {
  const Thresholds t = thresholds(0.49, 0.02);
  EXPECT_NEAR(t.sigma_gamma, 0.02 / (2 * 0.49 * 0.49), 1e-12);
  EXPECT_TRUE(t.admissible);
  EXPECT_GT(t.lambda_bar, k8Pi);
  EXPECT_DOUBLE_EQ(t.lambda_bar_P_scaled, k8Pi);
}

TEST(Thresholds, AdmissibleMeansWindowAboveEightPi) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> G(-0.5, 0.5), U(0, 1);
  int admissible = 0;
  for (int n = 0; n < 2000; ++n) {
    const double g = G(rng);
    if (g == 0.0) continue;
    const double sg = (1 - 2 * std::abs(g)) / (2 * g * g);
    const Thresholds t = thresholds(g, U(rng) * sg);
    if (!t.admissible) continue;
    ++admissible;
    EXPECT_DOUBLE_EQ(t.lambda_bar_P_scaled, k8Pi);
    EXPECT_GT(t.lambda_bar, k8Pi);
  }
  EXPECT_GT(admissible, 1000);
}

TEST(EpsilonInterval, Endpoints) {
  const auto e = epsilon_interval({10.0, 0.5, 0.3});
  EXPECT_NEAR(e[0], 10.0 * 0.045 / k8Pi, 1e-15);
  EXPECT_NEAR(e[1], 1.0 - 10.0 / (16 * kPi), 1e-15);
  // Empty exactly when lambda (1 + 2 sigma gamma^2) >= 16 pi.
  const double lam = 16 * kPi / (1 + 2 * 0.5 * 0.09);
  const auto edge = epsilon_interval({lam, 0.5, 0.3});
  EXPECT_NEAR(edge[0], edge[1], 1e-14);
  const auto open = epsilon_interval({0.99 * lam, 0.5, 0.3});
  EXPECT_LT(open[0], open[1]);
}

TEST(Peaks, SingleCentredPeak) {
  for (bool radial : {true, false}) {
    const auto d = build_domain(DomainSpec::disk(1, radial, 1.0 / 64));
    const Field u = liouville_field(d, 100.0);
    const PeakSet s = find_peaks(u, default_peak_cutoff(u));
    ASSERT_EQ(s.size(), 1u) << radial;
    EXPECT_NEAR(distance(s[0].location, {0, 0}), 0.0, 1e-12);
    EXPECT_FALSE(s[0].negative);
    EXPECT_NEAR(s[0].radius, 0.25, 1e-12);
  }
}

TEST(Peaks, TwoPeaksAndAMinimum) {
  const auto d = build_domain(DomainSpec::rectangle(2, 1, 1.0 / 32));
  Field u = bump(d, {0.5, 0.5}, 12, 0.05);
  u += bump(d, {1.5, 0.5}, 10, 0.05);
  u += bump(d, {1.0, 0.25}, -8, 0.05);
  const PeakSet s = find_peaks(u, 5.0);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_NEAR(s[0].location.x, 0.5, 1e-12);
  EXPECT_NEAR(s[1].location.x, 1.5, 1e-12);
  EXPECT_TRUE(s[2].negative);
  EXPECT_NEAR(s[2].height, -8, 1e-9);
  // Quarter of the distance to the boundary (0.25/4) beats the separation rule.
  EXPECT_NEAR(s[2].radius, 0.0625, 1e-12);
  EXPECT_NEAR(s[0].radius, 0.125, 1e-12);
  EXPECT_TRUE(find_peaks(u, 20.0).empty());
}

TEST(LocalMass, LiouvilleBall) {
  const double delta = 10.0, lam = oracle::liouville_lambda(delta);
  const Params p{lam, 0, 0};
  const auto rad = build_domain(DomainSpec::disk(1, true, 1.0 / 512));
  const Field ur = liouville_field(rad, delta);
  EXPECT_NEAR(local_mass(ur, p, {0, 0}, 0.3, 1.0), liouville_ball_mass(delta, 0.3), 0.02 * liouville_ball_mass(delta, 0.3));
  EXPECT_NEAR(local_mass(ur, p, {0, 0}, 2.5, 1.0), lam, 1e-9 * lam);

  const auto mask = build_domain(DomainSpec::disk(1, false, 1.0 / 128));
  const Field um = liouville_field(mask, delta);
  EXPECT_NEAR(local_mass(um, p, {0, 0}, 0.3, 1.0), liouville_ball_mass(delta, 0.3), 0.02 * liouville_ball_mass(delta, 0.3));
  // Off-centre ball: the radial and masked representations agree.
  const double a = local_mass(ur, p, {0.5, 0}, 0.3, 1.0), b = local_mass(um, p, {0.5, 0}, 0.3, 1.0);
  EXPECT_NEAR(a, b, 0.03 * a);
  EXPECT_LT(a, 0.5 * liouville_ball_mass(delta, 0.3));
}

TEST(LocalMass, RejectsSubGridRadii) {
  const auto d = build_domain(DomainSpec::rectangle(1, 1, 1.0 / 32));
  EXPECT_THROW(local_mass(Field(d), {1, 0, 0}, {0.5, 0.5}, 1.0 / 32, 1.0), ValidationError);
  EXPECT_NO_THROW(local_mass(Field(d), {1, 0, 0}, {0.5, 0.5}, 2.0 / 32, 1.0));
}

TEST(LocalMass, DisjointBallsNeverExceedLambda) {
  const auto d = build_domain(DomainSpec::rectangle(1, 1, 1.0 / 32));
  const Params p{20.0, 0.5, 0.3};
  const auto sol = newton_solve(Field(d), p);
  ASSERT_TRUE(sol.report.converged);
  double total = 0.0;
  for (double x : {0.125, 0.375, 0.625, 0.875})
    for (double y : {0.125, 0.375, 0.625, 0.875}) total += local_mass(sol.u, p, {x, y}, 0.125, 1.0);
  EXPECT_LE(total, p.lambda + 1e-8);
  EXPECT_GT(total, 0.5 * p.lambda);
}

TEST(Quantization, IdentityResidual) {
  EXPECT_NEAR(quadratic_identity_residual(k8Pi, 0.0, 0.0, 0.0), 0.0, 1e-10);
  EXPECT_NEAR(quadratic_identity_residual(4 * kPi, 0.0, 0.0, 0.0), 16 * kPi * kPi, 1e-10);
  EXPECT_NEAR(quadratic_identity_residual(k8Pi, 1.0, 0.5, 0.3), k8Pi * 0.5 - (0.15 * 0.15 + 2 * k8Pi * 0.15), 1e-10);
}

TEST(Quantization, Verdicts) {
  Peak pk;
  pk.location = {0.5, 0.5};
  pk.mass_1 = 1.02 * k8Pi;
  pk.mass_gamma = 0.5;
  const Params p{0.97 * k8Pi, 0.5, 0.3};
  auto r = quantization_check({pk}, p, 14.0, true);
  EXPECT_EQ(r.verdict, Verdict::pass);
  EXPECT_EQ(r.nearest_k, 1);
  EXPECT_NEAR(r.peaks[0].gamma_share, 0.075 / (1.02 * k8Pi), 1e-14);
  EXPECT_EQ(std::string(to_string(r.verdict)), "PASS");
  EXPECT_EQ(quantization_check({pk}, p, 14.0, false).verdict, Verdict::inconclusive);
  EXPECT_EQ(quantization_check({}, p, 14.0, true).verdict, Verdict::inconclusive);
  pk.mass_1 = 0.9 * k8Pi;
  EXPECT_EQ(quantization_check({pk}, p, 14.0, true).verdict, Verdict::fail);
  pk.mass_1 = k8Pi;
  pk.mass_gamma = 20.0;
  EXPECT_EQ(quantization_check({pk}, p, 14.0, true).verdict, Verdict::fail);
}

TEST(CenterOfMass, SymmetricFields) {
  const auto d = build_domain(DomainSpec::rectangle(1, 1, 1.0 / 32));
  const Point c = center_of_mass(bump(d, {0.5, 0.5}, 5, 0.2));
  EXPECT_NEAR(c.x, 0.5, 1e-12);
  EXPECT_NEAR(c.y, 0.5, 1e-12);
  const Point off = center_of_mass(bump(d, {0.25, 0.5}, 30, 0.03));
  EXPECT_NEAR(off.x, 0.25, 1e-3);
  const auto rad = build_domain(DomainSpec::disk(1, true, 1.0 / 32));
  const Point o = center_of_mass(liouville_field(rad, 3));
  EXPECT_EQ(o.x, 0.0);
  EXPECT_EQ(o.y, 0.0);
}

TEST(Concentration, ExamplesAndMonotonicity) {
  const auto d = build_domain(DomainSpec::rectangle(1, 1, 1.0 / 64));
  const std::vector<double> radii{0.05, 0.1, 0.2, 0.4, 0.8, 1.5};
  const auto flat = concentration_function(Field(d), radii);
  EXPECT_NEAR(flat[1], kPi * 0.01, 0.1 * kPi * 0.01);
  EXPECT_EQ(flat.back(), 1.0);
  const auto peaked = concentration_function(bump(d, {0.5, 0.5}, 40, 0.03), radii);
  EXPECT_GT(peaked[0], 0.99);
  for (const auto* q : {&flat, &peaked})
    for (std::size_t a = 1; a < q->size(); ++a) EXPECT_GE((*q)[a], (*q)[a - 1]);
  for (double v : peaked) EXPECT_LE(v, 1.0);
  EXPECT_THROW(concentration_function(Field(d), {0.2, 0.1}), ValidationError);
  EXPECT_THROW(concentration_function(Field(d), {0.0}), ValidationError);
}

TEST(Peaks, BoundaryDistance) {
  const auto d = build_domain(DomainSpec::rectangle(1, 1, 1.0 / 32));
  EXPECT_TRUE(std::isnan(boundary_distance_of_peaks({}, d)));
  const PeakSet s = find_peaks(bump(d, {0.25, 0.5}, 12, 0.05), 5.0);
  EXPECT_NEAR(boundary_distance_of_peaks(s, d), 0.25, 1e-12);
}
