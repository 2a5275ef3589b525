#include <gtest/gtest.h>

#include <random>

#include "mfe/core.hpp"
#include "support/oracles.hpp"

using namespace mfe;

namespace {

DiscreteDomain unit_square(double h) { return build_domain(DomainSpec::rectangle(1, 1, h)); }

Field random_field(const DiscreteDomain& d, std::uint64_t seed, double amp) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-amp, amp);
  return Field::from_function(d, [&](Point) { return U(rng); });
}

Field liouville_field(const DiscreteDomain& d, double delta) {
  return Field::from_function(d, [&](Point p) { return oracle::liouville_u(delta, std::hypot(p.x, p.y)); });
}

}  // namespace

TEST(Params, TauFormConversion) {
  const Params p = convert_tau_form(0.5, 10.0, 0.3);
  EXPECT_DOUBLE_EQ(p.lambda, 5.0);
  EXPECT_DOUBLE_EQ(p.sigma, 1.0);
  EXPECT_DOUBLE_EQ(p.gamma, 0.3);
  const TauForm t = to_tau_form(p);
  EXPECT_DOUBLE_EQ(t.tau, 0.5);
  EXPECT_DOUBLE_EQ(t.lambda_tilde, 10.0);
  EXPECT_EQ(convert_tau_form(1.0, 7.0).sigma, 0.0);
  EXPECT_THROW(convert_tau_form(0.0, 1.0), ValidationError);
}

TEST(Params, Validation) {
  EXPECT_TRUE(check_params({1, 0.5, -1.0}).empty());
  auto v = check_params({1, 0.5, 1.2});
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], "gamma out of [-1,1)");
  EXPECT_EQ(check_params({1, 0.5, 1.0}).size(), 1u);
  EXPECT_EQ(check_params({-1, -0.5, 0.0}).size(), 2u);
  EXPECT_THROW(require_valid({1, 0, 2}), ValidationError);
}

TEST(Density, NormalizedAndOverflowSafe) {
  const auto d = unit_square(1.0 / 32);
  for (double amp : {1.0, 50.0, 800.0}) {
    Field u = random_field(d, 7, amp);
    u[d.size() / 3] = amp;
    for (double alpha : {1.0, 0.3, -0.4, -1.0}) {
      const Field r = density(u, alpha);
      ASSERT_TRUE(r.all_finite()) << amp << " " << alpha;
      EXPECT_NEAR(integrate(r), 1.0, 1e-12);
      EXPECT_TRUE(std::isfinite(log_partition(u, alpha)));
    }
  }
  // e^{800} overflows a double; the shifted form must not.
  Field spike(d);
  spike[d.size() / 2] = 800.0;
  const Field r = density(spike, 1.0);
  EXPECT_NEAR(r[d.size() / 2] * d.weights()[0], 1.0, 1e-12);
  EXPECT_NEAR(log_partition(spike, 1.0), 800.0 + std::log(d.weights()[0]), 1e-9);
}

TEST(Density, ConstantFieldIsUniform) {
  const auto d = build_domain(DomainSpec::rectangle_with_hole(3, 2, {1, 0.75, 2, 1.25}, 1.0 / 16));
  const Field r = density(Field(d), 0.7);
  EXPECT_NEAR(r.values().maxCoeff(), 1.0 / d.area(), 1e-14);
  EXPECT_NEAR(r.values().minCoeff(), 1.0 / d.area(), 1e-14);
  EXPECT_NEAR(log_partition(Field(d), 1.0), std::log(d.area()), 1e-14);
}

TEST(Residual, ZeroFieldExamples) {
  const auto d = unit_square(1.0 / 16);
  EXPECT_EQ(residual(Field(d), {0, 0.5, 0.3}).sup_norm(), 0.0);
  const Params p{2.0, 0.5, -0.4};
  const Field F = residual(Field(d), p);
  const double expect = -p.lambda * (1.0 + p.sigma * p.gamma) / d.area();
  EXPECT_NEAR(F.values().maxCoeff(), expect, 1e-13);
  EXPECT_NEAR(F.values().minCoeff(), expect, 1e-13);
}

TEST(Residual, WrappersMatchTheGeneralForm) {
  const auto d = unit_square(1.0 / 16);
  const Field u = random_field(d, 3, 2.0);
  EXPECT_LE((standard_mfe_residual(u, 5.0).values() - residual(u, {5.0, 0.0, 0.0}).values()).cwiseAbs().maxCoeff(),
            1e-13);
  EXPECT_LE((sinh_poisson_residual(u, 5.0, 0.7).values() - residual(u, {5.0, 0.7, -1.0}).values())
                .cwiseAbs()
                .maxCoeff(),
            1e-13);
}

TEST(Residual, LiouvilleProfileIsSecondOrder) {
  const double delta = 1.0, lam = oracle::liouville_lambda(delta);
  std::vector<double> err;
  for (double h : {1.0 / 32, 1.0 / 64, 1.0 / 128}) {
    const auto d = build_domain(DomainSpec::disk(1, true, h));
    err.push_back(standard_mfe_residual(liouville_field(d, delta), lam).sup_norm());
  }
  EXPECT_GT(err[0] / err[1], 3.5);
  EXPECT_GT(err[1] / err[2], 3.5);
  EXPECT_LT(err[2], 1e-2);
}

TEST(Jacobian, MatchesFiniteDifferences) {
  const auto d = build_domain(DomainSpec::rectangle_with_hole(3, 2, {1, 0.75, 2, 1.25}, 0.25));
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> lam(0.5, 40.0), sig(0.0, 2.0), gam(-1.0, 0.99);
  for (int rep = 0; rep < 4; ++rep) {
    const Params p{lam(rng), sig(rng), gam(rng)};
    const Field u = random_field(d, 100 + rep, 3.0);
    const Eigen::MatrixXd fd = oracle::jacobian_fd(u, p);
    const Eigen::MatrixXd dense = oracle::jacobian_dense(u, p);
    Eigen::MatrixXd applied(fd.rows(), fd.cols());
    for (Eigen::Index k = 0; k < fd.cols(); ++k) {
      Field e(d);
      e.values()[k] = 1.0;
      applied.col(k) = jacobian_apply(u, p, e).values();
    }
    EXPECT_LE((applied - fd).norm() / fd.norm(), 1e-6) << "rep " << rep;
    EXPECT_LE((applied - dense).norm() / dense.norm(), 1e-12) << "rep " << rep;
  }
}

TEST(Residual, ReductionsAreReproducible) {
  const auto d = unit_square(1.0 / 64);
  const Field u = random_field(d, 9, 4.0);
  const Params p{20.0, 0.5, 0.3};
  const Field a = residual(u, p), b = residual(u, p);
  EXPECT_EQ(a.values(), b.values());
  EXPECT_EQ(log_partition(u, 0.3), log_partition(u, 0.3));
}

TEST(Newton, AgreesWithPicardAtSmallLambda) {
  const auto d = unit_square(1.0 / 32);
  const Params p{1.0, 0.5, 0.3};
  const auto res = newton_solve(Field(d), p);
  ASSERT_TRUE(res.report.converged) << res.report.message;
  EXPECT_LE(res.report.iterations, 6);
  const Field pic = oracle::picard(Field(d), p);
  EXPECT_LE((res.u.values() - pic.values()).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE(residual(res.u, p).sup_norm(), 1e-9);
}

TEST(Newton, ZeroLambdaGivesZero) {
  const auto d = unit_square(1.0 / 32);
  const auto res = newton_solve(Field(d), {0.0, 0.5, 0.3});
  ASSERT_TRUE(res.report.converged);
  EXPECT_EQ(res.report.iterations, 0);
  EXPECT_EQ(res.u.sup_norm(), 0.0);
}

TEST(Newton, DiskFromTheExactProfile) {
  const double delta = 3.0;
  const auto d = build_domain(DomainSpec::disk(1, true, 1.0 / 256));
  const auto res = newton_solve(liouville_field(d, delta), {oracle::liouville_lambda(delta), 0.0, 0.0});
  ASSERT_TRUE(res.report.converged) << res.report.message;
  EXPECT_LE(res.report.iterations, 3);
  EXPECT_NEAR(res.u[0], oracle::liouville_u(delta, 0.0), 1e-2 * oracle::liouville_u(delta, 0.0));
}

TEST(Newton, PositivityAndSymmetry) {
  const auto d = unit_square(1.0 / 32);
  const Params p{15.0, 0.5, 0.3};
  const auto res = newton_solve(Field(d), p);
  ASSERT_TRUE(res.report.converged);
  EXPECT_GT(res.u.values().minCoeff(), 0.0);
  double asym = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    const auto [i, j] = d.lattice_index(k);
    for (long m : {d.index_at(d.nx() - 1 - i, j), d.index_at(j, i)})
      asym = std::max(asym, std::abs(res.u[k] - res.u[static_cast<std::size_t>(m)]));
  }
  EXPECT_LE(asym, 1e-10);
}

TEST(Newton, RejectsBadInput) {
  const auto d = unit_square(1.0 / 16);
  EXPECT_THROW(newton_solve(Field(d), {1, 0, 1.5}), ValidationError);
  Field bad(d);
  bad[0] = std::nan("");
  EXPECT_THROW(newton_solve(bad, {1, 0, 0}), ValidationError);
}

TEST(Newton, HeightPinnedSolveHitsTheHeight) {
  const auto d = build_domain(DomainSpec::disk(1, true, 1.0 / 128));
  const double target = oracle::liouville_u(10.0, 0.0);
  const auto res = solve_at_height(liouville_field(d, 3.0), oracle::liouville_lambda(3.0), {0, 0, 0}, 0, target);
  ASSERT_TRUE(res.report.converged) << res.report.message;
  EXPECT_NEAR(res.u[0], target, 1e-9);
  EXPECT_NEAR(res.lambda, oracle::liouville_lambda(10.0), 0.01 * oracle::liouville_lambda(10.0));
}

TEST(Splitting, ReconstructsNegativeGammaSolutions) {
  const auto d = build_domain(DomainSpec::rectangle_with_hole(3, 2, {1.5, 0.75, 2.5, 1.25}, 1.0 / 16));
  const Params p{20.0, 0.5, -0.4};
  const auto res = newton_solve(Field(d), p);
  ASSERT_TRUE(res.report.converged);
  const Splitting s = split_solution(res.u, p);
  EXPECT_LE(s.reconstruction_error, 1e-9);
  EXPECT_GT(s.u_minus.values().minCoeff(), 0.0);
  EXPECT_LE(s.weight_h.values().maxCoeff(), 1.0);
  EXPECT_EQ(s.weight_h.trace(), 1.0);
  EXPECT_THROW(split_solution(res.u, {20.0, 0.5, 0.3}), ValidationError);
}
