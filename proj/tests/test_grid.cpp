#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "mfe/grid.hpp"
#include "support/oracles.hpp"

using namespace mfe;

namespace {

Field random_field(const DiscreteDomain& d, std::uint64_t seed, double amp = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-amp, amp);
  return Field::from_function(d, [&](Point) { return U(rng); });
}

bool mentions(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(Domain, UnitSquareCountsAndArea) {
  const auto d = build_domain(DomainSpec::rectangle(1, 1, 1.0 / 64));
  EXPECT_EQ(d.size(), 63u * 63u);
  EXPECT_NEAR(d.area(), 1.0, 0.02);
  EXPECT_NEAR(d.area(), 1.0, 1e-12);
}

TEST(Domain, WeightSumTracksAreaOnFineGrids) {
  const auto hole = build_domain(DomainSpec::rectangle_with_hole(3, 2, {1, 0.75, 2, 1.25}, 3.0 / 192));
  EXPECT_NEAR(hole.area(), hole.exact_area(), 0.02 * hole.exact_area());
  const auto disk = build_domain(DomainSpec::disk(1, false, 2.0 / 64));
  EXPECT_NEAR(disk.area(), kPi, 0.02 * kPi);
  const auto radial = build_domain(DomainSpec::disk(1, true, 1.0 / 64));
  EXPECT_NEAR(radial.area(), kPi, 1e-12);
}

TEST(Domain, StencilNeighboursNeverLeaveTheClosure) {
  for (const auto& spec : {DomainSpec::rectangle(1, 1, 1.0 / 16),
                           DomainSpec::rectangle_with_hole(3, 2, {1, 0.75, 2, 1.25}, 0.125),
                           DomainSpec::disk(1, false, 1.0 / 16)}) {
    const auto d = build_domain(spec);
    for (std::size_t k = 0; k < d.size(); ++k) {
      const auto [i, j] = d.lattice_index(k);
      for (auto [di, dj] : {std::array<int, 2>{1, 0}, {-1, 0}, {0, 1}, {0, -1}})
        EXPECT_NE(d.kind_at(i + di, j + dj), NodeKind::exterior) << shape_tag(spec) << " node " << k;
    }
  }
}

TEST(Domain, HoleIsABoundedComplementComponent) {
  const auto d = build_domain(DomainSpec::rectangle_with_hole(3, 2, {1, 0.75, 2, 1.25}, 0.125));
  // Lattice points strictly inside the hole are not part of the closure, its rim is boundary.
  const Point o = d.lattice_origin();
  const int ic = static_cast<int>(std::lround((1.5 - o.x) / 0.125)), jc = static_cast<int>(std::lround((1.0 - o.y) / 0.125));
  EXPECT_EQ(d.kind_at(ic, jc), NodeKind::exterior);
  EXPECT_EQ(d.kind_at(static_cast<int>(std::lround(1.0 / 0.125)), jc), NodeKind::boundary);
  EXPECT_EQ(d.kind_at(0, 0), NodeKind::boundary);
  EXPECT_NEAR(d.exact_area(), 6.0 - 0.5, 1e-12);
  EXPECT_LT(d.distance_to_boundary({1.5, 1.0}), 0.0);
  EXPECT_FALSE(d.contains({1.5, 1.0}));
}

TEST(Domain, ValidationNamesTheViolation) {
  auto v = check_domain_spec(DomainSpec::rectangle_with_hole(3, 2, {0, 0.75, 2, 1.25}, 0.125));
  EXPECT_TRUE(mentions(v, "hole")) << (v.empty() ? "" : v.front());
  v = check_domain_spec(DomainSpec::rectangle(1, 1, 0.3));
  EXPECT_TRUE(mentions(v, "width"));
  v = check_domain_spec(DomainSpec::rectangle(1, 1, 0.5));
  EXPECT_TRUE(mentions(v, "too coarse"));
  v = check_domain_spec(DomainSpec::rectangle_with_hole(3, 2, {1.05, 0.75, 2, 1.25}, 0.125));
  EXPECT_TRUE(mentions(v, "grid lines"));
  EXPECT_TRUE(check_domain_spec(DomainSpec::rectangle(1, 1, 1.0 / 8)).empty());
  EXPECT_THROW(build_domain(DomainSpec::rectangle(1, 1, 0.3)), ValidationError);
}

TEST(Laplacian, ZeroAndQuadratic) {
  const auto d = build_domain(DomainSpec::rectangle(1, 1, 1.0 / 32));
  EXPECT_EQ(apply_laplacian(Field(d)).sup_norm(), 0.0);
  const Field q = Field::from_function(d, [](Point p) { return p.x * (1 - p.x); });
  const Field lq = apply_laplacian(q);
  for (std::size_t k = 0; k < d.size(); ++k) {
    const auto [i, j] = d.lattice_index(k);
    if (j >= 2 && j <= d.ny() - 3) {
      EXPECT_NEAR(lq[k], 2.0, 1e-9);
    }
  }
}

TEST(Laplacian, SymmetricPositiveDefinite) {
  for (const auto& spec : {DomainSpec::rectangle(1, 1, 1.0 / 16), DomainSpec::disk(1, true, 1.0 / 32),
                           DomainSpec::rectangle_with_hole(3, 2, {1, 0.75, 2, 1.25}, 0.125)}) {
    const auto d = build_domain(spec);
    for (std::uint64_t s = 0; s < 5; ++s) {
      const Field u = random_field(d, 2 * s), v = random_field(d, 2 * s + 1);
      const double a = inner(apply_laplacian(u), v), b = inner(u, apply_laplacian(v));
      EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, std::abs(a)));
      EXPECT_GT(inner(apply_laplacian(u), u), 0.0);
    }
  }
}

TEST(Poisson, InvertsTheLaplacian) {
  const auto d = build_domain(DomainSpec::rectangle_with_hole(3, 2, {1, 0.75, 2, 1.25}, 1.0 / 16));
  const Field u = random_field(d, 11);
  const Field back = solve_poisson(apply_laplacian(u));
  EXPECT_LE((back.values() - u.values()).norm() / u.values().norm(), 1e-9);
  EXPECT_EQ(solve_poisson(Field(d)).sup_norm(), 0.0);
}

TEST(Poisson, SquareTorsionCentre) {
  const double ref = oracle::square_torsion_centre();
  EXPECT_NEAR(ref, 0.07367, 5e-5);
  const auto d = build_domain(DomainSpec::rectangle(1, 1, 1.0 / 128));
  const Field u = solve_poisson(Field::from_function(d, [](Point) { return 1.0; }));
  const long c = d.index_at(64, 64);
  EXPECT_NEAR(u[static_cast<std::size_t>(c)], ref, 5e-4);
}

TEST(Poisson, DiscreteMaximumPrinciple) {
  const auto d = build_domain(DomainSpec::rectangle_with_hole(3, 2, {1, 0.75, 2, 1.25}, 1.0 / 16));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0, 1);
  for (int rep = 0; rep < 5; ++rep) {
    Field f = Field::from_function(d, [&](Point) { return U(rng) < 0.9 ? 0.0 : U(rng); });
    f[d.size() / 2] = 1.0;
    const Field u = solve_poisson(f);
    EXPECT_GT(u.values().minCoeff(), 0.0);
  }
}

TEST(Poisson, RadialAndMaskedDiskAgree) {
  const double h = 1.0 / 64;
  const auto rad = build_domain(DomainSpec::disk(1, true, h));
  const auto mask = build_domain(DomainSpec::disk(1, false, h));
  const Field ur = solve_poisson(Field::from_function(rad, [](Point) { return 1.0; }));
  const Field um = solve_poisson(Field::from_function(mask, [](Point) { return 1.0; }));
  const double centre_r = ur[0];
  const double centre_m = um.max();
  EXPECT_NEAR(centre_r, 0.25, 1e-3);
  EXPECT_NEAR(centre_m, centre_r, 4 * h);
}

TEST(Quadrature, ConstantsAndIndicators) {
  const auto d = build_domain(DomainSpec::rectangle(1, 1, 1.0 / 64));
  const Field one(d, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d.size())), 1.0);
  EXPECT_NEAR(integrate(one), 1.0, 0.02);
  const Field c(d, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(d.size()), 3.5), 3.5);
  EXPECT_NEAR(integrate(c), 3.5 * d.area(), 1e-12);
  EXPECT_NEAR(integrate_function(d, [](Point p) { return p.x < 0.5 ? 1.0 : 0.0; }), 0.5, 0.02);
  const auto hole = build_domain(DomainSpec::rectangle_with_hole(3, 2, {1, 0.75, 2, 1.25}, 1.0 / 16));
  EXPECT_NEAR(integrate_function(hole, [](Point) { return 2.0; }), 2.0 * hole.exact_area(), 1e-9);
}

TEST(FieldDump, RoundTripAndTrailingColumns) {
  const auto d = build_domain(DomainSpec::rectangle_with_hole(3, 2, {1, 0.75, 2, 1.25}, 0.125));
  const Field u = random_field(d, 5, 10.0);
  std::stringstream ss;
  write_field(ss, u);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "25 17 0.125 rectangle_with_hole");
  const Field back = field_from_dump(read_field_dump(ss), d);
  EXPECT_EQ(back.values(), u.values());

  std::stringstream extra("3 3 0.5 rectangle\n1 1 0.5 0.5 2.5 ignored 7\n");
  const auto dump = read_field_dump(extra);
  ASSERT_EQ(dump.rows.size(), 1u);
  EXPECT_EQ(dump.rows[0].value, 2.5);
  std::stringstream bad("3 3 0.5\n");
  EXPECT_THROW(read_field_dump(bad), ValidationError);
}

TEST(Field, RejectsMixedDomains) {
  const auto a = build_domain(DomainSpec::rectangle(1, 1, 0.125));
  const auto b = build_domain(DomainSpec::rectangle(1, 1, 0.125));
  Field x(a), y(b);
  EXPECT_THROW(x += y, ValidationError);
}
