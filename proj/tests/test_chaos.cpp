#include <gtest/gtest.h>

#include <cmath>

#include "dgff/chaos.hpp"

using namespace dgff;

TEST(Psi, DiscValues) {
  const auto d = ContinuumDomain::disc(0, 0, 1);
  for (double lambda : {0.1, 0.5, 0.9}) {
    const auto w = psi(d, lambda, {{0, 0}, {0.5, 0}, {0, -0.5}});
    EXPECT_NEAR(w.values[0], 1.0, 1e-14);
    EXPECT_NEAR(w.values[1], std::pow(0.75, 2 * lambda * lambda), 1e-13);
    EXPECT_NEAR(w.values[2], w.values[1], 1e-13);
  }
}

TEST(Psi, LatticeQuadratureAgreesWithClosedForm) {
  const auto d = ContinuumDomain::disc(0, 0, 1);
  const auto a = psi(d, 0.5, {{0.5, 0}, {0.1, 0.2}});
  const auto l = psi(d, 0.5, {{0.5, 0}, {0.1, 0.2}}, PsiMethod::lattice);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(l.values[i], a.values[i], 2e-3);
  const auto sq = ContinuumDomain::unit_square();
  const auto as = psi(sq, 0.4, {{0.5, 0.5}, {0.25, 0.625}});
  const auto ls = psi(sq, 0.4, {{0.5, 0.5}, {0.25, 0.625}}, PsiMethod::lattice);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(ls.values[i], as.values[i], 2e-3);
}

TEST(Psi, ScalingAndErrors) {
  const auto d = ContinuumDomain::rectangle(0, 0, 1, 2);
  const double lambda = 0.6, r = 3.0;
  const Point x{0.3, 1.1};
  EXPECT_NEAR(psi_value(d.transformed(r, {0, 0}), lambda, {r * x.x, r * x.y}),
              std::pow(r, 2 * lambda * lambda) * psi_value(d, lambda, x), 1e-12);
  EXPECT_THROW(psi(d, lambda, {{2, 2}}), Error);
  // psi vanishes towards the boundary
  EXPECT_LT(psi_value(d, lambda, {1e-6, 1.0}), 1e-3);
}

TEST(PsiIntegral, DiscClosedForm) {
  for (double lambda : {0.25, 0.5}) {
    const double s = 2 * lambda * lambda;
    EXPECT_NEAR(psi_integral(ContinuumDomain::disc(0, 0, 1), lambda), std::numbers::pi / (1 + s), 1e-4);
  }
}

TEST(ScalingCheck, RatiosAndTranslation) {
  const auto disc = ContinuumDomain::disc(0, 0, 1);
  EXPECT_NEAR(scaling_check(disc, 0.5, 1.0).ratio, 1.0, 1e-14);
  const auto s = scaling_check(disc, 0.5, 2.0);
  EXPECT_NEAR(s.ratio, std::pow(2.0, 2.5), 0.01 * std::pow(2.0, 2.5));
  EXPECT_LT(s.relative_error, 0.01);
  const auto sq = scaling_check(ContinuumDomain::unit_square(), 0.3, 0.5, {0.7, -0.2});
  EXPECT_LT(sq.relative_error, 1e-3);
  EXPECT_NEAR(scaling_check(ContinuumDomain::unit_square(), 0.3, 1.0, {2.0, 5.0}).ratio, 1.0, 1e-10);
}

TEST(ChaosStep, IdentityCases) {
  const auto d = ContinuumDomain::unit_square();
  const std::vector<Point> px{{0.25, 0.25}, {0.75, 0.75}};
  const auto m0 = base_measure(d, 0.0, px, 0.25);
  EXPECT_EQ(m0.pixel_mass, (std::vector<double>{0.25, 0.25}));
  const std::vector<double> incr{1.3, -0.4}, var{2.0, 0.5}, zero{0.0, 0.0};
  EXPECT_EQ(chaos_step(m0, incr, var).pixel_mass, m0.pixel_mass);
  const auto m1 = base_measure(d, 0.7, px, 0.25);
  EXPECT_EQ(chaos_step(m1, zero, zero).pixel_mass, m1.pixel_mass);
  const auto m2 = chaos_step(m1, incr, var);
  EXPECT_EQ(m2.level, 1);
  EXPECT_EQ(m2.variance, var);
  EXPECT_THROW(chaos_step(m1, incr, std::vector<double>{1.0, -1.0}), Error);
}

TEST(ChaosStep, PreservesExpectedMass) {
  const auto d = ContinuumDomain::unit_square();
  const double beta = 0.8, sigma2 = 0.7;
  const auto m = base_measure(d, beta, {{0.5, 0.5}}, 1.0);
  Philox g({12, 0});
  const int n = 10000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = std::sqrt(sigma2) * g.normal();
    const double v = chaos_step(m, std::vector<double>{x}, std::vector<double>{sigma2}).total_mass();
    s += v;
    s2 += v * v;
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
  EXPECT_NEAR(mean, 1.0, 5 * se);
}

TEST(CrossBinding, MatchesDirectGreenDifference) {
  // L = 16 lattice, 4 x 4 pixels; both sampling modes against G^{box} - G^{quadrants}
  const int L = 16, P = 4;
  const auto box = std::make_shared<const LatticeDomain>(LatticeDomain::box(1, 1, L - 1, L - 1));
  std::vector<Site> quads;
  for (auto s : box->sites())
    if (s.x != L / 2 && s.y != L / 2) quads.push_back(s);
  const GreenOperator gb(box), gq(std::make_shared<const LatticeDomain>(LatticeDomain(1, quads)));
  std::vector<Site> pix;
  for (int i2 = 0; i2 < P; ++i2)
    for (int i1 = 0; i1 < P; ++i1) pix.push_back({(2 * i1 + 1) * L / (2 * P), (2 * i2 + 1) * L / (2 * P)});
  Eigen::MatrixXd exact(P * P, P * P);
  for (int i = 0; i < P * P; ++i)
    for (int j = 0; j < P * P; ++j) exact(i, j) = gb.entry(pix[i], pix[j]) - gq.entry(pix[i], pix[j]);

  const detail::CrossBindingPlan matrix(P, L, 1 << 20, 1e-10), spectral(P, L, 0, 0.0);
  ASSERT_TRUE(matrix.matrix_mode());
  ASSERT_FALSE(spectral.matrix_mode());
  for (int i = 0; i < P * P; ++i) {
    EXPECT_NEAR(matrix.variance()[i], exact(i, i), 1e-9);
    EXPECT_NEAR(spectral.variance()[i], exact(i, i), 1e-10);
  }
  // spectral mode is linear in the noise; recover its covariance from unit noise vectors
  Philox gen({1, 1});
  const auto samples = spectral.sample(gen, 20000);
  const Eigen::MatrixXd emp = samples * samples.transpose() / 20000.0;
  for (int i = 0; i < P * P; ++i)
    for (int j = 0; j < P * P; ++j) {
      const double se = std::sqrt((exact(i, i) * exact(j, j) + exact(i, j) * exact(i, j)) / 20000.0);
      EXPECT_NEAR(emp(i, j), exact(i, j), 5 * se);
    }
  const auto mm = matrix.sample(gen, 20000);
  const Eigen::MatrixXd emm = mm * mm.transpose() / 20000.0;
  for (int i = 0; i < P * P; ++i) {
    const double se = exact(i, i) * std::sqrt(2.0 / 20000.0);
    EXPECT_NEAR(emm(i, i), exact(i, i), 5 * se);
  }
}

TEST(CrossBinding, CloseToContinuumBindingCovariance) {
  // level-1 binding field of the unit square onto its quadrants, at L = 128
  const int P = 8, L = 128;
  const detail::CrossBindingPlan plan(P, L, 1 << 21, 1e-10);
  const auto sq = ContinuumDomain::unit_square();
  std::vector<ContinuumDomain> kids;
  for (const auto& c : dyadic_children(DyadicSquare{0, 0, 0}, 1)) kids.push_back(c.to_domain());
  const auto quads = ContinuumDomain::union_of(kids);
  for (int i2 : {1, 2}) {
    const int i1 = 1;
    const Point x{(i1 + 0.5) / P, (i2 + 0.5) / P};
    const double c = binding_covariance(sq, quads, std::vector<Point>{x}, {QuadratureMethod::analytic, {}})(0, 0);
    EXPECT_NEAR(plan.variance()[static_cast<std::size_t>(i2 * P + i1)], c, 0.03 * c);
  }
}

TEST(DyadicHierarchy, LevelVariancesTrackContinuumBindingCovariance) {
  DyadicHierarchyOptions o;
  o.pixels_per_side = 64;
  const DyadicHierarchy h({0, 0, 0}, 0.3, 4, o);
  for (int j = 1; j <= 4; ++j) {
    // first level-(j-1) square and its four children
    const DyadicSquare parent{0, 0, j - 1};
    std::vector<ContinuumDomain> kids;
    for (const auto& c : dyadic_children(parent, 1)) kids.push_back(c.to_domain());
    const auto quads = ContinuumDomain::union_of(kids);
    const int p = 64 >> (j - 1);
    for (int q : {p / 4, p / 2 - 1}) {
      const std::size_t i = static_cast<std::size_t>(q) * 64 + static_cast<std::size_t>(q);
      const double c =
          binding_covariance(parent.to_domain(), quads, std::vector<Point>{h.pixels()[i]}, {QuadratureMethod::analytic, {}})(0, 0);
      EXPECT_NEAR(h.level_variance(j)[i], c, 0.03 * c + 1e-3) << "level " << j << " pixel " << q;
    }
  }
}

TEST(DyadicHierarchy, ExpectationConstantAcrossLevels) {
  DyadicHierarchyOptions o;
  o.pixels_per_side = 64;
  const DyadicHierarchy h({0, 0, 0}, 0.3, 5, o);
  const int runs = 1000;
  std::vector<double> s(6, 0.0), s2(6, 0.0);
  for (int r = 0; r < runs; ++r) {
    const auto t = h.total_masses({42, static_cast<std::uint64_t>(r)});
    for (std::size_t m = 0; m < t.size(); ++m) {
      s[m] += t[m];
      s2[m] += t[m] * t[m];
      EXPECT_GT(t[m], 0.0);
    }
  }
  const double y0 = s[0] / runs;
  for (int m = 1; m <= 5; ++m) {
    const double mean = s[m] / runs, se = std::sqrt((s2[m] / runs - mean * mean) / runs);
    EXPECT_NEAR(mean, y0, 5 * se) << "m = " << m;
  }
  EXPECT_NEAR(y0, psi_integral(ContinuumDomain::unit_square(), 0.3), 2e-3 * y0);
}

TEST(DyadicHierarchy, MartingaleGivenPastLevels) {
  DyadicHierarchyOptions o;
  o.pixels_per_side = 32;
  const DyadicHierarchy h({0, 0, 0}, 0.4, 3, o);
  const RngSpec past{9, 9};
  std::vector<double> mass(h.pixels().size());
  for (std::size_t i = 0; i < mass.size(); ++i) mass[i] = h.psi_values()[i] * h.pixel_area();
  const double b = h.beta();
  for (int j = 1; j <= 2; ++j) {
    const auto phi = h.sample_level(j, past);
    for (std::size_t i = 0; i < mass.size(); ++i) mass[i] *= std::exp(b * phi[i] - 0.5 * b * b * h.level_variance(j)[i]);
  }
  auto in_a = [&](std::size_t i) { return h.pixels()[i].x < 0.5; };
  double ym = 0;
  for (std::size_t i = 0; i < mass.size(); ++i) ym += in_a(i) ? mass[i] : 0.0;
  const int n = 4000;
  double s = 0, s2 = 0;
  for (int r = 0; r < n; ++r) {
    const auto phi = h.sample_level(3, {1234, static_cast<std::uint64_t>(r)});
    double y = 0;
    for (std::size_t i = 0; i < mass.size(); ++i)
      if (in_a(i)) y += mass[i] * std::exp(b * phi[i] - 0.5 * b * b * h.level_variance(3)[i]);
    s += y;
    s2 += y * y;
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
  EXPECT_NEAR(mean, ym, 5 * se);
}

TEST(DyadicHierarchy, ZeroLambdaIsLebesgue) {
  DyadicHierarchyOptions o;
  o.pixels_per_side = 16;
  const auto ys = dyadic_martingale({1, 0, 1}, 0.0, 3, {1, 2}, o);
  ASSERT_EQ(ys.size(), 3u);
  for (const auto& y : ys) EXPECT_NEAR(y.total_mass(), 0.25, 1e-14);
}

TEST(DyadicHierarchy, ReproducibleAndPositive) {
  DyadicHierarchyOptions o;
  o.pixels_per_side = 32;
  const DyadicHierarchy h({0, 0, 0}, 0.3, 4, o);
  EXPECT_EQ(h.total_masses({5, 1}), h.total_masses({5, 1}));
  EXPECT_NE(h.total_masses({5, 1}), h.total_masses({5, 2}));
  EXPECT_THROW(DyadicHierarchy({0, 0, 0}, 0.3, 6, o), Error);
}

TEST(LqgCompare, Basics) {
  std::vector<double> a;
  Philox g({1, 0});
  for (int i = 0; i < 100; ++i) a.push_back(std::exp(g.normal()));
  std::vector<double> scaled;
  for (double x : a) scaled.push_back(4.0 * x);
  const auto c = lqg_compare(a, scaled);
  EXPECT_NEAR(c.ks.statistic, 0.0, 1e-12);
  EXPECT_THROW(lqg_compare(a, std::vector<double>(50, 1.0)), Error);
}
