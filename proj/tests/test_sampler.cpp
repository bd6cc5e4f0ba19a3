#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "dgff/constants.hpp"
#include "dgff/sampler.hpp"

using namespace dgff;

namespace {

LatticeDomainPtr box_ptr(int x0, int y0, int w, int h, int res = 1) {
  return std::make_shared<const LatticeDomain>(LatticeDomain::box(x0, y0, w, h, res));
}

struct Moments {
  explicit Moments(std::size_t n) : n_sites(n), sum(Eigen::VectorXd::Zero(n)), cross(Eigen::MatrixXd::Zero(n, n)) {}
  void add(const std::vector<double>& v) {
    const Eigen::Map<const Eigen::VectorXd> x(v.data(), static_cast<Eigen::Index>(v.size()));
    sum += x;
    cross.selfadjointView<Eigen::Lower>().rankUpdate(x);
    ++count;
  }
  Eigen::MatrixXd covariance() const {
    Eigen::MatrixXd c = cross.selfadjointView<Eigen::Lower>();
    return c / count;  // mean is known to be zero
  }
  std::size_t n_sites;
  Eigen::VectorXd sum;
  Eigen::MatrixXd cross;
  double count = 0;
};

Moments collect(std::size_t n_sites, int samples, const std::function<std::vector<double>(RngSpec)>& draw) {
  Moments m(n_sites);
  for (int r = 0; r < samples; ++r) m.add(draw(RngSpec{20240601, static_cast<std::uint64_t>(r)}));
  return m;
}

// |C_hat - C| <= k SE entrywise, SE^2 = (C_ii C_jj + C_ij^2) / n for a centered Gaussian.
::testing::AssertionResult covariance_matches(const Eigen::MatrixXd& est, const Eigen::MatrixXd& exact, double n,
                                              double k = 5.0) {
  for (Eigen::Index i = 0; i < exact.rows(); ++i)
    for (Eigen::Index j = 0; j < exact.cols(); ++j) {
      const double se = std::sqrt((exact(i, i) * exact(j, j) + exact(i, j) * exact(i, j)) / n);
      if (std::abs(est(i, j) - exact(i, j)) > k * se)
        return ::testing::AssertionFailure() << "entry (" << i << "," << j << "): " << est(i, j) << " vs " << exact(i, j)
                                             << " (SE " << se << ")";
    }
  return ::testing::AssertionSuccess();
}

constexpr int kSamples = 100000;

}  // namespace

TEST(SampleDense, SingletonIsStandardNormal) {
  const GreenOperator g(LatticeDomain(1, {{0, 0}}));
  const auto m = collect(1, kSamples, [&](RngSpec r) { return sample_dense(g, r).values; });
  EXPECT_NEAR(m.covariance()(0, 0), 1.0, 5 * std::sqrt(2.0 / kSamples));
}

TEST(SampleDense, CovarianceAndMeanOnFiveByFive) {
  const GreenOperator g(box_ptr(0, 0, 5, 5));
  const auto m = collect(g.size(), kSamples, [&](RngSpec r) { return sample_dense(g, r).values; });
  const Eigen::MatrixXd exact = g.dense();
  EXPECT_TRUE(covariance_matches(m.covariance(), exact, kSamples));
  for (Eigen::Index i = 0; i < exact.rows(); ++i) EXPECT_LT(std::abs(m.sum[i] / kSamples), 5 * std::sqrt(exact(i, i) / kSamples));
}

TEST(SampleBoxSpectral, CentreVarianceOnThreeByThree) {
  const auto box = box_ptr(1, 1, 3, 3);
  const GreenOperator g(box);
  const auto m = collect(9, kSamples, [&](RngSpec r) { return sample_box_spectral(box, r).values; });
  const double exact = g.entry({2, 2}, {2, 2});
  EXPECT_NEAR(m.covariance()(4, 4), exact, 5 * exact * std::sqrt(2.0 / kSamples));
}

TEST(SampleBoxSpectral, VarianceMapIsSymmetric) {
  const auto box = box_ptr(1, 1, 5, 5);
  const auto m = collect(25, 20000, [&](RngSpec r) { return sample_box_spectral(box, r).values; });
  const auto c = m.covariance();
  const double se = c(12, 12) * std::sqrt(2.0 / 20000) * std::sqrt(2.0);
  auto var = [&](int x, int y) { return c((y - 1) * 5 + (x - 1), (y - 1) * 5 + (x - 1)); };
  for (int y = 1; y <= 5; ++y)
    for (int x = 1; x <= 5; ++x) {
      EXPECT_NEAR(var(x, y), var(6 - x, y), 5 * se);
      EXPECT_NEAR(var(x, y), var(y, x), 5 * se);
    }
}

TEST(SampleBoxSpectral, RejectsNonBox) {
  const auto d = std::make_shared<const LatticeDomain>(LatticeDomain(1, {{0, 0}, {1, 1}}));
  try {
    sample_box_spectral(d, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::unsupported_domain);
  }
}

TEST(Samplers, Reproducible) {
  const auto box = box_ptr(1, 1, 12, 9);
  const GreenOperator g(box);
  const RngSpec r{99, 7};
  EXPECT_EQ(sample_dense(g, r).values, sample_dense(g, r).values);
  EXPECT_EQ(sample_box_spectral(box, r).values, sample_box_spectral(box, r).values);
  EXPECT_EQ(sample_gibbs_markov_box(box, r, 9).values, sample_gibbs_markov_box(box, r, 9).values);
  EXPECT_NE(sample_box_spectral(box, r).values, sample_box_spectral(box, {99, 8}).values);
}

TEST(GibbsMarkov, WholeDomainAsOnlyChild) {
  const auto box = box_ptr(0, 0, 4, 4);
  const GreenOperator g(box);
  const auto m = collect(16, kSamples, [&](RngSpec r) { return sample_gibbs_markov(box, {box}, r).values; });
  EXPECT_TRUE(covariance_matches(m.covariance(), g.dense(), kSamples));
}

TEST(GibbsMarkov, CovarianceOnEightByEight) {
  // children: four 3x3 quadrants around a separating cross, plus a non-box child
  const auto box = box_ptr(0, 0, 8, 8);
  std::vector<LatticeDomainPtr> kids{box_ptr(0, 0, 3, 3), box_ptr(4, 0, 4, 3), box_ptr(0, 4, 3, 4),
                                     std::make_shared<const LatticeDomain>(
                                         LatticeDomain(1, {{5, 5}, {6, 5}, {5, 6}, {7, 7}, {6, 7}, {5, 7}}))};
  const GibbsMarkovSampler gm(box, kids);
  const GreenOperator g(box);
  const auto m = collect(64, kSamples, [&](RngSpec r) { return gm.sample(r).values; });
  EXPECT_TRUE(covariance_matches(m.covariance(), g.dense(), kSamples));
}

TEST(GibbsMarkov, HierarchicalBoxCovariance) {
  const auto box = box_ptr(0, 0, 9, 7);
  const GreenOperator g(box);
  const auto m = collect(63, kSamples, [&](RngSpec r) { return sample_gibbs_markov_box(box, r, 4).values; });
  EXPECT_TRUE(covariance_matches(m.covariance(), g.dense(), kSamples));
}

TEST(GibbsMarkov, ChildFieldsUncorrelatedGivenOuterValues) {
  // with h fixed off the children, the fluctuation h - phi on two children is uncorrelated
  const auto box = box_ptr(0, 0, 7, 3);
  const auto a = box_ptr(0, 0, 3, 3), b = box_ptr(4, 0, 3, 3);
  const GibbsMarkovSampler gm(box, {a, b});
  const HarmonicExtender ea(a), eb(b);
  double sab = 0, saa = 0, sbb = 0;
  const int n = 50000;
  for (int r = 0; r < n; ++r) {
    const auto h = gm.sample({5, static_cast<std::uint64_t>(r)});
    const auto pa = ea.extend([&](Site s) { return h.at(s); });
    const auto pb = eb.extend([&](Site s) { return h.at(s); });
    const double u = h.at({1, 1}) - pa[4], v = h.at({5, 1}) - pb[4];
    sab += u * v;
    saa += u * u;
    sbb += v * v;
  }
  EXPECT_LT(std::abs(sab / n), 5 * std::sqrt(saa / n * sbb / n / n));
}

TEST(GibbsMarkov, RejectsOverlappingOrAdjacentChildren) {
  const auto box = box_ptr(0, 0, 8, 8);
  EXPECT_THROW(GibbsMarkovSampler(box, {box_ptr(0, 0, 3, 3), box_ptr(2, 2, 3, 3)}), Error);
  EXPECT_THROW(GibbsMarkovSampler(box, {box_ptr(0, 0, 3, 3), box_ptr(3, 0, 3, 3)}), Error);
  EXPECT_THROW(GibbsMarkovSampler(box, {box_ptr(0, 0, 9, 3)}), Error);
}

TEST(AllSamplers, AgreeOnSixBySix) {
  const auto box = box_ptr(0, 0, 6, 6);
  const GreenOperator g(box);
  const GibbsMarkovSampler gm(box, {box_ptr(0, 0, 3, 3), box_ptr(4, 0, 2, 3), box_ptr(0, 4, 3, 2), box_ptr(4, 4, 2, 2)});
  const auto md = collect(36, kSamples, [&](RngSpec r) { return sample_dense(g, r).values; });
  const auto ms = collect(36, kSamples, [&](RngSpec r) { return sample_box_spectral(box, r.child(1)).values; });
  const auto mg = collect(36, kSamples, [&](RngSpec r) { return gm.sample(r.child(2)).values; });
  const Eigen::MatrixXd exact = g.dense();
  // two-sample difference has variance 2 SE^2
  const double k = 5.0 * std::sqrt(2.0);
  EXPECT_TRUE(covariance_matches(md.covariance() - ms.covariance() + exact, exact, kSamples, k));
  EXPECT_TRUE(covariance_matches(md.covariance() - mg.covariance() + exact, exact, kSamples, k));
  EXPECT_TRUE(covariance_matches(ms.covariance() - mg.covariance() + exact, exact, kSamples, k));
}

TEST(BindingField, EqualDomainsGiveZero) {
  const auto box = box_ptr(0, 0, 5, 5);
  const auto f = sample_binding_field(box, box, {1, 1});
  for (double v : f.values) EXPECT_EQ(v, 0.0);
}

TEST(BindingField, VarianceIsDifferenceOfGreens) {
  const auto d = box_ptr(0, 0, 16, 16);
  const auto dt = std::make_shared<const LatticeDomain>(discretize(ContinuumDomain::disc(8, 8, 6), 1));
  const BindingFieldSampler s(d, dt);
  const GreenOperator gd(d), gt(dt);
  const auto m = collect(dt->size(), 20000, [&](RngSpec r) { return s.sample(r).values; });
  const auto c = m.covariance();
  for (std::size_t i = 0; i < dt->size(); i += 7) {
    const Site x = dt->sites()[i];
    const double exact = gd.entry(x, x) - gt.entry(x, x);
    EXPECT_NEAR(c(Eigen::Index(i), Eigen::Index(i)), exact, 5 * exact * std::sqrt(2.0 / 20000));
  }
}

TEST(BindingField, MatchesContinuumCovarianceDeepInside) {
  const int n = 128;
  const auto outer = ContinuumDomain::unit_square();
  const auto inner = ContinuumDomain::square(0.25, 0.25, 0.5);
  const auto d = std::make_shared<const LatticeDomain>(discretize(outer, n));
  const auto dt = std::make_shared<const LatticeDomain>(discretize(inner, n));
  const BindingFieldSampler s(d, dt);
  const auto ix = dt->index_of({n / 2, n / 2});
  const int samples = 20000;
  double acc = 0;
  for (int r = 0; r < samples; ++r) {
    const double v = s.sample({3, static_cast<std::uint64_t>(r)}).values[static_cast<std::size_t>(ix)];
    acc += v * v;
  }
  const std::vector<Point> p{{0.5, 0.5}};
  const double cont = binding_covariance(outer, inner, p, {QuadratureMethod::analytic, {}})(0, 0);
  // 2% model tolerance plus Monte Carlo error
  EXPECT_NEAR(acc / samples, cont, 0.02 * cont + 4 * cont * std::sqrt(2.0 / samples));
}

TEST(MaxGrowth, RatioToLogNInBand) {
  const int n = 256;
  const auto d = std::make_shared<const LatticeDomain>(discretize(ContinuumDomain::unit_square(), n));
  const DgffSampler s(d);
  double acc = 0;
  for (int r = 0; r < 200; ++r) {
    const auto f = s.sample({11, static_cast<std::uint64_t>(r)});
    acc += *std::max_element(f.values.begin(), f.values.end()) / std::log(double(n));
  }
  const double ratio = acc / 200 / kTwoSqrtG;
  EXPECT_GE(ratio, 0.8);
  EXPECT_LE(ratio, 1.0);
}
