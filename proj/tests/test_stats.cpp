#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dgff/stats.hpp"

using namespace dgff;

namespace {

std::vector<double> truncated_exponential(double rate, double h_max, std::size_t n, std::uint64_t seed) {
  Philox g({seed, 0});
  std::vector<double> out;
  const double mass = -std::expm1(-rate * h_max);
  while (out.size() < n) out.push_back(-std::log1p(-g.uniform() * mass) / rate);
  return out;
}

std::vector<double> normals(double mu, std::size_t n, std::uint64_t seed) {
  Philox g({seed, 1});
  std::vector<double> v(n);
  for (auto& x : v) x = mu + g.normal();
  return v;
}

}  // namespace

TEST(Ks, IdenticalSamplesGiveZero) {
  const auto a = normals(0, 200, 1);
  const auto r = two_sample_ks(a, a);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_NEAR(r.pvalue, 1.0, 1e-12);
}

TEST(Ks, DetectsShift) {
  const auto r = two_sample_ks(normals(0, 1000, 2), normals(3, 1000, 3));
  EXPECT_LT(r.pvalue, 1e-6);
  EXPECT_GT(r.statistic, 0.8);
  EXPECT_LE(r.statistic, 1.0);
}

TEST(Ks, StatisticInUnitIntervalAndNullPValuesNotSmall) {
  int small = 0;
  for (int t = 0; t < 200; ++t) {
    const auto r = two_sample_ks(normals(0, 100, 10 + t), normals(0, 150, 1000 + t));
    EXPECT_GE(r.statistic, 0.0);
    EXPECT_LE(r.statistic, 1.0);
    small += r.pvalue < 0.05 ? 1 : 0;
  }
  // about 10 expected under the null; the asymptotic p-value is slightly conservative
  EXPECT_LT(small, 25);
}

TEST(Ks, TailMatchesSeriesAcrossBranches) {
  // both series agree near the switch point
  auto direct = [](double x) {
    double s = 0;
    for (int k = 1; k < 200; ++k) s += (k % 2 ? 2.0 : -2.0) * std::exp(-2.0 * k * k * x * x);
    return s;
  };
  for (double x : {0.6, 0.9, 1.17, 1.19, 1.5})
    EXPECT_NEAR(kolmogorov_tail(x), direct(x), 1e-10);
  EXPECT_THROW(two_sample_ks(std::vector<double>(10, 1.0), normals(0, 30, 1)), Error);
}

TEST(Overshoot, RecoversRateOfItsOwnModel) {
  for (double rate : {0.5, 1.0, 2.0}) {
    const double h_max = 3.0 / rate;
    const auto h = truncated_exponential(rate, h_max, 20000, static_cast<std::uint64_t>(rate * 100));
    const auto fit = fit_overshoot(h, h_max);
    EXPECT_NEAR(fit.rate_hat, rate, 3 * fit.stderr_) << rate;
    EXPECT_GT(fit.rate_hat, 0.0);
    EXPECT_EQ(fit.n_atoms, 20000u);
  }
}

TEST(Overshoot, TargetAndErrors) {
  EXPECT_NEAR(0.3 * kAlpha, 0.7520, 1e-4);
  EXPECT_THROW(fit_overshoot(truncated_exponential(1, 3, 50, 1), 3.0), Error);
  // a flat sample fits a rate near zero
  Philox g({5, 5});
  std::vector<double> u(50000);
  for (auto& x : u) x = 2.0 * g.uniform();
  const auto fit = fit_overshoot(u, 2.0);
  EXPECT_NEAR(fit.rate_hat, 0.0, 4 * fit.stderr_);
}

TEST(Overshoot, PooledPointMeasuresUseDefaultWindow) {
  const double lambda = 0.3, rate = kAlpha * lambda;
  std::vector<PointMeasure> pms(4);
  for (std::size_t k = 0; k < pms.size(); ++k) {
    pms[k].lambda = lambda;
    pms[k].n = 64;
    for (double h : truncated_exponential(rate, 3.0 / rate, 5000, 40 + k)) pms[k].atoms.push_back({{0.5, 0.5}, h, {}});
  }
  const auto fit = fit_overshoot(pms);
  EXPECT_NEAR(fit.h_max, 3.0 / rate, 1e-12);
  EXPECT_NEAR(fit.rate_hat, rate, 3 * fit.stderr_);
  EXPECT_EQ(fit.target, rate);
}

TEST(Intensity, InteriorCellsOfUnitSquare) {
  const auto cells = interior_cells(ContinuumDomain::unit_square(), 0.1, 3);
  EXPECT_EQ(cells.size(), 36u);
  for (const auto& c : cells) {
    EXPECT_GE(c.x0, 0.125);
    EXPECT_LE(c.x1, 0.875);
  }
  EXPECT_TRUE(interior_cells(ContinuumDomain::disc(0, 0, 0.05), 0.1, 3).empty());
}

TEST(Intensity, UniformAtomsGiveFlatRatios) {
  const auto cells = interior_cells(ContinuumDomain::unit_square(), 0.1, 2);  // four cells
  IntensityAccumulator acc(cells);
  Philox g({77, 0});
  for (int rep = 0; rep < 200; ++rep) {
    PointMeasure pm;
    pm.weight = 0.01;
    for (int i = 0; i < 400; ++i) pm.atoms.push_back({{g.uniform(), g.uniform()}, 0.5, {}});
    acc.add(pm);
  }
  const std::vector<double> psi(cells.size(), 1.0 / 16);
  const auto rep = acc.report(psi);
  double mean = 0;
  for (double r : rep.ratio) mean += r / rep.ratio.size();
  for (std::size_t k = 0; k < rep.ratio.size(); ++k) {
    EXPECT_FALSE(rep.excluded[k]);
    EXPECT_NEAR(rep.ratio[k], mean, 3 * rep.ratio_se[k] * std::sqrt(1.0 + 1.0 / rep.ratio.size()) + 1e-12);
  }
  EXPECT_NEAR(mean, 400 * 0.01, 0.05);  // cell area 1/16 matches psi = 1
}

TEST(Intensity, EmptyCellsAreExcluded) {
  IntensityAccumulator acc({{0, 0, 0.5, 0.5}, {0.5, 0.5, 1, 1}});
  PointMeasure pm;
  pm.weight = 1;
  pm.atoms.push_back({{0.1, 0.1}, 0.0, {}});
  acc.add(pm);
  acc.add(pm);
  const auto rep = acc.report(std::vector<double>{0.25, 0.25});
  EXPECT_FALSE(rep.excluded[0]);
  EXPECT_TRUE(rep.excluded[1]);
  EXPECT_EQ(rep.flatness, 0.0);
}

TEST(Cluster, PredictionsAndZeroLag) {
  const auto kernel = potential_kernel(16);
  ClusterAccumulator acc(3, 512);
  Philox g({3, 3});
  Eigen::VectorXd v(49);
  for (int i = 0; i < 500; ++i) {
    for (Eigen::Index k = 0; k < 49; ++k) v[k] = g.normal();
    v[PointMeasure::profile_index(3, 0, 0)] = 0.0;
    acc.add_profile(v);
  }
  EXPECT_EQ(acc.mean()[PointMeasure::profile_index(3, 0, 0)], 0.0);
  EXPECT_EQ(acc.covariance()(24, 24), 0.0);
  const auto rep = acc.report(kernel, 0.3);
  ASSERT_EQ(rep.lags.size(), 48u);
  for (std::size_t i = 0; i < rep.lags.size(); ++i)
    if (rep.lags[i] == Site{1, 0}) EXPECT_NEAR(rep.predicted_mean[i], 0.7520, 1e-4);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rep.predicted_cov);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
  EXPECT_LT((rep.predicted_cov - rep.predicted_cov.transpose()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Cluster, RecoversSyntheticPinnedProfile) {
  // profiles drawn from the predicted Gaussian law itself
  const auto kernel = potential_kernel(16);
  const double lambda = 0.3;
  ClusterAccumulator shape(3, 512);
  const auto dummy = [&] {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(49);
    shape.add_profile(v);
    shape.add_profile(v);
    return shape.report(kernel, lambda);
  }();
  const Eigen::LLT<Eigen::MatrixXd> llt(dummy.predicted_cov);
  const Eigen::MatrixXd l = llt.matrixL();
  ClusterAccumulator acc(3, 512);
  Philox g({8, 8});
  Eigen::VectorXd z(48), v(49);
  for (int i = 0; i < 40000; ++i) {
    for (Eigen::Index k = 0; k < 48; ++k) z[k] = g.normal();
    const Eigen::VectorXd x = l * z;
    v.setZero();
    for (std::size_t k = 0; k < 48; ++k) {
      const auto z0 = dummy.lags[k];
      v[PointMeasure::profile_index(3, z0.x, z0.y)] = dummy.predicted_mean[k] + x[static_cast<Eigen::Index>(k)];
    }
    acc.add_profile(v);
  }
  const auto rep = acc.report(kernel, lambda);
  EXPECT_LT(rep.max_mean_rel_error, 0.05);
  EXPECT_LT(rep.max_cov_rel_error, 0.05);
}

TEST(Cluster, WindowSelectsAtoms) {
  PointMeasure pm;
  pm.n = 512;
  pm.r = 3;
  const double top = std::log(std::log(512.0));
  for (double h : {0.0, 0.5 * top, top + 0.01, -0.5}) pm.atoms.push_back({{0.5, 0.5}, h, std::vector<double>(49, 1.0)});
  ClusterAccumulator acc(2, 512);
  acc.add(pm);
  EXPECT_EQ(acc.count(), 2u);
  ClusterAccumulator too_wide(4, 512);
  EXPECT_THROW(too_wide.add(pm), Error);
}

TEST(Factorization, ExactAtZeroAndScalesWithPrediction) {
  const std::vector<double> c0{10, 20, 30}, cb{10, 20, 30};
  const auto r0 = factorization_check(c0, cb, 0.0, 0.3);
  EXPECT_EQ(r0.relative_discrepancy, 0.0);
  const double p = std::exp(-kAlpha * 0.25);
  const std::vector<double> c1{100, 200, 300}, cb1{100 * p, 200 * p, 300 * p};
  EXPECT_NEAR(factorization_check(c1, cb1, 1.0, 0.25).relative_discrepancy, 0.0, 1e-12);
  PointMeasure pm;
  pm.threshold = 0.0;
  pm.lambda = 0.3;
  std::vector<PointMeasure> pms{pm};
  EXPECT_THROW(factorization_check(pms, -1.0), Error);
}
