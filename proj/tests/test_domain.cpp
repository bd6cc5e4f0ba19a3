#include <gtest/gtest.h>

#include <set>

#include "dgff/domain.hpp"

using namespace dgff;

namespace {

std::set<Site> as_set(const LatticeDomain& d) { return {d.sites().begin(), d.sites().end()}; }

}  // namespace

TEST(Discretize, UnitSquareAtFourKeepsOnlySitesStrictlyDeeperThanOneStep) {
  // d_inf(x/4, D^c) > 1/4 leaves only x = 2 in each coordinate
  const auto d = discretize(ContinuumDomain::unit_square(), 4);
  EXPECT_EQ(as_set(d), (std::set<Site>{{2, 2}}));
  EXPECT_EQ(d.boundary().size(), 4u);
}

TEST(Discretize, UnitSquareIsTheBoxTwoToNMinusTwo) {
  for (int n : {8, 16, 33}) {
    const auto d = discretize(ContinuumDomain::unit_square(), n);
    const auto box = d.as_box();
    ASSERT_TRUE(box.has_value());
    EXPECT_EQ(box->x0, 2);
    EXPECT_EQ(box->y0, 2);
    EXPECT_EQ(box->w, n - 3);
    EXPECT_EQ(box->h, n - 3);
  }
}

TEST(Discretize, TooCoarseIsDegenerate) {
  try {
    discretize(ContinuumDomain::unit_square(), 1);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_discretization);
  }
  EXPECT_THROW(discretize(ContinuumDomain::unit_square(), 3), Error);
}

TEST(Discretize, UnionIsDisjointUnionOfPieces) {
  const auto a = ContinuumDomain::square(0, 0, 1);
  const auto b = ContinuumDomain::square(2, 0, 1);
  const auto u = discretize(ContinuumDomain::union_of({a, b}), 16);
  auto expected = as_set(discretize(a, 16));
  const auto sb = as_set(discretize(b, 16));
  for (auto s : sb) EXPECT_FALSE(expected.count(s));
  expected.insert(sb.begin(), sb.end());
  EXPECT_EQ(as_set(u), expected);
}

TEST(Discretize, SitesLieInsideAndCoverTheDeltaInterior) {
  const std::vector<ContinuumDomain> shapes = {
      ContinuumDomain::unit_square(), ContinuumDomain::disc(0.5, 0.5, 0.5), ContinuumDomain::rectangle(0, 0, 2, 1),
      ContinuumDomain::union_of({ContinuumDomain::disc(0, 0, 1), ContinuumDomain::square(1.5, -0.5, 1)})};
  const double delta = 0.1;
  for (const auto& d : shapes) {
    for (int n : {16, 32, 64}) {
      const auto lat = discretize(d, n);
      for (auto s : lat.sites()) {
        EXPECT_TRUE(d.contains(lat.scaled(s)));
        EXPECT_GT(d.dist_inf_to_complement(lat.scaled(s)), 1.0 / n);
      }
      // delta-interior covered once 1/N < delta
      const auto b = d.bbox();
      for (int y = static_cast<int>(b.y0 * n) - 1; y <= static_cast<int>(b.y1 * n) + 1; ++y)
        for (int x = static_cast<int>(b.x0 * n) - 1; x <= static_cast<int>(b.x1 * n) + 1; ++x)
          if (d.dist_inf_to_complement({double(x) / n, double(y) / n}) > delta) EXPECT_TRUE(lat.contains({x, y}));
    }
  }
}

TEST(Discretize, BoundaryIsTheOuterNeighbourRing) {
  const auto d = discretize(ContinuumDomain::disc(0, 0, 1), 10);
  std::set<Site> expected;
  for (auto s : d.sites())
    for (auto o : kNeighborOffsets)
      if (!d.contains(s + o)) expected.insert(s + o);
  EXPECT_EQ(std::set<Site>(d.boundary().begin(), d.boundary().end()), expected);
}

TEST(Discretize, Deterministic) {
  const auto d = ContinuumDomain::disc(0.3, 0.1, 0.7);
  EXPECT_EQ(discretize(d, 40).sites(), discretize(d, 40).sites());
}

TEST(ContinuumDomain, UnionRejectsOverlap) {
  EXPECT_THROW(ContinuumDomain::union_of({ContinuumDomain::unit_square(), ContinuumDomain::disc(1, 1, 0.5)}), Error);
  EXPECT_NO_THROW(ContinuumDomain::union_of({ContinuumDomain::unit_square(), ContinuumDomain::square(1, 0, 1)}));
}

TEST(ContinuumDomain, DiscLInfinityDistance) {
  const auto d = ContinuumDomain::disc(0, 0, 1);
  EXPECT_NEAR(d.dist_inf_to_complement({0, 0}), std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(d.dist_inf_to_complement({0.5, 0}), (-0.5 + std::sqrt(0.25 + 1.5)) / 2, 1e-15);
  EXPECT_EQ(d.dist_inf_to_complement({1.5, 0}), 0.0);
}

TEST(ContinuumDomain, JsonRoundTrip) {
  const auto u = ContinuumDomain::union_of({ContinuumDomain::disc(0, 0, 1), ContinuumDomain::rectangle(2, 0, 3, 4)});
  EXPECT_EQ(domain_from_json(to_json(u)), u);
  EXPECT_THROW(domain_from_json(nlohmann::json{{"kind", "triangle"}}), Error);
  EXPECT_THROW(domain_from_json(nlohmann::json{{"kind", "disc"}, {"params", {1, 2}}}), Error);
}

TEST(Dyadic, ChildrenCountAndSide) {
  const DyadicSquare unit{0, 0, 0};
  const auto c1 = dyadic_children(unit, 1);
  ASSERT_EQ(c1.size(), 4u);
  for (const auto& c : c1) EXPECT_EQ(c.side(), 0.5);
  const DyadicSquare s{3, 5, 2};
  const auto c2 = dyadic_children(s, 2);
  ASSERT_EQ(c2.size(), 16u);
  for (const auto& c : c2) EXPECT_EQ(c.side(), s.side() / 4);
  EXPECT_THROW(dyadic_children(s, 0), Error);
}

TEST(Dyadic, ChildrenTileTheParent) {
  const DyadicSquare s{1, 2, 1};
  const auto kids = dyadic_children(s, 3);
  double area = 0.0;
  std::set<DyadicSquare> distinct(kids.begin(), kids.end());
  EXPECT_EQ(distinct.size(), kids.size());
  for (const auto& c : kids) {
    area += c.side() * c.side();
    const auto p = c.corner();
    const auto q = s.corner();
    EXPECT_GE(p.x, q.x);
    EXPECT_GE(p.y, q.y);
    EXPECT_LE(p.x + c.side(), q.x + s.side());
    EXPECT_LE(p.y + c.side(), q.y + s.side());
  }
  EXPECT_EQ(area, s.side() * s.side());
}

TEST(Dyadic, Shrink) {
  const auto d = shrink(DyadicSquare{0, 0, 0}, 0.25);
  EXPECT_EQ(d, ContinuumDomain::square(0.25, 0.25, 0.5));
  const auto e = shrink(DyadicSquare{0, 0, 3}, 1.0 / 8);
  EXPECT_DOUBLE_EQ(e.params()[2], 0.125 * 0.75);
  EXPECT_THROW(shrink(DyadicSquare{0, 0, 0}, 0.0), Error);
  EXPECT_THROW(shrink(DyadicSquare{0, 0, 0}, 0.5), Error);
}

TEST(LatticeDomain, BoxIndexIsRowMajor) {
  const auto b = LatticeDomain::box(3, -2, 4, 3);
  ASSERT_TRUE(b.is_box());
  EXPECT_EQ(b.index_of({3, -2}), 0);
  EXPECT_EQ(b.index_of({4, -2}), 1);
  EXPECT_EQ(b.index_of({3, -1}), 4);
  EXPECT_EQ(b.index_of({7, -2}), -1);
  EXPECT_FALSE(LatticeDomain(1, {{0, 0}, {1, 1}}).is_box());
}
