#include <gtest/gtest.h>

#include <sstream>

#include "dgff/io.hpp"
#include "dgff/sampler.hpp"

using namespace dgff;

TEST(FieldCsv, RoundTrip) {
  const auto d = std::make_shared<const LatticeDomain>(discretize(ContinuumDomain::disc(0, 0, 1), 8));
  const auto f = DgffSampler(d).sample({1, 2});
  std::stringstream ss;
  write_csv(ss, f);
  const auto back = read_field_csv(ss, 8);
  EXPECT_EQ(back.domain->sites(), d->sites());
  EXPECT_EQ(back.values, f.values);
}

TEST(FieldCsv, ParseErrorsNameTheLine) {
  std::stringstream ss("x1,x2,value\n1,2,3\n4,oops,6\n");
  try {
    read_field_csv(ss);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::parse);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  std::stringstream short_row("x1,x2,value\n1,2\n");
  EXPECT_THROW(read_field_csv(short_row), Error);
}

TEST(MeasureCsv, RoundTrip) {
  DyadicHierarchyOptions o;
  o.pixels_per_side = 8;
  const auto ys = dyadic_martingale({0, 0, 0}, 0.3, 2, {1, 1}, o);
  std::stringstream ss;
  write_csv(ss, ys.back());
  const auto rows = read_measure_csv(ss);
  ASSERT_EQ(rows.size(), 64u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].mass, ys.back().pixel_mass[i]);
    EXPECT_EQ(rows[i].x, ys.back().pixels[i]);
  }
}

TEST(Pgm, RoundTripIsBigEndian) {
  const GrayImage img{3, 2, {0, 1, 256, 65535, 4660, 7}};
  std::stringstream ss;
  write_pgm(ss, img);
  const std::string s = ss.str();
  EXPECT_EQ(s.substr(0, 15), std::string("P5\n3 2\n65535\n\x00\x00", 15));
  EXPECT_EQ(static_cast<unsigned char>(s[13 + 4]), 0x01);  // 256 -> 0x01 0x00
  const auto back = read_pgm(ss);
  EXPECT_EQ(back.pixels, img.pixels);
}

TEST(Render, ConstantFieldIsConstantGray) {
  const auto d = std::make_shared<const LatticeDomain>(LatticeDomain::box(0, 0, 4, 3));
  const Field f(d, std::vector<double>(12, 2.5));
  std::stringstream ss;
  write_csv(ss, f);
  const auto [img, scale] = render_csv(ss);
  EXPECT_EQ(img.width, 4);
  EXPECT_EQ(img.height, 3);
  for (auto p : img.pixels) EXPECT_EQ(p, img.pixels[0]);
  EXPECT_EQ(scale.min, 2.5);
  EXPECT_EQ(scale.max, 2.5);
}

TEST(Render, SingleHotSiteMapsToOneBrightPixel) {
  const auto d = std::make_shared<const LatticeDomain>(LatticeDomain::box(10, 20, 5, 4));
  std::vector<double> v(20, 0.0);
  v[static_cast<std::size_t>(d->index_of({12, 21}))] = 7.0;
  std::stringstream ss;
  write_csv(ss, Field(d, v));
  const auto [img, scale] = render_csv(ss);
  // column 12 - 10 = 2; row counted from the top: 3 - (21 - 20) = 2
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      EXPECT_EQ(img.pixels[static_cast<std::size_t>(r) * img.width + c], (r == 2 && c == 2) ? 65535 : 0);
}

TEST(Render, ScatterOfPointMeasure) {
  PointMeasure pm;
  pm.n = 16;
  pm.lambda = 0.3;
  pm.r = 0;
  pm.atoms.push_back({{3.0 / 16, 5.0 / 16}, 0.5, {0.0}});
  std::stringstream ss;
  write_csv(ss, pm);
  const auto [img, scale] = render_csv(ss);
  EXPECT_EQ(scale.mode, "scatter");
  EXPECT_EQ(img.width, 16);
  int lit = 0;
  for (auto p : img.pixels) lit += p > 0;
  EXPECT_EQ(lit, 1);
  EXPECT_GT(img.pixels[static_cast<std::size_t>(16 - 1 - 5) * 16 + 3], 0);
}

TEST(Render, UnknownHeaderFails) {
  std::stringstream ss("a,b\n1,2\n");
  EXPECT_THROW(render_csv(ss), Error);
}
