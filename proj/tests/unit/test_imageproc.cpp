#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "hep2/error.hpp"
#include "hep2/imageproc.hpp"
#include "oracles.hpp"

using namespace hep2;

namespace {

GrayImage random_image(std::mt19937_64& rng, std::size_t h, std::size_t w) {
  return GrayImage(oracle::random_map(rng, h, w, 0.0, 1.0));
}

GrayImage blob(std::size_t side, double cx, double cy, double sigma) {
  GrayImage g(side, side);
  for (std::size_t r = 0; r < side; ++r)
    for (std::size_t c = 0; c < side; ++c) {
      const double dx = static_cast<double>(c) - cx, dy = static_cast<double>(r) - cy;
      g(r, c) = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
    }
  return g;
}

// Filled ellipse whose major semi-axis a points along (sin t, cos t) in
// (column, row) coordinates, i.e. tilted t degrees from vertical.
BinaryMask ellipse(std::size_t h, std::size_t w, double a, double b, double tilt_deg) {
  const double t = tilt_deg * std::numbers::pi / 180.0;
  const double ux = std::sin(t), uy = std::cos(t);
  const double cx = (static_cast<double>(w) - 1) / 2, cy = (static_cast<double>(h) - 1) / 2;
  BinaryMask m(h, w);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      const double dx = static_cast<double>(c) - cx, dy = static_cast<double>(r) - cy;
      const double along = dx * ux + dy * uy, across = -dx * uy + dy * ux;
      m.set(r, c, (along * along) / (a * a) + (across * across) / (b * b) <= 1.0);
    }
  return m;
}

double max_diff(const Map2D& a, const Map2D& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.values()[i] - b.values()[i]));
  return m;
}

}  // namespace

TEST_CASE("contrast_normalize") {
  const GrayImage g(Map2D(1, 4, {0, 2, 4, 8}));
  const auto n = contrast_normalize(g);
  CHECK(n.warning == Warning::none);
  CHECK(n.value == GrayImage(Map2D(1, 4, {0, 0.25, 0.5, 1.0})));
  CHECK(contrast_normalize(n.value).value == n.value);

  const auto flat = contrast_normalize(GrayImage(3, 3, 7.0));
  CHECK(flat.warning == Warning::constant_image);
  for (double v : flat.value.values()) CHECK(v == 0.0);

  std::mt19937_64 rng(1);
  auto x = GrayImage(oracle::random_map(rng, 6, 5, -30, 200));
  const auto y = contrast_normalize(x).value;
  CHECK(*std::min_element(y.values().begin(), y.values().end()) == 0.0);
  CHECK(*std::max_element(y.values().begin(), y.values().end()) == 1.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j)
      if (x.values()[i] <= x.values()[j]) CHECK(y.values()[i] <= y.values()[j]);
}

TEST_CASE("bilinear resize") {
  const GrayImage g(Map2D(2, 2, {0, 1, 0, 1}));
  const auto r = resize(g, 2, 3);
  CHECK(r(0, 0) == 0.0);
  CHECK(r(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r(1, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r(1, 2) == 1.0);

  std::mt19937_64 rng(2);
  const auto x = random_image(rng, 13, 9);
  CHECK(max_diff(resize(x, 13, 9), x) < 1e-9);
  const auto c = resize(GrayImage(5, 7, 0.3), 78, 78);
  for (double v : c.values()) CHECK(v == doctest::Approx(0.3).epsilon(1e-12));
  CHECK_THROWS_AS(resize(x, 0, 3), Error);
}

TEST_CASE("rotation about the center") {
  std::mt19937_64 rng(3);
  const auto x = random_image(rng, 9, 9);
  CHECK(max_diff(rotate_about_center(x, 0.0), x) == 0.0);
  CHECK(max_diff(rotate_about_center(x, 360.0), x) < 1e-9);
  auto y = x;
  for (int i = 0; i < 4; ++i) y = rotate_about_center(y, 90.0);
  CHECK(max_diff(y, x) < 1e-6);

  // Positive angles turn content counter-clockwise on screen: a bright
  // pixel right of center moves above it.
  GrayImage dot(9, 9);
  dot(4, 7) = 1.0;
  const auto turned = rotate_about_center(dot, 90.0);
  CHECK(turned(1, 4) == doctest::Approx(1.0));
  CHECK(turned(4, 7) == doctest::Approx(0.0));

  // Corners leave the frame and read as zero.
  const auto ones = rotate_about_center(GrayImage(21, 21, 1.0), 45.0);
  CHECK(ones(0, 0) == 0.0);
  CHECK(ones(10, 10) == doctest::Approx(1.0));
}

TEST_CASE("rotate then unrotate recovers smooth content") {
  const auto g = blob(40, 21.3, 18.7, 5.0);
  for (double a : {9.0, 17.5, 36.0, 71.0, 133.0}) {
    const auto back = rotate_about_center(rotate_about_center(g, a), -a);
    double worst = 0.0;
    for (std::size_t r = 2; r + 2 < 40; ++r)
      for (std::size_t c = 2; c + 2 < 40; ++c) worst = std::max(worst, std::fabs(back(r, c) - g(r, c)));
    CHECK(worst < 5e-2);
  }
}

TEST_CASE("principal axis orientation") {
  const auto vertical = principal_axis(ellipse(41, 41, 15, 6, 0.0));
  CHECK(vertical.warning == Warning::none);
  CHECK(std::fabs(vertical.alignment_angle) < 1e-6);
  CHECK(vertical.direction_y == doctest::Approx(1.0));

  BinaryMask bar(11, 31);
  for (std::size_t c = 3; c < 28; ++c)
    for (std::size_t r = 4; r < 7; ++r) bar.set(r, c, true);
  CHECK(principal_axis(bar).alignment_angle == doctest::Approx(90.0));

  for (double tilt : {30.0, -30.0, 55.0, -72.0}) {
    const auto axis = principal_axis(ellipse(61, 61, 24, 10, tilt));
    CHECK(axis.alignment_angle == doctest::Approx(-tilt).epsilon(0.5 / 30.0));
    CHECK(std::fabs(axis.alignment_angle + tilt) < 0.5);
    CHECK(axis.direction_y >= 0.0);
    CHECK(axis.major_variance > axis.minor_variance);
  }

  const auto disc = principal_axis(ellipse(21, 21, 7, 7, 0.0));
  CHECK(disc.warning == Warning::isotropic_mask);
  CHECK(disc.alignment_angle == 0.0);
  CHECK_THROWS_AS(principal_axis(BinaryMask(5, 5)), Error);
}

TEST_CASE("pca_align makes the principal direction vertical") {
  for (double tilt : {30.0, -48.0, 80.0}) {
    const auto mask = ellipse(50, 70, 20, 8, tilt);
    GrayImage img(50, 70);
    for (std::size_t r = 0; r < 50; ++r)
      for (std::size_t c = 0; c < 70; ++c) img(r, c) = mask(r, c) ? 1.0 : 0.0;
    const auto a = pca_align(img, mask, 78);
    CHECK(a.image.height() == 78);
    CHECK(a.mask.width() == 78);
    CHECK(a.angle_degrees == doctest::Approx(-tilt).epsilon(0.02));
    CHECK(std::fabs(principal_axis(a.mask).alignment_angle) < 1.0);
    // The padded canvas keeps the whole cell: foreground area scales with
    // the resize factor instead of being clipped.
    const double scale = 78.0 / 70.0;
    CHECK(static_cast<double>(a.mask.count()) ==
          doctest::Approx(static_cast<double>(mask.count()) * scale * scale).epsilon(0.1));
  }
  CHECK_THROWS_AS(pca_align(GrayImage(4, 4), BinaryMask(5, 5, true)), Error);
  const auto iso = pca_align(GrayImage(21, 21, 0.5), ellipse(21, 21, 6, 6, 0), 21);
  CHECK(iso.warning == Warning::isotropic_mask);
  CHECK(iso.angle_degrees == 0.0);
}

TEST_CASE("augmentation plans") {
  CHECK(AugmentationPlan(36).variants() == 10);
  CHECK(AugmentationPlan(18).variants() == 20);
  CHECK(AugmentationPlan(9).variants() == 40);
  CHECK(AugmentationPlan(360).variants() == 1);
  CHECK(AugmentationPlan().variants() == 1);
  for (double s : {36.0, 18.0, 9.0, 0.5, 120.0})
    CHECK(static_cast<double>(AugmentationPlan(s).variants()) * s == 360.0);
  CHECK_THROWS_AS(AugmentationPlan(7), Error);
  CHECK_THROWS_AS(AugmentationPlan(0), Error);
  CHECK_THROWS_AS(AugmentationPlan(-36), Error);

  std::mt19937_64 rng(4);
  const auto x = random_image(rng, 12, 12);
  const auto v = augment(x, AugmentationPlan(36));
  REQUIRE(v.size() == 10);
  CHECK(v[0] == x);
  CHECK(max_diff(v[3], rotate_about_center(x, 108.0)) == 0.0);
  const auto one = augment(x, AugmentationPlan(360));
  REQUIRE(one.size() == 1);
  CHECK(one[0] == x);
}

TEST_CASE("preprocess pipeline") {
  RasterImage rgb{2, 2, 3, 255, {0, 10, 200, 0, 20, 200, 0, 30, 200, 0, 50, 200}};
  const auto g = preprocess(rgb, nullptr, {false, 2});
  CHECK(g.value == GrayImage(Map2D(2, 2, {0, 0.25, 0.5, 1.0})));

  RasterImage gray{3, 4, 1, 65535, {0, 100, 200, 300, 400, 500, 600, 700, 800, 900, 1000, 1100}};
  const auto p = preprocess(gray, nullptr, {});
  CHECK(p.value.height() == 78);
  CHECK(p.value.width() == 78);
  CHECK(max_diff(p.value, resize(contrast_normalize(raster_to_gray(gray)).value, 78, 78)) == 0.0);
  CHECK_THROWS_AS(preprocess(gray, nullptr, {true, 78}), Error);

  const auto mask = ellipse(40, 40, 15, 6, 30.0);
  RasterImage cell{40, 40, 1, 255, std::vector<std::uint16_t>(1600)};
  for (std::size_t r = 0; r < 40; ++r)
    for (std::size_t c = 0; c < 40; ++c) cell.samples[r * 40 + c] = mask(r, c) ? 180 : static_cast<std::uint16_t>(c);
  const auto aligned = preprocess(cell, &mask, {true, 78});
  const auto want = pca_align(contrast_normalize(raster_to_gray(cell)).value, mask, 78).image;
  CHECK(max_diff(aligned.value, want) == 0.0);
}

TEST_CASE("augmentation order before and after resize") {
  std::mt19937_64 rng(6);
  RasterImage r{30, 30, 1, 255, std::vector<std::uint16_t>(900)};
  for (auto& s : r.samples) s = static_cast<std::uint16_t>(rng() % 256);
  const AugmentationPlan plan(90);
  const auto after = preprocess_variants(r, nullptr, {}, plan, AugmentOrder::after_resize);
  const auto before = preprocess_variants(r, nullptr, {}, plan, AugmentOrder::before_resize);
  REQUIRE(after.size() == 4);
  REQUIRE(before.size() == 4);
  // Quarter turns of a square image commute with the corner-aligned resize.
  for (std::size_t k = 0; k < 4; ++k) CHECK(max_diff(after[k], before[k]) < 1e-12);
  const auto nine = preprocess_variants(r, nullptr, {}, AugmentationPlan(9), AugmentOrder::before_resize);
  CHECK(nine.size() == 40);
}
