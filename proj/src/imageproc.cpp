#include "hep2/imageproc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace hep2 {

Checked<GrayImage> contrast_normalize(const GrayImage& image) {
  if (image.empty()) fail(ErrorKind::invalid, "contrast_normalize: empty image");
  auto v = image.values();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double min = *lo, range = *hi - *lo;
  GrayImage out(image.height(), image.width());
  if (!(range > 0.0)) return {std::move(out), Warning::constant_image};
  auto o = out.values();
  for (std::size_t i = 0; i < v.size(); ++i) o[i] = (v[i] - min) / range;
  return {std::move(out), Warning::none};
}

namespace {

// Source coordinate for output index i on a corner-aligned grid.
double grid_source(std::size_t i, std::size_t out_n, std::size_t in_n) {
  if (out_n == 1) return (static_cast<double>(in_n) - 1.0) / 2.0;
  return static_cast<double>(i) * (static_cast<double>(in_n) - 1.0) /
         (static_cast<double>(out_n) - 1.0);
}

// Bilinear read where pixels outside the frame count as 0.
double sample_zero(const Map2D& img, double y, double x) {
  const double fy = std::floor(y), fx = std::floor(x);
  const double ty = y - fy, tx = x - fx;
  const long y0 = static_cast<long>(fy), x0 = static_cast<long>(fx);
  const long h = static_cast<long>(img.height()), w = static_cast<long>(img.width());
  auto at = [&](long r, long c) -> double {
    if (r < 0 || c < 0 || r >= h || c >= w) return 0.0;
    return img(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  };
  double acc = 0.0;
  if (ty < 1.0 && tx < 1.0) acc += (1.0 - ty) * (1.0 - tx) * at(y0, x0);
  if (ty < 1.0 && tx > 0.0) acc += (1.0 - ty) * tx * at(y0, x0 + 1);
  if (ty > 0.0 && tx < 1.0) acc += ty * (1.0 - tx) * at(y0 + 1, x0);
  if (ty > 0.0 && tx > 0.0) acc += ty * tx * at(y0 + 1, x0 + 1);
  return acc;
}

struct Turn {
  double cos, sin;
};

Turn turn_for(double angle_degrees) {
  double a = std::fmod(angle_degrees, 360.0);
  if (a < 0) a += 360.0;
  if (a == 0.0) return {1.0, 0.0};
  if (a == 90.0) return {0.0, 1.0};
  if (a == 180.0) return {-1.0, 0.0};
  if (a == 270.0) return {0.0, -1.0};
  const double rad = a * std::numbers::pi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

// Inverse map: where output (r, c) reads from in the source.
template <class F>
void for_each_source(std::size_t h, std::size_t w, double angle_degrees, F&& f) {
  const Turn t = turn_for(angle_degrees);
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;
  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double dx = static_cast<double>(c) - cx, dy = static_cast<double>(r) - cy;
      const double sx = cx + dx * t.cos - dy * t.sin;
      const double sy = cy + dx * t.sin + dy * t.cos;
      f(r, c, sy, sx);
    }
  }
}

}  // namespace

GrayImage resize(const GrayImage& image, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) fail(ErrorKind::invalid, "resize: output size must be positive");
  if (image.empty()) fail(ErrorKind::invalid, "resize: empty image");
  const std::size_t h = image.height(), w = image.width();
  GrayImage out(out_h, out_w);
  for (std::size_t r = 0; r < out_h; ++r) {
    const double sy = grid_source(r, out_h, h);
    const std::size_t y0 = std::min(static_cast<std::size_t>(sy), h - 1);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double ty = sy - static_cast<double>(y0);
    for (std::size_t c = 0; c < out_w; ++c) {
      const double sx = grid_source(c, out_w, w);
      const std::size_t x0 = std::min(static_cast<std::size_t>(sx), w - 1);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double tx = sx - static_cast<double>(x0);
      const double top = image(y0, x0) + tx * (image(y0, x1) - image(y0, x0));
      const double bottom = image(y1, x0) + tx * (image(y1, x1) - image(y1, x0));
      out(r, c) = ty == 0.0 ? top : top + ty * (bottom - top);
    }
  }
  return out;
}

BinaryMask resize_nearest(const BinaryMask& mask, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) fail(ErrorKind::invalid, "resize: output size must be positive");
  BinaryMask out(out_h, out_w);
  for (std::size_t r = 0; r < out_h; ++r) {
    const auto sy = static_cast<std::size_t>(std::lround(grid_source(r, out_h, mask.height())));
    for (std::size_t c = 0; c < out_w; ++c) {
      const auto sx = static_cast<std::size_t>(std::lround(grid_source(c, out_w, mask.width())));
      out.set(r, c, mask(std::min(sy, mask.height() - 1), std::min(sx, mask.width() - 1)));
    }
  }
  return out;
}

GrayImage rotate_about_center(const GrayImage& image, double angle_degrees) {
  GrayImage out(image.height(), image.width());
  for_each_source(image.height(), image.width(), angle_degrees,
                  [&](std::size_t r, std::size_t c, double sy, double sx) {
                    out(r, c) = sample_zero(image, sy, sx);
                  });
  return out;
}

BinaryMask rotate_mask(const BinaryMask& mask, double angle_degrees) {
  BinaryMask out(mask.height(), mask.width());
  const long h = static_cast<long>(mask.height()), w = static_cast<long>(mask.width());
  for_each_source(mask.height(), mask.width(), angle_degrees,
                  [&](std::size_t r, std::size_t c, double sy, double sx) {
                    const long y = std::lround(sy), x = std::lround(sx);
                    if (y >= 0 && x >= 0 && y < h && x < w)
                      out.set(r, c, mask(static_cast<std::size_t>(y), static_cast<std::size_t>(x)));
                  });
  return out;
}

GrayImage pad_to_square(const GrayImage& image) {
  const std::size_t side = std::max(image.height(), image.width());
  const std::size_t oy = (side - image.height()) / 2, ox = (side - image.width()) / 2;
  GrayImage out(side, side);
  for (std::size_t r = 0; r < image.height(); ++r)
    for (std::size_t c = 0; c < image.width(); ++c) out(r + oy, c + ox) = image(r, c);
  return out;
}

BinaryMask pad_to_square(const BinaryMask& mask) {
  const std::size_t side = std::max(mask.height(), mask.width());
  const std::size_t oy = (side - mask.height()) / 2, ox = (side - mask.width()) / 2;
  BinaryMask out(side, side);
  for (std::size_t r = 0; r < mask.height(); ++r)
    for (std::size_t c = 0; c < mask.width(); ++c) out.set(r + oy, c + ox, mask(r, c));
  return out;
}

PrincipalAxis principal_axis(const BinaryMask& mask) {
  const std::size_t n = mask.count();
  if (n == 0) fail(ErrorKind::data, "principal_axis: mask has no foreground pixels");
  double mx = 0, my = 0;
  for (std::size_t r = 0; r < mask.height(); ++r)
    for (std::size_t c = 0; c < mask.width(); ++c)
      if (mask(r, c)) {
        mx += static_cast<double>(c);
        my += static_cast<double>(r);
      }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t r = 0; r < mask.height(); ++r)
    for (std::size_t c = 0; c < mask.width(); ++c)
      if (mask(r, c)) {
        const double dx = static_cast<double>(c) - mx, dy = static_cast<double>(r) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
      }
  sxx /= static_cast<double>(n);
  sxy /= static_cast<double>(n);
  syy /= static_cast<double>(n);

  PrincipalAxis axis;
  const double mean = (sxx + syy) / 2.0;
  const double spread = std::hypot((sxx - syy) / 2.0, sxy);
  axis.major_variance = mean + spread;
  axis.minor_variance = mean - spread;
  if (spread <= 1e-12 * std::max(mean, 1e-300)) {
    axis.warning = Warning::isotropic_mask;
    return axis;
  }
  double ex, ey;
  if (std::abs(sxy) > 1e-15 * mean) {
    ex = axis.major_variance - syy;
    ey = sxy;
  } else if (sxx >= syy) {
    ex = 1.0, ey = 0.0;
  } else {
    ex = 0.0, ey = 1.0;
  }
  const double norm = std::hypot(ex, ey);
  ex /= norm;
  ey /= norm;
  if (ey < 0.0 || (ey == 0.0 && ex < 0.0)) ex = -ex, ey = -ey;
  axis.direction_x = ex;
  axis.direction_y = ey;
  double angle = std::atan2(-ex, ey) * 180.0 / std::numbers::pi;
  if (angle <= -90.0 + 1e-9) angle += 180.0;
  axis.alignment_angle = angle;
  return axis;
}

namespace {

struct AlignedCanvas {
  GrayImage image;
  BinaryMask mask;
  double angle;
  Warning warning;
};

AlignedCanvas align_full_resolution(const GrayImage& image, const BinaryMask& mask,
                                    double extra_angle) {
  if (mask.height() != image.height() || mask.width() != image.width())
    fail(ErrorKind::shape, "pca_align: mask size does not match the image");
  const PrincipalAxis axis = principal_axis(mask);
  const double angle = axis.alignment_angle + extra_angle;
  return {rotate_about_center(pad_to_square(image), angle), rotate_mask(pad_to_square(mask), angle),
          axis.alignment_angle, axis.warning};
}

}  // namespace

Alignment pca_align(const GrayImage& image, const BinaryMask& mask, std::size_t target) {
  AlignedCanvas canvas = align_full_resolution(image, mask, 0.0);
  return {resize(canvas.image, target, target), resize_nearest(canvas.mask, target, target),
          canvas.angle, canvas.warning};
}

AugmentationPlan::AugmentationPlan(double angle_step_degrees) : step_(angle_step_degrees) {
  if (!(step_ > 0.0) || step_ > 360.0)
    fail(ErrorKind::invalid, "augmentation: angle step must lie in (0, 360]");
  const double m = 360.0 / step_;
  const double rounded = std::round(m);
  if (std::abs(rounded * step_ - 360.0) > 1e-9)
    fail(ErrorKind::invalid,
         "augmentation: angle step " + std::to_string(step_) + " does not divide 360");
  variants_ = static_cast<std::size_t>(rounded);
}

std::vector<GrayImage> augment(const GrayImage& image, const AugmentationPlan& plan) {
  std::vector<GrayImage> out;
  out.reserve(plan.variants());
  out.push_back(image);
  for (std::size_t k = 1; k < plan.variants(); ++k)
    out.push_back(rotate_about_center(image, plan.angle(k)));
  return out;
}

Checked<GrayImage> preprocess(const RasterImage& raster, const BinaryMask* mask,
                              const PreprocessOptions& options) {
  if (options.align && mask == nullptr)
    fail(ErrorKind::data, "preprocess: alignment requested but the sample has no mask");
  auto normalized = contrast_normalize(raster_to_gray(raster));
  if (!options.align)
    return {resize(normalized.value, options.target, options.target), normalized.warning};
  Alignment a = pca_align(normalized.value, *mask, options.target);
  const Warning w = normalized.warning != Warning::none ? normalized.warning : a.warning;
  return {std::move(a.image), w};
}

std::vector<GrayImage> preprocess_variants(const RasterImage& raster, const BinaryMask* mask,
                                           const PreprocessOptions& options,
                                           const AugmentationPlan& plan, AugmentOrder order) {
  if (order == AugmentOrder::after_resize) return augment(preprocess(raster, mask, options).value, plan);
  if (options.align && mask == nullptr)
    fail(ErrorKind::data, "preprocess: alignment requested but the sample has no mask");
  const GrayImage normalized = contrast_normalize(raster_to_gray(raster)).value;
  std::vector<GrayImage> out;
  out.reserve(plan.variants());
  for (std::size_t k = 0; k < plan.variants(); ++k) {
    const GrayImage turned = options.align
                                 ? align_full_resolution(normalized, *mask, plan.angle(k)).image
                                 : rotate_about_center(normalized, plan.angle(k));
    out.push_back(resize(turned, options.target, options.target));
  }
  return out;
}

}  // namespace hep2
