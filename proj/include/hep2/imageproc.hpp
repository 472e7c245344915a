#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "hep2/image.hpp"

namespace hep2 {

inline constexpr std::size_t kStandardSide = 78;

template <class T>
struct Checked {
  T value;
  Warning warning = Warning::none;
};

// (p - min) / (max - min). A constant image maps to zeros with
// Warning::constant_image.
Checked<GrayImage> contrast_normalize(const GrayImage& image);

// Bilinear resampling with corner-aligned grids; aspect ratio is not kept.
GrayImage resize(const GrayImage& image, std::size_t out_h, std::size_t out_w);
BinaryMask resize_nearest(const BinaryMask& mask, std::size_t out_h, std::size_t out_w);

// Rotation about the pixel-grid center ((W-1)/2, (H-1)/2). Positive angles
// turn the content counter-clockwise as displayed (row 0 at the top).
// Inverse mapping with bilinear sampling; samples outside the frame read 0.
// Multiples of 90 degrees use exact trig values, so on square images they
// permute pixels exactly.
GrayImage rotate_about_center(const GrayImage& image, double angle_degrees);
BinaryMask rotate_mask(const BinaryMask& mask, double angle_degrees);  // nearest neighbour

// Zero padding that centers the image on a square canvas of side max(H, W).
GrayImage pad_to_square(const GrayImage& image);
BinaryMask pad_to_square(const BinaryMask& mask);

struct PrincipalAxis {
  double direction_x = 0.0;  // unit leading eigenvector, direction_y >= 0
  double direction_y = 1.0;
  double major_variance = 0.0;
  double minor_variance = 0.0;
  // Rotation (degrees, in (-90, 90]) that turns the leading axis vertical.
  double alignment_angle = 0.0;
  Warning warning = Warning::none;
};

// Covariance of foreground pixel coordinates and its leading eigenvector.
// Empty mask throws. Equal eigenvalues give angle 0 + Warning::isotropic_mask.
PrincipalAxis principal_axis(const BinaryMask& mask);

struct Alignment {
  GrayImage image;   // aligned and resized to the target side
  BinaryMask mask;   // same geometry, nearest-neighbour
  double angle_degrees = 0.0;
  Warning warning = Warning::none;
};

// Rotates the image so the mask's principal direction is vertical, then
// resizes to target x target. The image is first padded to a square canvas
// so elongated cells are not clipped by the turn.
Alignment pca_align(const GrayImage& image, const BinaryMask& mask,
                    std::size_t target = kStandardSide);

class AugmentationPlan {
 public:
  // step must divide 360 (tolerance 1e-9).
  explicit AugmentationPlan(double angle_step_degrees = 360.0);

  double angle_step() const noexcept { return step_; }
  std::size_t variants() const noexcept { return variants_; }
  double angle(std::size_t k) const noexcept { return step_ * static_cast<double>(k); }

 private:
  double step_;
  std::size_t variants_;
};

// Variant k is the image rotated by k * step; variant 0 is a copy.
std::vector<GrayImage> augment(const GrayImage& image, const AugmentationPlan& plan);

enum class ChannelMode { grayscale, green };

struct PreprocessOptions {
  bool align = false;
  std::size_t target = kStandardSide;
};

// Channel selection -> contrast_normalize -> optional pca_align -> resize.
// align without a mask throws ErrorKind::data.
Checked<GrayImage> preprocess(const RasterImage& raster, const BinaryMask* mask,
                              const PreprocessOptions& options);

// Where augmentation rotations happen relative to the resize step.
enum class AugmentOrder { after_resize, before_resize };

// m preprocessed variants of one raster. after_resize rotates the finished
// 78x78 image; before_resize rotates the normalized (and aligned) full
// resolution image and resizes each variant.
std::vector<GrayImage> preprocess_variants(const RasterImage& raster, const BinaryMask* mask,
                                           const PreprocessOptions& options,
                                           const AugmentationPlan& plan, AugmentOrder order);

}  // namespace hep2
