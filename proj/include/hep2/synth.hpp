#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hep2/dataset.hpp"
#include "hep2/image.hpp"

namespace hep2 {

inline const std::array<std::string, 6> kStainingPatterns = {
    "Homogeneous", "Speckled", "Nucleolar", "Centromere", "NuclearMembrane", "Golgi"};

// Parameterized caricatures of the six staining patterns:
//   0 uniform fill        1 dense small speckles   2 3-6 large blobs
//   3 many tiny dots      4 bright annulus         5 1-3 off-center blobs
// Each cell is an ellipse whose content is drawn in a cell-local frame, so
// turning the cell is the same as rotating the rendered image.
struct SynthOptions {
  std::size_t classes = 6;
  std::size_t per_class = 100;
  std::size_t size = 78;
  std::uint64_t seed = 1;
  // Cell orientation is drawn from orientation_center +- orientation_jitter/2
  // (degrees); 360 means uniformly random.
  double orientation_center = 0.0;
  double orientation_jitter = 360.0;
  double center_jitter = 3.0;  // pixels
  double noise = 0.03;         // additive gaussian sigma
  // Second "laboratory": smaller cells, gamma-compressed intensities, more
  // noise, and RGB files whose green channel carries the signal.
  bool shifted = false;
  std::size_t first_index = 0;  // offsets ids and per-sample streams
};

struct SynthSample {
  std::string id;
  GrayImage image;  // [0, 1]
  BinaryMask mask;
  std::size_t label = 0;
  double orientation = 0.0;
};

// Renders sample `index` of class `label` deterministically from options.seed.
// `index` is absolute (synth_samples passes first_index + i); the id is
// "s" followed by label * per_class + index.
SynthSample synth_render(std::size_t label, std::size_t index, const SynthOptions& options);
// Same, with the orientation fixed instead of drawn.
SynthSample synth_render_at(std::size_t label, std::size_t index, double orientation,
                            const SynthOptions& options);

// classes * per_class samples, class-major order.
std::vector<SynthSample> synth_samples(const SynthOptions& options);

// 8-bit raster of a sample: gray, or RGB (signal in green) when shifted.
RasterImage synth_raster(const SynthSample& sample, const SynthOptions& options);

// Writes images/, masks/ and manifest.csv under dir and returns the manifest.
DatasetManifest synth_generate(const std::filesystem::path& dir, const SynthOptions& options);

// In-memory equivalent of synth_generate followed by preprocessing.
std::vector<LabeledImage> synth_dataset(const SynthOptions& options,
                                        const PreprocessOptions& preprocess_options = {});

}  // namespace hep2
