#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hep2/image.hpp"
#include "hep2/imageproc.hpp"

namespace hep2 {

struct CellSample {
  std::string id;
  std::filesystem::path image;
  std::optional<std::filesystem::path> mask;
  std::size_t label = 0;
  std::string specimen;  // optional source metadata
};

// Manifest text format (comma separated, one record per line):
//
//   #classes,Homogeneous,Speckled,...      optional; fixes the class order
//   #channel,grayscale|green               optional; default green
//   id,image,mask,label[,specimen]         header row
//   c0001,images/c0001.pgm,masks/c0001.pgm,Homogeneous
//
// Other lines starting with '#' are comments. Relative paths resolve against
// the manifest's directory. An empty mask cell means "no mask". Without a
// #classes line the class table is the order of first appearance.
struct DatasetManifest {
  std::vector<std::string> classes;
  std::vector<CellSample> samples;
  // green: RGB rasters contribute their green channel, gray rasters pass
  // through. grayscale: RGB rasters are rejected.
  ChannelMode channel = ChannelMode::green;

  std::size_t class_index(const std::string& name) const;  // throws on unknown
};

DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& root,
                               bool check_files = true);
DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files = true);
// Paths are written relative to the manifest's directory when possible.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

struct SplitSpec {
  double train = 0.64;
  double validation = 0.16;
  double test = 0.20;
  std::uint64_t seed = 0;
  bool stratify = false;
};

struct SplitIndices {
  std::vector<std::size_t> train, validation, test;
};

// Seeded shuffle, then contiguous slices of floor(N*f) for train and
// validation with the remainder going to test. With stratify the rule runs
// per class (in class order) and the slices are concatenated.
SplitIndices split_indices(std::span<const std::size_t> labels, std::size_t classes,
                           const SplitSpec& spec);

struct Split {
  std::vector<CellSample> train, validation, test;
};

Split split(const DatasetManifest& manifest, const SplitSpec& spec);

// A preprocessed, network-ready image with its class.
struct LabeledImage {
  std::string id;
  GrayImage image;
  std::size_t label = 0;
};

// Reads one sample's raster (and mask when present or required) and runs the
// preprocessing pipeline. Alignment on a mask-less sample throws here, not at
// manifest load time.
LabeledImage load_sample(const CellSample& sample, ChannelMode channel,
                         const PreprocessOptions& options);

// Loads samples and expands each into plan.variants() rotated copies
// (ids suffixed "@<angle>"). Rasters are decoded in parallel.
std::vector<LabeledImage> load_samples(std::span<const CellSample> samples, ChannelMode channel,
                                       const PreprocessOptions& options,
                                       const AugmentationPlan& plan = AugmentationPlan{},
                                       AugmentOrder order = AugmentOrder::after_resize);

// Rotated copies of already preprocessed images; variant 0 keeps the id.
std::vector<LabeledImage> augment_dataset(std::span<const LabeledImage> images,
                                          const AugmentationPlan& plan);

}  // namespace hep2
