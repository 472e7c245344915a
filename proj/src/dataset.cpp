#include "hep2/dataset.hpp"
#include "hep2/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

namespace hep2 {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  for (auto& c : cells) {
    while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
    while (!c.empty() && c.front() == ' ') c.erase(c.begin());
  }
  return cells;
}

std::filesystem::path resolve_path(const std::filesystem::path& root, const std::string& cell) {
  std::filesystem::path p(cell);
  return p.is_absolute() ? p : root / p;
}

}  // namespace

std::size_t DatasetManifest::class_index(const std::string& name) const {
  auto it = std::find(classes.begin(), classes.end(), name);
  if (it == classes.end()) fail(ErrorKind::data, "unknown label name '" + name + "'");
  return static_cast<std::size_t>(it - classes.begin());
}

DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& root,
                               bool check_files) {
  DatasetManifest m;
  bool fixed_classes = false, header_seen = false;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> missing;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (line.front() == '#') {
      if (cells[0] == "#classes") {
        m.classes.assign(cells.begin() + 1, cells.end());
        std::set<std::string> unique(m.classes.begin(), m.classes.end());
        if (unique.size() != m.classes.size() || m.classes.empty())
          fail(ErrorKind::data, "manifest line " + std::to_string(line_no) +
                                    ": class names must be non-empty and unique");
        fixed_classes = true;
      } else if (cells[0] == "#channel") {
        if (cells.size() < 2) fail(ErrorKind::data, "manifest: #channel needs a value");
        if (cells[1] == "grayscale") m.channel = ChannelMode::grayscale;
        else if (cells[1] == "green") m.channel = ChannelMode::green;
        else fail(ErrorKind::data, "manifest: unknown channel mode '" + cells[1] + "'");
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      if (cells.size() >= 4 && cells[0] == "id" && cells[1] == "image") continue;
      fail(ErrorKind::data, "manifest: expected header 'id,image,mask,label'");
    }
    if (cells.size() < 4 || cells.size() > 5)
      fail(ErrorKind::data, "manifest line " + std::to_string(line_no) + ": expected 4 or 5 fields");
    CellSample s;
    s.id = cells[0];
    if (s.id.empty()) fail(ErrorKind::data, "manifest line " + std::to_string(line_no) + ": empty id");
    if (!ids.insert(s.id).second) fail(ErrorKind::data, "manifest: duplicate id '" + s.id + "'");
    s.image = resolve_path(root, cells[1]);
    if (!cells[2].empty()) s.mask = resolve_path(root, cells[2]);
    if (cells.size() == 5) s.specimen = cells[4];
    const std::string& label = cells[3];
    auto it = std::find(m.classes.begin(), m.classes.end(), label);
    if (it == m.classes.end()) {
      if (fixed_classes)
        fail(ErrorKind::data, "manifest: sample '" + s.id + "' has unknown label '" + label + "'");
      m.classes.push_back(label);
      it = m.classes.end() - 1;
    }
    s.label = static_cast<std::size_t>(it - m.classes.begin());
    if (check_files) {
      if (!std::filesystem::exists(s.image)) missing.push_back(s.id + " (image " + s.image.string() + ")");
      if (s.mask && !std::filesystem::exists(*s.mask))
        missing.push_back(s.id + " (mask " + s.mask->string() + ")");
    }
    m.samples.push_back(std::move(s));
  }
  if (m.classes.empty()) fail(ErrorKind::data, "manifest defines no classes");
  if (!missing.empty()) {
    std::string msg = "manifest references missing files: ";
    for (std::size_t i = 0; i < missing.size() && i < 5; ++i) msg += (i ? "; " : "") + missing[i];
    if (missing.size() > 5) msg += "; ... (" + std::to_string(missing.size()) + " total)";
    fail(ErrorKind::data, msg);
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open manifest " + path.string());
  return parse_manifest(in, path.parent_path(), check_files);
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  const auto root = path.parent_path();
  auto rel = [&](const std::filesystem::path& p) {
    std::error_code ec;
    auto r = std::filesystem::relative(p, root.empty() ? "." : root, ec);
    return (ec || r.empty()) ? p.generic_string() : r.generic_string();
  };
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot create manifest " + path.string());
  out << "#classes";
  for (const auto& c : manifest.classes) out << ',' << c;
  out << "\n#channel," << (manifest.channel == ChannelMode::grayscale ? "grayscale" : "green") << "\n";
  out << "id,image,mask,label,specimen\n";
  for (const auto& s : manifest.samples) {
    out << s.id << ',' << rel(s.image) << ',' << (s.mask ? rel(*s.mask) : std::string{}) << ','
        << manifest.classes.at(s.label) << ',' << s.specimen << '\n';
  }
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

SplitIndices split_indices(std::span<const std::size_t> labels, std::size_t classes,
                           const SplitSpec& spec) {
  const double fractions[3] = {spec.train, spec.validation, spec.test};
  for (double f : fractions)
    if (!(f >= 0.0 && f <= 1.0)) fail(ErrorKind::invalid, "split: fractions must lie in [0, 1]");
  if (std::abs(spec.train + spec.validation + spec.test - 1.0) > 1e-9)
    fail(ErrorKind::invalid, "split: fractions must sum to 1");

  auto slice = [&](std::vector<std::size_t> pool, std::uint64_t stream, SplitIndices& out) {
    std::mt19937_64 rng(stream);
    std::shuffle(pool.begin(), pool.end(), rng);
    const double n = static_cast<double>(pool.size());
    const auto n_train = static_cast<std::size_t>(std::floor(n * spec.train + 1e-9));
    const auto n_val = static_cast<std::size_t>(std::floor(n * spec.validation + 1e-9));
    const auto a = pool.begin(), b = a + static_cast<std::ptrdiff_t>(n_train),
               c = b + static_cast<std::ptrdiff_t>(n_val);
    out.train.insert(out.train.end(), a, b);
    out.validation.insert(out.validation.end(), b, c);
    out.test.insert(out.test.end(), c, pool.end());
  };

  SplitIndices out;
  if (!spec.stratify) {
    std::vector<std::size_t> all(labels.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    slice(std::move(all), spec.seed, out);
    return out;
  }
  std::vector<std::vector<std::size_t>> per_class(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) fail(ErrorKind::data, "split: label outside the class table");
    per_class[labels[i]].push_back(i);
  }
  for (std::size_t k = 0; k < classes; ++k)
    slice(std::move(per_class[k]), derive_seed({spec.seed, k}), out);
  return out;
}

Split split(const DatasetManifest& manifest, const SplitSpec& spec) {
  std::vector<std::size_t> labels;
  labels.reserve(manifest.samples.size());
  for (const auto& s : manifest.samples) labels.push_back(s.label);
  const auto idx = split_indices(labels, manifest.classes.size(), spec);
  Split out;
  for (auto i : idx.train) out.train.push_back(manifest.samples[i]);
  for (auto i : idx.validation) out.validation.push_back(manifest.samples[i]);
  for (auto i : idx.test) out.test.push_back(manifest.samples[i]);
  return out;
}

namespace {

RasterImage read_checked(const CellSample& sample, ChannelMode channel) {
  RasterImage raster = read_netpbm(sample.image);
  if (raster.channels == 3 && channel == ChannelMode::grayscale)
    fail(ErrorKind::data, "sample '" + sample.id + "' is RGB but the manifest is grayscale");
  return raster;
}

std::optional<BinaryMask> read_sample_mask(const CellSample& sample, const RasterImage& raster,
                                           bool required) {
  if (!sample.mask) {
    if (required)
      fail(ErrorKind::data, "sample '" + sample.id + "': alignment requested but no mask is listed");
    return std::nullopt;
  }
  if (!required) return std::nullopt;
  BinaryMask mask = read_mask(*sample.mask);
  if (mask.height() != raster.height || mask.width() != raster.width)
    fail(ErrorKind::data, "sample '" + sample.id + "': mask size differs from the image");
  return mask;
}

std::string angle_tag(double angle) {
  std::ostringstream s;
  s << angle;
  return s.str();
}

}  // namespace

LabeledImage load_sample(const CellSample& sample, ChannelMode channel,
                         const PreprocessOptions& options) {
  const RasterImage raster = read_checked(sample, channel);
  const auto mask = read_sample_mask(sample, raster, options.align);
  try {
    auto processed = preprocess(raster, mask ? &*mask : nullptr, options);
    return {sample.id, std::move(processed.value), sample.label};
  } catch (const Error& e) {
    fail(e.kind(), "sample '" + sample.id + "': " + e.what());
  }
}

std::vector<LabeledImage> load_samples(std::span<const CellSample> samples, ChannelMode channel,
                                       const PreprocessOptions& options,
                                       const AugmentationPlan& plan, AugmentOrder order) {
  const std::size_t m = plan.variants();
  std::vector<LabeledImage> out(samples.size() * m);
  std::vector<std::string> errors(samples.size());
  const auto n = static_cast<std::int64_t>(samples.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < n; ++i) {
    const CellSample& s = samples[static_cast<std::size_t>(i)];
    try {
      const RasterImage raster = read_checked(s, channel);
      const auto mask = read_sample_mask(s, raster, options.align);
      auto variants = preprocess_variants(raster, mask ? &*mask : nullptr, options, plan, order);
      for (std::size_t k = 0; k < m; ++k) {
        auto& dst = out[static_cast<std::size_t>(i) * m + k];
        dst.id = k == 0 ? s.id : s.id + "@" + angle_tag(plan.angle(k));
        dst.image = std::move(variants[k]);
        dst.label = s.label;
      }
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = "sample '" + s.id + "': " + e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) fail(ErrorKind::data, e);
  return out;
}

std::vector<LabeledImage> augment_dataset(std::span<const LabeledImage> images,
                                          const AugmentationPlan& plan) {
  std::vector<LabeledImage> out;
  out.reserve(images.size() * plan.variants());
  for (const auto& img : images) {
    auto variants = augment(img.image, plan);
    for (std::size_t k = 0; k < variants.size(); ++k)
      out.push_back({k == 0 ? img.id : img.id + "@" + angle_tag(plan.angle(k)),
                     std::move(variants[k]), img.label});
  }
  return out;
}

}  // namespace hep2
