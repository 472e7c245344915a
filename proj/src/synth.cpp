#include "hep2/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "hep2/rng.hpp"

namespace hep2 {

namespace {

struct Spot {
  double lx, ly;  // cell-local position, pixels
  double sigma;
  double amplitude;
};

struct CellShape {
  double cx, cy;      // image position of the cell center
  double major, minor;  // semi-axes, major along local y
  double cos, sin;    // orientation
};

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

// Local frame of image offset (dx, dy); matches the inverse map used by
// rotate_about_center, so rendering at angle phi equals rotating the
// phi = 0 rendering by phi.
void to_local(const CellShape& c, double dx, double dy, double& lx, double& ly) {
  lx = dx * c.cos - dy * c.sin;
  ly = dx * c.sin + dy * c.cos;
}

void to_image(const CellShape& c, double lx, double ly, double& x, double& y) {
  x = c.cx + lx * c.cos + ly * c.sin;
  y = c.cy - lx * c.sin + ly * c.cos;
}

double radius(const CellShape& c, double lx, double ly) {
  return std::hypot(lx / c.minor, ly / c.major);
}

template <class Rng>
std::vector<Spot> scatter(Rng& rng, const CellShape& c, std::size_t count, double max_radius,
                          double sigma_lo, double sigma_hi, double amp_lo, double amp_hi) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> sig(sigma_lo, sigma_hi);
  std::uniform_real_distribution<double> amp(amp_lo, amp_hi);
  std::vector<Spot> spots;
  while (spots.size() < count) {
    const double lx = u(rng) * c.minor, ly = u(rng) * c.major;
    if (radius(c, lx, ly) > max_radius) continue;
    spots.push_back({lx, ly, sig(rng), amp(rng)});
  }
  return spots;
}

void stamp(Map2D& layer, const CellShape& c, const Spot& s) {
  double x, y;
  to_image(c, s.lx, s.ly, x, y);
  const double reach = 4.0 * s.sigma;
  const long h = static_cast<long>(layer.height()), w = static_cast<long>(layer.width());
  const long r0 = std::max(0L, static_cast<long>(std::floor(y - reach)));
  const long r1 = std::min(h - 1, static_cast<long>(std::ceil(y + reach)));
  const long c0 = std::max(0L, static_cast<long>(std::floor(x - reach)));
  const long c1 = std::min(w - 1, static_cast<long>(std::ceil(x + reach)));
  const double k = 1.0 / (2.0 * s.sigma * s.sigma);
  for (long r = r0; r <= r1; ++r)
    for (long q = c0; q <= c1; ++q) {
      const double dx = static_cast<double>(q) - x, dy = static_cast<double>(r) - y;
      layer(static_cast<std::size_t>(r), static_cast<std::size_t>(q)) +=
          s.amplitude * std::exp(-(dx * dx + dy * dy) * k);
    }
}

}  // namespace

SynthSample synth_render_at(std::size_t label, std::size_t index, double orientation,
                            const SynthOptions& o) {
  if (label >= 6 || label >= o.classes)
    fail(ErrorKind::invalid, "synth: class index " + std::to_string(label) + " has no generator");
  if (o.size < 16) fail(ErrorKind::invalid, "synth: image size must be at least 16");
  std::mt19937_64 rng(derive_seed({o.seed, 0x5EED, label, index}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const double side = static_cast<double>(o.size);
  const double scale = o.shifted ? 0.85 : 1.0;
  CellShape c;
  c.cx = (side - 1.0) / 2.0 + between(-o.center_jitter, o.center_jitter);
  c.cy = (side - 1.0) / 2.0 + between(-o.center_jitter, o.center_jitter);
  c.major = side * between(0.30, 0.37) * scale;
  c.minor = c.major * between(0.70, 0.88);
  c.cos = std::cos(deg2rad(orientation));
  c.sin = std::sin(deg2rad(orientation));

  double base = 0.0;
  std::vector<Spot> spots;
  double ring_level = 0.0, ring_radius = 0.0, ring_width = 1.0;
  switch (label) {
    case 0:  // homogeneous
      base = 0.75;
      break;
    case 1:  // speckled
      base = 0.35;
      spots = scatter(rng, c, 70 + rng() % 41, 0.9, 0.9, 1.2, 0.25, 0.5);
      break;
    case 2:  // nucleolar
      base = 0.15;
      spots = scatter(rng, c, 3 + rng() % 4, 0.6, 2.5, 3.5, 0.7, 0.9);
      break;
    case 3:  // centromere
      base = 0.08;
      spots = scatter(rng, c, 35 + rng() % 21, 0.9, 0.6, 0.8, 0.7, 1.0);
      break;
    case 4:  // nuclear membrane
      base = 0.15;
      ring_level = 0.85;
      ring_radius = between(0.80, 0.88);
      ring_width = between(0.06, 0.09);
      break;
    case 5: {  // golgi: blobs on one side of the cell
      base = 0.12;
      const std::size_t n = 1 + rng() % 3;
      for (std::size_t i = 0; i < n; ++i)
        spots.push_back({between(-0.35, 0.35) * c.minor, -between(0.30, 0.60) * c.major,
                         between(3.0, 4.5), between(0.8, 1.0)});
      break;
    }
  }
  const double gain = o.shifted ? between(0.4, 0.7) : between(0.6, 1.0);

  SynthSample s;
  s.label = label;
  s.orientation = orientation;
  s.mask = BinaryMask(o.size, o.size);
  Map2D texture(o.size, o.size);
  for (const auto& spot : spots) stamp(texture, c, spot);

  GrayImage img(o.size, o.size);
  std::normal_distribution<double> noise(0.0, o.shifted ? 2.0 * o.noise : o.noise);
  for (std::size_t r = 0; r < o.size; ++r) {
    for (std::size_t q = 0; q < o.size; ++q) {
      double lx, ly;
      to_local(c, static_cast<double>(q) - c.cx, static_cast<double>(r) - c.cy, lx, ly);
      const double rho = radius(c, lx, ly);
      s.mask.set(r, q, rho <= 1.0);
      const double edge = std::clamp((1.0 - rho) / 0.08, 0.0, 1.0);
      double v = base * edge + texture(r, q) * edge;
      if (ring_level > 0.0) {
        const double t = (rho - ring_radius) / ring_width;
        v += ring_level * std::exp(-t * t) * (rho <= 1.05 ? 1.0 : 0.0);
      }
      v = gain * v + 0.03;
      if (o.shifted) v = std::pow(std::max(v, 0.0), 0.7);
      img(r, q) = v;
    }
  }
  if (o.noise > 0.0)
    for (double& v : img.values()) v += noise(rng);
  for (double& v : img.values()) v = std::clamp(v, 0.0, 1.0);
  s.image = std::move(img);

  char id[32];
  std::snprintf(id, sizeof id, "s%06zu", label * o.per_class + index);
  s.id = id;
  return s;
}

SynthSample synth_render(std::size_t label, std::size_t index, const SynthOptions& o) {
  std::mt19937_64 rng(derive_seed({o.seed, 0x0A1E, label, index}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double orientation = o.orientation_jitter >= 360.0
                                 ? 360.0 * unit(rng)
                                 : o.orientation_center + o.orientation_jitter * (unit(rng) - 0.5);
  return synth_render_at(label, index, orientation, o);
}

std::vector<SynthSample> synth_samples(const SynthOptions& o) {
  if (o.classes == 0 || o.classes > 6)
    fail(ErrorKind::invalid, "synth: between 1 and 6 classes are available");
  std::vector<SynthSample> out(o.classes * o.per_class);
  const auto n = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto label = static_cast<std::size_t>(i) / o.per_class;
    const auto index = static_cast<std::size_t>(i) % o.per_class;
    out[static_cast<std::size_t>(i)] = synth_render(label, index + o.first_index, o);
  }
  return out;
}

RasterImage synth_raster(const SynthSample& sample, const SynthOptions& o) {
  RasterImage gray = gray_to_raster(sample.image, 8);
  if (!o.shifted) return gray;
  RasterImage rgb;
  rgb.height = gray.height;
  rgb.width = gray.width;
  rgb.channels = 3;
  rgb.max_value = 255;
  rgb.samples.resize(gray.samples.size() * 3);
  for (std::size_t i = 0; i < gray.samples.size(); ++i) {
    rgb.samples[3 * i + 0] = static_cast<std::uint16_t>(gray.samples[i] / 5);
    rgb.samples[3 * i + 1] = gray.samples[i];
    rgb.samples[3 * i + 2] = static_cast<std::uint16_t>(gray.samples[i] / 10);
  }
  return rgb;
}

DatasetManifest synth_generate(const std::filesystem::path& dir, const SynthOptions& o) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  if (!ec) std::filesystem::create_directories(dir / "masks", ec);
  if (ec) fail(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());

  const auto samples = synth_samples(o);
  DatasetManifest m;
  m.classes.assign(kStainingPatterns.begin(), kStainingPatterns.begin() + static_cast<long>(o.classes));
  m.channel = o.shifted ? ChannelMode::green : ChannelMode::grayscale;
  for (const auto& s : samples) {
    const auto image = dir / "images" / (s.id + (o.shifted ? ".ppm" : ".pgm"));
    const auto mask = dir / "masks" / (s.id + ".pgm");
    write_netpbm(image, synth_raster(s, o));
    write_mask(mask, s.mask);
    m.samples.push_back({s.id, image, mask, s.label, o.shifted ? "synthetic-shifted" : "synthetic"});
  }
  write_manifest(dir / "manifest.csv", m);
  return m;
}

std::vector<LabeledImage> synth_dataset(const SynthOptions& o, const PreprocessOptions& p) {
  const auto samples = synth_samples(o);
  std::vector<LabeledImage> out(samples.size());
  const auto n = static_cast<std::int64_t>(samples.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    auto processed = preprocess(synth_raster(s, o), &s.mask, p);
    out[static_cast<std::size_t>(i)] = {s.id, std::move(processed.value), s.label};
  }
  return out;
}

}  // namespace hep2
