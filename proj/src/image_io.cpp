#include "hep2/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace hep2 {

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), std::uint8_t{1}));
}

namespace {

void skip_space_and_comments(std::istream& in) {
  for (;;) {
    int ch = in.peek();
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
    } else if (ch != EOF && std::isspace(ch)) {
      in.get();
    } else {
      return;
    }
  }
}

std::uint32_t read_header_value(std::istream& in, const char* field) {
  skip_space_and_comments(in);
  std::uint64_t value = 0;
  bool any = false;
  while (std::isdigit(in.peek())) {
    value = value * 10 + static_cast<std::uint64_t>(in.get() - '0');
    any = true;
    if (value > 0xFFFFFFFFull) break;
  }
  if (!any || value == 0 || value > 0xFFFFFFFFull)
    fail(ErrorKind::format, std::string("netpbm: bad header field '") + field + "'");
  return static_cast<std::uint32_t>(value);
}

}  // namespace

RasterImage decode_netpbm(std::istream& in) {
  char magic[2] = {0, 0};
  if (!in.read(magic, 2) || magic[0] != 'P')
    fail(ErrorKind::format, "netpbm: missing P magic");
  const char kind = magic[1];
  if (kind != '2' && kind != '3' && kind != '5' && kind != '6')
    fail(ErrorKind::format, std::string("netpbm: unsupported variant P") + kind);

  RasterImage img;
  img.channels = (kind == '3' || kind == '6') ? 3 : 1;
  img.width = read_header_value(in, "width");
  img.height = read_header_value(in, "height");
  img.max_value = read_header_value(in, "maxval");
  if (img.max_value > 65535) fail(ErrorKind::format, "netpbm: maxval above 65535");
  const std::size_t count = img.width * img.height * img.channels;
  img.samples.resize(count);

  if (kind == '2' || kind == '3') {
    for (std::size_t i = 0; i < count; ++i) {
      skip_space_and_comments(in);
      unsigned long v = 0;
      if (!(in >> v)) fail(ErrorKind::format, "netpbm: truncated ASCII raster");
      if (v > img.max_value) fail(ErrorKind::format, "netpbm: sample above maxval");
      img.samples[i] = static_cast<std::uint16_t>(v);
    }
    return img;
  }

  const int sep = in.get();
  if (sep == EOF || !std::isspace(sep)) fail(ErrorKind::format, "netpbm: missing header separator");
  const bool wide = img.max_value > 255;
  std::vector<unsigned char> raw(count * (wide ? 2 : 1));
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
    fail(ErrorKind::format, "netpbm: truncated binary raster");
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint16_t v = wide ? static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1])
                                 : raw[i];
    if (v > img.max_value) fail(ErrorKind::format, "netpbm: sample above maxval");
    img.samples[i] = v;
  }
  return img;
}

RasterImage read_netpbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open image " + path.string());
  try {
    return decode_netpbm(in);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

void encode_netpbm(std::ostream& out, const RasterImage& image) {
  if (image.channels != 1 && image.channels != 3)
    fail(ErrorKind::invalid, "netpbm: only 1- or 3-channel rasters can be written");
  if (image.samples.size() != image.width * image.height * image.channels)
    fail(ErrorKind::shape, "netpbm: sample count does not match dimensions");
  out << (image.channels == 1 ? "P5" : "P6") << '\n'
      << image.width << ' ' << image.height << '\n'
      << image.max_value << '\n';
  const bool wide = image.max_value > 255;
  std::vector<unsigned char> raw;
  raw.reserve(image.samples.size() * (wide ? 2 : 1));
  for (std::uint16_t v : image.samples) {
    if (wide) raw.push_back(static_cast<unsigned char>(v >> 8));
    raw.push_back(static_cast<unsigned char>(v & 0xFF));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

void write_netpbm(const std::filesystem::path& path, const RasterImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot create image " + path.string());
  encode_netpbm(out, image);
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

GrayImage raster_to_gray(const RasterImage& raster) {
  GrayImage g(raster.height, raster.width);
  const std::size_t ch = raster.channels == 3 ? 1 : 0;
  for (std::size_t r = 0; r < raster.height; ++r)
    for (std::size_t c = 0; c < raster.width; ++c) g(r, c) = raster.sample(r, c, ch);
  return g;
}

RasterImage gray_to_raster(const GrayImage& image, int bits) {
  if (bits != 8 && bits != 16) fail(ErrorKind::invalid, "gray_to_raster: bits must be 8 or 16");
  RasterImage r;
  r.height = image.height();
  r.width = image.width();
  r.channels = 1;
  r.max_value = bits == 8 ? 255 : 65535;
  r.samples.resize(image.size());
  auto v = image.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double clamped = std::clamp(v[i], 0.0, 1.0);
    r.samples[i] = static_cast<std::uint16_t>(std::lround(clamped * r.max_value));
  }
  return r;
}

BinaryMask raster_to_mask(const RasterImage& raster) {
  BinaryMask m(raster.height, raster.width);
  for (std::size_t r = 0; r < raster.height; ++r)
    for (std::size_t c = 0; c < raster.width; ++c) {
      bool on = false;
      for (std::size_t ch = 0; ch < raster.channels; ++ch) on = on || raster.sample(r, c, ch) != 0;
      m.set(r, c, on);
    }
  return m;
}

RasterImage mask_to_raster(const BinaryMask& mask) {
  RasterImage r;
  r.height = mask.height();
  r.width = mask.width();
  r.channels = 1;
  r.max_value = 255;
  r.samples.resize(r.height * r.width);
  for (std::size_t y = 0; y < r.height; ++y)
    for (std::size_t x = 0; x < r.width; ++x) r.samples[y * r.width + x] = mask(y, x) ? 255 : 0;
  return r;
}

GrayImage read_gray(const std::filesystem::path& path) { return raster_to_gray(read_netpbm(path)); }
BinaryMask read_mask(const std::filesystem::path& path) { return raster_to_mask(read_netpbm(path)); }

void write_gray(const std::filesystem::path& path, const GrayImage& image, int bits) {
  write_netpbm(path, gray_to_raster(image, bits));
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  write_netpbm(path, mask_to_raster(mask));
}

}  // namespace hep2
