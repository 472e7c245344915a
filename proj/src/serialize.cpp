#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "hep2/network.hpp"

namespace hep2 {

namespace {

constexpr char kMagic[8] = {'H', 'E', 'P', '2', 'C', 'N', 'N', '\0'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <class T>
  void le(T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
      out_.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
  }
  void f32(double v) { le(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  template <class T>
  T le(const char* what) {
    need(sizeof(T), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  double f32(const char* what) { return std::bit_cast<float>(le<std::uint32_t>(what)); }
  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n)
      fail(ErrorKind::format, std::string("model file truncated while reading ") + what);
  }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const Model& model) {
  const auto geo = resolve(model.spec);
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.le<std::uint32_t>(kModelFormatVersion);
  w.le<std::uint32_t>(model.epoch);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(model.spec.input_height));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(model.spec.input_width));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(model.spec.layers.size()));
  for (const auto& l : model.spec.layers) {
    w.le<std::uint8_t>(static_cast<std::uint8_t>(l.kind));
    w.le<std::uint32_t>(static_cast<std::uint32_t>(l.size));
    w.le<std::uint32_t>(static_cast<std::uint32_t>(l.maps));
  }
  std::size_t slot = 0;
  for (const auto& g : geo) {
    if (!g.spec.trainable()) continue;
    if (slot >= model.params.layers.size())
      fail(ErrorKind::shape, "serialize: parameters do not match the spec");
    const LayerParams& p = model.params.layers[slot++];
    if (p.weights.size() != g.weight_count || p.biases.size() != g.bias_count)
      fail(ErrorKind::shape, "serialize: parameters do not match the spec");
    w.le<std::uint64_t>(p.weights.size());
    for (double v : p.weights) w.f32(v);
    w.le<std::uint64_t>(p.biases.size());
    for (double v : p.biases) w.f32(v);
  }
  return w.take();
}

Model deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.take(sizeof kMagic, "magic");
  if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0)
    fail(ErrorKind::format, "not a model file (bad magic)");
  const auto version = r.le<std::uint32_t>("version");
  if (version != kModelFormatVersion)
    fail(ErrorKind::format, "unsupported model format version " + std::to_string(version));
  Model m;
  m.epoch = r.le<std::uint32_t>("epoch");
  m.spec.input_height = r.le<std::uint32_t>("input height");
  m.spec.input_width = r.le<std::uint32_t>("input width");
  const auto layers = r.le<std::uint32_t>("layer count");
  r.need(static_cast<std::size_t>(layers) * 9, "layer table");
  for (std::uint32_t i = 0; i < layers; ++i) {
    LayerSpec l;
    const auto kind = r.le<std::uint8_t>("layer kind");
    if (kind < 1 || kind > 4) fail(ErrorKind::format, "unknown layer kind " + std::to_string(kind));
    l.kind = static_cast<LayerKind>(kind);
    l.size = r.le<std::uint32_t>("layer size");
    l.maps = r.le<std::uint32_t>("layer maps");
    m.spec.layers.push_back(l);
  }
  std::vector<LayerGeometry> geo;
  try {
    geo = resolve(m.spec);
  } catch (const Error& e) {
    fail(ErrorKind::format, std::string("model file holds an invalid spec: ") + e.what());
  }
  for (const auto& g : geo) {
    if (!g.spec.trainable()) continue;
    LayerParams p;
    const auto nw = r.le<std::uint64_t>("weight count");
    if (nw != g.weight_count) fail(ErrorKind::format, "weight count does not match the spec");
    r.need(nw * 4, "weights");
    p.weights.resize(nw);
    for (auto& v : p.weights) v = r.f32("weights");
    const auto nb = r.le<std::uint64_t>("bias count");
    if (nb != g.bias_count) fail(ErrorKind::format, "bias count does not match the spec");
    r.need(nb * 4, "biases");
    p.biases.resize(nb);
    for (auto& v : p.biases) v = r.f32("biases");
    m.params.layers.push_back(std::move(p));
  }
  if (!r.done()) fail(ErrorKind::format, "trailing bytes after model data");
  return m;
}

void save_model(const std::filesystem::path& path, const Model& model) {
  const auto bytes = serialize(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot create model file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open model file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize(bytes);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace hep2
