#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hep2/map2d.hpp"

namespace hep2 {

enum class LayerKind : std::uint8_t {
  convolution = 1,
  maxpool = 2,
  fully_connected = 3,
  output = 4,  // fully connected + softmax
};

std::string to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::output;
  // convolution: filter side k; maxpool: region r;
  // fully_connected: neuron count; output: class count
  std::size_t size = 0;
  std::size_t maps = 0;  // convolution output map count, 0 otherwise

  static LayerSpec conv(std::size_t k, std::size_t maps) { return {LayerKind::convolution, k, maps}; }
  static LayerSpec pool(std::size_t r) { return {LayerKind::maxpool, r, 0}; }
  static LayerSpec dense(std::size_t n) { return {LayerKind::fully_connected, n, 0}; }
  static LayerSpec out(std::size_t n) { return {LayerKind::output, n, 0}; }

  bool trainable() const noexcept { return kind != LayerKind::maxpool; }
  bool operator==(const LayerSpec&) const = default;
};

struct NetworkSpec {
  std::size_t input_height = 78;
  std::size_t input_width = 78;
  std::vector<LayerSpec> layers;

  // C(7,6) P(2) C(4,16) P(3) C(3,32) P(3) F(150) OUT(n) on 78x78 input.
  static NetworkSpec reference(std::size_t classes = 6);

  std::size_t classes() const;
  bool operator==(const NetworkSpec&) const = default;
};

// Resolved per-layer dimensions.
struct LayerGeometry {
  LayerSpec spec;
  std::size_t in_depth = 0, in_h = 0, in_w = 0;
  std::size_t out_depth = 0, out_h = 0, out_w = 0;
  std::size_t fan_in = 0;
  std::size_t weight_count = 0;
  std::size_t bias_count = 0;

  std::size_t in_count() const noexcept { return in_depth * in_h * in_w; }
  std::size_t out_count() const noexcept { return out_depth * out_h * out_w; }
};

// Validates the layer chain and returns resolved geometry. Throws
// ErrorKind::spec naming the failing layer.
std::vector<LayerGeometry> resolve(const NetworkSpec& spec);

std::size_t param_count(const NetworkSpec& spec);

struct LayerParams {
  std::vector<double> weights;
  std::vector<double> biases;
  bool operator==(const LayerParams&) const = default;
};

// Weights and biases of the trainable layers, in layer order. Gradients use
// the same type.
struct NetworkParams {
  std::vector<LayerParams> layers;

  std::size_t scalar_count() const;
  bool operator==(const NetworkParams&) const = default;
};

NetworkParams zeros_like(const NetworkParams& params);
void add_in_place(NetworkParams& target, const NetworkParams& other);
void scale_in_place(NetworkParams& target, double factor);
bool same_shape(const NetworkParams& a, const NetworkParams& b);

// Uniform weights in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases.
NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed);
NetworkParams zero_params(const NetworkSpec& spec);

struct DropoutConfig {
  double ratio = 0.0;  // fraction of hidden fully-connected activations zeroed, [0, 1)
};

enum class Mode { train, eval };

struct LayerTrace {
  FeatureStack pre;   // before activation (conv / dense / output logits)
  FeatureStack post;  // layer output as seen by the next layer
  PoolTrace pool;     // maxpool only
  std::vector<double> dropout_scale;  // per unit: 0 or 1/(1-ratio); empty if unused
};

struct ForwardTrace {
  FeatureStack input;
  std::vector<LayerTrace> layers;
  std::vector<double> probabilities;
  Mode mode = Mode::eval;

  std::span<const double> logits() const { return layers.back().pre.values(); }
};

// Dense vectors travel as depth-n stacks of 1x1 maps.
ForwardTrace forward(const NetworkParams& params, const NetworkSpec& spec, const Map2D& image,
                     const DropoutConfig& dropout = {}, Mode mode = Mode::eval,
                     std::mt19937_64* rng = nullptr);

// dE/dparams for E = cross-entropy(probabilities, label). Uses
// dE/dlogits = probabilities - label and replays the recorded dropout masks.
NetworkParams backward(const ForwardTrace& trace, const NetworkParams& params,
                       const NetworkSpec& spec, std::span<const double> one_hot_label);
NetworkParams backward(const ForwardTrace& trace, const NetworkParams& params,
                       const NetworkSpec& spec, std::size_t label);

// A network together with its description; epoch is 0 unless the model is a
// training snapshot.
struct Model {
  NetworkSpec spec;
  NetworkParams params;
  std::uint32_t epoch = 0;
};

// Model file layout (all integers little-endian):
//   char[8]  magic "HEP2CNN\0"
//   u32      format version (1)
//   u32      epoch
//   u32      input height, u32 input width
//   u32      layer count, then per layer: u8 kind, u32 size, u32 maps
//   per trainable layer, in order:
//     u64 weight count, f32[...] weights
//     u64 bias count,   f32[...] biases
// Weights are stored in single precision.
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize(const Model& model);
Model deserialize(std::span<const std::uint8_t> bytes);
void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace hep2
