#include "hep2/network.hpp"

#include <cmath>
#include <string>

#include "hep2/kernels.hpp"
#include "hep2/numerics.hpp"

namespace hep2 {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::convolution: return "conv";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::fully_connected: return "fc";
    case LayerKind::output: return "output";
  }
  return "unknown";
}

NetworkSpec NetworkSpec::reference(std::size_t classes) {
  NetworkSpec spec;
  spec.input_height = 78;
  spec.input_width = 78;
  spec.layers = {LayerSpec::conv(7, 6), LayerSpec::pool(2), LayerSpec::conv(4, 16),
                 LayerSpec::pool(3),    LayerSpec::conv(3, 32), LayerSpec::pool(3),
                 LayerSpec::dense(150), LayerSpec::out(classes)};
  return spec;
}

std::size_t NetworkSpec::classes() const {
  if (layers.empty() || layers.back().kind != LayerKind::output) return 0;
  return layers.back().size;
}

std::vector<LayerGeometry> resolve(const NetworkSpec& spec) {
  auto bad = [](std::size_t index, const std::string& why) {
    fail(ErrorKind::spec, "layer " + std::to_string(index + 1) + ": " + why);
  };
  if (spec.input_height == 0 || spec.input_width == 0)
    fail(ErrorKind::spec, "input size must be positive");
  if (spec.layers.empty() || spec.layers.back().kind != LayerKind::output)
    fail(ErrorKind::spec, "the last layer must be a softmax output layer");

  std::vector<LayerGeometry> out;
  std::size_t depth = 1, h = spec.input_height, w = spec.input_width;
  bool flat = false;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const LayerSpec& ls = spec.layers[l];
    LayerGeometry g{ls, depth, h, w};
    if (ls.size == 0) bad(l, to_string(ls.kind) + " size must be positive");
    switch (ls.kind) {
      case LayerKind::convolution:
        if (flat) bad(l, "convolution after a fully-connected layer");
        if (ls.maps == 0) bad(l, "convolution needs at least one output map");
        if (ls.size > h || ls.size > w)
          bad(l, "filter " + std::to_string(ls.size) + " larger than its " + std::to_string(h) +
                     "x" + std::to_string(w) + " input");
        g.out_depth = ls.maps;
        g.out_h = h - ls.size + 1;
        g.out_w = w - ls.size + 1;
        g.fan_in = depth * ls.size * ls.size;
        g.weight_count = depth * ls.maps * ls.size * ls.size;
        g.bias_count = ls.maps;
        break;
      case LayerKind::maxpool:
        if (flat) bad(l, "pooling after a fully-connected layer");
        if (ls.size > h || ls.size > w)
          bad(l, "pooling region " + std::to_string(ls.size) + " larger than its " +
                     std::to_string(h) + "x" + std::to_string(w) + " input");
        g.out_depth = depth;
        g.out_h = h / ls.size;
        g.out_w = w / ls.size;
        break;
      case LayerKind::fully_connected:
      case LayerKind::output:
        if (ls.kind == LayerKind::output && l + 1 != spec.layers.size())
          bad(l, "output layer must be last");
        g.out_depth = ls.size;
        g.out_h = g.out_w = 1;
        g.fan_in = depth * h * w;
        g.weight_count = g.fan_in * ls.size;
        g.bias_count = ls.size;
        flat = true;
        break;
      default:
        bad(l, "unknown layer kind");
    }
    depth = g.out_depth;
    h = g.out_h;
    w = g.out_w;
    out.push_back(g);
  }
  return out;
}

std::size_t param_count(const NetworkSpec& spec) {
  std::size_t n = 0;
  for (const auto& g : resolve(spec)) n += g.weight_count + g.bias_count;
  return n;
}

std::size_t NetworkParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.biases.size();
  return n;
}

NetworkParams zeros_like(const NetworkParams& params) {
  NetworkParams z;
  z.layers.reserve(params.layers.size());
  for (const auto& l : params.layers)
    z.layers.push_back({std::vector<double>(l.weights.size()), std::vector<double>(l.biases.size())});
  return z;
}

bool same_shape(const NetworkParams& a, const NetworkParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i)
    if (a.layers[i].weights.size() != b.layers[i].weights.size() ||
        a.layers[i].biases.size() != b.layers[i].biases.size())
      return false;
  return true;
}

void add_in_place(NetworkParams& target, const NetworkParams& other) {
  if (!same_shape(target, other)) fail(ErrorKind::shape, "add_in_place: parameter shapes differ");
  for (std::size_t i = 0; i < target.layers.size(); ++i) {
    auto& t = target.layers[i];
    const auto& o = other.layers[i];
    for (std::size_t p = 0; p < t.weights.size(); ++p) t.weights[p] += o.weights[p];
    for (std::size_t p = 0; p < t.biases.size(); ++p) t.biases[p] += o.biases[p];
  }
}

void scale_in_place(NetworkParams& target, double factor) {
  for (auto& l : target.layers) {
    for (double& v : l.weights) v *= factor;
    for (double& v : l.biases) v *= factor;
  }
}

NetworkParams zero_params(const NetworkSpec& spec) {
  NetworkParams p;
  for (const auto& g : resolve(spec))
    if (g.spec.trainable())
      p.layers.push_back({std::vector<double>(g.weight_count), std::vector<double>(g.bias_count)});
  return p;
}

NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  NetworkParams p;
  for (const auto& g : resolve(spec)) {
    if (!g.spec.trainable()) continue;
    const double half = 1.0 / std::sqrt(static_cast<double>(g.fan_in));
    std::uniform_real_distribution<double> dist(-half, half);
    LayerParams lp{std::vector<double>(g.weight_count), std::vector<double>(g.bias_count, 0.0)};
    for (double& v : lp.weights) v = dist(rng);
    p.layers.push_back(std::move(lp));
  }
  return p;
}

namespace {

void check_params(const std::vector<LayerGeometry>& geo, const NetworkParams& params) {
  std::size_t slot = 0;
  for (std::size_t l = 0; l < geo.size(); ++l) {
    if (!geo[l].spec.trainable()) continue;
    if (slot >= params.layers.size() || params.layers[slot].weights.size() != geo[l].weight_count ||
        params.layers[slot].biases.size() != geo[l].bias_count)
      fail(ErrorKind::shape, "parameters do not match the network spec at layer " +
                                 std::to_string(l + 1));
    ++slot;
  }
  if (slot != params.layers.size())
    fail(ErrorKind::shape, "parameters hold more layers than the network spec");
}

kernels::ConvShape conv_shape(const LayerGeometry& g) {
  return {g.in_depth, g.out_depth, g.in_h, g.in_w, g.spec.size};
}

}  // namespace

ForwardTrace forward(const NetworkParams& params, const NetworkSpec& spec, const Map2D& image,
                     const DropoutConfig& dropout, Mode mode, std::mt19937_64* rng) {
  const auto geo = resolve(spec);
  check_params(geo, params);
  if (image.height() != spec.input_height || image.width() != spec.input_width)
    fail(ErrorKind::shape, "forward: input is " + std::to_string(image.height()) + "x" +
                               std::to_string(image.width()) + ", network expects " +
                               std::to_string(spec.input_height) + "x" +
                               std::to_string(spec.input_width));
  if (!(dropout.ratio >= 0.0 && dropout.ratio < 1.0))
    fail(ErrorKind::invalid, "forward: dropout ratio must lie in [0, 1)");
  const bool use_dropout = mode == Mode::train && dropout.ratio > 0.0;
  if (use_dropout && rng == nullptr)
    fail(ErrorKind::invalid, "forward: train-mode dropout needs a random generator");

  ForwardTrace trace;
  trace.mode = mode;
  trace.input = FeatureStack(image);
  trace.layers.resize(geo.size());
  std::size_t slot = 0;
  for (std::size_t l = 0; l < geo.size(); ++l) {
    const LayerGeometry& g = geo[l];
    const FeatureStack& in = l == 0 ? trace.input : trace.layers[l - 1].post;
    LayerTrace& t = trace.layers[l];
    switch (g.spec.kind) {
      case LayerKind::convolution: {
        const LayerParams& p = params.layers[slot++];
        t.pre = FeatureStack(g.out_depth, g.out_h, g.out_w);
        kernels::parallel::conv_forward(conv_shape(g), in.values(), p.weights, p.biases,
                                        t.pre.values());
        t.post = t.pre;
        for (double& v : t.post.values()) v = activation(v);
        break;
      }
      case LayerKind::maxpool: {
        auto [pooled, pool] = maxpool(in, g.spec.size);
        t.post = std::move(pooled);
        t.pool = std::move(pool);
        break;
      }
      case LayerKind::fully_connected:
      case LayerKind::output: {
        const LayerParams& p = params.layers[slot++];
        t.pre = FeatureStack(g.out_depth, 1, 1);
        kernels::parallel::dense_forward(g.fan_in, g.out_depth, in.values(), p.weights, p.biases,
                                         t.pre.values());
        if (g.spec.kind == LayerKind::output) {
          t.post = t.pre;
          trace.probabilities = softmax(t.pre.values());
          break;
        }
        t.post = t.pre;
        for (double& v : t.post.values()) v = activation(v);
        if (use_dropout) {
          const double keep_scale = 1.0 / (1.0 - dropout.ratio);
          std::uniform_real_distribution<double> u(0.0, 1.0);
          t.dropout_scale.resize(g.out_depth);
          auto post = t.post.values();
          for (std::size_t i = 0; i < g.out_depth; ++i) {
            t.dropout_scale[i] = u(*rng) < dropout.ratio ? 0.0 : keep_scale;
            post[i] *= t.dropout_scale[i];
          }
        }
        break;
      }
    }
  }
  return trace;
}

NetworkParams backward(const ForwardTrace& trace, const NetworkParams& params,
                       const NetworkSpec& spec, std::span<const double> one_hot_label) {
  const auto geo = resolve(spec);
  check_params(geo, params);
  if (trace.layers.size() != geo.size())
    fail(ErrorKind::shape, "backward: trace does not belong to this network spec");
  if (one_hot_label.size() != trace.probabilities.size())
    fail(ErrorKind::shape, "backward: label has " + std::to_string(one_hot_label.size()) +
                               " entries, network outputs " +
                               std::to_string(trace.probabilities.size()));

  NetworkParams grads = zeros_like(params);
  FeatureStack delta(trace.probabilities.size(), 1, 1);
  for (std::size_t i = 0; i < trace.probabilities.size(); ++i)
    delta.values()[i] = trace.probabilities[i] - one_hot_label[i];

  std::size_t slot = params.layers.size();
  for (std::size_t l = geo.size(); l-- > 0;) {
    const LayerGeometry& g = geo[l];
    const LayerTrace& t = trace.layers[l];
    const FeatureStack& in = l == 0 ? trace.input : trace.layers[l - 1].post;
    const bool need_input = l > 0;
    switch (g.spec.kind) {
      case LayerKind::output:
      case LayerKind::fully_connected: {
        --slot;
        auto d = delta.values();
        if (g.spec.kind == LayerKind::fully_connected) {
          auto pre = t.pre.values();
          for (std::size_t i = 0; i < d.size(); ++i) {
            if (!t.dropout_scale.empty()) d[i] *= t.dropout_scale[i];
            d[i] *= activation_derivative(pre[i]);
          }
        }
        FeatureStack next(g.in_depth, g.in_h, g.in_w);
        std::span<double> grad_x = need_input ? next.values() : std::span<double>{};
        kernels::parallel::dense_backward(g.fan_in, g.out_depth, in.values(),
                                          params.layers[slot].weights, d,
                                          grads.layers[slot].weights, grads.layers[slot].biases,
                                          grad_x);
        delta = std::move(next);
        break;
      }
      case LayerKind::convolution: {
        --slot;
        auto d = delta.values();
        auto post = t.post.values();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= activation_derivative_from_output(post[i]);
        const auto s = conv_shape(g);
        kernels::parallel::conv_backward_filters(s, in.values(), d, grads.layers[slot].weights,
                                                 grads.layers[slot].biases);
        if (need_input) {
          FeatureStack next(g.in_depth, g.in_h, g.in_w);
          kernels::parallel::conv_backward_input(s, params.layers[slot].weights, d, next.values());
          delta = std::move(next);
        }
        break;
      }
      case LayerKind::maxpool:
        delta = backward_maxpool(t.pool, delta);
        break;
    }
  }
  return grads;
}

NetworkParams backward(const ForwardTrace& trace, const NetworkParams& params,
                       const NetworkSpec& spec, std::size_t label) {
  if (label >= trace.probabilities.size())
    fail(ErrorKind::shape, "backward: label " + std::to_string(label) + " out of range");
  std::vector<double> one_hot(trace.probabilities.size(), 0.0);
  one_hot[label] = 1.0;
  return backward(trace, params, spec, one_hot);
}

}  // namespace hep2
