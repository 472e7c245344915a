#include "hep2/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hep2/kernels.hpp"

namespace hep2 {

double activation(double x) { return kActivationScale * std::tanh(kActivationSlope * x); }

double activation_derivative(double x) {
  const double t = std::tanh(kActivationSlope * x);
  return kActivationScale * kActivationSlope * (1.0 - t * t);
}

double activation_derivative_from_output(double y) {
  const double t = y / kActivationScale;
  return kActivationScale * kActivationSlope * (1.0 - t * t);
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

FilterBank::FilterBank(const std::vector<std::vector<Map2D>>& filters) {
  if (filters.empty() || filters.front().empty())
    fail(ErrorKind::shape, "FilterBank: empty filter matrix");
  inputs_ = filters.size();
  outputs_ = filters.front().size();
  size_ = filters.front().front().height();
  weights_.resize(inputs_ * outputs_ * size_ * size_);
  for (std::size_t i = 0; i < inputs_; ++i) {
    if (filters[i].size() != outputs_)
      fail(ErrorKind::shape, "FilterBank: ragged filter matrix at input row " + std::to_string(i));
    for (std::size_t j = 0; j < outputs_; ++j) {
      const Map2D& f = filters[i][j];
      if (f.height() != size_ || f.width() != size_)
        fail(ErrorKind::shape, "FilterBank: filters must all be square and of equal size");
      std::copy(f.values().begin(), f.values().end(), filter(i, j).begin());
    }
  }
}

namespace {

kernels::ConvShape conv_shape(const FeatureStack& input, const FilterView& filters) {
  if (filters.inputs != input.depth())
    fail(ErrorKind::shape, "convolve: filter matrix has " + std::to_string(filters.inputs) +
                               " input rows but the stack has " + std::to_string(input.depth()) +
                               " maps (axis: input maps)");
  if (filters.size == 0 || filters.size > input.height() || filters.size > input.width())
    fail(ErrorKind::shape, "convolve: filter size " + std::to_string(filters.size) +
                               " does not fit a " + std::to_string(input.height()) + "x" +
                               std::to_string(input.width()) + " map (axis: spatial)");
  if (filters.weights.size() != filters.inputs * filters.outputs * filters.size * filters.size)
    fail(ErrorKind::shape, "convolve: filter buffer length does not match its dimensions");
  return {input.depth(), filters.outputs, input.height(), input.width(), filters.size};
}

}  // namespace

FeatureStack convolve_valid(const FeatureStack& input, const FilterView& filters,
                            std::span<const double> biases) {
  const auto s = conv_shape(input, filters);
  if (biases.size() != filters.outputs)
    fail(ErrorKind::shape, "convolve: " + std::to_string(biases.size()) + " biases for " +
                               std::to_string(filters.outputs) + " output maps (axis: output maps)");
  FeatureStack out(s.out_maps, s.out_h(), s.out_w());
  kernels::parallel::conv_forward(s, input.values(), filters.weights, biases, out.values());
  return out;
}

std::pair<FeatureStack, PoolTrace> maxpool(const FeatureStack& input, std::size_t region) {
  if (region == 0) fail(ErrorKind::invalid, "maxpool: region must be positive");
  if (region > input.height() || region > input.width())
    fail(ErrorKind::shape, "maxpool: region " + std::to_string(region) + " exceeds a " +
                               std::to_string(input.height()) + "x" +
                               std::to_string(input.width()) + " map");
  const std::size_t oh = input.height() / region, ow = input.width() / region;
  const std::size_t w = input.width();
  FeatureStack out(input.depth(), oh, ow);
  PoolTrace trace{region, input.height(), input.width(), input.depth(),
                  std::vector<std::uint32_t>(input.depth() * oh * ow)};
  for (std::size_t j = 0; j < input.depth(); ++j) {
    auto in = input.map(j);
    auto dst = out.map(j);
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        std::size_t best = (r * region) * w + c * region;
        for (std::size_t u = 0; u < region; ++u) {
          for (std::size_t v = 0; v < region; ++v) {
            const std::size_t idx = (r * region + u) * w + c * region + v;
            if (in[idx] > in[best]) best = idx;
          }
        }
        dst[r * ow + c] = in[best];
        trace.argmax[(j * oh + r) * ow + c] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return {std::move(out), std::move(trace)};
}

ConvGradients backward_convolve(const FeatureStack& input, const FilterView& filters,
                                const FeatureStack& upstream, bool want_input_gradient) {
  const auto s = conv_shape(input, filters);
  if (upstream.depth() != s.out_maps || upstream.height() != s.out_h() ||
      upstream.width() != s.out_w())
    fail(ErrorKind::shape, "backward_convolve: upstream gradient does not match the forward output");
  ConvGradients g;
  g.filters.resize(s.weight_count());
  g.biases.resize(s.out_maps);
  kernels::parallel::conv_backward_filters(s, input.values(), upstream.values(), g.filters,
                                           g.biases);
  if (want_input_gradient) {
    g.input = FeatureStack(input.depth(), input.height(), input.width());
    kernels::parallel::conv_backward_input(s, filters.weights, upstream.values(), g.input.values());
  }
  return g;
}

FeatureStack backward_maxpool(const PoolTrace& trace, const FeatureStack& upstream) {
  if (trace.region == 0 || upstream.depth() != trace.depth ||
      upstream.height() != trace.input_height / trace.region ||
      upstream.width() != trace.input_width / trace.region ||
      trace.argmax.size() != upstream.size())
    fail(ErrorKind::shape, "backward_maxpool: upstream gradient does not match the pool trace");
  FeatureStack grad(trace.depth, trace.input_height, trace.input_width);
  const std::size_t cells = upstream.map_size();
  for (std::size_t j = 0; j < trace.depth; ++j) {
    auto dst = grad.map(j);
    auto src = upstream.map(j);
    for (std::size_t p = 0; p < cells; ++p) dst[trace.argmax[j * cells + p]] += src[p];
  }
  return grad;
}

FeatureStack backward_activation(const FeatureStack& pre, const FeatureStack& upstream) {
  if (!pre.same_shape(upstream))
    fail(ErrorKind::shape, "backward_activation: upstream gradient does not match the input");
  FeatureStack grad = upstream;
  auto g = grad.values();
  auto x = pre.values();
  for (std::size_t p = 0; p < g.size(); ++p) g[p] *= activation_derivative(x[p]);
  return grad;
}

}  // namespace hep2
