#include "hep2/kernels.hpp"

namespace hep2::kernels::serial {

void conv_forward(const ConvShape& s, std::span<const double> input,
                  std::span<const double> weights, std::span<const double> bias,
                  std::span<double> output) {
  const std::size_t oh = s.out_h(), ow = s.out_w(), k = s.k;
  for (std::size_t j = 0; j < s.out_maps; ++j) {
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        double acc = bias[j];
        for (std::size_t i = 0; i < s.in_maps; ++i) {
          const double* in = input.data() + i * s.in_h * s.in_w;
          const double* w = weights.data() + (i * s.out_maps + j) * k * k;
          for (std::size_t u = 0; u < k; ++u)
            for (std::size_t v = 0; v < k; ++v) acc += in[(r + u) * s.in_w + c + v] * w[u * k + v];
        }
        output[(j * oh + r) * ow + c] = acc;
      }
    }
  }
}

void conv_backward_filters(const ConvShape& s, std::span<const double> input,
                           std::span<const double> grad_output, std::span<double> grad_weights,
                           std::span<double> grad_bias) {
  const std::size_t oh = s.out_h(), ow = s.out_w(), k = s.k;
  for (std::size_t j = 0; j < s.out_maps; ++j) {
    double acc = 0.0;
    for (std::size_t p = 0; p < oh * ow; ++p) acc += grad_output[j * oh * ow + p];
    grad_bias[j] = acc;
  }
  for (std::size_t i = 0; i < s.in_maps; ++i) {
    const double* in = input.data() + i * s.in_h * s.in_w;
    for (std::size_t j = 0; j < s.out_maps; ++j) {
      const double* g = grad_output.data() + j * oh * ow;
      for (std::size_t u = 0; u < k; ++u) {
        for (std::size_t v = 0; v < k; ++v) {
          double acc = 0.0;
          for (std::size_t r = 0; r < oh; ++r)
            for (std::size_t c = 0; c < ow; ++c) acc += g[r * ow + c] * in[(r + u) * s.in_w + c + v];
          grad_weights[((i * s.out_maps + j) * k + u) * k + v] = acc;
        }
      }
    }
  }
}

void conv_backward_input(const ConvShape& s, std::span<const double> weights,
                         std::span<const double> grad_output, std::span<double> grad_input) {
  // Gather form: each input pixel collects every output position it fed.
  const std::size_t oh = s.out_h(), ow = s.out_w(), k = s.k;
  for (std::size_t i = 0; i < s.in_maps; ++i) {
    for (std::size_t y = 0; y < s.in_h; ++y) {
      for (std::size_t x = 0; x < s.in_w; ++x) {
        double acc = 0.0;
        for (std::size_t j = 0; j < s.out_maps; ++j) {
          const double* g = grad_output.data() + j * oh * ow;
          const double* w = weights.data() + (i * s.out_maps + j) * k * k;
          for (std::size_t u = 0; u < k; ++u) {
            if (y < u || y - u >= oh) continue;
            for (std::size_t v = 0; v < k; ++v) {
              if (x < v || x - v >= ow) continue;
              acc += g[(y - u) * ow + (x - v)] * w[u * k + v];
            }
          }
        }
        grad_input[(i * s.in_h + y) * s.in_w + x] = acc;
      }
    }
  }
}

void dense_forward(std::size_t in, std::size_t out, std::span<const double> x,
                   std::span<const double> weights, std::span<const double> bias,
                   std::span<double> y) {
  for (std::size_t o = 0; o < out; ++o) {
    double acc = bias[o];
    for (std::size_t i = 0; i < in; ++i) acc += weights[o * in + i] * x[i];
    y[o] = acc;
  }
}

void dense_backward(std::size_t in, std::size_t out, std::span<const double> x,
                    std::span<const double> weights, std::span<const double> grad_y,
                    std::span<double> grad_weights, std::span<double> grad_bias,
                    std::span<double> grad_x) {
  for (std::size_t o = 0; o < out; ++o) {
    grad_bias[o] = grad_y[o];
    for (std::size_t i = 0; i < in; ++i) grad_weights[o * in + i] = grad_y[o] * x[i];
  }
  if (grad_x.empty()) return;
  for (std::size_t i = 0; i < in; ++i) {
    double acc = 0.0;
    for (std::size_t o = 0; o < out; ++o) acc += weights[o * in + i] * grad_y[o];
    grad_x[i] = acc;
  }
}

}  // namespace hep2::kernels::serial
