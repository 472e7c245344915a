#include "hep2/kernels.hpp"

#include <algorithm>
#include <cstdint>

#ifdef HEP2_HAVE_OPENMP
#include <omp.h>
#endif

namespace hep2::kernels {

int max_threads() {
#ifdef HEP2_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace parallel {

namespace {
// Below this many multiply-adds a kernel stays on the calling thread.
constexpr std::size_t kParallelWork = 1u << 15;
}

void conv_forward(const ConvShape& s, std::span<const double> input,
                  std::span<const double> weights, std::span<const double> bias,
                  std::span<double> output) {
  const std::int64_t oh = static_cast<std::int64_t>(s.out_h());
  const std::int64_t maps = static_cast<std::int64_t>(s.out_maps);
  const std::size_t ow = s.out_w(), k = s.k, in_w = s.in_w;
  const bool wide = s.output_count() * s.in_maps * k * k > kParallelWork;

#pragma omp parallel for collapse(2) schedule(static) if (wide)
  for (std::int64_t j = 0; j < maps; ++j) {
    for (std::int64_t r = 0; r < oh; ++r) {
      double* out = output.data() + (static_cast<std::size_t>(j) * s.out_h() + r) * ow;
      std::fill(out, out + ow, bias[j]);
      for (std::size_t i = 0; i < s.in_maps; ++i) {
        const double* w = weights.data() + (i * s.out_maps + j) * k * k;
        for (std::size_t u = 0; u < k; ++u) {
          const double* row = input.data() + (i * s.in_h + r + u) * in_w;
          for (std::size_t v = 0; v < k; ++v) {
            const double wt = w[u * k + v];
            const double* src = row + v;
#pragma omp simd
            for (std::size_t c = 0; c < ow; ++c) out[c] += wt * src[c];
          }
        }
      }
    }
  }
}

void conv_backward_filters(const ConvShape& s, std::span<const double> input,
                           std::span<const double> grad_output, std::span<double> grad_weights,
                           std::span<double> grad_bias) {
  const std::size_t oh = s.out_h(), ow = s.out_w(), k = s.k;
  const std::int64_t pairs = static_cast<std::int64_t>(s.in_maps * s.out_maps);
  const bool wide = s.output_count() * s.in_maps * k * k > kParallelWork;

  for (std::size_t j = 0; j < s.out_maps; ++j) {
    const double* g = grad_output.data() + j * oh * ow;
    double acc = 0.0;
#pragma omp simd reduction(+ : acc)
    for (std::size_t p = 0; p < oh * ow; ++p) acc += g[p];
    grad_bias[j] = acc;
  }

#pragma omp parallel for schedule(static) if (wide)
  for (std::int64_t pair = 0; pair < pairs; ++pair) {
    const std::size_t i = static_cast<std::size_t>(pair) / s.out_maps;
    const std::size_t j = static_cast<std::size_t>(pair) % s.out_maps;
    const double* in = input.data() + i * s.in_h * s.in_w;
    const double* g = grad_output.data() + j * oh * ow;
    double* gw = grad_weights.data() + (i * s.out_maps + j) * k * k;
    for (std::size_t u = 0; u < k; ++u) {
      for (std::size_t v = 0; v < k; ++v) {
        double acc = 0.0;
        for (std::size_t r = 0; r < oh; ++r) {
          const double* grow = g + r * ow;
          const double* irow = in + (r + u) * s.in_w + v;
#pragma omp simd reduction(+ : acc)
          for (std::size_t c = 0; c < ow; ++c) acc += grow[c] * irow[c];
        }
        gw[u * k + v] = acc;
      }
    }
  }
}

void conv_backward_input(const ConvShape& s, std::span<const double> weights,
                         std::span<const double> grad_output, std::span<double> grad_input) {
  // Scatter form: contiguous runs along the output row.
  const std::size_t oh = s.out_h(), ow = s.out_w(), k = s.k;
  const std::int64_t maps = static_cast<std::int64_t>(s.in_maps);
  const bool wide = s.output_count() * s.in_maps * k * k > kParallelWork;

#pragma omp parallel for schedule(static) if (wide)
  for (std::int64_t i = 0; i < maps; ++i) {
    double* gi = grad_input.data() + static_cast<std::size_t>(i) * s.in_h * s.in_w;
    std::fill(gi, gi + s.in_h * s.in_w, 0.0);
    for (std::size_t j = 0; j < s.out_maps; ++j) {
      const double* g = grad_output.data() + j * oh * ow;
      const double* w = weights.data() + (static_cast<std::size_t>(i) * s.out_maps + j) * k * k;
      for (std::size_t u = 0; u < k; ++u) {
        for (std::size_t v = 0; v < k; ++v) {
          const double wt = w[u * k + v];
          for (std::size_t r = 0; r < oh; ++r) {
            double* dst = gi + (r + u) * s.in_w + v;
            const double* src = g + r * ow;
#pragma omp simd
            for (std::size_t c = 0; c < ow; ++c) dst[c] += wt * src[c];
          }
        }
      }
    }
  }
}

void dense_forward(std::size_t in, std::size_t out, std::span<const double> x,
                   std::span<const double> weights, std::span<const double> bias,
                   std::span<double> y) {
  const std::int64_t n = static_cast<std::int64_t>(out);
#pragma omp parallel for schedule(static) if (in * out > kParallelWork)
  for (std::int64_t o = 0; o < n; ++o) {
    const double* w = weights.data() + static_cast<std::size_t>(o) * in;
    double acc = 0.0;
#pragma omp simd reduction(+ : acc)
    for (std::size_t i = 0; i < in; ++i) acc += w[i] * x[i];
    y[o] = bias[o] + acc;
  }
}

void dense_backward(std::size_t in, std::size_t out, std::span<const double> x,
                    std::span<const double> weights, std::span<const double> grad_y,
                    std::span<double> grad_weights, std::span<double> grad_bias,
                    std::span<double> grad_x) {
  const std::int64_t n = static_cast<std::int64_t>(out);
#pragma omp parallel for schedule(static) if (in * out > kParallelWork)
  for (std::int64_t o = 0; o < n; ++o) {
    const double g = grad_y[o];
    double* gw = grad_weights.data() + static_cast<std::size_t>(o) * in;
    grad_bias[o] = g;
#pragma omp simd
    for (std::size_t i = 0; i < in; ++i) gw[i] = g * x[i];
  }
  if (grad_x.empty()) return;
  std::fill(grad_x.begin(), grad_x.end(), 0.0);
  for (std::size_t o = 0; o < out; ++o) {
    const double g = grad_y[o];
    const double* w = weights.data() + o * in;
#pragma omp simd
    for (std::size_t i = 0; i < in; ++i) grad_x[i] += w[i] * g;
  }
}

}  // namespace parallel
}  // namespace hep2::kernels
