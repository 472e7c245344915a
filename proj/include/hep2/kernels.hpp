#pragma once

// Raw convolution / dense kernels over contiguous buffers.
//
// Two implementations share one signature set:
//   kernels::serial    straightforward per-output loops, kept as the reference
//   kernels::parallel  loop orders chosen for vectorization, OpenMP across
//                      independent output maps / rows
// Every parallel loop owns disjoint outputs and sums in a fixed order, so the
// parallel results do not depend on the thread count.
//
// Layouts:
//   feature buffers  [map][row][col]
//   conv weights     [input i][output j][u][v]
//   dense weights    [output o][input i]

#include <cstddef>
#include <span>

namespace hep2::kernels {

struct ConvShape {
  std::size_t in_maps = 0;
  std::size_t out_maps = 0;
  std::size_t in_h = 0;
  std::size_t in_w = 0;
  std::size_t k = 0;

  std::size_t out_h() const noexcept { return in_h - k + 1; }
  std::size_t out_w() const noexcept { return in_w - k + 1; }
  std::size_t weight_count() const noexcept { return in_maps * out_maps * k * k; }
  std::size_t input_count() const noexcept { return in_maps * in_h * in_w; }
  std::size_t output_count() const noexcept { return out_maps * out_h() * out_w(); }
};

#define HEP2_KERNEL_SET                                                                    \
  void conv_forward(const ConvShape& s, std::span<const double> input,                    \
                    std::span<const double> weights, std::span<const double> bias,        \
                    std::span<double> output);                                            \
  void conv_backward_filters(const ConvShape& s, std::span<const double> input,           \
                             std::span<const double> grad_output,                         \
                             std::span<double> grad_weights, std::span<double> grad_bias); \
  void conv_backward_input(const ConvShape& s, std::span<const double> weights,           \
                           std::span<const double> grad_output,                           \
                           std::span<double> grad_input);                                 \
  void dense_forward(std::size_t in, std::size_t out, std::span<const double> x,          \
                     std::span<const double> weights, std::span<const double> bias,       \
                     std::span<double> y);                                                \
  void dense_backward(std::size_t in, std::size_t out, std::span<const double> x,         \
                      std::span<const double> weights, std::span<const double> grad_y,    \
                      std::span<double> grad_weights, std::span<double> grad_bias,        \
                      std::span<double> grad_x);

namespace serial {
HEP2_KERNEL_SET
}

namespace parallel {
HEP2_KERNEL_SET
}

#undef HEP2_KERNEL_SET

// Number of threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace hep2::kernels
