#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "hep2/map2d.hpp"

namespace hep2 {

// Scaled hyperbolic tangent, phi(x) = 1.7159 tanh(2x/3).
inline constexpr double kActivationScale = 1.7159;
inline constexpr double kActivationSlope = 2.0 / 3.0;

double activation(double x);
double activation_derivative(double x);
// phi'(x) expressed through y = phi(x); avoids a second tanh in backprop.
double activation_derivative_from_output(double y);

// Overflow-safe softmax (max logit subtracted before exponentiation).
std::vector<double> softmax(std::span<const double> logits);

// Non-owning view of a convolution filter matrix, laid out
// [input i][output j][row][col].
struct FilterView {
  std::span<const double> weights;
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::size_t size = 0;  // k, filters are k x k

  std::span<const double> filter(std::size_t i, std::size_t j) const {
    return weights.subspan((i * outputs + j) * size * size, size * size);
  }
};

// Owning filter matrix.
class FilterBank {
 public:
  FilterBank(std::size_t inputs, std::size_t outputs, std::size_t size)
      : inputs_(inputs), outputs_(outputs), size_(size), weights_(inputs * outputs * size * size) {}
  // filters[i][j] is the k x k filter linking input map i to output map j.
  explicit FilterBank(const std::vector<std::vector<Map2D>>& filters);

  std::span<double> filter(std::size_t i, std::size_t j) {
    return std::span<double>(weights_).subspan((i * outputs_ + j) * size_ * size_, size_ * size_);
  }
  std::span<double> values() { return weights_; }
  FilterView view() const { return {weights_, inputs_, outputs_, size_}; }

 private:
  std::size_t inputs_, outputs_, size_;
  std::vector<double> weights_;
};

// Valid (no padding), stride-1 convolution summed over input maps plus a
// per-output bias. Filters are applied as cross-correlation. No activation.
FeatureStack convolve_valid(const FeatureStack& input, const FilterView& filters,
                            std::span<const double> biases);

// Non-overlapping max-pooling. Trailing rows/columns that do not fill a whole
// region are dropped. Ties go to the first element in row-major order.
std::pair<FeatureStack, PoolTrace> maxpool(const FeatureStack& input, std::size_t region);

struct ConvGradients {
  FeatureStack input;  // empty when not requested
  std::vector<double> filters;
  std::vector<double> biases;
};

ConvGradients backward_convolve(const FeatureStack& input, const FilterView& filters,
                                const FeatureStack& upstream, bool want_input_gradient = true);

// Routes each upstream cell to the traced argmax input position.
FeatureStack backward_maxpool(const PoolTrace& trace, const FeatureStack& upstream);

// upstream * phi'(pre), element-wise.
FeatureStack backward_activation(const FeatureStack& pre, const FeatureStack& upstream);

}  // namespace hep2
