#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hep2/dataset.hpp"
#include "hep2/imageproc.hpp"
#include "hep2/metrics.hpp"
#include "hep2/network.hpp"

namespace hep2 {

// Eval-mode class probabilities for one preprocessed image.
std::vector<double> predict_single(const NetworkParams& params, const NetworkSpec& spec,
                                   const Map2D& image);

// Index of the largest value; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

// Networks sharing one spec, typically late-epoch snapshots of one run.
class Ensemble {
 public:
  explicit Ensemble(std::vector<Model> members, std::vector<std::string> class_names = {});

  const std::vector<Model>& members() const noexcept { return members_; }
  const NetworkSpec& spec() const { return members_.front().spec; }
  std::size_t classes() const;
  const std::vector<std::string>& class_names() const noexcept { return names_; }

 private:
  std::vector<Model> members_;
  std::vector<std::string> names_;
};

struct Prediction {
  std::size_t label = 0;
  std::vector<double> probabilities;
};

// Mean of the probability vectors of every member on every rotation variant
// of the image, then argmax.
Prediction ensemble_predict(const Ensemble& ensemble, const GrayImage& image,
                            const AugmentationPlan& plan);
// Same, with the variants supplied by the caller.
Prediction ensemble_predict(const Ensemble& ensemble, std::span<const GrayImage> variants);

struct Evaluation {
  double mean_loss = 0.0;  // mean cross-entropy of the (averaged) probabilities
  ConfusionMatrix confusion;
  std::vector<Prediction> predictions;  // aligned with the input order
};

Evaluation evaluate(const NetworkParams& params, const NetworkSpec& spec,
                    std::span<const LabeledImage> images);
Evaluation evaluate(const Ensemble& ensemble, std::span<const LabeledImage> images,
                    const AugmentationPlan& plan);

// Header "id,predicted,<class names...>", one row per image.
std::string predictions_csv(std::span<const std::string> ids, std::span<const Prediction> predictions,
                            const std::vector<std::string>& class_names);

}  // namespace hep2
