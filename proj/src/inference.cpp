#include "hep2/inference.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "hep2/error.hpp"
#include "hep2/trainer.hpp"

namespace hep2 {

std::vector<double> predict_single(const NetworkParams& params, const NetworkSpec& spec,
                                   const Map2D& image) {
  return forward(params, spec, image, {}, Mode::eval).probabilities;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) fail(ErrorKind::invalid, "argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

Ensemble::Ensemble(std::vector<Model> members, std::vector<std::string> class_names)
    : members_(std::move(members)), names_(std::move(class_names)) {
  if (members_.empty()) fail(ErrorKind::invalid, "ensemble needs at least one member");
  for (std::size_t i = 1; i < members_.size(); ++i)
    if (!(members_[i].spec == members_[0].spec))
      fail(ErrorKind::shape, "ensemble member " + std::to_string(i) + " has a different network spec");
  if (!names_.empty() && names_.size() != members_[0].spec.classes())
    fail(ErrorKind::shape, "ensemble: " + std::to_string(names_.size()) + " class names for a " +
                               std::to_string(members_[0].spec.classes()) + "-class network");
}

std::size_t Ensemble::classes() const { return spec().classes(); }

Prediction ensemble_predict(const Ensemble& ensemble, std::span<const GrayImage> variants) {
  if (variants.empty()) fail(ErrorKind::invalid, "ensemble_predict: no image variants");
  const auto& members = ensemble.members();
  const std::size_t n = ensemble.classes();
  const std::size_t jobs = members.size() * variants.size();
  std::vector<std::vector<double>> probs(jobs);
  const auto total = static_cast<std::int64_t>(jobs);
#pragma omp parallel for schedule(dynamic, 1) if (jobs > 1)
  for (std::int64_t t = 0; t < total; ++t) {
    const auto i = static_cast<std::size_t>(t) / variants.size();
    const auto k = static_cast<std::size_t>(t) % variants.size();
    probs[static_cast<std::size_t>(t)] = predict_single(members[i].params, members[i].spec, variants[k]);
  }
  Prediction p;
  p.probabilities.assign(n, 0.0);
  for (const auto& v : probs)
    for (std::size_t j = 0; j < n; ++j) p.probabilities[j] += v[j];
  const double inv = 1.0 / static_cast<double>(jobs);
  for (double& v : p.probabilities) v *= inv;
  p.label = argmax(p.probabilities);
  return p;
}

Prediction ensemble_predict(const Ensemble& ensemble, const GrayImage& image,
                            const AugmentationPlan& plan) {
  const auto variants = augment(image, plan);
  return ensemble_predict(ensemble, variants);
}

namespace {

Evaluation summarize(std::vector<Prediction> predictions, std::span<const LabeledImage> images,
                     std::size_t classes) {
  Evaluation e;
  e.confusion = ConfusionMatrix(classes);
  double loss = 0.0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    e.confusion.accumulate(images[i].label, predictions[i].label);
    loss += cross_entropy(predictions[i].probabilities, images[i].label);
  }
  e.mean_loss = images.empty() ? 0.0 : loss / static_cast<double>(images.size());
  e.predictions = std::move(predictions);
  return e;
}

}  // namespace

Evaluation evaluate(const NetworkParams& params, const NetworkSpec& spec,
                    std::span<const LabeledImage> images) {
  std::vector<Prediction> out(images.size());
  const auto n = static_cast<std::int64_t>(images.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < n; ++i) {
    auto& p = out[static_cast<std::size_t>(i)];
    p.probabilities = predict_single(params, spec, images[static_cast<std::size_t>(i)].image);
    p.label = argmax(p.probabilities);
  }
  return summarize(std::move(out), images, spec.classes());
}

Evaluation evaluate(const Ensemble& ensemble, std::span<const LabeledImage> images,
                    const AugmentationPlan& plan) {
  std::vector<Prediction> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(ensemble_predict(ensemble, img.image, plan));
  return summarize(std::move(out), images, ensemble.classes());
}

std::string predictions_csv(std::span<const std::string> ids, std::span<const Prediction> predictions,
                            const std::vector<std::string>& class_names) {
  if (ids.size() != predictions.size())
    fail(ErrorKind::shape, "predictions_csv: id and prediction counts differ");
  std::ostringstream out;
  out << "id,predicted";
  for (const auto& c : class_names) out << ',' << c;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& p = predictions[i];
    if (p.probabilities.size() != class_names.size())
      fail(ErrorKind::shape, "predictions_csv: probability vector size differs from the class table");
    out << ids[i] << ',' << class_names[p.label];
    for (double v : p.probabilities) {
      std::snprintf(buf, sizeof buf, "%.9g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace hep2
