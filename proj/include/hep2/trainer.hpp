#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hep2/dataset.hpp"
#include "hep2/metrics.hpp"
#include "hep2/network.hpp"

namespace hep2 {

// Plateau rule for the learning rate. After at least `patience` epochs since
// the previous reduction, the best training error over the later
// patience-1 of them is compared with the best error up to the start of
// that window; an improvement below min_improvement (absolute error rate)
// multiplies the rate by `factor`.
struct LrSchedule {
  double factor = 0.5;
  std::size_t patience = 5;
  double min_improvement = 0.001;
  std::size_t max_reductions = 3;
};

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 113;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double dropout = 0.0;
  std::size_t max_epochs = 100;
  std::vector<std::size_t> snapshot_epochs = {75, 85, 95, 100};  // 1-based
  LrSchedule schedule;
  std::uint64_t seed = 1;

  // Throws ErrorKind::config.
  void validate() const;
};

struct TrainState {
  NetworkSpec spec;
  NetworkParams params;
  NetworkParams velocity;  // same shapes as params, zero at the start
  double learning_rate = 0.0;
  std::size_t epoch = 0;  // completed epochs
  std::size_t reductions = 0;
  std::size_t last_reduction_epoch = 0;
  std::vector<EpochRecord> history;
};

TrainState make_state(const NetworkSpec& spec, NetworkParams params, const TrainConfig& config);

// -log(max(p_true, 1e-12)). The label must be one-hot.
double cross_entropy(std::span<const double> probabilities, std::span<const double> one_hot);
double cross_entropy(std::span<const double> probabilities, std::size_t label);

// Momentum step with weight decay on the weights only:
//   v_w = a*v_w - b*eta*w - eta*g_w ;  w += v_w
//   v_b = a*v_b - eta*g_b           ;  b += v_b
// with eta = state.learning_rate.
void update_step(TrainState& state, const NetworkParams& gradients, const TrainConfig& config);

// ceil(samples / batch_size); the short final batch is kept.
std::size_t batch_count(std::size_t samples, std::size_t batch_size);

struct EpochResult {
  double mean_loss = 0.0;
  ConfusionMatrix confusion;  // train-mode predictions seen during the epoch
  std::size_t updates = 0;
};

// One shuffled pass with mean mini-batch gradients. Increments state.epoch
// but does not touch the history.
EpochResult train_epoch(TrainState& state, std::span<const LabeledImage> data,
                        const TrainConfig& config);

// Applies the plateau rule to state.history. Returns true when the rate was
// reduced.
bool lr_schedule_step(TrainState& state, const TrainConfig& config);

struct FitResult {
  TrainState state;
  std::vector<Model> snapshots;  // in epoch order
};

// Called after every recorded epoch.
using EpochCallback = std::function<void(const EpochRecord&)>;

// Trains from init_params(spec, seed-derived) for config.max_epochs.
// Validation MCA is recorded when the validation set is non-empty.
FitResult fit(const TrainConfig& config, const NetworkSpec& spec,
              std::span<const LabeledImage> train, std::span<const LabeledImage> validation,
              const EpochCallback& on_epoch = {});

// Continues training an existing state up to config.max_epochs.
FitResult fit_from(TrainState state, const TrainConfig& config,
                   std::span<const LabeledImage> train, std::span<const LabeledImage> validation,
                   const EpochCallback& on_epoch = {});

// Adapts a pretrained model to a new training set with `classes` classes,
// which must equal the model's output size. All layers are updated,
// velocities start at zero, and the history starts with an epoch-0 row
// measured in eval mode before any update. Epoch numbering restarts at 1.
FitResult finetune(const Model& pretrained, std::size_t classes, const TrainConfig& config,
                   std::span<const LabeledImage> train, std::span<const LabeledImage> validation,
                   const EpochCallback& on_epoch = {});

}  // namespace hep2
