#include "hep2/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hep2/error.hpp"
#include "hep2/inference.hpp"
#include "hep2/rng.hpp"

namespace hep2 {

void TrainConfig::validate() const {
  auto bad = [](const std::string& why) { fail(ErrorKind::config, why); };
  if (!(learning_rate >= 0.0)) bad("learning_rate must be non-negative");
  if (batch_size == 0) bad("batch_size must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) bad("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) bad("weight_decay must be non-negative");
  if (!(dropout >= 0.0 && dropout < 1.0)) bad("dropout must lie in [0, 1)");
  for (auto e : snapshot_epochs) {
    if (e == 0) bad("snapshot epochs are 1-based; 0 is not a valid snapshot epoch");
    if (e > max_epochs)
      bad("snapshot epoch " + std::to_string(e) + " lies beyond max_epochs " +
          std::to_string(max_epochs));
  }
  if (!(schedule.factor > 0.0 && schedule.factor <= 1.0)) bad("schedule factor must lie in (0, 1]");
  if (schedule.patience == 0) bad("schedule patience must be positive");
}

TrainState make_state(const NetworkSpec& spec, NetworkParams params, const TrainConfig& config) {
  TrainState s;
  s.spec = spec;
  s.velocity = zeros_like(params);
  s.params = std::move(params);
  s.learning_rate = config.learning_rate;
  return s;
}

double cross_entropy(std::span<const double> probabilities, std::span<const double> one_hot) {
  if (probabilities.size() != one_hot.size())
    fail(ErrorKind::shape, "cross_entropy: probability and label sizes differ");
  std::size_t hot = one_hot.size();
  for (std::size_t j = 0; j < one_hot.size(); ++j) {
    if (one_hot[j] == 1.0 && hot == one_hot.size()) hot = j;
    else if (one_hot[j] != 0.0) fail(ErrorKind::invalid, "cross_entropy: label is not one-hot");
  }
  if (hot == one_hot.size()) fail(ErrorKind::invalid, "cross_entropy: label is not one-hot");
  return cross_entropy(probabilities, hot);
}

double cross_entropy(std::span<const double> probabilities, std::size_t label) {
  if (label >= probabilities.size())
    fail(ErrorKind::invalid, "cross_entropy: label " + std::to_string(label) + " out of range");
  return -std::log(std::max(probabilities[label], 1e-12));
}

void update_step(TrainState& state, const NetworkParams& g, const TrainConfig& config) {
  if (!same_shape(state.params, g) || !same_shape(state.params, state.velocity))
    fail(ErrorKind::shape, "update_step: gradient shapes do not match the parameters");
  const double a = config.momentum, decay = config.weight_decay * state.learning_rate,
               eta = state.learning_rate;
  for (std::size_t l = 0; l < g.layers.size(); ++l) {
    auto& w = state.params.layers[l].weights;
    auto& vw = state.velocity.layers[l].weights;
    const auto& gw = g.layers[l].weights;
    for (std::size_t i = 0; i < w.size(); ++i) {
      vw[i] = a * vw[i] - decay * w[i] - eta * gw[i];
      w[i] += vw[i];
    }
    auto& b = state.params.layers[l].biases;
    auto& vb = state.velocity.layers[l].biases;
    const auto& gb = g.layers[l].biases;
    for (std::size_t i = 0; i < b.size(); ++i) {
      vb[i] = a * vb[i] - eta * gb[i];
      b[i] += vb[i];
    }
  }
}

std::size_t batch_count(std::size_t samples, std::size_t batch_size) {
  if (batch_size == 0) fail(ErrorKind::invalid, "batch size must be positive");
  return (samples + batch_size - 1) / batch_size;
}

namespace {

// Per-sample work is grouped into fixed chunks whose partial sums are added
// in chunk order, so the reduction does not depend on the thread count.
constexpr std::size_t kChunk = 8;

struct SampleOutcome {
  double loss = 0.0;
  std::size_t predicted = 0;
};

}  // namespace

EpochResult train_epoch(TrainState& state, std::span<const LabeledImage> data,
                        const TrainConfig& config) {
  if (data.empty()) fail(ErrorKind::data, "train_epoch: empty training set");
  if (config.batch_size == 0) fail(ErrorKind::config, "batch_size must be positive");
  const std::size_t classes = state.spec.classes();
  const std::size_t epoch = state.epoch + 1;
  for (const auto& sample : data)
    if (sample.label >= classes)
      fail(ErrorKind::data, "sample '" + sample.id + "' has label outside the network's classes");

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffler(derive_seed({config.seed, 0x5A0FF1Eull, epoch}));
  std::shuffle(order.begin(), order.end(), shuffler);

  EpochResult result;
  result.confusion = ConfusionMatrix(classes);
  std::vector<SampleOutcome> outcomes(data.size());
  const DropoutConfig dropout{config.dropout};
  double loss_sum = 0.0;

  for (std::size_t start = 0; start < data.size(); start += config.batch_size) {
    const std::size_t stop = std::min(data.size(), start + config.batch_size);
    const std::size_t chunks = (stop - start + kChunk - 1) / kChunk;
    std::vector<NetworkParams> partial(chunks);
    const auto nchunks = static_cast<std::int64_t>(chunks);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t c = 0; c < nchunks; ++c) {
      const std::size_t lo = start + static_cast<std::size_t>(c) * kChunk;
      const std::size_t hi = std::min(stop, lo + kChunk);
      NetworkParams acc;
      for (std::size_t p = lo; p < hi; ++p) {
        const LabeledImage& sample = data[order[p]];
        std::mt19937_64 rng(derive_seed({config.seed, 0xD50Full, epoch, p}));
        const auto trace = forward(state.params, state.spec, sample.image, dropout, Mode::train, &rng);
        auto grad = backward(trace, state.params, state.spec, sample.label);
        if (acc.layers.empty()) acc = std::move(grad);
        else add_in_place(acc, grad);
        outcomes[p] = {cross_entropy(trace.probabilities, sample.label), argmax(trace.probabilities)};
      }
      partial[static_cast<std::size_t>(c)] = std::move(acc);
    }
    NetworkParams total = std::move(partial[0]);
    for (std::size_t c = 1; c < chunks; ++c) add_in_place(total, partial[c]);
    scale_in_place(total, 1.0 / static_cast<double>(stop - start));
    update_step(state, total, config);
    ++result.updates;
    for (std::size_t p = start; p < stop; ++p) {
      loss_sum += outcomes[p].loss;
      result.confusion.accumulate(data[order[p]].label, outcomes[p].predicted);
    }
  }
  result.mean_loss = loss_sum / static_cast<double>(data.size());
  state.epoch = epoch;
  return result;
}

bool lr_schedule_step(TrainState& state, const TrainConfig& config) {
  const auto& sch = config.schedule;
  if (state.reductions >= sch.max_reductions || sch.patience == 0) return false;
  // Records after the previous reduction, in epoch order.
  std::vector<double> errors;
  for (const auto& r : state.history)
    if (r.epoch > state.last_reduction_epoch) errors.push_back(1.0 - r.train_mca);
  if (errors.size() < sch.patience) return false;
  const std::size_t window_start = errors.size() - sch.patience;
  const double reference =
      *std::min_element(errors.begin(), errors.begin() + static_cast<std::ptrdiff_t>(window_start) + 1);
  double recent = reference;
  for (std::size_t i = window_start + 1; i < errors.size(); ++i) recent = std::min(recent, errors[i]);
  if (reference - recent >= sch.min_improvement) return false;
  state.learning_rate *= sch.factor;
  ++state.reductions;
  state.last_reduction_epoch = state.history.empty() ? state.epoch : state.history.back().epoch;
  return true;
}

FitResult fit_from(TrainState state, const TrainConfig& config, std::span<const LabeledImage> train,
                   std::span<const LabeledImage> validation, const EpochCallback& on_epoch) {
  config.validate();
  FitResult out;
  while (state.epoch < config.max_epochs) {
    const double rate = state.learning_rate;
    const EpochResult r = train_epoch(state, train, config);
    EpochRecord rec;
    rec.epoch = state.epoch;
    rec.learning_rate = rate;
    rec.train_loss = r.mean_loss;
    rec.train_mca = mca(r.confusion);
    if (!validation.empty()) rec.validation_mca = mca(evaluate(state.params, state.spec, validation).confusion);
    state.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    lr_schedule_step(state, config);
    if (std::find(config.snapshot_epochs.begin(), config.snapshot_epochs.end(), state.epoch) !=
        config.snapshot_epochs.end())
      out.snapshots.push_back({state.spec, state.params, static_cast<std::uint32_t>(state.epoch)});
  }
  out.state = std::move(state);
  return out;
}

FitResult fit(const TrainConfig& config, const NetworkSpec& spec, std::span<const LabeledImage> train,
              std::span<const LabeledImage> validation, const EpochCallback& on_epoch) {
  config.validate();
  auto params = init_params(spec, derive_seed({config.seed, 0x1417ull}));
  return fit_from(make_state(spec, std::move(params), config), config, train, validation, on_epoch);
}

FitResult finetune(const Model& pretrained, std::size_t classes, const TrainConfig& config,
                   std::span<const LabeledImage> train, std::span<const LabeledImage> validation,
                   const EpochCallback& on_epoch) {
  config.validate();
  const std::size_t n = pretrained.spec.classes();
  if (classes != n)
    fail(ErrorKind::config, "fine-tuning set has " + std::to_string(classes) +
                                " classes but the pretrained network outputs " + std::to_string(n) +
                                "; replace the output layer externally before fine-tuning");
  TrainState state = make_state(pretrained.spec, pretrained.params, config);
  if (!train.empty()) {
    const Evaluation e0 = evaluate(state.params, state.spec, train);
    EpochRecord rec;
    rec.epoch = 0;
    rec.learning_rate = state.learning_rate;
    rec.train_loss = e0.mean_loss;
    rec.train_mca = mca(e0.confusion);
    if (!validation.empty())
      rec.validation_mca = mca(evaluate(state.params, state.spec, validation).confusion);
    state.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return fit_from(std::move(state), config, train, validation, on_epoch);
}

}  // namespace hep2
