// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Optional arguments select criteria by
// name prefix, e.g. `acceptance desk finetune`.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hep2/dataset.hpp"
#include "hep2/inference.hpp"
#include "hep2/metrics.hpp"
#include "hep2/network.hpp"
#include "hep2/synth.hpp"
#include "hep2/trainer.hpp"
#include "oracles.hpp"

using namespace hep2;

namespace {

// Pinned tolerances and thresholds.
constexpr double kGradientTolerance = 1e-4;
constexpr double kGradientEpsilon = 1e-5;
constexpr int kGradientSeeds = 5;
constexpr double kOptimizerTolerance = 1e-12;
constexpr double kEnsembleTolerance = 1e-12;
constexpr int kEnsembleTrials = 100;
constexpr double kMetricsTolerance = 1e-12;
constexpr int kMetricsMatrices = 1000;
constexpr double kDeskTrainMca = 0.95;
constexpr double kDeskHeldOutMca = 0.80;
constexpr std::size_t kDeskEpochs = 50;
constexpr std::size_t kAugSeeds = 3;
constexpr std::size_t kAugEpochsPlain = 200;
constexpr std::size_t kAugEpochsRotated = 20;  // 10 rotations: same sample passes
constexpr std::size_t kFinetuneEpochs = 10;
constexpr double kSerializationTolerance = 1e-6;
constexpr int kSerializationInputs = 100;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// --- architecture -----------------------------------------------------------

Outcome architecture() {
  const auto spec = NetworkSpec::reference();
  const auto geo = resolve(spec);
  const std::size_t depth[] = {6, 6, 16, 16, 32, 32, 150, 6};
  const std::size_t side[] = {72, 36, 33, 11, 9, 3, 1, 1};
  bool ok = geo.size() == 8;
  std::ostringstream chain;
  for (std::size_t l = 0; l < geo.size(); ++l) {
    if (l < 8) ok = ok && geo[l].out_depth == depth[l] && geo[l].out_h == side[l] && geo[l].out_w == side[l];
    chain << (l ? " " : "") << geo[l].out_depth;
    if (geo[l].out_h > 1) chain << "@" << geo[l].out_h;
  }
  const std::size_t n = param_count(spec);
  ok = ok && n == 50748 && init_params(spec, 1).scalar_count() == n;
  return {ok, "chain " + chain.str() + ", params " + std::to_string(n) + " (expect 50748, exact)"};
}

// --- gradients ----------------------------------------------------------------

Outcome gradients() {
  const auto spec = oracle::reduced_spec();
  double worst = 0.0;
  for (int s = 1; s <= kGradientSeeds; ++s)
    worst = std::max(worst, oracle::gradient_check(spec, static_cast<std::uint64_t>(s), 0.0, kGradientEpsilon));
  const double drop = oracle::gradient_check(spec, 101, 0.5, kGradientEpsilon);
  return {worst < kGradientTolerance && drop < kGradientTolerance,
          fmt("max rel err %.3g over %d seeds, %.3g with dropout 0.5 (%zu params, tol %.0e)", worst,
              kGradientSeeds, drop, param_count(spec), kGradientTolerance)};
}

// --- optimizer ----------------------------------------------------------------

TrainState scalar_state(double w, double b, double lr) {
  NetworkSpec s;
  s.input_height = s.input_width = 1;
  s.layers = {LayerSpec::out(1)};
  NetworkParams p;
  p.layers = {LayerParams{{w}, {b}}};
  TrainConfig c;
  c.learning_rate = lr;
  return make_state(s, p, c);
}

NetworkParams scalar_grad(double gw, double gb) {
  NetworkParams g;
  g.layers = {LayerParams{{gw}, {gb}}};
  return g;
}

Outcome optimizer() {
  TrainConfig c;  // momentum 0.9, weight decay 0.0005
  auto s = scalar_state(1.0, 0.0, 0.01);
  update_step(s, scalar_grad(1.0, 0.0), c);
  const double v1 = s.velocity.layers[0].weights[0], w1 = s.params.layers[0].weights[0];
  update_step(s, scalar_grad(1.0, 0.0), c);
  const double v2 = s.velocity.layers[0].weights[0], w2 = s.params.layers[0].weights[0];
  const double hand_err = std::max({std::fabs(v1 + 0.010005), std::fabs(w1 - 0.989995),
                                    std::fabs(v2 + 0.019009449975), std::fabs(w2 - 0.970985550025)});

  // Plain SGD when momentum and decay vanish.
  TrainConfig plain = c;
  plain.momentum = 0.0;
  plain.weight_decay = 0.0;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  auto p = scalar_state(u(rng), u(rng), 0.03);
  bool bitwise = true;
  for (int i = 0; i < 1000; ++i) {
    const double gw = u(rng), gb = u(rng);
    const double want_w = p.params.layers[0].weights[0] - 0.03 * gw;
    const double want_b = p.params.layers[0].biases[0] - 0.03 * gb;
    update_step(p, scalar_grad(gw, gb), plain);
    bitwise = bitwise && p.params.layers[0].weights[0] == want_w && p.params.layers[0].biases[0] == want_b;
  }

  // Bias trajectory is the same with and without decay.
  TrainConfig heavy = c;
  heavy.weight_decay = 0.5;
  auto a = scalar_state(0.8, 0.3, 0.1), b = scalar_state(0.8, 0.3, 0.1);
  bool bias_free = true;
  for (int i = 0; i < 100; ++i) {
    const auto g = scalar_grad(u(rng), u(rng));
    update_step(a, g, c);
    update_step(b, g, heavy);
    bias_free = bias_free && a.params.layers[0].biases[0] == b.params.layers[0].biases[0];
  }
  const bool weights_differ = a.params.layers[0].weights[0] != b.params.layers[0].weights[0];
  return {hand_err < kOptimizerTolerance && bitwise && bias_free && weights_differ,
          fmt("hand iteration err %.2g (tol %.0e), sgd bitwise %s, biases decay-free %s", hand_err,
              kOptimizerTolerance, bitwise ? "yes" : "no", bias_free ? "yes" : "no")};
}

// --- ensemble -----------------------------------------------------------------

Outcome ensemble() {
  const auto spec = oracle::reduced_spec();
  std::mt19937_64 rng(17);
  double worst = 0.0;
  bool labels = true;
  for (int t = 0; t < kEnsembleTrials; ++t) {
    std::vector<Model> members;
    for (int i = 0; i < 2; ++i) members.push_back({spec, init_params(spec, rng()), 0});
    const Ensemble e(members);
    const GrayImage x(oracle::random_map(rng, 18, 18, 0, 1));
    const AugmentationPlan plan(90);  // m = 4
    std::vector<Map2D> variants;
    for (std::size_t k = 0; k < plan.variants(); ++k) variants.push_back(rotate_about_center(x, plan.angle(k)));
    const auto want = oracle::brute_force_average(members, variants);
    const auto got = ensemble_predict(e, x, plan);
    for (std::size_t j = 0; j < want.size(); ++j) worst = std::max(worst, std::fabs(got.probabilities[j] - want[j]));
    labels = labels && got.label == argmax(want);
  }
  return {worst < kEnsembleTolerance && labels,
          fmt("max |diff| %.3g over %d trials, 2 members x 4 variants (tol %.0e)", worst, kEnsembleTrials,
              kEnsembleTolerance)};
}

// --- metrics ------------------------------------------------------------------

Outcome metrics() {
  ConfusionMatrix ex(2);
  ex.add(0, 0, 10);
  ex.add(1, 1, 45);
  ex.add(1, 0, 45);
  const bool hand = mca(ex) == 0.75 && aca(ex) == 0.55;
  std::mt19937_64 rng(23);
  double worst = 0.0;
  for (int t = 0; t < kMetricsMatrices; ++t) {
    const std::size_t n = 2 + rng() % 11;
    ConfusionMatrix cm(n);
    long double sum = 0.0L;
    for (std::size_t k = 0; k < n; ++k) {
      std::uint64_t row = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const std::uint64_t v = rng() % 200 + (j == k);
        cm.add(k, j, v);
        row += v;
      }
      sum += static_cast<long double>(cm(k, k)) / static_cast<long double>(row);
    }
    worst = std::max(worst, std::fabs(mca(cm) - static_cast<double>(sum / n)));
  }
  return {hand && worst < kMetricsTolerance,
          fmt("example MCA %.4f ACA %.4f (exact 0.75/0.55), max |MCA - oracle| %.3g over %d matrices",
              mca(ex), aca(ex), worst, kMetricsMatrices)};
}

// --- protocol constants -------------------------------------------------------

Outcome protocol() {
  std::ostringstream text;
  text << "#classes";
  for (const auto& c : kStainingPatterns) text << ',' << c;
  text << "\nid,image,mask,label\n";
  for (std::size_t i = 0; i < 13596; ++i) text << 'c' << i << ",cell.pgm,," << kStainingPatterns[i % 6] << '\n';
  std::istringstream in(text.str());
  const auto m = parse_manifest(in, "/", false);
  const auto s = split(m, SplitSpec{});
  const std::size_t updates = batch_count(s.train.size(), TrainConfig{}.batch_size);
  const std::size_t f36 = AugmentationPlan(36).variants(), f18 = AugmentationPlan(18).variants(),
                    f9 = AugmentationPlan(9).variants();
  const bool ok = s.train.size() == 8701 && s.validation.size() == 2175 && s.test.size() == 2720 &&
                  updates == 77 && f36 == 10 && f18 == 20 && f9 == 40;
  return {ok, fmt("split %zu/%zu/%zu, %zu updates/epoch, factors %zu/%zu/%zu (exact)", s.train.size(),
                  s.validation.size(), s.test.size(), updates, f36, f18, f9)};
}

// --- desk-scale training ------------------------------------------------------

std::optional<Model> g_desk_model;  // reused as the fine-tuning starting point

SynthOptions desk_train_options() {
  SynthOptions o;
  o.per_class = 80;
  o.seed = 7;
  return o;
}

SynthOptions desk_test_options() {
  SynthOptions o = desk_train_options();
  o.per_class = 20;
  o.first_index = 1000;
  return o;
}

Model train_desk_model(std::vector<EpochRecord>* history) {
  const auto train = synth_dataset(desk_train_options());
  TrainConfig c;
  c.max_epochs = kDeskEpochs;
  c.snapshot_epochs = {kDeskEpochs};
  c.seed = 3;
  auto r = fit(c, NetworkSpec::reference(), train, {});
  if (history) *history = r.state.history;
  Model m = r.snapshots.back();
  g_desk_model = m;
  return m;
}

Outcome desk() {
  std::vector<EpochRecord> hist;
  const Model m = train_desk_model(&hist);
  const auto test = synth_dataset(desk_test_options());
  const double held = mca(evaluate(m.params, m.spec, test).confusion);
  const double final_train = hist.back().train_mca;
  std::size_t first = 0;
  for (const auto& r : hist)
    if (!first && r.train_mca >= kDeskTrainMca) first = r.epoch;
  return {final_train >= kDeskTrainMca && held >= kDeskHeldOutMca,
          fmt("480 train / 120 test: train MCA %.3f at epoch %zu (first >= %.2f at %zu), held-out MCA %.3f "
              "(>= %.2f)",
              final_train, hist.back().epoch, kDeskTrainMca, first, held, kDeskHeldOutMca)};
}

// --- augmentation trend -------------------------------------------------------

Outcome augmentation() {
  bool ok = true;
  std::string detail;
  for (std::size_t s = 1; s <= kAugSeeds; ++s) {
    SynthOptions tr;
    tr.per_class = 30;
    tr.seed = 100 + s;
    tr.orientation_center = 0.0;
    tr.orientation_jitter = 30.0;  // upright cells only
    SynthOptions te;
    te.per_class = 20;
    te.seed = 200 + s;  // any orientation
    const auto train = synth_dataset(tr), test = synth_dataset(te);
    const auto rotated = augment_dataset(train, AugmentationPlan(36));

    TrainConfig c;
    c.seed = s;
    c.max_epochs = kAugEpochsPlain;
    c.snapshot_epochs = {kAugEpochsPlain};
    const auto plain = fit(c, NetworkSpec::reference(), train, {});
    c.max_epochs = kAugEpochsRotated;
    c.snapshot_epochs = {kAugEpochsRotated};
    const auto aug = fit(c, NetworkSpec::reference(), rotated, {});
    const double m_plain = mca(evaluate(plain.state.params, plain.state.spec, test).confusion);
    const double m_aug = mca(evaluate(aug.state.params, aug.state.spec, test).confusion);
    ok = ok && m_aug >= m_plain;
    detail += fmt("%sseed %zu: none %.3f vs 36deg %.3f", s > 1 ? "; " : "", s, m_plain, m_aug);
  }
  return {ok, detail + " (test MCA, equal sample passes)"};
}

// --- fine-tuning --------------------------------------------------------------

Outcome finetuning() {
  if (!g_desk_model) train_desk_model(nullptr);
  SynthOptions tr;
  tr.per_class = 30;
  tr.seed = 11;
  tr.shifted = true;
  SynthOptions te = tr;
  te.per_class = 20;
  te.first_index = 1000;
  const auto train = synth_dataset(tr), test = synth_dataset(te);

  TrainConfig c;
  c.max_epochs = kFinetuneEpochs;
  c.snapshot_epochs = {kFinetuneEpochs};
  c.dropout = 0.5;
  c.seed = 5;
  const auto ft = finetune(*g_desk_model, 6, c, train, {});
  const double loss0 = ft.state.history.front().train_loss;  // eval mode, before any update
  const double loss_end = evaluate(ft.state.params, ft.state.spec, train).mean_loss;
  const double mca_ft = mca(evaluate(ft.state.params, ft.state.spec, test).confusion);
  const auto scratch = fit(c, NetworkSpec::reference(), train, {});
  const double mca_scratch = mca(evaluate(scratch.state.params, scratch.state.spec, test).confusion);
  return {loss_end < loss0 && mca_scratch <= mca_ft,
          fmt("train loss %.4f -> %.4f after %zu epochs; shifted test MCA fine-tuned %.3f vs scratch %.3f",
              loss0, loss_end, kFinetuneEpochs, mca_ft, mca_scratch)};
}

// --- serialization ------------------------------------------------------------

Outcome serialization() {
  const auto spec = NetworkSpec::reference();
  std::mt19937_64 rng(29);
  Model m{spec, init_params(spec, 31), 95};
  for (auto& l : m.params.layers)
    for (double& b : l.biases) b = std::uniform_real_distribution<double>(-0.1, 0.1)(rng);
  const auto path = std::filesystem::temp_directory_path() / "hep2_acceptance.model";
  save_model(path, m);
  const Model back = load_model(path);
  std::filesystem::remove(path);
  double worst = 0.0;
  for (int t = 0; t < kSerializationInputs; ++t) {
    const auto x = oracle::random_map(rng, 78, 78, 0, 1);
    const auto a = predict_single(m.params, spec, x), b = predict_single(back.params, spec, x);
    for (std::size_t j = 0; j < a.size(); ++j) worst = std::max(worst, std::fabs(a[j] - b[j]));
  }
  const auto once = serialize(m), twice = serialize(deserialize(once));
  const bool same_bytes = once == twice;
  return {worst < kSerializationTolerance && same_bytes && back.spec == spec && back.epoch == 95,
          fmt("max |prob diff| %.3g over %d inputs (tol %.0e), re-serialized bytes identical: %s", worst,
              kSerializationInputs, kSerializationTolerance, same_bytes ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"architecture", architecture}, {"gradients", gradients},       {"optimizer", optimizer},
      {"ensemble", ensemble},         {"metrics", metrics},           {"protocol", protocol},
      {"desk", desk},                 {"augmentation", augmentation}, {"finetune", finetuning},
      {"serialization", serialization},
  };
  auto selected = [&](const std::string& name) {
    if (argc < 2) return true;
    for (int i = 1; i < argc; ++i)
      if (name.rfind(argv[i], 0) == 0) return true;
    return false;
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    if (!selected(name)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
