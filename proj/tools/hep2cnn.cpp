// hep2cnn: command-line front end for the HEp-2 cell CNN pipeline.
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hep2/config.hpp"
#include "hep2/dataset.hpp"
#include "hep2/error.hpp"
#include "hep2/inference.hpp"
#include "hep2/metrics.hpp"
#include "hep2/network.hpp"
#include "hep2/synth.hpp"
#include "hep2/trainer.hpp"

namespace fs = std::filesystem;
using namespace hep2;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot create " + path.string());
  out << text;
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
}

std::string snapshot_name(std::uint32_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%03u.model", epoch);
  return buf;
}

RunConfig config_or_default(const std::string& path) {
  return path.empty() ? RunConfig{} : load_config(path);
}

ChannelMode channel_for(const RunConfig& cfg, const DatasetManifest& m) {
  return cfg.channel.value_or(m.channel);
}

void log_epoch(const EpochRecord& r) {
  std::printf("epoch %3zu  lr %.6g  loss %.4f  train_mca %.4f", r.epoch, r.learning_rate, r.train_loss,
              r.train_mca);
  if (r.validation_mca) std::printf("  val_mca %.4f", *r.validation_mca);
  std::printf("\n");
  std::fflush(stdout);
}

// Split membership as written by `train`: id,subset.
void write_split(const fs::path& path, const Split& s) {
  std::ostringstream out;
  out << "id,subset\n";
  for (const auto& x : s.train) out << x.id << ",train\n";
  for (const auto& x : s.validation) out << x.id << ",validation\n";
  for (const auto& x : s.test) out << x.id << ",test\n";
  write_text(path, out.str());
}

std::map<std::string, std::string> read_split(const fs::path& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    out[line.substr(0, comma)] = line.substr(comma + 1);
  }
  return out;
}

std::vector<std::string> read_classes(const fs::path& path) {
  std::vector<std::string> out;
  std::istringstream in(read_text(path));
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

void write_classes(const fs::path& path, const std::vector<std::string>& classes) {
  std::string text;
  for (const auto& c : classes) text += c + "\n";
  write_text(path, text);
}

// Writes preprocessed images as 16-bit PGM plus a manifest without masks.
void write_image_set(const fs::path& out_dir, const std::vector<LabeledImage>& images,
                     const std::vector<std::string>& classes) {
  make_dirs(out_dir / "images");
  DatasetManifest m;
  m.classes = classes;
  m.channel = ChannelMode::grayscale;
  for (const auto& img : images) {
    std::string file = img.id;
    std::replace(file.begin(), file.end(), '@', '_');
    const fs::path p = out_dir / "images" / (file + ".pgm");
    write_gray(p, img.image, 16);
    m.samples.push_back({img.id, p, std::nullopt, img.label, {}});
  }
  write_manifest(out_dir / "manifest.csv", m);
}

std::vector<Model> load_models(const std::vector<std::string>& paths) {
  std::vector<Model> out;
  for (const auto& p : paths) out.push_back(load_model(p));
  return out;
}

// Snapshots of a run directory in epoch order.
std::vector<std::string> run_snapshots(const fs::path& run) {
  std::vector<std::string> out;
  const fs::path dir = run / "snapshots";
  if (!fs::is_directory(dir)) fail(ErrorKind::io, "no snapshots directory in " + run.string());
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".model") out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  if (out.empty()) fail(ErrorKind::io, "no snapshots in " + dir.string());
  return out;
}

struct CommonOpts {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<double> angle_step;
  bool align = false;
};

void apply_overrides(RunConfig& cfg, const CommonOpts& o) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.epochs) {
    cfg.train.max_epochs = *o.epochs;
    std::erase_if(cfg.train.snapshot_epochs, [&](std::size_t e) { return e > *o.epochs; });
    if (cfg.train.snapshot_epochs.empty()) cfg.train.snapshot_epochs.push_back(*o.epochs);
  }
  if (o.angle_step) cfg.angle_step = *o.angle_step;
  if (o.align) cfg.preprocess.align = true;
  cfg.train.validate();
}

int cmd_synth(const fs::path& out, const SynthOptions& opts) {
  const auto m = synth_generate(out, opts);
  std::printf("wrote %zu samples to %s\n", m.samples.size(), (out / "manifest.csv").c_str());
  return 0;
}

int cmd_preprocess(const CommonOpts& o, const std::string& manifest_path, const fs::path& out,
                   double step) {
  RunConfig cfg = config_or_default(o.config);
  apply_overrides(cfg, o);
  const auto m = load_manifest(manifest_path.empty() ? cfg.manifest : fs::path(manifest_path));
  const auto images = load_samples(m.samples, channel_for(cfg, m), cfg.preprocess,
                                   AugmentationPlan(step), cfg.augment_order);
  write_image_set(out, images, m.classes);
  std::printf("wrote %zu images to %s\n", images.size(), out.c_str());
  return 0;
}

int cmd_train(const CommonOpts& o, const std::string& manifest_path, const std::string& run_dir) {
  RunConfig cfg = config_or_default(o.config);
  if (!manifest_path.empty()) cfg.manifest = manifest_path;
  apply_overrides(cfg, o);
  if (cfg.manifest.empty()) fail(ErrorKind::config, "no manifest given (--manifest or paths.manifest)");
  cfg.manifest = fs::absolute(cfg.manifest);
  const auto m = load_manifest(cfg.manifest);
  if (cfg.network.classes() != m.classes.size())
    fail(ErrorKind::config, "network outputs " + std::to_string(cfg.network.classes()) +
                                " classes but the manifest has " + std::to_string(m.classes.size()));
  const fs::path run = run_dir.empty() ? run_directory(cfg) : fs::path(run_dir);
  make_dirs(run / "snapshots");
  write_text(run / "config.json", dump_config(cfg));
  write_classes(run / "classes.txt", m.classes);

  const Split parts = split(m, cfg.split_spec());
  write_split(run / "split.csv", parts);
  const ChannelMode ch = channel_for(cfg, m);
  const auto train = load_samples(parts.train, ch, cfg.preprocess, AugmentationPlan(cfg.angle_step),
                                  cfg.augment_order);
  const auto validation = load_samples(parts.validation, ch, cfg.preprocess);
  std::printf("run %s: %zu training images (%zu samples x %zu rotations), %zu validation\n",
              run.c_str(), train.size(), parts.train.size(), AugmentationPlan(cfg.angle_step).variants(),
              validation.size());

  const auto result = fit(cfg.train_config(), cfg.network, train, validation, log_epoch);
  for (const auto& s : result.snapshots) save_model(run / "snapshots" / snapshot_name(s.epoch), s);
  save_model(run / "final.model",
             {result.state.spec, result.state.params, static_cast<std::uint32_t>(result.state.epoch)});
  write_text(run / "curve.csv", curve_csv(result.state.history));
  std::printf("wrote %zu snapshots under %s\n", result.snapshots.size(), run.c_str());
  return 0;
}

int cmd_finetune(const CommonOpts& o, const std::string& model_path, const std::string& manifest_path,
                 const std::string& run_dir, double dropout) {
  RunConfig cfg = config_or_default(o.config);
  if (!manifest_path.empty()) cfg.manifest = manifest_path;
  CommonOpts local = o;
  if (!local.epochs) local.epochs = 10;
  cfg.train.snapshot_epochs = {*local.epochs};
  cfg.train.dropout = dropout;
  apply_overrides(cfg, local);
  if (cfg.manifest.empty()) fail(ErrorKind::config, "no manifest given (--manifest or paths.manifest)");
  cfg.manifest = fs::absolute(cfg.manifest);
  const Model pretrained = load_model(model_path);
  const auto m = load_manifest(cfg.manifest);
  cfg.network = pretrained.spec;

  const fs::path run = run_dir.empty() ? run_directory(cfg) : fs::path(run_dir);
  make_dirs(run / "snapshots");
  write_text(run / "config.json", dump_config(cfg));
  write_classes(run / "classes.txt", m.classes);
  const Split parts = split(m, cfg.split_spec());
  write_split(run / "split.csv", parts);
  const ChannelMode ch = channel_for(cfg, m);
  const auto train = load_samples(parts.train, ch, cfg.preprocess, AugmentationPlan(cfg.angle_step),
                                  cfg.augment_order);
  // Fine-tuning curves track the held-out part of the new set.
  const auto& held = parts.validation.empty() ? parts.test : parts.validation;
  const auto validation = load_samples(held, ch, cfg.preprocess);

  const auto result = finetune(pretrained, m.classes.size(), cfg.train_config(), train, validation, log_epoch);
  for (const auto& s : result.snapshots) save_model(run / "snapshots" / snapshot_name(s.epoch), s);
  save_model(run / "final.model",
             {result.state.spec, result.state.params, static_cast<std::uint32_t>(result.state.epoch)});
  write_text(run / "curve.csv", curve_csv(result.state.history));
  std::printf("fine-tuned %u-epoch model for %zu epochs under %s\n", pretrained.epoch,
              result.state.epoch, run.c_str());
  return 0;
}

int cmd_eval(const CommonOpts& o, std::vector<std::string> models, const std::string& run_dir,
             const std::string& manifest_path, const std::string& subset, const fs::path& out) {
  RunConfig cfg;
  if (!run_dir.empty() && o.config.empty() && fs::exists(fs::path(run_dir) / "config.json"))
    cfg = load_config(fs::path(run_dir) / "config.json");
  else
    cfg = config_or_default(o.config);
  if (!manifest_path.empty()) cfg.manifest = manifest_path;
  if (o.angle_step) cfg.test_angle_step = *o.angle_step;
  if (o.align) cfg.preprocess.align = true;
  if (models.empty() && !run_dir.empty()) models = run_snapshots(run_dir);
  if (models.empty()) fail(ErrorKind::config, "no models given (--model or --run)");
  if (cfg.manifest.empty()) fail(ErrorKind::config, "no manifest given (--manifest or paths.manifest)");
  const auto m = load_manifest(cfg.manifest);

  std::vector<CellSample> chosen;
  if (subset == "all") {
    chosen = m.samples;
  } else {
    if (run_dir.empty()) fail(ErrorKind::config, "--subset " + subset + " needs --run for the split");
    const auto membership = read_split(fs::path(run_dir) / "split.csv");
    for (const auto& s : m.samples) {
      auto it = membership.find(s.id);
      if (it != membership.end() && it->second == subset) chosen.push_back(s);
    }
    if (chosen.empty()) fail(ErrorKind::data, "no samples in subset '" + subset + "'");
  }

  Ensemble ensemble(load_models(models), m.classes);
  const AugmentationPlan plan(cfg.effective_test_step());
  const auto images = load_samples(chosen, channel_for(cfg, m), cfg.preprocess);
  const Evaluation e = evaluate(ensemble, images, plan);

  std::vector<EpochRecord> history;
  if (!run_dir.empty() && fs::exists(fs::path(run_dir) / "curve.csv")) {
    std::istringstream in(read_text(fs::path(run_dir) / "curve.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::vector<std::string> f;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) f.push_back(cell);
      if (f.size() < 4) continue;
      EpochRecord r{std::stoul(f[0]), std::stod(f[1]), std::stod(f[2]), std::stod(f[3]), std::nullopt};
      if (f.size() > 4 && !f[4].empty()) r.validation_mca = std::stod(f[4]);
      history.push_back(r);
    }
  }
  make_dirs(out);
  export_report(out, e.confusion, m.classes, history);
  std::vector<std::string> ids;
  for (const auto& img : images) ids.push_back(img.id);
  write_text(out / "predictions.csv", predictions_csv(ids, e.predictions, m.classes));
  std::printf("%zu members x %zu rotations on %zu images: MCA %s%%  ACA %s%%  (report in %s)\n",
              ensemble.members().size(), plan.variants(), images.size(),
              format_fixed(100.0 * mca(e.confusion), 2).c_str(),
              format_fixed(100.0 * aca(e.confusion), 2).c_str(), out.c_str());
  return 0;
}

int cmd_predict(const CommonOpts& o, std::vector<std::string> models, const std::string& run_dir,
                const std::vector<std::string>& inputs, const std::string& classes_arg,
                const fs::path& out) {
  RunConfig cfg;
  if (!run_dir.empty() && o.config.empty() && fs::exists(fs::path(run_dir) / "config.json"))
    cfg = load_config(fs::path(run_dir) / "config.json");
  else
    cfg = config_or_default(o.config);
  if (o.angle_step) cfg.test_angle_step = *o.angle_step;
  if (models.empty() && !run_dir.empty()) models = run_snapshots(run_dir);
  if (models.empty()) fail(ErrorKind::config, "no models given (--model or --run)");
  Ensemble probe(load_models(models));

  std::vector<std::string> names;
  if (!classes_arg.empty()) {
    std::stringstream ss(classes_arg);
    std::string c;
    while (std::getline(ss, c, ',')) names.push_back(c);
  } else if (!run_dir.empty() && fs::exists(fs::path(run_dir) / "classes.txt")) {
    names = read_classes(fs::path(run_dir) / "classes.txt");
  } else {
    for (std::size_t k = 0; k < probe.classes(); ++k) names.push_back("class" + std::to_string(k));
  }
  Ensemble ensemble(probe.members(), names);

  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in)) {
        const auto ext = e.path().extension();
        if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.emplace_back(in);
    }
  }
  if (files.empty()) fail(ErrorKind::data, "predict: no input images");
  if (cfg.preprocess.align) fail(ErrorKind::config, "predict works on unmasked images; disable align");
  const AugmentationPlan plan(cfg.effective_test_step());
  std::vector<std::string> ids;
  std::vector<Prediction> preds;
  for (const auto& f : files) {
    const RasterImage raster = read_netpbm(f);
    const auto img = preprocess(raster, nullptr, cfg.preprocess);
    ids.push_back(f.stem().string());
    preds.push_back(ensemble_predict(ensemble, img.value, plan));
  }
  const std::string csv = predictions_csv(ids, preds, names);
  if (out.empty()) std::cout << csv;
  else write_text(out, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HEp-2 cell classification with a convolutional network"};
  app.require_subcommand(1);
  CommonOpts common;

  auto add_config = [&](CLI::App* c) {
    c->add_option("-c,--config", common.config, "run configuration (JSON)");
  };

  // synth
  SynthOptions so;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
  synth->add_option("-o,--out", synth_out, "output directory")->required();
  synth->add_option("--classes", so.classes, "number of classes (1-6)");
  synth->add_option("--per-class", so.per_class, "samples per class");
  synth->add_option("--size", so.size, "image side in pixels");
  synth->add_option("--seed", so.seed, "generator seed");
  synth->add_option("--orientation-center", so.orientation_center, "mean cell orientation, degrees");
  synth->add_option("--orientation-jitter", so.orientation_jitter, "orientation spread, degrees (360 = uniform)");
  synth->add_option("--noise", so.noise, "gaussian noise sigma");
  synth->add_option("--first-index", so.first_index, "index offset for ids and streams");
  synth->add_flag("--shifted", so.shifted, "second-laboratory appearance, RGB output");

  // preprocess / augment
  std::string manifest, out_dir;
  double step = 0.0;
  auto* pre = app.add_subcommand("preprocess", "write preprocessed 78x78 images and a manifest");
  auto* aug = app.add_subcommand("augment", "write rotation-augmented preprocessed images");
  for (auto* c : {pre, aug}) {
    add_config(c);
    c->add_option("-m,--manifest", manifest, "dataset manifest");
    c->add_option("-o,--out", out_dir, "output directory")->required();
    c->add_flag("--align", common.align, "rotate each cell to its principal axis first");
  }
  aug->add_option("--angle-step", step, "rotation step in degrees, must divide 360")->required();

  // train / finetune
  std::string run_dir, model_path;
  double dropout = 0.5;
  auto* train = app.add_subcommand("train", "train a network and write snapshots");
  auto* ft = app.add_subcommand("finetune", "fine-tune a pretrained model on a new manifest");
  for (auto* c : {train, ft}) {
    add_config(c);
    c->add_option("-m,--manifest", manifest, "dataset manifest");
    c->add_option("--run-dir", run_dir, "output directory (default runs/<hash>-s<seed>)");
    c->add_option("--seed", common.seed, "override the config seed");
    c->add_option("--epochs", common.epochs, "override max_epochs");
    c->add_option("--angle-step", common.angle_step, "training augmentation step, degrees");
    c->add_flag("--align", common.align, "pre-align cells by their masks");
  }
  ft->add_option("--model", model_path, "pretrained model file")->required();
  ft->add_option("--dropout", dropout, "dropout ratio for fine-tuning")->capture_default_str();

  // eval / predict
  std::vector<std::string> models, inputs;
  std::string subset = "test", classes_arg, out_file;
  auto* ev = app.add_subcommand("eval", "evaluate an ensemble on a labeled set and write reports");
  auto* pr = app.add_subcommand("predict", "write class probabilities for unlabeled images");
  for (auto* c : {ev, pr}) {
    add_config(c);
    c->add_option("--model", models, "model files forming the ensemble");
    c->add_option("--run", run_dir, "run directory (snapshots, config, split)");
    c->add_option("--angle-step", common.angle_step, "test-time rotation step, degrees");
  }
  ev->add_option("-m,--manifest", manifest, "labeled manifest");
  ev->add_option("--subset", subset, "train, validation, test or all")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}))
      ->capture_default_str();
  ev->add_option("-o,--out", out_dir, "report directory")->required();
  ev->add_flag("--align", common.align, "pre-align cells by their masks");
  pr->add_option("inputs", inputs, "image files or directories")->required();
  pr->add_option("--classes", classes_arg, "comma-separated class names");
  pr->add_option("-o,--out", out_file, "output CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(synth_out, so);
    if (pre->parsed()) return cmd_preprocess(common, manifest, out_dir, 360.0);
    if (aug->parsed()) return cmd_preprocess(common, manifest, out_dir, step);
    if (train->parsed()) return cmd_train(common, manifest, run_dir);
    if (ft->parsed()) return cmd_finetune(common, model_path, manifest, run_dir, dropout);
    if (ev->parsed()) return cmd_eval(common, models, run_dir, manifest, subset, out_dir);
    if (pr->parsed()) return cmd_predict(common, models, run_dir, inputs, classes_arg, out_file);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", std::string(to_string(e.kind())).c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: InternalError: %s\n", e.what());
    return 3;
  }
  return 1;
}
