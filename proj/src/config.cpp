#include "hep2/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"

#include "hep2/error.hpp"

namespace hep2 {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& why) {
  fail(ErrorKind::config, where + ": " + why);
}

void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) bad(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) bad(where, "unknown key '" + key + "'");
  }
}

template <class T>
void read(const json& obj, const char* key, const std::string& where, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!it->is_number_unsigned()) bad(where + "." + key, "expected a non-negative integer");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number()) bad(where + "." + key, "expected a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) bad(where + "." + key, "expected true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) bad(where + "." + key, "expected a string");
    }
    out = it->get<T>();
  } catch (const json::exception& e) {
    bad(where + "." + key, e.what());
  }
}

LayerSpec parse_layer(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    bad(where, "each layer needs a string 'type'");
  const std::string type = j["type"];
  LayerSpec l;
  if (type == "conv") {
    only_keys(j, where, {"type", "kernel", "maps"});
    l.kind = LayerKind::convolution;
    read(j, "kernel", where, l.size);
    read(j, "maps", where, l.maps);
  } else if (type == "pool") {
    only_keys(j, where, {"type", "size"});
    l.kind = LayerKind::maxpool;
    read(j, "size", where, l.size);
  } else if (type == "dense") {
    only_keys(j, where, {"type", "units"});
    l.kind = LayerKind::fully_connected;
    read(j, "units", where, l.size);
  } else if (type == "output") {
    only_keys(j, where, {"type", "classes"});
    l.kind = LayerKind::output;
    read(j, "classes", where, l.size);
  } else {
    bad(where, "unknown layer type '" + type + "' (conv, pool, dense, output)");
  }
  return l;
}

json layer_json(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::convolution: return {{"type", "conv"}, {"kernel", l.size}, {"maps", l.maps}};
    case LayerKind::maxpool: return {{"type", "pool"}, {"size", l.size}};
    case LayerKind::fully_connected: return {{"type", "dense"}, {"units", l.size}};
    case LayerKind::output: return {{"type", "output"}, {"classes", l.size}};
  }
  return {};
}

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

json to_json(const RunConfig& c, bool with_paths) {
  json layers = json::array();
  for (const auto& l : c.network.layers) layers.push_back(layer_json(l));
  const auto& t = c.train;
  json j = {
      {"config_version", kConfigVersion},
      {"seed", c.seed},
      {"network",
       {{"input", {c.network.input_height, c.network.input_width}}, {"layers", layers}}},
      {"train",
       {{"learning_rate", t.learning_rate},
        {"batch_size", t.batch_size},
        {"momentum", t.momentum},
        {"weight_decay", t.weight_decay},
        {"dropout", t.dropout},
        {"max_epochs", t.max_epochs},
        {"snapshot_epochs", t.snapshot_epochs},
        {"schedule",
         {{"factor", t.schedule.factor},
          {"patience", t.schedule.patience},
          {"min_improvement", t.schedule.min_improvement},
          {"max_reductions", t.schedule.max_reductions}}}}},
      {"split",
       {{"train", c.split.train},
        {"validation", c.split.validation},
        {"test", c.split.test},
        {"stratify", c.split.stratify}}},
      {"augmentation",
       {{"angle_step", c.angle_step},
        {"order", c.augment_order == AugmentOrder::after_resize ? "after_resize" : "before_resize"}}},
      {"preprocess", {{"align", c.preprocess.align}, {"target", c.preprocess.target}}},
  };
  if (c.test_angle_step) j["augmentation"]["test_angle_step"] = *c.test_angle_step;
  if (c.channel) j["channel"] = *c.channel == ChannelMode::green ? "green" : "grayscale";
  if (with_paths) {
    j["paths"] = {{"runs", c.runs_dir.generic_string()}};
    if (!c.manifest.empty()) j["paths"]["manifest"] = c.manifest.generic_string();
  }
  return j;
}

}  // namespace

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.seed = seed;
  return t;
}

SplitSpec RunConfig::split_spec() const {
  SplitSpec s = split;
  s.seed = seed;
  return s;
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::config, std::string("config is not valid JSON: ") + e.what());
  }
  only_keys(j, "config",
            {"config_version", "seed", "network", "train", "split", "augmentation", "preprocess",
             "channel", "paths"});
  if (!j.contains("config_version")) bad("config", "missing config_version");
  if (j["config_version"] != kConfigVersion)
    bad("config", "unsupported config_version " + j["config_version"].dump() + " (expected " +
                      std::to_string(kConfigVersion) + ")");

  RunConfig c;
  read(j, "seed", "config", c.seed);

  if (j.contains("network")) {
    const json& n = j["network"];
    only_keys(n, "network", {"input", "layers"});
    if (n.contains("input")) {
      const json& in = n["input"];
      if (!in.is_array() || in.size() != 2 || !in[0].is_number_unsigned() || !in[1].is_number_unsigned())
        bad("network.input", "expected [height, width]");
      c.network.input_height = in[0];
      c.network.input_width = in[1];
    }
    if (n.contains("layers")) {
      if (!n["layers"].is_array()) bad("network.layers", "expected an array");
      c.network.layers.clear();
      for (std::size_t i = 0; i < n["layers"].size(); ++i)
        c.network.layers.push_back(parse_layer(n["layers"][i], "network.layers[" + std::to_string(i) + "]"));
    }
    try {
      resolve(c.network);
    } catch (const Error& e) {
      bad("network", e.what());
    }
  }

  if (j.contains("train")) {
    const json& t = j["train"];
    only_keys(t, "train",
              {"learning_rate", "batch_size", "momentum", "weight_decay", "dropout", "max_epochs",
               "snapshot_epochs", "schedule"});
    read(t, "learning_rate", "train", c.train.learning_rate);
    read(t, "batch_size", "train", c.train.batch_size);
    read(t, "momentum", "train", c.train.momentum);
    read(t, "weight_decay", "train", c.train.weight_decay);
    read(t, "dropout", "train", c.train.dropout);
    read(t, "max_epochs", "train", c.train.max_epochs);
    if (t.contains("snapshot_epochs")) {
      const json& s = t["snapshot_epochs"];
      if (!s.is_array()) bad("train.snapshot_epochs", "expected an array of epochs");
      c.train.snapshot_epochs.clear();
      for (const auto& e : s) {
        if (!e.is_number_unsigned()) bad("train.snapshot_epochs", "expected positive integers");
        c.train.snapshot_epochs.push_back(e.get<std::size_t>());
      }
    }
    if (t.contains("schedule")) {
      const json& s = t["schedule"];
      only_keys(s, "train.schedule", {"factor", "patience", "min_improvement", "max_reductions"});
      read(s, "factor", "train.schedule", c.train.schedule.factor);
      read(s, "patience", "train.schedule", c.train.schedule.patience);
      read(s, "min_improvement", "train.schedule", c.train.schedule.min_improvement);
      read(s, "max_reductions", "train.schedule", c.train.schedule.max_reductions);
    }
    c.train.validate();
  }

  if (j.contains("split")) {
    const json& s = j["split"];
    only_keys(s, "split", {"train", "validation", "test", "stratify"});
    read(s, "train", "split", c.split.train);
    read(s, "validation", "split", c.split.validation);
    read(s, "test", "split", c.split.test);
    read(s, "stratify", "split", c.split.stratify);
    if (std::abs(c.split.train + c.split.validation + c.split.test - 1.0) > 1e-9)
      bad("split", "fractions must sum to 1");
  }

  if (j.contains("augmentation")) {
    const json& a = j["augmentation"];
    only_keys(a, "augmentation", {"angle_step", "test_angle_step", "order"});
    read(a, "angle_step", "augmentation", c.angle_step);
    if (a.contains("test_angle_step")) {
      double v = 0;
      read(a, "test_angle_step", "augmentation", v);
      c.test_angle_step = v;
    }
    std::string order = "after_resize";
    read(a, "order", "augmentation", order);
    if (order == "after_resize") c.augment_order = AugmentOrder::after_resize;
    else if (order == "before_resize") c.augment_order = AugmentOrder::before_resize;
    else bad("augmentation.order", "expected after_resize or before_resize");
    try {
      AugmentationPlan{c.angle_step};
      AugmentationPlan{c.effective_test_step()};
    } catch (const Error& e) {
      bad("augmentation", e.what());
    }
  }

  if (j.contains("preprocess")) {
    const json& p = j["preprocess"];
    only_keys(p, "preprocess", {"align", "target"});
    read(p, "align", "preprocess", c.preprocess.align);
    read(p, "target", "preprocess", c.preprocess.target);
    if (c.preprocess.target != c.network.input_height || c.preprocess.target != c.network.input_width)
      bad("preprocess.target", "must equal the network input size");
  }

  if (j.contains("channel")) {
    std::string mode;
    read(j, "channel", "config", mode);
    if (mode == "green") c.channel = ChannelMode::green;
    else if (mode == "grayscale") c.channel = ChannelMode::grayscale;
    else bad("channel", "expected green or grayscale");
  }

  if (j.contains("paths")) {
    const json& p = j["paths"];
    only_keys(p, "paths", {"manifest", "runs"});
    std::string s;
    if (p.contains("manifest")) {
      read(p, "manifest", "paths", s);
      c.manifest = resolve_path(base, s);
    }
    if (p.contains("runs")) {
      read(p, "runs", "paths", s);
      c.runs_dir = resolve_path(base, s);
    }
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string dump_config(const RunConfig& config) { return to_json(config, true).dump(2) + "\n"; }

std::string config_hash(const RunConfig& config) {
  json j = to_json(config, false);
  j.erase("seed");
  const std::string canon = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::filesystem::path run_directory(const RunConfig& config) {
  return config.runs_dir / (config_hash(config) + "-s" + std::to_string(config.seed));
}

}  // namespace hep2
