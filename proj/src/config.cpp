// SPDX-License-Identifier: Apache-2.0
#include "vgt/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "vgt/error.hpp"

namespace vgt {

Mode parse_mode(const std::string& text) {
  if (text == "multi-choice") return Mode::MultiChoice;
  if (text == "open-ended") return Mode::OpenEnded;
  if (text == "pretrain") return Mode::Pretrain;
  throw Error("unknown mode '" + text + "' (expected multi-choice, open-ended or pretrain)");
}

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::MultiChoice: return "multi-choice";
    case Mode::OpenEnded: return "open-ended";
    case Mode::Pretrain: return "pretrain";
  }
  return "multi-choice";
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  if (v.empty() || v[0] == '-') throw Error("config: " + key + " must be a non-negative integer, got '" + v + "'");
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (errno != 0 || *end != '\0') throw Error("config: " + key + " must be a non-negative integer, got '" + v + "'");
  return std::size_t(x);
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || errno != 0 || *end != '\0') throw Error("config: " + key + " must be a number, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error("config: " + key + " must be true or false, got '" + v + "'");
}

std::string fmt(double x) {
  std::ostringstream ss;
  ss.precision(17);
  ss << x;
  return ss.str();
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define VGT_SIZE(name) \
  {#name, {[](RunConfig& c, const std::string& k, const std::string& v) { c.name = to_size(k, v); }, \
           [](const RunConfig& c) { return std::to_string(c.name); }}}
#define VGT_REAL(name) \
  {#name, {[](RunConfig& c, const std::string& k, const std::string& v) { c.name = to_double(k, v); }, \
           [](const RunConfig& c) { return fmt(c.name); }}}
#define VGT_BOOL(name) \
  {#name, {[](RunConfig& c, const std::string& k, const std::string& v) { c.name = to_bool(k, v); }, \
           [](const RunConfig& c) { return std::string(c.name ? "true" : "false"); }}}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      VGT_SIZE(frames),
      VGT_SIZE(clips),
      VGT_SIZE(clip_length),
      VGT_SIZE(objects),
      VGT_REAL(link_weight),
      VGT_SIZE(region_dim),
      VGT_SIZE(frame_dim),
      VGT_SIZE(hidden),
      VGT_SIZE(heads),
      VGT_SIZE(edge_heads),
      VGT_SIZE(layers),
      VGT_SIZE(gcn_layers),
      VGT_SIZE(text_dim),
      VGT_SIZE(text_heads),
      VGT_SIZE(text_layers),
      VGT_SIZE(text_max_len),
      {"ablate", {[](RunConfig& c, const std::string&, const std::string& v) { c.ablation = Ablation::parse(v); },
                  [](const RunConfig& c) { return c.ablation.str(); }}},
      {"cm_placement",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.cm_placement = parse_placement(v); },
        [](const RunConfig& c) { return placement_name(c.cm_placement); }}},
      VGT_BOOL(cross_modal),
      VGT_BOOL(joint_decision),
      {"mode", {[](RunConfig& c, const std::string&, const std::string& v) { c.mode = parse_mode(v); },
                [](const RunConfig& c) { return mode_name(c.mode); }}},
      VGT_REAL(lr),
      VGT_SIZE(epochs),
      VGT_SIZE(batch_size),
      VGT_SIZE(max_steps),
      VGT_SIZE(stage2_epochs),
      VGT_BOOL(freeze_text),
      VGT_REAL(target_train_acc),
      {"seed", {[](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_size(k, v); },
                [](const RunConfig& c) { return std::to_string(c.seed); }}},
      VGT_SIZE(negatives),
      VGT_REAL(mlm_weight),
      VGT_REAL(mask_prob),
      VGT_SIZE(num_candidates),
  };
  return table;
}

#undef VGT_SIZE
#undef VGT_REAL
#undef VGT_BOOL

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(*this, key, value);
      return;
    }
  }
  throw Error("config: unknown key '" + key + "'");
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::map<std::string, std::size_t> seen;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (seen.count(key))
      throw Error("config line " + std::to_string(no) + ": '" + key + "' already set on line " +
                  std::to_string(seen[key]));
    seen[key] = no;
    try {
      cfg.set(key, value);
    } catch (const Error& e) {
      throw Error("config line " + std::to_string(no) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return parse(ss.str());
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + " = " + field.get(*this) + "\n";
  return out;
}

void RunConfig::validate() const {
  model().validate();
  check(text_max_len >= 2, "config: text_max_len must be at least 2");
  check(lr > 0.0, "config: lr must be positive");
  check(batch_size >= 1, "config: batch_size must be at least 1");
  check(target_train_acc >= 0.0 && target_train_acc <= 1.0, "config: target_train_acc must lie in [0, 1]");
  check(num_candidates >= 2, "config: num_candidates must be at least 2");
  check(negatives >= 1, "config: negatives must be at least 1");
  check(mlm_weight >= 0.0, "config: mlm_weight must be non-negative");
  check(mask_prob >= 0.0 && mask_prob <= 1.0, "config: mask_prob must lie in [0, 1]");
}

GraphConfig RunConfig::graph() const {
  GraphConfig g;
  g.frames = frames;
  g.clips = clips;
  g.clip_length = clip_length;
  g.objects = objects;
  g.link_weight = link_weight;
  g.hidden = hidden;
  g.region_dim = region_dim;
  return g;
}

ModelConfig RunConfig::model() const {
  ModelConfig m;
  m.dgt.graph = graph();
  m.dgt.heads = heads;
  m.dgt.edge_heads = edge_heads;
  m.dgt.layers = layers;
  m.dgt.gcn_layers = gcn_layers;
  m.dgt.frame_dim = frame_dim;
  m.text.vocab_size = std::max<std::size_t>(m.text.vocab_size, Vocab::kReserved + 1);
  m.text.dim = text_dim;
  m.text.heads = text_heads;
  m.text.layers = text_layers;
  m.text.max_len = text_max_len;
  m.text.out_dim = hidden;
  m.cross.placement = cm_placement;
  m.cross.enabled = cross_modal;
  m.ablation = ablation;
  m.joint_decision = joint_decision;
  return m;
}

PretrainConfig RunConfig::pretrain() const {
  PretrainConfig p;
  p.negatives = negatives;
  p.mlm_weight = mlm_weight;
  p.mask_prob = mask_prob;
  return p;
}

}  // namespace vgt
