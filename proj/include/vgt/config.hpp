// SPDX-License-Identifier: Apache-2.0
//
// Run configuration in a flat `key = value` text format. `#` starts a
// comment; unknown keys and malformed values are errors.
#pragma once

#include <cstdint>
#include <string>

#include "vgt/model.hpp"
#include "vgt/pretrain.hpp"

namespace vgt {

enum class Mode { MultiChoice, OpenEnded, Pretrain };

Mode parse_mode(const std::string& text);
std::string mode_name(Mode m);

struct RunConfig {
  // video graph
  std::size_t frames = 8;
  std::size_t clips = 4;
  std::size_t clip_length = 2;
  std::size_t objects = 4;
  double link_weight = 1.0;
  std::size_t region_dim = 32;
  std::size_t frame_dim = 32;
  // model
  std::size_t hidden = 64;
  std::size_t heads = 4;
  std::size_t edge_heads = 4;
  std::size_t layers = 1;
  std::size_t gcn_layers = 2;
  std::size_t text_dim = 64;
  std::size_t text_heads = 4;
  std::size_t text_layers = 2;
  std::size_t text_max_len = 32;
  Ablation ablation;
  Placement cm_placement = Placement::Clip;
  bool cross_modal = true;
  bool joint_decision = true;
  // optimization
  Mode mode = Mode::MultiChoice;
  double lr = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  std::size_t max_steps = 0;       // 0 = no cap
  std::size_t stage2_epochs = 0;   // extra epochs with the text encoder frozen
  bool freeze_text = false;        // freeze the text encoder from the start
  double target_train_acc = 0.0;   // stop once reached (0 = never)
  std::uint64_t seed = 0;
  // pretraining
  std::size_t negatives = 63;
  double mlm_weight = 1.0;
  double mask_prob = 0.15;
  // synthetic data
  std::size_t num_candidates = 5;

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  /// Canonical text: every key, fixed order, round-trips through parse.
  std::string to_text() const;
  /// Applies a single key = value assignment.
  void set(const std::string& key, const std::string& value);
  void validate() const;

  GraphConfig graph() const;
  ModelConfig model() const;
  PretrainConfig pretrain() const;

  bool operator==(const RunConfig& other) const { return to_text() == other.to_text(); }
};

}  // namespace vgt
