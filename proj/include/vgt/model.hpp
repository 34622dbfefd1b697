// SPDX-License-Identifier: Apache-2.0
//
// The complete question-answering model: video graph + DGT, text encoder,
// cross-modal interaction, global transformer and answer scoring.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "vgt/dgt.hpp"
#include "vgt/qa_head.hpp"
#include "vgt/text.hpp"

namespace vgt {

struct ModelConfig {
  DgtConfig dgt;
  TextEncoderConfig text;  // vocab_size follows the vocabulary
  CrossModalConfig cross;
  Ablation ablation;
  bool joint_decision = true;  // open-ended scoring only

  std::size_t hidden() const { return dgt.graph.hidden; }
  MhsaConfig global_mhsa() const { return dgt.node_mhsa(); }
  void validate() const;
};

struct Model {
  ModelConfig cfg;
  Vocab vocab;
  ParamStore params;

  /// Fresh parameters for the config; cfg.text.vocab_size is set from vocab.
  static Model create(ModelConfig cfg, Vocab vocab, Rng& rng);
};

/// Stacked model inputs for one video (frame-major, anchor-aligned rows).
struct VideoInput {
  Tensor regions;   // (l_v * n) x d_r
  Tensor geometry;  // (l_v * n) x 5
  Tensor frames;    // l_v x d_I
};

/// Top-n selection, per-clip track alignment and stacking.
VideoInput prepare_video(std::span<const FrameDetections> frames, std::span<const std::vector<double>> frame_features,
                         const GraphConfig& cfg);

/// DGT clip features (k x d). `text` is only read for object/frame placement.
Tensor video_clips(const VideoInput& video, const Model& model, const TextContext* text);

struct MultiChoiceResult {
  ScoreVector scores;
  Tensor video;    // |A| x d, query-aware representation per candidate
  Tensor answers;  // |A| x d, answer-span pooled candidate features
};

/// One query-aware pass per (question, candidate) pair.
MultiChoiceResult multi_choice_forward(const VideoInput& video, const std::string& question,
                                       const std::vector<std::string>& candidates, const Model& model);

/// Scores every answer of a global answer set for one question.
ScoreVector open_ended_forward(const VideoInput& video, const std::string& question,
                               const std::vector<std::string>& answer_set, const Model& model);

}  // namespace vgt
