// SPDX-License-Identifier: Apache-2.0
//
// Video-description matching with sampled negatives, plus masked language
// modelling on the positive description.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "vgt/model.hpp"
#include "vgt/optim.hpp"
#include "vgt/rng.hpp"

namespace vgt {

struct PretrainConfig {
  std::size_t negatives = 63;  // N_neg
  double mlm_weight = 1.0;     // lambda_mlm
  double mask_prob = 0.15;
};

/// `count` distinct indices in [0, dataset_size) other than `index`, drawn
/// uniformly without replacement.
std::vector<std::size_t> sample_negatives(std::size_t dataset_size, std::size_t index, std::size_t count, Rng& rng);

/// Softmax of [f_qv . f_pos, f_qv . f_neg...] as a 1 x (1 + N) row.
Tensor contrastive_probabilities(const Tensor& f_qv, const Tensor& f_pos, const Tensor& f_negs);

/// -log p(positive) under the softmax above.
Tensor contrastive_loss(const Tensor& f_qv, const Tensor& f_pos, const Tensor& f_negs);

struct MlmTarget {
  std::vector<int> tokens;             // corrupted sequence
  std::vector<std::size_t> positions;  // corrupted positions, ascending
  std::vector<int> originals;          // original ids at those positions
};

/// Each non-reserved token is corrupted with probability `prob`; a corrupted
/// token becomes MASK (80%), a uniform non-reserved word (10%) or stays (10%).
MlmTarget corrupt_tokens(std::span<const int> tokens, std::size_t vocab_size, Rng& rng, double prob = 0.15);

/// Registers the vocabulary head mlm.{W,b} (d_text -> V).
void init_mlm_params(ParamStore& params, std::size_t text_dim, std::size_t vocab_size, Rng& rng);

/// Mean cross-entropy of the vocabulary head at the given rows of `hidden`;
/// a scalar zero when there are none.
Tensor mlm_loss(const Tensor& hidden, std::span<const std::size_t> rows, std::span<const int> originals,
                const ParamStore& params);

struct PretrainItem {
  const VideoInput* video = nullptr;
  std::string positive;
  std::vector<std::string> negatives;
};

struct PretrainLoss {
  Tensor total;
  double contrastive = 0.0;
  double mlm = 0.0;
};

/// Batch-mean of contrastive + mlm_weight * mlm. Every distinct description is
/// encoded once; corruption draws come from `mlm_rng`.
PretrainLoss pretrain_loss(std::span<const PretrainItem> batch, const Model& model, const PretrainConfig& cfg,
                           Rng& mlm_rng);

/// pretrain_loss, one backward pass and one Adam update.
PretrainLoss pretrain_step(std::span<const PretrainItem> batch, Model& model, OptimizerState& opt,
                           const PretrainConfig& cfg, Rng& mlm_rng);

/// Mean over real tokens, leaving out CLS when the sequence has any word.
Tensor pool_description(const Tensor& tokens, std::span<const std::uint8_t> mask);

}  // namespace vgt
