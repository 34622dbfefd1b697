// SPDX-License-Identifier: Apache-2.0
//
// Global transformer over clip features and answer scoring.
#pragma once

#include <span>
#include <vector>

#include "vgt/attention.hpp"
#include "vgt/cross_modal.hpp"
#include "vgt/param_store.hpp"
#include "vgt/tensor.hpp"

namespace vgt {

struct ScoreVector {
  Tensor raw;                   // 1 x |A|, differentiable
  std::vector<double> scores;
  std::size_t argmax = 0;       // lowest index among ties
};

/// Index of the first maximum.
std::size_t argmax_lowest(std::span<const double> values);

ScoreVector make_scores(const Tensor& raw);

/// Registers qa.pos (clips x d, sinusoidal) and the qa.gtrans MHSA stack.
void init_qa_params(ParamStore& params, std::size_t clips, const MhsaConfig& cfg, Rng& rng);

/// Positions, MHSA and mean pooling over each group of `clips` rows.
/// Input (G * clips) x d, output G x d.
Tensor global_transform(const Tensor& clip_features, std::size_t clips, const ParamStore& params,
                        const MhsaConfig& cfg);

/// s = f_qv F_A^T for one video representation (1 x d).
ScoreVector score_answers(const Tensor& f_qv, const Tensor& answers);

/// s_a = f_qv_a . f_A_a when every candidate has its own representation
/// (both |A| x d).
ScoreVector score_candidates(const Tensor& f_qv, const Tensor& answers);

/// s = (f_qv F_A^T) * (f_q F_A^T), element-wise.
ScoreVector joint_score(const Tensor& f_qv, const Tensor& f_q, const Tensor& answers);

/// Softmax cross-entropy of the raw scores against the gold index.
Tensor qa_loss(const Tensor& raw_scores, std::size_t gold);

}  // namespace vgt
