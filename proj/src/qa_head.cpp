// SPDX-License-Identifier: Apache-2.0
#include "vgt/qa_head.hpp"

#include "vgt/error.hpp"

namespace vgt {

std::size_t argmax_lowest(std::span<const double> values) {
  check(!values.empty(), "argmax: no candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

ScoreVector make_scores(const Tensor& raw) {
  check(raw.size() > 0, "score: no candidate answers");
  ScoreVector s;
  s.raw = raw;
  s.scores.assign(raw.values().begin(), raw.values().end());
  s.argmax = argmax_lowest(s.scores);
  return s;
}

void init_qa_params(ParamStore& params, std::size_t clips, const MhsaConfig& cfg, Rng& rng) {
  check(clips > 0, "init_qa_params: k must be positive");
  params.add("qa.pos", sinusoidal_table(clips, cfg.dim));
  init_mhsa(params, "qa.gtrans", cfg, rng);
}

Tensor global_transform(const Tensor& clip_features, std::size_t clips, const ParamStore& params,
                        const MhsaConfig& cfg) {
  check(clips > 0 && clip_features.rows() > 0, "global_transform: no clip features (k = 0)");
  check(clip_features.rows() % clips == 0, "global_transform: rows not a multiple of k");
  Tensor x = add_position(clip_features, params.get("qa.pos"), clips);
  return segment_mean_rows(mhsa(x, params, "qa.gtrans", cfg, clips), clips);
}

ScoreVector score_answers(const Tensor& f_qv, const Tensor& answers) {
  check(answers.rows() > 0, "score_answers: no candidate answers");
  check(f_qv.rows() == 1 && f_qv.cols() == answers.cols(), "score_answers: f_qv must be 1 x d");
  return make_scores(matmul_nt(f_qv, answers));
}

ScoreVector score_candidates(const Tensor& f_qv, const Tensor& answers) {
  check(answers.rows() > 0, "score_candidates: no candidate answers");
  check(f_qv.shape() == answers.shape(), "score_candidates: representation and answer shapes differ");
  Tensor ones = Tensor::filled({answers.cols(), 1}, 1.0);
  return make_scores(reshape(matmul(mul(f_qv, answers), ones), {1, answers.rows()}));
}

ScoreVector joint_score(const Tensor& f_qv, const Tensor& f_q, const Tensor& answers) {
  check(answers.rows() > 0, "joint_score: no candidate answers");
  check(f_q.rows() == 1 && f_q.cols() == answers.cols(), "joint_score: f_q must be 1 x d");
  return make_scores(mul(score_answers(f_qv, answers).raw, matmul_nt(f_q, answers)));
}

Tensor qa_loss(const Tensor& raw_scores, std::size_t gold) {
  check(raw_scores.rows() == 1, "qa_loss: scores must be a single row");
  check(gold < raw_scores.cols(), "qa_loss: gold index " + std::to_string(gold) + " out of range for " +
                                      std::to_string(raw_scores.cols()) + " candidates");
  return cross_entropy(raw_scores, gold);
}

}  // namespace vgt
