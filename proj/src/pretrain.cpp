// SPDX-License-Identifier: Apache-2.0
#include "vgt/pretrain.hpp"

#include <map>

#include "vgt/error.hpp"

namespace vgt {

std::vector<std::size_t> sample_negatives(std::size_t dataset_size, std::size_t index, std::size_t count, Rng& rng) {
  check(index < dataset_size, "sample_negatives: index out of range");
  check(dataset_size > count, "sample_negatives: need more than " + std::to_string(count) +
                                  " samples, dataset has " + std::to_string(dataset_size));
  // Partial Fisher-Yates over the other indices.
  std::vector<std::size_t> pool;
  pool.reserve(dataset_size - 1);
  for (std::size_t i = 0; i < dataset_size; ++i)
    if (i != index) pool.push_back(i);
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t j = k + std::size_t(rng.below(pool.size() - k));
    std::swap(pool[k], pool[j]);
  }
  pool.resize(count);
  return pool;
}

Tensor contrastive_probabilities(const Tensor& f_qv, const Tensor& f_pos, const Tensor& f_negs) {
  check(f_negs.rows() > 0, "contrastive_loss: no negatives");
  std::vector<Tensor> rows{f_pos, f_negs};
  return softmax_rows(matmul_nt(f_qv, concat_rows(rows)));
}

Tensor contrastive_loss(const Tensor& f_qv, const Tensor& f_pos, const Tensor& f_negs) {
  check(f_negs.rows() > 0, "contrastive_loss: no negatives");
  check(f_qv.rows() == 1 && f_pos.rows() == 1, "contrastive_loss: f_qv and f_pos must be single rows");
  std::vector<Tensor> rows{f_pos, f_negs};
  return cross_entropy(matmul_nt(f_qv, concat_rows(rows)), 0);
}

MlmTarget corrupt_tokens(std::span<const int> tokens, std::size_t vocab_size, Rng& rng, double prob) {
  check(prob >= 0.0 && prob <= 1.0, "corrupt_tokens: probability outside [0, 1]");
  MlmTarget t;
  t.tokens.assign(tokens.begin(), tokens.end());
  const bool has_words = vocab_size > std::size_t(Vocab::kReserved);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (Vocab::is_reserved(tokens[i])) continue;
    if (rng.uniform() >= prob) continue;
    t.positions.push_back(i);
    t.originals.push_back(tokens[i]);
    const double r = rng.uniform();
    if (r < 0.8) {
      t.tokens[i] = Vocab::kMask;
    } else if (r < 0.9 && has_words) {
      t.tokens[i] = Vocab::kReserved + int(rng.below(vocab_size - Vocab::kReserved));
    }
  }
  return t;
}

void init_mlm_params(ParamStore& params, std::size_t text_dim, std::size_t vocab_size, Rng& rng) {
  params.add_uniform("mlm.W", {text_dim, vocab_size}, text_dim, rng);
  params.add_uniform("mlm.b", {vocab_size}, text_dim, rng);
}

Tensor mlm_loss(const Tensor& hidden, std::span<const std::size_t> rows, std::span<const int> originals,
                const ParamStore& params) {
  check(rows.size() == originals.size(), "mlm_loss: positions and originals differ in length");
  if (rows.empty()) return Tensor::scalar(0.0);
  Tensor logits = add_bias(matmul(gather_rows(hidden, rows), params.get("mlm.W")), params.get("mlm.b"));
  Tensor logp = log_softmax_rows(logits);
  std::vector<Tensor> picks;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    check(originals[k] >= 0 && std::size_t(originals[k]) < logits.cols(), "mlm_loss: original id out of range");
    picks.push_back(pick(logp, k, std::size_t(originals[k])));
  }
  return scale(add_n(picks), -1.0 / double(rows.size()));
}

Tensor pool_description(const Tensor& tokens, std::span<const std::uint8_t> mask) {
  std::vector<std::uint8_t> span(mask.begin(), mask.end());
  std::size_t real = 0;
  for (auto m : span) real += m != 0;
  if (real > 1) span[0] = 0;
  return pool_text(tokens, span);
}

PretrainLoss pretrain_loss(std::span<const PretrainItem> batch, const Model& model, const PretrainConfig& cfg,
                           Rng& mlm_rng) {
  check(!batch.empty(), "pretrain: empty batch");
  const ModelConfig& mc = model.cfg;

  // Clean encodings of every distinct description.
  std::map<std::string, std::size_t> slot;
  std::vector<std::vector<int>> clean;
  std::vector<std::string> texts;
  auto intern = [&](const std::string& s) {
    auto [it, fresh] = slot.emplace(s, clean.size());
    if (fresh) {
      clean.push_back(tokenize(s, model.vocab));
      texts.push_back(s);
    }
    return it->second;
  };
  for (const auto& item : batch) {
    check(item.video != nullptr, "pretrain: item without video");
    check(!item.negatives.empty(), "pretrain: item without negatives");
    intern(item.positive);
    for (const auto& n : item.negatives) intern(n);
  }
  TextBatch tb = TextBatch::from(clean, texts);
  TextEncoding enc = encode_text(tb, model.params, mc.text);
  std::vector<Tensor> pooled;
  for (std::size_t i = 0; i < clean.size(); ++i) pooled.push_back(pool_description(enc.sequence(i), tb.row_mask(i)));
  Tensor table = concat_rows(pooled);

  // Corrupted positives for masked language modelling.
  std::vector<MlmTarget> targets;
  std::vector<std::vector<int>> corrupted;
  for (const auto& item : batch) {
    targets.push_back(corrupt_tokens(clean[slot[item.positive]], model.vocab.size(), mlm_rng, cfg.mask_prob));
    corrupted.push_back(targets.back().tokens);
  }
  TextBatch cb = TextBatch::from(corrupted);
  std::vector<std::size_t> rows;
  std::vector<int> originals;
  for (std::size_t b = 0; b < targets.size(); ++b) {
    for (std::size_t p : targets[b].positions) rows.push_back(b * cb.max_len + p);
    originals.insert(originals.end(), targets[b].originals.begin(), targets[b].originals.end());
  }

  std::vector<Tensor> losses;
  double contrastive_sum = 0.0;
  for (const auto& item : batch) {
    const std::size_t pos = slot[item.positive];
    TextContext text{enc.sequence(pos), enc.sequence_mask(pos)};
    Tensor clips = video_clips(*item.video, model, &text);
    if (mc.cross.at_clip()) clips = cross_modal_interact(clips, text);
    Tensor f_qv = global_transform(clips, mc.dgt.graph.clips, model.params, mc.global_mhsa());
    std::vector<std::size_t> neg;
    for (const auto& n : item.negatives) neg.push_back(slot[n]);
    Tensor l = contrastive_loss(f_qv, slice_rows(table, pos, 1), gather_rows(table, neg));
    contrastive_sum += l.item();
    losses.push_back(l);
  }
  PretrainLoss out;
  out.contrastive = contrastive_sum / double(batch.size());
  Tensor total = scale(add_n(losses), 1.0 / double(batch.size()));
  if (cfg.mlm_weight != 0.0 && !rows.empty()) {
    TextEncoding cenc = encode_text(cb, model.params, mc.text);
    Tensor m = mlm_loss(cenc.hidden, rows, originals, model.params);
    out.mlm = m.item();
    total = add(total, scale(m, cfg.mlm_weight));
  }
  out.total = total;
  return out;
}

PretrainLoss pretrain_step(std::span<const PretrainItem> batch, Model& model, OptimizerState& opt,
                           const PretrainConfig& cfg, Rng& mlm_rng) {
  PretrainLoss loss = pretrain_loss(batch, model, cfg, mlm_rng);
  GradMap grads = backward(loss.total, model.params);
  adam_step(model.params, grads, opt);
  return loss;
}

}  // namespace vgt
