// SPDX-License-Identifier: Apache-2.0
#include "vgt/model.hpp"

#include "vgt/error.hpp"
#include "vgt/pretrain.hpp"

namespace vgt {

void ModelConfig::validate() const {
  dgt.validate();
  text.validate();
  check(text.out_dim == dgt.graph.hidden, "ModelConfig: text projection width must equal d");
}

Model Model::create(ModelConfig cfg, Vocab vocab, Rng& rng) {
  cfg.text.vocab_size = vocab.size();
  cfg.text.out_dim = cfg.dgt.graph.hidden;
  cfg.validate();
  Model m{cfg, std::move(vocab), {}};
  init_dgt_params(m.params, cfg.dgt, rng);
  init_text_params(m.params, cfg.text, rng);
  init_qa_params(m.params, cfg.dgt.graph.clips, cfg.global_mhsa(), rng);
  init_mlm_params(m.params, cfg.text.dim, m.vocab.size(), rng);
  return m;
}

VideoInput prepare_video(std::span<const FrameDetections> frames, std::span<const std::vector<double>> frame_features,
                         const GraphConfig& cfg) {
  const std::size_t n = cfg.objects, lc = cfg.clip_length;
  check(frames.size() == cfg.frames, "video has " + std::to_string(frames.size()) + " frames, expected " +
                                         std::to_string(cfg.frames));
  check(frame_features.size() == cfg.frames, "video has " + std::to_string(frame_features.size()) +
                                                 " frame features, expected " + std::to_string(cfg.frames));
  std::vector<double> regions, geometry, fi;
  regions.reserve(cfg.frames * n * cfg.region_dim);
  for (std::size_t c = 0; c < cfg.clips; ++c) {
    std::vector<FrameDetections> clip;
    for (std::size_t f = 0; f < lc; ++f) clip.push_back(select_top_regions(frames[c * lc + f], n));
    AlignedClip aligned = align_clip(clip, cfg.link_weight);
    for (const auto& frame : aligned.frames) {
      for (const auto& r : frame.regions) {
        check(r.feature.size() == cfg.region_dim, "frame " + std::to_string(frame.frame_index) +
                                                      ": region feature size " + std::to_string(r.feature.size()) +
                                                      " != " + std::to_string(cfg.region_dim));
        r.box.validate();
        regions.insert(regions.end(), r.feature.begin(), r.feature.end());
        auto g = r.box.geometry();
        geometry.insert(geometry.end(), g.begin(), g.end());
      }
    }
  }
  const std::size_t di = frame_features[0].size();
  for (const auto& f : frame_features) {
    check(f.size() == di && di > 0, "frame features have inconsistent sizes");
    fi.insert(fi.end(), f.begin(), f.end());
  }
  const std::size_t rows = cfg.frames * n;
  return {Tensor::matrix(rows, cfg.region_dim, std::move(regions)), Tensor::matrix(rows, 5, std::move(geometry)),
          Tensor::matrix(cfg.frames, di, std::move(fi))};
}

Tensor video_clips(const VideoInput& video, const Model& model, const TextContext* text) {
  Tensor nodes = node_features(video.regions, video.geometry, model.params);
  return dgt_forward(nodes, video.frames, model.cfg.dgt, model.params, model.cfg.ablation, model.cfg.cross, text)
      .clips;
}

MultiChoiceResult multi_choice_forward(const VideoInput& video, const std::string& question,
                                       const std::vector<std::string>& candidates, const Model& model) {
  check(!candidates.empty(), "multi_choice_forward: no candidate answers");
  const ModelConfig& cfg = model.cfg;
  std::vector<std::vector<int>> seqs;
  std::vector<TokenizedPair> pairs;
  for (const auto& a : candidates) {
    pairs.push_back(tokenize_pair(question, a, model.vocab));
    seqs.push_back(pairs.back().ids);
  }
  TextBatch batch = TextBatch::from(seqs, candidates);
  TextEncoding enc = encode_text(batch, model.params, cfg.text);

  const bool per_candidate_dgt = cfg.cross.at_object() || cfg.cross.at_frame();
  Tensor shared;
  if (!per_candidate_dgt) shared = video_clips(video, model, nullptr);

  std::vector<Tensor> clips, answers;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    TextContext text{enc.sequence(i), enc.sequence_mask(i)};
    Tensor c = per_candidate_dgt ? video_clips(video, model, &text) : shared;
    if (cfg.cross.at_clip()) c = cross_modal_interact(c, text);
    clips.push_back(c);
    std::vector<std::uint8_t> span(batch.max_len, 0);
    std::copy(pairs[i].answer.begin(), pairs[i].answer.end(), span.begin());
    answers.push_back(pool_text(text.tokens, span));
  }
  MultiChoiceResult out;
  out.video = global_transform(concat_rows(clips), cfg.dgt.graph.clips, model.params, cfg.global_mhsa());
  out.answers = concat_rows(answers);
  out.scores = score_candidates(out.video, out.answers);
  return out;
}

ScoreVector open_ended_forward(const VideoInput& video, const std::string& question,
                               const std::vector<std::string>& answer_set, const Model& model) {
  check(!answer_set.empty(), "open_ended_forward: empty answer set");
  const ModelConfig& cfg = model.cfg;
  TextBatch qbatch = TextBatch::from({tokenize(question, model.vocab)}, {question});
  TextEncoding qenc = encode_text(qbatch, model.params, cfg.text);
  TextContext text{qenc.sequence(0), qenc.sequence_mask(0)};
  Tensor c = video_clips(video, model, &text);
  if (cfg.cross.at_clip()) c = cross_modal_interact(c, text);
  Tensor f_qv = global_transform(c, cfg.dgt.graph.clips, model.params, cfg.global_mhsa());

  std::vector<std::vector<int>> seqs;
  for (const auto& a : answer_set) seqs.push_back(tokenize(a, model.vocab));
  TextBatch abatch = TextBatch::from(seqs, answer_set);
  TextEncoding aenc = encode_text(abatch, model.params, cfg.text);
  std::vector<Tensor> answers;
  for (std::size_t i = 0; i < answer_set.size(); ++i) {
    // Answer words only; a wordless answer keeps its CLS token.
    auto span = aenc.sequence_mask(i);
    if (seqs[i].size() > 1) span[0] = 0;
    answers.push_back(pool_text(aenc.sequence(i), span));
  }
  Tensor fa = concat_rows(answers);
  if (!cfg.joint_decision) return score_answers(f_qv, fa);
  auto qspan = text.mask;
  if (qbatch.ids.size() > 1) qspan[0] = 0;
  return joint_score(f_qv, pool_text(text.tokens, qspan), fa);
}

}  // namespace vgt
