// SPDX-License-Identifier: Apache-2.0
#include "vgt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include <json.hpp>

#include "vgt/error.hpp"
#include "vgt/pretrain.hpp"

namespace vgt {

namespace {

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<VideoInput> prepare_all(const std::vector<Sample>& samples, const GraphConfig& g) {
  std::vector<VideoInput> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(to_video_input(s, g));
  return out;
}

struct QaOutcome {
  Tensor loss;  // undefined when the gold answer is outside the answer set
  int prediction = -1;
  bool correct = false;
};

QaOutcome qa_forward(const Model& model, Mode mode, const VideoInput& video, const Sample& s,
                     const std::vector<std::string>& answer_set) {
  check(!s.is_pretrain(), "sample '" + s.id + "' has a description but the run expects questions");
  QaOutcome out;
  if (mode == Mode::OpenEnded) {
    check(!answer_set.empty(), "open-ended mode needs an answer set");
    ScoreVector sv = open_ended_forward(video, s.question, answer_set, model);
    out.prediction = int(sv.argmax);
    auto it = std::find(answer_set.begin(), answer_set.end(), s.gold());
    if (it != answer_set.end()) {
      const auto gold = std::size_t(it - answer_set.begin());
      out.loss = qa_loss(sv.raw, gold);
      out.correct = sv.argmax == gold;
    }
    return out;
  }
  MultiChoiceResult r = multi_choice_forward(video, s.question, s.candidates, model);
  out.prediction = int(r.scores.argmax);
  out.loss = qa_loss(r.scores.raw, std::size_t(s.answer));
  out.correct = out.prediction == s.answer;
  return out;
}

// Contrastive loss of every description row against all other descriptions,
// and whether the positive scores highest.
EvalReport evaluate_descriptions(const Model& model, const std::vector<Sample>& samples,
                                 const std::vector<VideoInput>& videos) {
  NoGradGuard no_grad;
  EvalReport r;
  r.count = samples.size();
  if (samples.empty()) return r;
  check(samples.size() >= 2, "description retrieval needs at least 2 rows");
  std::vector<std::vector<int>> seqs;
  std::vector<std::string> texts;
  for (const auto& s : samples) {
    check(s.is_pretrain(), "sample '" + s.id + "' has no description but the run is pretraining");
    seqs.push_back(tokenize(s.description, model.vocab));
    texts.push_back(s.description);
  }
  const ModelConfig& mc = model.cfg;
  TextBatch tb = TextBatch::from(seqs, texts);
  TextEncoding enc = encode_text(tb, model.params, mc.text);
  std::vector<Tensor> pooled;
  for (std::size_t i = 0; i < samples.size(); ++i) pooled.push_back(pool_description(enc.sequence(i), tb.row_mask(i)));
  Tensor table = concat_rows(pooled);
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    TextContext text{enc.sequence(i), enc.sequence_mask(i)};
    Tensor clips = video_clips(videos[i], model, &text);
    if (mc.cross.at_clip()) clips = cross_modal_interact(clips, text);
    Tensor f_qv = global_transform(clips, mc.dgt.graph.clips, model.params, mc.global_mhsa());
    std::vector<std::size_t> neg;
    for (std::size_t j = 0; j < samples.size(); ++j)
      if (j != i) neg.push_back(j);
    loss += contrastive_loss(f_qv, slice_rows(table, i, 1), gather_rows(table, neg)).item();
    Tensor p = contrastive_probabilities(f_qv, slice_rows(table, i, 1), gather_rows(table, neg));
    const bool ok = argmax_lowest(p.values()) == 0;
    correct += ok;
    r.predictions.push_back(ok ? int(i) : -1);
    auto& fam = r.families[samples[i].family()];
    ++fam.count;
    fam.correct += ok;
  }
  r.loss = loss / double(samples.size());
  r.accuracy = double(correct) / double(samples.size());
  return r;
}

EvalReport evaluate_prepared(const Model& model, Mode mode, const std::vector<Sample>& samples,
                             const std::vector<VideoInput>& videos, const std::vector<std::string>& answer_set) {
  if (mode == Mode::Pretrain) return evaluate_descriptions(model, samples, videos);
  NoGradGuard no_grad;
  EvalReport r;
  r.count = samples.size();
  double loss = 0.0;
  std::size_t with_loss = 0, correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    QaOutcome o = qa_forward(model, mode, videos[i], samples[i], answer_set);
    if (o.loss.defined()) {
      loss += o.loss.item();
      ++with_loss;
    }
    correct += o.correct;
    r.predictions.push_back(o.prediction);
    auto& fam = r.families[samples[i].family()];
    ++fam.count;
    fam.correct += o.correct;
  }
  r.loss = with_loss ? loss / double(with_loss) : 0.0;
  r.accuracy = samples.empty() ? 0.0 : double(correct) / double(samples.size());
  return r;
}

// Copies matching weights from `from`; embedding rows and MLM output columns
// of words already known to `from` are copied into the larger tables.
void load_weights(ParamStore& to, const Checkpoint& from) {
  const std::size_t old_vocab = from.vocab.size();
  for (const auto& [name, src] : from.params.tensors()) {
    if (!to.contains(name)) continue;
    Tensor& dst = to.get(name);
    auto out = dst.mutable_values();
    auto in = src.values();
    if (dst.shape() == src.shape()) {
      std::copy(in.begin(), in.end(), out.begin());
    } else if (name == "text.embed" && dst.cols() == src.cols() && dst.rows() >= old_vocab) {
      std::copy(in.begin(), in.end(), out.begin());
    } else if (name == "mlm.W" && dst.rows() == src.rows() && dst.cols() >= old_vocab) {
      for (std::size_t r = 0; r < src.rows(); ++r)
        std::copy_n(in.begin() + r * src.cols(), src.cols(), out.begin() + r * dst.cols());
    } else if (name == "mlm.b" && dst.size() >= src.size()) {
      std::copy(in.begin(), in.end(), out.begin());
    } else {
      throw Error("initial checkpoint: parameter '" + name + "' has shape " + shape_str(src.shape()) +
                  ", this run expects " + shape_str(dst.shape()));
    }
  }
}

std::string csv_header(const std::vector<std::string>& fams) {
  std::string h = "epoch,split,loss,acc_all";
  for (const auto& f : fams) h += ",acc_" + f;
  return h + "\n";
}

std::string csv_row(const EpochMetrics& m, const std::vector<std::string>& fams) {
  std::string row = std::to_string(m.epoch) + "," + m.split + "," + num(m.loss) + "," + num(m.accuracy);
  for (const auto& f : fams) {
    auto it = m.families.find(f);
    row += ",";
    if (it != m.families.end() && it->second.count) row += num(it->second.accuracy());
  }
  return row + "\n";
}

std::size_t steps_per_epoch(std::size_t n, std::size_t batch) { return n == 0 ? 0 : (n + batch - 1) / batch; }

}  // namespace

std::vector<std::string> answer_set_of(const std::vector<Sample>& samples) {
  std::set<std::string> s;
  for (const auto& x : samples)
    if (!x.is_pretrain()) s.insert(x.gold());
  return {s.begin(), s.end()};
}

EvalReport evaluate(const Model& model, Mode mode, const std::vector<Sample>& samples,
                    const std::vector<std::string>& answer_set) {
  return evaluate_prepared(model, mode, samples, prepare_all(samples, model.cfg.dgt.graph), answer_set);
}

EvalReport evaluate(const Checkpoint& ck, const std::vector<Sample>& samples) {
  Model m = ck.model();
  return evaluate(m, ck.config.mode, samples, ck.answers);
}

std::string report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["count"] = r.count;
  j["accuracy"] = r.accuracy;
  j["loss"] = r.loss;
  nlohmann::ordered_json fams = nlohmann::ordered_json::object();
  for (const auto& [name, f] : r.families)
    fams[name] = {{"count", f.count}, {"correct", f.correct}, {"accuracy", f.accuracy()}};
  j["families"] = fams;
  return j.dump(2) + "\n";
}

std::string report_csv(const EvalReport& r) {
  std::size_t correct = 0;
  for (const auto& [_, f] : r.families) correct += f.correct;
  std::string out = "family,count,correct,accuracy\n";
  out += "all," + std::to_string(r.count) + "," + std::to_string(correct) + "," + num(r.accuracy) + "\n";
  for (const auto& [name, f] : r.families)
    out += name + "," + std::to_string(f.count) + "," + std::to_string(f.correct) + "," + num(f.accuracy()) + "\n";
  return out;
}

TrainResult train(const RunConfig& cfg, const std::vector<Sample>& train_set, const TrainOptions& opts) {
  cfg.validate();
  check(!(opts.resume && opts.init), "train: resume and init are mutually exclusive");
  if (opts.resume) check(opts.resume->config == cfg, "train: resume checkpoint was written with a different config");
  const bool pretraining = cfg.mode == Mode::Pretrain;
  for (const auto& s : train_set) {
    check(s.is_pretrain() == pretraining, "train: sample '" + s.id + "' does not match mode " + mode_name(cfg.mode));
  }
  if (pretraining) check(train_set.size() >= 2, "pretraining needs at least 2 descriptions");

  const std::vector<VideoInput> videos = prepare_all(train_set, cfg.graph());
  std::vector<VideoInput> val_videos;
  if (opts.val) val_videos = prepare_all(*opts.val, cfg.graph());

  // State: model, optimizer, RNG streams, bookkeeping.
  RngStreams streams(cfg.seed);
  Checkpoint state;
  Model model;
  if (opts.resume) {
    state = *opts.resume;
    model = state.model();
    streams.restore(state.rng);
  } else {
    Vocab vocab;
    if (opts.init) {
      vocab = opts.init->vocab;
      for (const auto& text : corpus_texts(train_set))
        for (const auto& w : split_words(text)) vocab.add(w);
    } else {
      vocab = Vocab::build(corpus_texts(train_set));
    }
    model = Model::create(model_config(cfg, vocab), vocab, streams.stream("init"));
    if (opts.init) load_weights(model.params, *opts.init);
    if (cfg.freeze_text) model.params.freeze_prefix("text.");
    state.config = cfg;
    state.vocab = model.vocab;
    if (cfg.mode == Mode::OpenEnded) state.answers = answer_set_of(train_set);
    state.optimizer.base_lr = cfg.lr;
    state.optimizer.total_steps = std::max<std::uint64_t>(1, steps_per_epoch(train_set.size(), cfg.batch_size) * cfg.epochs);
    if (cfg.max_steps) state.optimizer.total_steps = std::min<std::uint64_t>(state.optimizer.total_steps, cfg.max_steps);
    state.scalars["best_score"] = -1.0;
    state.scalars["global_step"] = 0.0;
  }
  const std::vector<std::string>& answer_set = state.answers;
  const PretrainConfig pcfg = cfg.pretrain();
  const std::size_t negatives = std::min(pcfg.negatives, train_set.size() > 0 ? train_set.size() - 1 : 0);

  std::vector<std::string> fams = families(train_set);
  if (opts.val)
    for (const auto& f : families(*opts.val))
      if (std::find(fams.begin(), fams.end(), f) == fams.end()) fams.push_back(f);
  std::sort(fams.begin(), fams.end());

  namespace fs = std::filesystem;
  const bool files = !opts.out_dir.empty();
  std::ofstream metrics;
  TrainResult result;
  if (files) {
    fs::create_directories(opts.out_dir);
    const fs::path mpath = fs::path(opts.out_dir) / "metrics.csv";
    const bool fresh = !opts.resume || !fs::exists(mpath);
    metrics.open(mpath, fresh ? std::ios::trunc : std::ios::app);
    if (!metrics) throw Error("cannot write '" + mpath.string() + "'");
    if (fresh) metrics << csv_header(fams);
  }
  result.metrics_csv = csv_header(fams);

  auto snapshot = [&](std::uint64_t epoch) {
    Checkpoint ck = state;
    ck.params = model.params.clone();
    ck.vocab = model.vocab;
    ck.rng = streams.snapshot();
    ck.epoch = epoch;
    return ck;
  };
  auto write = [&](const Checkpoint& ck, const char* name) {
    if (files) save_checkpoint((fs::path(opts.out_dir) / name).string(), ck);
  };

  const std::size_t total_epochs = cfg.epochs + cfg.stage2_epochs;
  std::uint64_t epoch = state.epoch;
  if (epoch == 0) {
    Checkpoint initial = snapshot(0);
    write(initial, "last.ckpt");
    if (!opts.resume) {
      write(initial, "best.ckpt");
      result.best = initial;
    }
  }

  const std::size_t spe = steps_per_epoch(train_set.size(), cfg.batch_size);
  bool done = cfg.max_steps && state.scalars["global_step"] >= double(cfg.max_steps);
  while (epoch < total_epochs && !done) {
    if (opts.stop_at_epoch && epoch >= opts.stop_at_epoch) break;
    if (epoch == cfg.epochs && cfg.stage2_epochs) {
      // Second stage: the text encoder is frozen and the schedule restarts.
      model.params.freeze_prefix("text.");
      state.optimizer.step = 0;
      state.optimizer.total_steps = std::max<std::uint64_t>(1, spe * cfg.stage2_epochs);
    }
    ++epoch;
    const std::vector<std::size_t> order = shuffled_order(train_set.size(), streams.stream("shuffle"));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size() && !done; start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      if (pretraining) {
        std::vector<PretrainItem> batch;
        for (std::size_t b = start; b < end; ++b) {
          PretrainItem item{&videos[order[b]], train_set[order[b]].description, {}};
          for (std::size_t j : sample_negatives(train_set.size(), order[b], negatives, streams.stream("negatives")))
            item.negatives.push_back(train_set[j].description);
          batch.push_back(std::move(item));
        }
        PretrainLoss l = pretrain_step(batch, model, state.optimizer, pcfg, streams.stream("mlm"));
        loss_sum += l.total.item();
      } else {
        std::vector<Tensor> losses;
        for (std::size_t b = start; b < end; ++b) {
          QaOutcome o = qa_forward(model, cfg.mode, videos[order[b]], train_set[order[b]], answer_set);
          losses.push_back(o.loss);
        }
        Tensor loss = scale(add_n(losses), 1.0 / double(losses.size()));
        GradMap grads = backward(loss, model.params);
        adam_step(model.params, grads, state.optimizer);
        loss_sum += loss.item();
      }
      ++batches;
      state.scalars["global_step"] += 1.0;
      if (cfg.max_steps && state.scalars["global_step"] >= double(cfg.max_steps)) done = true;
    }

    EvalReport tr = evaluate_prepared(model, cfg.mode, train_set, videos, answer_set);
    EpochMetrics tm{epoch, "train", batches ? loss_sum / double(batches) : 0.0, tr.accuracy, tr.families};
    if (pretraining) tm.loss = tr.loss;
    result.history.push_back(tm);
    std::string rows = csv_row(tm, fams);
    double score = tr.accuracy;
    if (opts.val) {
      EvalReport vr = evaluate_prepared(model, cfg.mode, *opts.val, val_videos, answer_set);
      EpochMetrics vm{epoch, "val", vr.loss, vr.accuracy, vr.families};
      result.history.push_back(vm);
      rows += csv_row(vm, fams);
      score = vr.accuracy;
    }
    result.metrics_csv += rows;
    if (files) metrics << rows << std::flush;
    if (opts.log) {
      *opts.log << "epoch " << epoch << " loss " << num(tm.loss) << " train_acc " << num(tr.accuracy);
      if (opts.val) *opts.log << " val_acc " << num(score);
      *opts.log << "\n" << std::flush;
    }

    const bool improved = score > state.scalars["best_score"];
    if (improved) {
      state.scalars["best_score"] = score;
      state.scalars["best_epoch"] = double(epoch);
    }
    Checkpoint ck = snapshot(epoch);
    if (improved) {
      result.best = ck;
      write(ck, "best.ckpt");
    }
    write(ck, "last.ckpt");
    result.last = std::move(ck);
    ++result.epochs_run;
    if (cfg.target_train_acc > 0.0 && tr.accuracy >= cfg.target_train_acc) {
      result.epochs_to_target = epoch;
      break;
    }
  }
  if (result.epochs_run == 0) result.last = snapshot(epoch);
  return result;
}

ParamReport report_params(const ParamStore& params) {
  static const std::vector<std::pair<std::string, std::string>> groups = {
      {"graph", "graph."},          {"dgt.ntrans", "dgt.ntrans."}, {"dgt.etrans", "dgt.etrans."},
      {"dgt.gcn", "dgt.gcn."},      {"dgt.pool", "dgt.pool."},     {"dgt.fuse", "dgt.fuse."},
      {"text.embed", "text.embed"}, {"text.pos", "text.pos"},      {"text.mhsa", "text.mhsa."},
      {"text.proj", "text.proj."},  {"qa", "qa."},                 {"mlm", "mlm."}};
  ParamReport r;
  std::size_t grouped = 0;
  for (const auto& [label, prefix] : groups) {
    const std::size_t n = params.count_prefix(prefix);
    r.modules.emplace_back(label, n);
    grouped += n;
  }
  r.total = params.count();
  if (grouped != r.total) r.modules.emplace_back("other", r.total - grouped);
  return r;
}

std::string param_report_text(const ParamReport& r) {
  std::string out;
  for (const auto& [name, n] : r.modules) {
    char line[96];
    std::snprintf(line, sizeof line, "%-12s %12zu\n", name.c_str(), n);
    out += line;
  }
  char line[96];
  std::snprintf(line, sizeof line, "%-12s %12zu\n", "total", r.total);
  return out + line;
}

}  // namespace vgt
