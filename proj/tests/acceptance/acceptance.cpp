// SPDX-License-Identifier: Apache-2.0
//
// Acceptance runner: one PASS/FAIL line per criterion. With arguments, only
// the listed criterion numbers run.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../fixtures.hpp"
#include "../oracles.hpp"
#include "../test_util.hpp"
#include "vgt/checkpoint.hpp"
#include "vgt/gradcheck.hpp"
#include "vgt/pretrain.hpp"
#include "vgt/synthetic.hpp"
#include "vgt/trainer.hpp"

using namespace vgt;
using testing::max_abs_diff;
using testing::project;
using testing::random_matrix;
using testing::row_sums;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("vgt_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig desk_config() { return RunConfig::load(std::string(VGT_SOURCE_DIR) + "/configs/desk.cfg"); }

std::vector<Sample> synthetic(const RunConfig& c, std::size_t n, std::uint64_t seed, TaskFamily fam,
                              bool descriptions = false) {
  SyntheticSpec s;
  s.num_videos = n;
  s.frames = c.frames;
  s.clips = c.clips;
  s.clip_length = c.clip_length;
  s.objects = c.objects;
  s.region_dim = c.region_dim;
  s.frame_dim = c.frame_dim;
  s.num_candidates = c.num_candidates;
  s.family = fam;
  s.seed = seed;
  s.descriptions = descriptions;
  return generate_synthetic(s);
}

const std::vector<std::string> kCandidates = {"red", "green", "blue", "yellow", "purple"};

// ---------------------------------------------------------------- 1

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_name;
  auto note = [&](const std::string& name, double err) {
    if (err > worst || worst_name.empty()) {
      worst = std::max(worst, err);
      worst_name = name;
    }
  };
  for (std::uint64_t seed : {0, 1, 2}) {
    Rng rng(seed);
    const auto a = random_matrix(4, 6, rng);
    const auto b = random_matrix(4, 6, rng);
    const auto sq = random_matrix(6, 3, rng);
    const auto bias = random_matrix(1, 6, rng);
    const auto gain = random_matrix(1, 6, rng);
    const std::vector<std::uint8_t> mask = {1, 0, 1, 1, 1, 0, 1, 1, 1, 1, 1, 0};
    const std::vector<std::size_t> idx = {3, 0, 3, 1};
    const std::vector<std::pair<std::string, std::function<Tensor(const Tensor&)>>> on_a = {
        {"add", [&](const Tensor& x) { return project(add(x, b)); }},
        {"sub", [&](const Tensor& x) { return project(sub(b, x)); }},
        {"mul", [&](const Tensor& x) { return project(mul(x, x)); }},
        {"scale", [&](const Tensor& x) { return project(scale(x, -2.5)); }},
        {"elu", [&](const Tensor& x) { return project(elu(x)); }},
        {"relu", [&](const Tensor& x) { return project(relu(x)); }},
        {"add_bias", [&](const Tensor& x) { return project(add_bias(x, bias)); }},
        {"matmul", [&](const Tensor& x) { return project(matmul(x, sq)); }},
        {"matmul_nt", [&](const Tensor& x) { return project(matmul_nt(x, b)); }},
        {"transpose", [&](const Tensor& x) { return project(transpose(x)); }},
        {"batched_matmul",
         [&](const Tensor& x) { return project(batched_matmul(x, concat_rows(std::vector<Tensor>{sq, sq}), 2)); }},
        {"batched_matmul_nt", [&](const Tensor& x) { return project(batched_matmul_nt(x, b, 2)); }},
        {"concat_cols", [&](const Tensor& x) { return project(concat_cols(std::vector<Tensor>{x, a, x})); }},
        {"concat_rows", [&](const Tensor& x) { return project(concat_rows(std::vector<Tensor>{a, x})); }},
        {"slice_rows", [&](const Tensor& x) { return project(slice_rows(x, 1, 2)); }},
        {"slice_cols", [&](const Tensor& x) { return project(slice_cols(x, 2, 3)); }},
        {"gather_rows", [&](const Tensor& x) { return project(gather_rows(x, idx)); }},
        {"reshape", [&](const Tensor& x) { return project(reshape(x, {8, 3})); }},
        {"softmax_rows", [&](const Tensor& x) { return project(softmax_rows(x)); }},
        {"masked_softmax_rows", [&](const Tensor& x) { return project(masked_softmax_rows(x, mask, 2)); }},
        {"log_softmax_rows", [&](const Tensor& x) { return project(log_softmax_rows(x)); }},
        {"layer_norm", [&](const Tensor& x) { return project(layer_norm(x, gain, bias)); }},
        {"mean_rows", [&](const Tensor& x) { return project(mean_rows(x)); }},
        {"segment_mean_rows", [&](const Tensor& x) { return project(segment_mean_rows(x, 2)); }},
        {"masked_mean_rows",
         [&](const Tensor& x) { return project(masked_mean_rows(x, std::vector<std::uint8_t>{1, 0, 1, 1})); }},
        {"pick", [&](const Tensor& x) { return pick(x, 2, 3); }},
        {"add_n", [&](const Tensor& x) { return add_n(std::vector<Tensor>{pick(x, 0, 0), sum(x)}); }},
        {"cross_entropy", [&](const Tensor& x) { return cross_entropy(slice_rows(x, 1, 1), 4); }},
    };
    for (const auto& [name, fn] : on_a) note(name, finite_diff_check(fn, a));
    note("add_bias/b", finite_diff_check([&](const Tensor& x) { return project(add_bias(a, x), 3); }, bias));
    note("matmul/b", finite_diff_check([&](const Tensor& x) { return project(matmul(a, x)); }, sq));
    note("layer_norm/gain", finite_diff_check([&](const Tensor& x) { return project(layer_norm(a, x, bias), 4); }, gain));

    // Composite stages the model is built from.
    const Tensor fp = random_matrix(1, 6, rng), fn = random_matrix(5, 6, rng);
    note("contrastive_loss",
         finite_diff_check([&](const Tensor& x) { return contrastive_loss(x, fp, fn); }, random_matrix(1, 6, rng)));
    TextContext text{random_matrix(4, 6, rng), {1, 1, 1, 0}};
    note("cross_modal_interact",
         finite_diff_check([&](const Tensor& x) { return project(cross_modal_interact(x, text)); }, a));

    // Full multiple-choice forward and loss over every parameter.
    auto cfg = testing::tiny_config();
    Rng mrng(seed);
    Model model = Model::create(cfg, testing::tiny_vocab(), mrng);
    auto raw = testing::random_video(model.cfg.dgt.graph, 3, mrng);
    auto video = prepare_video(raw.frames, raw.frame_features, model.cfg.dgt.graph);
    auto loss = [&] {
      return qa_loss(multi_choice_forward(video, "what moved first", kCandidates, model).scores.raw, 1);
    };
    note("multi_choice_forward+loss", finite_diff_check_params(loss, model.params));

    // Pretraining loss (contrastive + masked words) over every parameter.
    PretrainConfig pc;
    pc.negatives = 2;
    std::vector<PretrainItem> batch{{&video, "the red cube moved first", {"a blue ball", "what moved last"}}};
    note("pretrain_loss", finite_diff_check_params(
                              [&] {
                                Rng fixed(seed + 10);
                                return pretrain_loss(batch, model, pc, fixed).total;
                              },
                              model.params));
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0,
          "max rel err " + fmt("%.3g", worst) + " (" + worst_name + "), " + fmt("%.1f", secs) + " s"};
}

// ---------------------------------------------------------------- 2

Outcome normalization_suite() {
  double worst = 0.0;
  std::size_t rows = 0;
  auto check_rows = [&](const Tensor& p) {
    for (double s : row_sums(p)) {
      worst = std::max(worst, std::abs(s - 1.0));
      ++rows;
    }
  };
  Rng rng(5);
  DgtConfig dc;
  dc.graph.clips = 2;
  dc.graph.clip_length = 2;
  dc.graph.frames = 4;
  dc.graph.objects = 3;
  dc.graph.hidden = 8;
  dc.graph.region_dim = 5;
  dc.heads = 2;
  dc.edge_heads = 3;
  dc.frame_dim = 3;
  ParamStore dp;
  init_dgt_params(dp, dc, rng);
  const Tensor nodes = random_matrix(12, 8, rng);
  const Tensor q = random_matrix(6, 4, rng), k = random_matrix(6, 4, rng);
  const std::vector<std::uint8_t> pmask = {1, 1, 0, 1, 0, 1};
  const TextContext text{random_matrix(5, 8, rng), {1, 1, 1, 0, 0}};
  const Tensor scores = random_matrix(3, 5, rng);
  const Tensor fq = random_matrix(1, 8, rng), fpos = random_matrix(1, 8, rng), fneg = random_matrix(63, 8, rng);
  for (double mag : {1.0, 1e3, 1e9}) {
    check_rows(init_relations(scale(nodes, mag), 3, dp));
    check_rows(attention_weights(scale(q, mag), k, 3));
    check_rows(attention_weights(scale(q, mag), k, 3, pmask));
    check_rows(frame_pool(scale(nodes, mag), 3, dp).weights);
    check_rows(cross_modal_weights(scale(nodes, mag), text));
    check_rows(softmax_rows(scale(scores, mag)));
    Tensor logp = log_softmax_rows(scale(scores, mag));
    std::vector<double> e(logp.size());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = std::exp(logp[i]);
    check_rows(Tensor::matrix(logp.rows(), logp.cols(), e));
    check_rows(contrastive_probabilities(scale(fq, mag), fpos, fneg));
  }
  return {worst <= 1e-9, std::to_string(rows) + " rows, max |sum - 1| " + fmt("%.3g", worst)};
}

// ---------------------------------------------------------------- 3

Outcome linking_oracle() {
  std::size_t instances = 0, mismatches = 0, non_bijective = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    for (std::size_t n = 1; n <= 4; ++n) {
      for (std::size_t lc = 1; lc <= 3; ++lc) {
        auto clip = oracle::random_clip(lc, n, 3, rng);
        const double lambda = rng.uniform(0.0, 2.0);
        auto got = link_tracks(clip, lambda);
        ++instances;
        mismatches += got != oracle::link(clip, lambda);
        for (const auto& perm : got) non_bijective += !oracle::is_bijection(perm);
      }
    }
  }
  return {mismatches == 0 && non_bijective == 0, std::to_string(instances) + " instances, " +
                                                     std::to_string(mismatches) + " mismatches, " +
                                                     std::to_string(non_bijective) + " non-bijections"};
}

// ---------------------------------------------------------------- 4

Outcome analytic_losses() {
  double ce = 0.0, con = 0.0, mlm = 0.0;
  for (std::size_t n : {2, 5, 10, 64}) {
    for (double level : {0.0, 3.7, -1e6}) {
      const Tensor s = Tensor::filled({1, n}, level);
      ce = std::max(ce, std::abs(qa_loss(s, n - 1).item() - std::log(double(n))));
    }
  }
  Rng rng(3);
  con = std::abs(contrastive_loss(Tensor::zeros({1, 16}), random_matrix(1, 16, rng), random_matrix(63, 16, rng)).item() -
                 std::log(64.0));
  for (std::size_t vocab : {7, 50, 1000}) {
    ParamStore p;
    init_mlm_params(p, 12, vocab, rng);
    p.replace("mlm.W", Tensor::zeros(p.get("mlm.W").shape()));
    p.replace("mlm.b", Tensor::filled(p.get("mlm.b").shape(), 0.25));
    const Tensor hidden = random_matrix(6, 12, rng);
    const std::vector<std::size_t> rows = {0, 2, 5};
    const std::vector<int> orig = {int(vocab) - 1, 5, 3};
    mlm = std::max(mlm, std::abs(mlm_loss(hidden, rows, orig, p).item() - std::log(double(vocab))));
  }
  return {ce <= 1e-9 && con <= 1e-9 && mlm <= 1e-9, "|CE - ln|A|| " + fmt("%.3g", ce) + ", |contrastive - ln 64| " +
                                                        fmt("%.3g", con) + ", |MLM - ln V| " + fmt("%.3g", mlm)};
}

// ---------------------------------------------------------------- 5 and 7

struct OverfitRun {
  std::optional<std::size_t> epochs;
  double seconds = 0.0;
};

OverfitRun overfit(std::uint64_t seed, const Checkpoint* init) {
  RunConfig cfg = desk_config();
  cfg.epochs = 300;
  cfg.target_train_acc = 0.95;
  cfg.seed = seed;
  const auto data = synthetic(cfg, 64, seed, TaskFamily::Mixed);
  TrainOptions opts;
  opts.init = init;
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult r = train(cfg, data, opts);
  return {r.epochs_to_target, seconds_since(t0)};
}

std::map<std::uint64_t, OverfitRun>& scratch_runs() {
  static std::map<std::uint64_t, OverfitRun> runs;
  for (std::uint64_t seed : {0, 1, 2})
    if (!runs.count(seed)) runs[seed] = overfit(seed, nullptr);
  return runs;
}

std::string epochs_text(const OverfitRun& r) { return r.epochs ? std::to_string(*r.epochs) : "never"; }

Outcome overfit_run() {
  bool pass = true;
  std::string detail;
  for (const auto& [seed, r] : scratch_runs()) {
    pass = pass && r.epochs && *r.epochs <= 300 && r.seconds < 600.0;
    detail += "seed " + std::to_string(seed) + ": " + epochs_text(r) + " epochs " + fmt("%.1f", r.seconds) + " s; ";
  }
  return {pass, detail};
}

Outcome pretraining_descent() {
  bool descent = true, finetune = true;
  std::vector<double> pre_epochs, scratch_epochs;
  std::string detail;
  for (std::uint64_t seed : {0, 1, 2}) {
    RunConfig cfg = desk_config();
    cfg.mode = Mode::Pretrain;
    cfg.seed = seed;
    cfg.epochs = 50;  // 32 pairs / batch 8 = 4 steps per epoch
    cfg.max_steps = 200;
    const auto pairs = synthetic(cfg, 32, seed, TaskFamily::Mixed, true);
    RunConfig zero = cfg;
    zero.epochs = 0;
    const double before = evaluate(train(zero, pairs).last, pairs).loss;
    TrainResult r = train(cfg, pairs);
    const double after = evaluate(r.last, pairs).loss;
    const auto steps = std::size_t(r.last.scalars.at("global_step"));
    descent = descent && steps == 200 && after < 0.5 * before;
    const OverfitRun tuned = overfit(seed, &r.last);
    const OverfitRun& base = scratch_runs().at(seed);
    pre_epochs.push_back(tuned.epochs ? double(*tuned.epochs) : INFINITY);
    scratch_epochs.push_back(base.epochs ? double(*base.epochs) : INFINITY);
    finetune = finetune && tuned.epochs.has_value();
    detail += "seed " + std::to_string(seed) + ": loss " + fmt("%.4g", before) + " -> " + fmt("%.4g", after) +
              " in " + std::to_string(steps) + " steps, epochs to 95% " + epochs_text(tuned) + " vs " +
              epochs_text(base) + " from scratch; ";
  }
  const double mp = median(pre_epochs), ms = median(scratch_epochs);
  finetune = finetune && mp <= ms;
  detail += "median epochs " + fmt("%g", mp) + " vs " + fmt("%g", ms);
  return {descent && finetune, detail};
}

// ---------------------------------------------------------------- 6

Outcome ablation_direction() {
  std::vector<double> full, ablated;
  std::string detail;
  for (std::uint64_t seed : {0, 1, 2}) {
    RunConfig cfg = desk_config();
    cfg.seed = seed;
    const auto all = synthetic(cfg, 512, seed, TaskFamily::Order);
    const std::vector<Sample> tr(all.begin(), all.begin() + 410), va(all.begin() + 410, all.end());
    TrainOptions opts;
    opts.val = &va;
    for (bool no_dgt : {false, true}) {
      RunConfig c = cfg;
      c.ablation.no_dgt = no_dgt;
      TrainResult r = train(c, tr, opts);
      const double acc = r.history.back().accuracy;  // last epoch, validation split
      (no_dgt ? ablated : full).push_back(acc);
    }
    detail += "seed " + std::to_string(seed) + ": " + fmt("%.3f", full.back()) + " vs " + fmt("%.3f", ablated.back()) +
              "; ";
  }
  const double gap = median(full) - median(ablated);
  detail += "median gap " + fmt("%.1f", 100 * gap) + " points";
  return {gap >= 0.10, detail};
}

// ---------------------------------------------------------------- 8

Outcome equivariance_suite() {
  double cand = 0.0, anchor = 0.0, padding = 0.0;
  bool same_choice = true;
  for (std::uint64_t seed : {0, 1, 2}) {
    auto cfg = testing::tiny_config();
    Rng rng(seed);
    Model model = Model::create(cfg, testing::tiny_vocab(), rng);
    auto raw = testing::random_video(model.cfg.dgt.graph, 3, rng);
    auto video = prepare_video(raw.frames, raw.frame_features, model.cfg.dgt.graph);
    NoGradGuard no_grad;

    const auto base = multi_choice_forward(video, "what moved first", kCandidates, model);
    for (const std::vector<std::size_t>& perm : std::vector<std::vector<std::size_t>>{
             {2, 4, 0, 1, 3}, {4, 3, 2, 1, 0}, {1, 0, 2, 3, 4}}) {
      std::vector<std::string> shuffled;
      for (std::size_t i : perm) shuffled.push_back(kCandidates[i]);
      const auto r = multi_choice_forward(video, "what moved first", shuffled, model);
      for (std::size_t i = 0; i < perm.size(); ++i)
        cand = std::max(cand, std::abs(r.scores.scores[i] - base.scores.scores[perm[i]]));
      same_choice = same_choice && shuffled[r.scores.argmax] == kCandidates[base.scores.argmax];
    }

    // Anchor order: a different consistent permutation per clip, for every
    // ablation and cross-modal placement.
    const auto& g = model.cfg.dgt.graph;
    std::vector<std::vector<std::size_t>> anchors{{2, 0, 1}, {1, 2, 0}};
    std::vector<std::size_t> perm;
    for (std::size_t t = 0; t < g.frames; ++t)
      for (std::size_t i : anchors[t / g.clip_length]) perm.push_back(t * g.objects + i);
    VideoInput moved = video;
    moved.regions = gather_rows(video.regions, perm);
    moved.geometry = gather_rows(video.geometry, perm);
    const auto enc = encode_text(TextBatch::from({tokenize("what moved first", model.vocab)}), model.params,
                                 model.cfg.text);
    const TextContext text{enc.sequence(0), enc.sequence_mask(0)};
    for (const char* flags : {"", "etrans", "ntrans", "fi", "ttrans", "dgt"}) {
      for (Placement pl : {Placement::Object, Placement::Frame, Placement::Clip, Placement::FrameClip}) {
        Model m = model;
        m.cfg.ablation = Ablation::parse(flags);
        m.cfg.cross.placement = pl;
        anchor = std::max(anchor, max_abs_diff(video_clips(video, m, &text), video_clips(moved, m, &text)));
      }
    }

    // Padding: longer batches, and a long extra candidate that stretches the
    // padded length of the others.
    std::vector<std::vector<int>> seqs{tokenize("the red ball moved", model.vocab), tokenize("what moved", model.vocab)};
    const auto short_enc = encode_text(TextBatch::from(seqs), model.params, model.cfg.text);
    const auto long_enc = encode_text(TextBatch::from(seqs, 14, {}), model.params, model.cfg.text);
    for (std::size_t i = 0; i < seqs.size(); ++i)
      for (std::size_t t = 0; t < seqs[i].size(); ++t)
        for (std::size_t c = 0; c < short_enc.tokens.cols(); ++c)
          padding = std::max(padding, std::abs(short_enc.tokens.at(i * short_enc.max_len + t, c) -
                                               long_enc.tokens.at(i * long_enc.max_len + t, c)));
    std::vector<std::string> longer = kCandidates;
    longer.push_back("red green blue yellow purple cube ball red green");
    const auto padded = multi_choice_forward(video, "what moved first", longer, model);
    for (std::size_t i = 0; i < kCandidates.size(); ++i)
      padding = std::max(padding, std::abs(padded.scores.scores[i] - base.scores.scores[i]));
  }
  return {cand <= 1e-12 && same_choice && anchor <= 1e-8 && padding <= 1e-9,
          "candidate perm " + fmt("%.3g", cand) + (same_choice ? " (same choice)" : " (choice changed)") +
              ", anchor perm " + fmt("%.3g", anchor) + ", padding " + fmt("%.3g", padding)};
}

// ---------------------------------------------------------------- 9

RunConfig small_run() {
  RunConfig c;
  c.frames = 4;
  c.clips = 2;
  c.clip_length = 2;
  c.objects = 3;
  c.region_dim = 6;
  c.frame_dim = 5;
  c.hidden = 8;
  c.heads = 2;
  c.edge_heads = 3;
  c.text_dim = 8;
  c.text_heads = 2;
  c.text_layers = 1;
  c.text_max_len = 16;
  c.epochs = 4;
  c.stage2_epochs = 2;
  c.batch_size = 4;
  return c;
}

Outcome determinism() {
  const RunConfig cfg = small_run();
  const auto data = synthetic(cfg, 12, 21, TaskFamily::Mixed);
  const auto val = synthetic(cfg, 6, 22, TaskFamily::Mixed);
  const fs::path a = scratch("det_a"), b = scratch("det_b"), h = scratch("det_half");
  TrainOptions oa, ob;
  oa.out_dir = a.string();
  ob.out_dir = b.string();
  oa.val = ob.val = &val;
  train(cfg, data, oa);
  train(cfg, data, ob);
  const bool metrics = slurp(a / "metrics.csv") == slurp(b / "metrics.csv") && !slurp(a / "metrics.csv").empty();

  const Checkpoint ck = load_checkpoint((a / "last.ckpt").string());
  save_checkpoint((h / "copy.ckpt").string(), ck);
  const bool round_trip = slurp(h / "copy.ckpt") == slurp(a / "last.ckpt") &&
                          serialize_checkpoint(deserialize_checkpoint(serialize_checkpoint(ck))) == slurp(a / "last.ckpt");

  TrainOptions first;
  first.val = &val;
  first.out_dir = h.string();
  first.stop_at_epoch = 3;
  train(cfg, data, first);
  const Checkpoint mid = load_checkpoint((h / "last.ckpt").string());
  TrainOptions second = first;
  second.stop_at_epoch = 0;
  second.resume = &mid;
  train(cfg, data, second);
  const bool resume = slurp(h / "last.ckpt") == slurp(a / "last.ckpt") &&
                      slurp(h / "metrics.csv") == slurp(a / "metrics.csv") &&
                      slurp(h / "best.ckpt") == slurp(a / "best.ckpt");
  return {metrics && round_trip && resume, std::string("metrics bytes ") + (metrics ? "equal" : "differ") +
                                               ", checkpoint round trip " + (round_trip ? "bitwise" : "differs") +
                                               ", resume at epoch 3 of 6 " + (resume ? "bitwise" : "differs")};
}

// ---------------------------------------------------------------- 10

Outcome full_config() {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg = RunConfig::load(std::string(VGT_SOURCE_DIR) + "/configs/full.cfg");
  const bool dims = cfg.hidden == 512 && cfg.frames == 32 && cfg.clips == 8 && cfg.clip_length == 4 &&
                    cfg.objects == 10 && cfg.heads == 8 && cfg.edge_heads == 5 && cfg.layers == 1 &&
                    cfg.gcn_layers == 2;
  const Vocab vocab = Vocab::build({"what moved first", "red green blue yellow purple object"});
  Rng rng(cfg.seed);
  Model model = Model::create(model_config(cfg, vocab), vocab, rng);
  const ParamReport report = report_params(model.params);
  auto raw = testing::random_video(model.cfg.dgt.graph, cfg.frame_dim, rng);
  auto video = prepare_video(raw.frames, raw.frame_features, model.cfg.dgt.graph);
  NoGradGuard no_grad;
  const auto r = multi_choice_forward(video, "what moved first", kCandidates, model);
  bool finite = r.scores.scores.size() == kCandidates.size();
  for (double s : r.scores.scores) finite = finite && std::isfinite(s);
  return {dims && finite && report.total > 0,
          std::to_string(report.total) + " parameters, forward " + (finite ? "finite" : "not finite") + ", " +
              fmt("%.1f", seconds_since(t0)) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"normalization suite", normalization_suite},
      {"linking oracle", linking_oracle},
      {"analytic loss values", analytic_losses},
      {"overfit run", overfit_run},
      {"ablation direction", ablation_direction},
      {"pretraining descent", pretraining_descent},
      {"equivariance suite", equivariance_suite},
      {"determinism and persistence", determinism},
      {"full-scale config", full_config},
  };
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoul(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %zu %s: %s (%s) [%.1f s]\n", i + 1, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
