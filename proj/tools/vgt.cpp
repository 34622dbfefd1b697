// SPDX-License-Identifier: Apache-2.0
//
// vgt: data generation, training, evaluation and inspection.
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "vgt/checkpoint.hpp"
#include "vgt/config.hpp"
#include "vgt/dataset.hpp"
#include "vgt/error.hpp"
#include "vgt/gradcheck.hpp"
#include "vgt/synthetic.hpp"
#include "vgt/trainer.hpp"

namespace fs = std::filesystem;
using namespace vgt;

namespace {

struct Common {
  std::string config;
  std::string seed;
  std::string ablate;
  std::string placement;
  bool freeze_text = false;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Run configuration file");
  cmd->add_option("--seed", c.seed, "Override the seed");
  cmd->add_option("--ablate", c.ablate, "Comma-separated ablations: dgt,ttrans,ntrans,etrans,fi");
  cmd->add_option("--cm-placement", c.placement, "Cross-modal placement: object|frame|clip|frame+clip");
  cmd->add_flag("--freeze-text", c.freeze_text, "Freeze the text encoder");
  cmd->add_option("--set", c.sets, "Override any config key: key=value (repeatable)");
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : RunConfig::load(c.config);
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!c.seed.empty()) cfg.set("seed", c.seed);
  if (!c.ablate.empty()) cfg.set("ablate", c.ablate);
  if (!c.placement.empty()) cfg.set("cm_placement", c.placement);
  if (c.freeze_text) cfg.freeze_text = true;
  cfg.validate();
  return cfg;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

int run_train(const Common& c, const std::string& data, const std::string& val, const std::string& out,
              const std::string& resume, const std::string& init, bool pretrain) {
  RunConfig cfg = resolve(c);
  if (pretrain) cfg.mode = Mode::Pretrain;
  const auto train_set = load_dataset(data);
  std::vector<Sample> val_set;
  if (!val.empty()) val_set = load_dataset(val);
  std::optional<Checkpoint> resume_ck, init_ck;
  TrainOptions opts;
  opts.out_dir = out;
  opts.log = &std::cout;
  if (!val.empty()) opts.val = &val_set;
  if (!resume.empty()) {
    resume_ck = load_checkpoint(resume);
    opts.resume = &*resume_ck;
  }
  if (!init.empty()) {
    init_ck = load_checkpoint(init);
    opts.init = &*init_ck;
  }
  fs::create_directories(out);
  write_file(fs::path(out) / "config.cfg", cfg.to_text());
  TrainResult r = train(cfg, train_set, opts);
  std::cout << "epochs run: " << r.epochs_run << "\n";
  if (r.epochs_to_target) std::cout << "target train accuracy reached at epoch " << *r.epochs_to_target << "\n";
  std::cout << "checkpoints: " << (fs::path(out) / "best.ckpt").string() << ", "
            << (fs::path(out) / "last.ckpt").string() << "\n";
  return 0;
}

// Finite differences over every parameter of a 2-clip x 2-frame x 3-object
// model scoring 5 candidates.
int run_gradcheck(std::uint64_t seed) {
  RunConfig cfg;
  cfg.frames = 4;
  cfg.clips = 2;
  cfg.clip_length = 2;
  cfg.objects = 3;
  cfg.region_dim = 4;
  cfg.frame_dim = 3;
  cfg.hidden = 8;
  cfg.heads = 2;
  cfg.edge_heads = 3;
  cfg.text_dim = 8;
  cfg.text_heads = 2;
  cfg.text_layers = 1;
  cfg.text_max_len = 16;
  cfg.seed = seed;
  SyntheticSpec spec;
  spec.num_videos = 1;
  spec.frames = 4;
  spec.clips = 2;
  spec.clip_length = 2;
  spec.objects = 3;
  spec.region_dim = 4;
  spec.frame_dim = 3;
  spec.family = TaskFamily::Order;
  spec.seed = seed;
  const auto data = generate_synthetic(spec);
  Rng rng(seed);
  Model model = Model::create(model_config(cfg, Vocab::build(corpus_texts(data))), Vocab::build(corpus_texts(data)), rng);
  const VideoInput video = to_video_input(data[0], cfg.graph());
  auto loss = [&] {
    return qa_loss(multi_choice_forward(video, data[0].question, data[0].candidates, model).scores.raw,
                   std::size_t(data[0].answer));
  };
  const double err = finite_diff_check_params(loss, model.params);
  std::cout << "parameters: " << model.params.count() << "\nmax relative error: " << err << "\n";
  std::cout << (err < 1e-4 ? "PASS" : "FAIL") << "\n";
  return err < 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video graph transformer for video question answering"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic JSONL dataset");
  Common gen_c;
  std::string gen_out, family = "mixed";
  std::size_t num_videos = 64, clutter = 1;
  bool reverse = false, descriptions = false;
  gen->add_option("--config", gen_c.config, "Run configuration file (video sizes, |A|)");
  gen->add_option("--seed", gen_c.seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output JSONL file")->required();
  gen->add_option("--family", family, "attribute|transition|order|mixed");
  gen->add_option("--num-videos", num_videos, "Number of rows");
  gen->add_option("--clutter", clutter, "Low-confidence distractor regions per frame");
  gen->add_flag("--reverse", reverse, "Play every video backwards");
  gen->add_flag("--descriptions", descriptions, "Write pretraining descriptions instead of questions");

  // train / pretrain
  Common train_c, pre_c;
  std::string data, val, out = "run", resume, init;
  auto* tr = app.add_subcommand("train", "Train on question-answer rows");
  add_common(tr, train_c);
  tr->add_option("--data", data, "Training JSONL")->required();
  tr->add_option("--val", val, "Validation JSONL");
  tr->add_option("--out", out, "Output directory");
  tr->add_option("--checkpoint", resume, "Resume from this checkpoint");
  tr->add_option("--init", init, "Initialize weights from this checkpoint (e.g. pretrained)");
  auto* pre = app.add_subcommand("pretrain", "Pretrain on video-description rows");
  add_common(pre, pre_c);
  pre->add_option("--data", data, "Description JSONL")->required();
  pre->add_option("--out", out, "Output directory");
  pre->add_option("--checkpoint", resume, "Resume from this checkpoint");

  // eval
  std::string eval_ck, eval_data, eval_out;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--checkpoint", eval_ck, "Checkpoint file")->required();
  ev->add_option("--data", eval_data, "JSONL to evaluate")->required();
  ev->add_option("--out", eval_out, "Directory for report.json and report.csv");

  // gradcheck
  std::uint64_t gc_seed = 0;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the full multiple-choice loss");
  gc->add_option("--seed", gc_seed, "Seed");

  // report-params
  Common rp_c;
  std::string rp_ck;
  auto* rp = app.add_subcommand("report-params", "Parameter counts by module");
  rp->add_option("--checkpoint", rp_ck, "Checkpoint file");
  add_common(rp, rp_c);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) {
      RunConfig cfg = resolve(gen_c);
      SyntheticSpec spec;
      spec.num_videos = num_videos;
      spec.frames = cfg.frames;
      spec.clips = cfg.clips;
      spec.clip_length = cfg.clip_length;
      spec.objects = cfg.objects;
      spec.region_dim = cfg.region_dim;
      spec.frame_dim = cfg.frame_dim;
      spec.num_candidates = cfg.num_candidates;
      spec.family = parse_family(family);
      spec.seed = cfg.seed;
      spec.clutter = clutter;
      spec.reverse = reverse;
      spec.descriptions = descriptions;
      save_dataset(gen_out, generate_synthetic(spec));
      std::cout << "wrote " << num_videos << " rows to " << gen_out << "\n";
      return 0;
    }
    if (*tr) return run_train(train_c, data, val, out, resume, init, false);
    if (*pre) return run_train(pre_c, data, "", out, resume, "", true);
    if (*ev) {
      const Checkpoint ck = load_checkpoint(eval_ck);
      const EvalReport r = evaluate(ck, load_dataset(eval_data));
      std::cout << report_json(r);
      if (!eval_out.empty()) {
        fs::create_directories(eval_out);
        write_file(fs::path(eval_out) / "report.json", report_json(r));
        write_file(fs::path(eval_out) / "report.csv", report_csv(r));
      }
      return 0;
    }
    if (*gc) return run_gradcheck(gc_seed);
    if (*rp) {
      if (!rp_ck.empty()) {
        std::cout << param_report_text(report_params(load_checkpoint(rp_ck).model().params));
      } else {
        // Without a checkpoint the vocabulary is the synthetic lexicon.
        const RunConfig cfg = resolve(rp_c);
        Vocab vocab = Vocab::build(synthetic_lexicon());
        RngStreams streams(cfg.seed);
        Model m = Model::create(model_config(cfg, vocab), vocab, streams.stream("init"));
        std::cout << param_report_text(report_params(m.params));
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
