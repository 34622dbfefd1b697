// SPDX-License-Identifier: Apache-2.0
//
// Training and evaluation loops, metrics files and parameter reports.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vgt/checkpoint.hpp"
#include "vgt/config.hpp"
#include "vgt/dataset.hpp"

namespace vgt {

struct FamilyScore {
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy() const { return count ? double(correct) / double(count) : 0.0; }
};

struct EvalReport {
  std::size_t count = 0;
  double loss = 0.0;      // mean cross-entropy (contrastive loss in pretrain mode)
  double accuracy = 0.0;  // retrieval accuracy in pretrain mode
  std::map<std::string, FamilyScore> families;
  std::vector<int> predictions;
};

/// Forward passes only. Multiple-choice and open-ended rows are scored
/// against their candidates / the answer set; description rows are scored
/// by retrieving their description among all descriptions of the set.
EvalReport evaluate(const Model& model, Mode mode, const std::vector<Sample>& samples,
                    const std::vector<std::string>& answer_set = {});
EvalReport evaluate(const Checkpoint& ck, const std::vector<Sample>& samples);

std::string report_json(const EvalReport& r);
std::string report_csv(const EvalReport& r);

struct EpochMetrics {
  std::size_t epoch = 0;
  std::string split;
  double loss = 0.0;
  double accuracy = 0.0;
  std::map<std::string, FamilyScore> families;
};

struct TrainOptions {
  /// Output directory for metrics.csv, last.ckpt and best.ckpt; empty keeps
  /// everything in memory.
  std::string out_dir;
  const std::vector<Sample>* val = nullptr;
  /// Continue this run from its saved epoch.
  const Checkpoint* resume = nullptr;
  /// Start from these weights (e.g. a pretrained model); new words are added
  /// to its vocabulary.
  const Checkpoint* init = nullptr;
  /// Stop after this many epochs of the schedule have completed (0 = run to
  /// the end). The schedule itself still follows the config.
  std::size_t stop_at_epoch = 0;
  /// Print one line per epoch here.
  std::ostream* log = nullptr;
};

struct TrainResult {
  Checkpoint last;
  std::optional<Checkpoint> best;
  std::vector<EpochMetrics> history;
  std::string metrics_csv;  // rows written by this call, with header
  std::size_t epochs_run = 0;
  /// Epoch at which train accuracy first reached target_train_acc.
  std::optional<std::size_t> epochs_to_target;
};

TrainResult train(const RunConfig& cfg, const std::vector<Sample>& train_set, const TrainOptions& opts = {});

struct ParamReport {
  std::vector<std::pair<std::string, std::size_t>> modules;
  std::size_t total = 0;
};

/// Parameter counts grouped by module prefix.
ParamReport report_params(const ParamStore& params);
std::string param_report_text(const ParamReport& r);

/// The default multiple-choice answer set for open-ended mode: sorted
/// distinct gold answers.
std::vector<std::string> answer_set_of(const std::vector<Sample>& samples);

}  // namespace vgt
