// SPDX-License-Identifier: Apache-2.0
//
// JSONL datasets: one video per line with per-frame detections, frame
// features and either a multiple-choice question or a description.
#pragma once

#include <string>
#include <vector>

#include "vgt/model.hpp"
#include "vgt/rng.hpp"
#include "vgt/video_graph.hpp"

namespace vgt {

struct FrameRecord {
  int t = 0;
  std::vector<Region> regions;
  std::vector<double> frame_feat;
};

struct Sample {
  std::string id;
  std::vector<FrameRecord> frames;
  std::string question;
  std::vector<std::string> candidates;
  int answer = -1;
  std::string description;  // pretraining rows only

  bool is_pretrain() const { return !description.empty(); }
  const std::string& gold() const { return candidates.at(std::size_t(answer)); }
  /// Task family, the id prefix before the last '-' ("order-000003" -> "order").
  std::string family() const;
};

std::string sample_to_json(const Sample& s);
/// Parses one row; errors name the field. `line` is only used in messages.
Sample sample_from_json(const std::string& row, std::size_t line = 0);

std::vector<Sample> load_dataset(const std::string& path);
void save_dataset(const std::string& path, const std::vector<Sample>& samples);

/// A seeded permutation of [0, size).
std::vector<std::size_t> shuffled_order(std::size_t size, Rng& rng);

VideoInput to_video_input(const Sample& s, const GraphConfig& cfg);

/// Sorted distinct family names.
std::vector<std::string> families(const std::vector<Sample>& samples);

/// Every text field of the samples, for building a vocabulary.
std::vector<std::string> corpus_texts(const std::vector<Sample>& samples);

}  // namespace vgt
