// SPDX-License-Identifier: Apache-2.0
//
// Seeded synthetic videos of colored objects with precomputed region
// features, standing in for detector output.
//
//   attribute   "what color is the largest object": one frame suffices.
//   transition  "what grew" / "what shrank": one object changes size halfway.
//   order       "what moved first" / "what moved last": one object moves in
//               the first half, another in the second; only the order of
//               the two motions separates them.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vgt/dataset.hpp"
#include "vgt/video_graph.hpp"

namespace vgt {

enum class TaskFamily { Attribute, Transition, Order, Mixed };

TaskFamily parse_family(const std::string& text);
std::string family_name(TaskFamily f);

struct SyntheticSpec {
  std::size_t num_videos = 64;
  std::size_t frames = 8;       // l_v
  std::size_t clips = 4;        // k
  std::size_t clip_length = 2;  // l_c
  std::size_t objects = 4;      // n
  std::size_t region_dim = 32;  // d_r
  std::size_t frame_dim = 32;   // d_I
  std::size_t num_candidates = 5;
  TaskFamily family = TaskFamily::Mixed;
  std::uint64_t seed = 0;
  /// Low-confidence clutter detections per frame (dropped by top-n).
  std::size_t clutter = 1;
  /// Plays every video backwards.
  bool reverse = false;
  /// Emit descriptions (pretraining rows) instead of questions.
  bool descriptions = false;

  void validate() const;
};

/// The object vocabulary; prototype features are fixed across seeds.
const std::vector<std::string>& color_names();
std::vector<double> color_prototype(std::size_t color, std::size_t dim);

std::vector<Sample> generate_synthetic(const SyntheticSpec& spec);

/// Every word the generator can emit.
std::vector<std::string> synthetic_lexicon();

}  // namespace vgt
