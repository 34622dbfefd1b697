// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vgt/tensor.hpp"

namespace vgt {

enum class Placement { Object, Frame, Clip, FrameClip };

Placement parse_placement(const std::string& text);
std::string placement_name(Placement p);

struct CrossModalConfig {
  Placement placement = Placement::Clip;
  bool enabled = true;

  bool at_object() const { return enabled && placement == Placement::Object; }
  bool at_frame() const { return enabled && (placement == Placement::Frame || placement == Placement::FrameClip); }
  bool at_clip() const { return enabled && (placement == Placement::Clip || placement == Placement::FrameClip); }
};

/// Projected token features of one text sequence and its padding mask
/// (1 = real token).
struct TextContext {
  Tensor tokens;
  std::vector<std::uint8_t> mask;
};

/// Softmax over real tokens of x_v X_q^T, one row per visual node.
Tensor cross_modal_weights(const Tensor& visual, const TextContext& text);

/// x_v + sum_m beta_m x_q_m for every visual row.
Tensor cross_modal_interact(const Tensor& visual, const TextContext& text);

}  // namespace vgt
