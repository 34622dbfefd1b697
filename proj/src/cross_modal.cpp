// SPDX-License-Identifier: Apache-2.0
#include "vgt/cross_modal.hpp"

#include <algorithm>

#include "vgt/error.hpp"

namespace vgt {

Placement parse_placement(const std::string& text) {
  if (text == "object") return Placement::Object;
  if (text == "frame") return Placement::Frame;
  if (text == "clip") return Placement::Clip;
  if (text == "frame+clip") return Placement::FrameClip;
  throw Error("unknown cross-modal placement '" + text + "' (expected object, frame, clip or frame+clip)");
}

std::string placement_name(Placement p) {
  switch (p) {
    case Placement::Object: return "object";
    case Placement::Frame: return "frame";
    case Placement::Clip: return "clip";
    case Placement::FrameClip: return "frame+clip";
  }
  return "clip";
}

Tensor cross_modal_weights(const Tensor& visual, const TextContext& text) {
  check(text.tokens.defined() && text.tokens.rows() > 0, "cross_modal_interact: empty text");
  check(text.mask.size() == text.tokens.rows(), "cross_modal_interact: mask length differs from token count");
  check(std::any_of(text.mask.begin(), text.mask.end(), [](std::uint8_t m) { return m != 0; }),
        "cross_modal_interact: text has no real tokens");
  check(visual.cols() == text.tokens.cols(), "cross_modal_interact: visual width " + std::to_string(visual.cols()) +
                                                 " != text width " + std::to_string(text.tokens.cols()));
  return masked_softmax_rows(matmul_nt(visual, text.tokens), text.mask, visual.rows());
}

Tensor cross_modal_interact(const Tensor& visual, const TextContext& text) {
  return add(visual, matmul(cross_modal_weights(visual, text), text.tokens));
}

}  // namespace vgt
