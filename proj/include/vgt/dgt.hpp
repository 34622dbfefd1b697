// SPDX-License-Identifier: Apache-2.0
//
// Dynamic graph transformer over the aligned object graphs of a video.
//
// Node features of a whole video are stacked frame-major: row t * n + i is
// anchor object i in frame t. Relation matrices are stacked the same way
// (frame t occupies rows t * n .. t * n + n - 1 of an (l_v * n) x n matrix).
#pragma once

#include <string>

#include "vgt/attention.hpp"
#include "vgt/cross_modal.hpp"
#include "vgt/param_store.hpp"
#include "vgt/video_graph.hpp"

namespace vgt {

/// Components removed for ablation studies.
struct Ablation {
  bool no_dgt = false;            // mean raw object features per frame, then fuse
  bool no_ttrans = false;         // neither node nor edge transformer
  bool no_ntrans = false;
  bool no_etrans = false;
  bool no_frame_feature = false;  // f_G passes through without frame features

  bool use_ntrans() const { return !no_dgt && !no_ttrans && !no_ntrans; }
  bool use_etrans() const { return !no_dgt && !no_ttrans && !no_etrans; }

  /// Comma-separated subset of: dgt, ttrans, ntrans, etrans, fi. Empty = none.
  static Ablation parse(const std::string& list);
  std::string str() const;
  bool operator==(const Ablation&) const = default;
};

struct DgtConfig {
  GraphConfig graph;
  std::size_t heads = 4;       // e
  std::size_t edge_heads = 4;  // e_edge
  std::size_t layers = 1;      // H
  std::size_t gcn_layers = 2;  // U
  std::size_t frame_dim = 32;  // d_I

  MhsaConfig node_mhsa() const { return {graph.hidden, heads, layers}; }
  MhsaConfig edge_mhsa() const { return {graph.objects * graph.objects, edge_heads, layers}; }
  void validate() const;
};

/// Registers the video-graph parameters and every DGT weight.
void init_dgt_params(ParamStore& params, const DgtConfig& cfg, Rng& rng);

/// Row gather that orders each clip's anchor slots by the lexicographic order
/// of their first-frame features, applied to every frame of the clip.
std::vector<std::size_t> canonical_anchor_order(const Tensor& nodes, std::size_t objects, std::size_t clip_length);

/// Self-attention over each anchor object's l_c features within its clip.
Tensor node_transformer(const Tensor& nodes, std::size_t objects, std::size_t clip_length, const ParamStore& params,
                        const MhsaConfig& cfg);

/// Same operation as init_relations, on transformed node features.
Tensor recompute_relations(const Tensor& nodes, std::size_t objects, const ParamStore& params);

/// Self-attention over the row-major flattened relation matrices of each clip.
Tensor edge_transformer(const Tensor& relations, std::size_t objects, std::size_t clip_length,
                        const ParamStore& params, const MhsaConfig& cfg);

/// F + F^(U) with F^(u) = ReLU((R + I) F^(u-1) W^(u)), per frame.
Tensor graph_conv(const Tensor& nodes, const Tensor& relations, std::size_t objects, const ParamStore& params,
                  std::size_t layers);

struct FramePool {
  Tensor pooled;   // frames x d
  Tensor weights;  // frames x n, rows sum to one
};

FramePool frame_pool(const Tensor& nodes, std::size_t objects, const ParamStore& params);

/// ELU(W_m [W_f f_I + b_f ; f_G] + b_m), one row per frame.
Tensor fuse_frame_context(const Tensor& frame_graph, const Tensor& frame_features, const ParamStore& params);

/// Mean over each clip's l_c consecutive frame rows.
Tensor clip_pool(const Tensor& frames, std::size_t clip_length);

struct DgtOutput {
  Tensor clips;          // k x d
  Tensor frames;         // l_v x d, the rows clip_pool averages
  Tensor frame_weights;  // l_v x n (undefined when the DGT is ablated)
};

/// Full pipeline. Anchors are first put in canonical order, so the result does
/// not depend on the order in which detections were anchored and frame_weights
/// columns follow that canonical order. `text` is consulted when cross-modal interaction is placed
/// at object or frame level; clip-level interaction happens downstream.
DgtOutput dgt_forward(const Tensor& nodes, const Tensor& frame_features, const DgtConfig& cfg,
                      const ParamStore& params, const Ablation& ablation, const CrossModalConfig& cross = {},
                      const TextContext* text = nullptr);

}  // namespace vgt
