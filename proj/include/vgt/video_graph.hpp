// SPDX-License-Identifier: Apache-2.0
//
// Per-frame detections to clip-wise aligned object graphs: box overlap,
// appearance/location linking, greedy alignment onto the first frame's
// anchor objects, node features and row-stochastic relation matrices.
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "vgt/param_store.hpp"
#include "vgt/rng.hpp"
#include "vgt/tensor.hpp"

namespace vgt {

/// Normalized [0,1] corner coordinates relative to frame width/height.
struct Box {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

  double area() const { return (x2 - x1) * (y2 - y1); }
  /// Throws unless x1 < x2, y1 < y2 and all coordinates are in [0, 1].
  void validate() const;
  /// (x1, y1, x2, y2, area): the input of the location embedding.
  std::array<double, 5> geometry() const { return {x1, y1, x2, y2, area()}; }
};

struct Region {
  std::vector<double> feature;
  Box box;
  double confidence = 0.0;
};

struct FrameDetections {
  int frame_index = 0;
  std::vector<Region> regions;
  /// Set when top-n selection had to duplicate a region to reach n.
  bool padded = false;
};

struct GraphConfig {
  std::size_t frames = 8;       // l_v
  std::size_t clips = 4;        // k
  std::size_t clip_length = 2;  // l_c
  std::size_t objects = 4;      // n
  double link_weight = 1.0;     // lambda
  std::size_t hidden = 64;      // d
  std::size_t region_dim = 32;  // d_r

  std::size_t location_dim() const { return hidden / 4; }
  void validate() const;
};

double iou(const Box& a, const Box& b);
double cosine_similarity(std::span<const double> a, std::span<const double> b);
/// cosine(f_a, f_b) + lambda * iou(b_a, b_b)
double linking_score(std::span<const double> f_a, std::span<const double> f_b, const Box& b_a,
                     const Box& b_b, double lambda);

/// Keeps the n most confident regions (ties by input order); short frames
/// are padded by repeating the least confident region.
FrameDetections select_top_regions(const FrameDetections& frame, std::size_t n);

/// Greedy bijection on a row-major n x n score matrix: repeatedly take the
/// global maximum (ties: lowest row, then lowest column) and delete its row
/// and column. Returns row -> column.
std::vector<std::size_t> greedy_assignment(std::span<const double> scores, std::size_t n);

/// alignment[f][slot] = index of the region of frame f tracked to anchor slot.
using Alignment = std::vector<std::vector<std::size_t>>;

/// Links every frame of a clip onto the first frame's regions (the anchors).
Alignment link_tracks(std::span<const FrameDetections> clip, double lambda);

/// Frames of a clip with regions reordered so row i is anchor object i.
struct AlignedClip {
  std::vector<FrameDetections> frames;
  Alignment alignment;
};

AlignedClip align_clip(std::span<const FrameDetections> clip, double lambda);

// ---- learnable parts

void init_graph_params(ParamStore& params, const GraphConfig& cfg, Rng& rng);

/// ELU(W_o [f_r ; W_loc g + b_loc] + b_o) for stacked regions.
/// region_features: m x d_r, geometry: m x 5. Returns m x d.
Tensor node_features(const Tensor& region_features, const Tensor& geometry, const ParamStore& params);

/// Single region convenience form; returns 1 x d.
Tensor node_features(std::span<const double> region_feature, const Box& box, const ParamStore& params);

/// softmax_rows((F W_ak)(F W_av)^T) for one frame; F is n x d.
Tensor init_relations(const Tensor& nodes, const ParamStore& params);

/// Per-frame relations for frames stacked as consecutive blocks of n rows;
/// returns the stacked n x n blocks.
Tensor init_relations(const Tensor& nodes, std::size_t objects, const ParamStore& params);

}  // namespace vgt
