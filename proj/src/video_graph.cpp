// SPDX-License-Identifier: Apache-2.0
#include "vgt/video_graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vgt/error.hpp"

namespace vgt {

void Box::validate() const {
  for (double c : {x1, y1, x2, y2}) {
    check(std::isfinite(c) && c >= 0.0 && c <= 1.0, "Box: coordinates must lie in [0, 1]");
  }
  check(x1 < x2 && y1 < y2, "Box: degenerate box (zero area)");
}

void GraphConfig::validate() const {
  check(frames > 0 && clips > 0 && clip_length > 0, "GraphConfig: frame counts must be positive");
  check(frames == clips * clip_length, "GraphConfig: l_v (" + std::to_string(frames) + ") must equal k * l_c (" +
                                           std::to_string(clips) + " * " + std::to_string(clip_length) + ")");
  check(objects >= 1, "GraphConfig: n must be at least 1");
  check(link_weight >= 0.0, "GraphConfig: linking weight must be non-negative");
  check(hidden >= 4 && hidden % 4 == 0, "GraphConfig: d must be a positive multiple of 4");
  check(region_dim > 0, "GraphConfig: region feature size must be positive");
}

double iou(const Box& a, const Box& b) {
  a.validate();
  b.validate();
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  const double inter = w * h;
  return inter / (a.area() + b.area() - inter);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  check(a.size() == b.size(), "cosine_similarity: feature dimensions differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  check(na > 0.0 && nb > 0.0, "cosine_similarity: zero-norm feature");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double linking_score(std::span<const double> f_a, std::span<const double> f_b, const Box& b_a,
                     const Box& b_b, double lambda) {
  return cosine_similarity(f_a, f_b) + lambda * iou(b_a, b_b);
}

FrameDetections select_top_regions(const FrameDetections& frame, std::size_t n) {
  check(n >= 1, "select_top_regions: n must be at least 1");
  check(!frame.regions.empty(), "select_top_regions: frame " + std::to_string(frame.frame_index) + " has no regions");
  std::vector<std::size_t> order(frame.regions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return frame.regions[a].confidence > frame.regions[b].confidence;
  });
  FrameDetections out;
  out.frame_index = frame.frame_index;
  for (std::size_t i = 0; i < std::min(n, order.size()); ++i) out.regions.push_back(frame.regions[order[i]]);
  while (out.regions.size() < n) {
    out.regions.push_back(frame.regions[order.back()]);
    out.padded = true;
  }
  return out;
}

std::vector<std::size_t> greedy_assignment(std::span<const double> scores, std::size_t n) {
  check(scores.size() == n * n, "greedy_assignment: score matrix must be n x n");
  std::vector<bool> row_used(n, false), col_used(n, false);
  std::vector<std::size_t> assign(n, 0);
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t best_r = n, best_c = n;
    double best = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      if (row_used[r]) continue;
      for (std::size_t c = 0; c < n; ++c) {
        if (col_used[c]) continue;
        const double s = scores[r * n + c];
        // strict > keeps the lowest (row, column) among ties
        if (best_r == n || s > best) {
          best = s;
          best_r = r;
          best_c = c;
        }
      }
    }
    row_used[best_r] = col_used[best_c] = true;
    assign[best_r] = best_c;
  }
  return assign;
}

Alignment link_tracks(std::span<const FrameDetections> clip, double lambda) {
  check(!clip.empty(), "link_tracks: empty clip");
  const std::size_t n = clip[0].regions.size();
  check(n >= 1, "link_tracks: frames have no regions");
  for (const auto& f : clip) {
    check(f.regions.size() == n, "link_tracks: frame " + std::to_string(f.frame_index) + " has " +
                                     std::to_string(f.regions.size()) + " regions, expected " + std::to_string(n));
  }
  Alignment alignment(clip.size());
  alignment[0].resize(n);
  std::iota(alignment[0].begin(), alignment[0].end(), 0);
  std::vector<double> scores(n * n);
  for (std::size_t t = 0; t + 1 < clip.size(); ++t) {
    const auto& prev = clip[t].regions;
    const auto& next = clip[t + 1].regions;
    for (std::size_t slot = 0; slot < n; ++slot) {
      const Region& a = prev[alignment[t][slot]];
      for (std::size_t j = 0; j < n; ++j) {
        scores[slot * n + j] = linking_score(a.feature, next[j].feature, a.box, next[j].box, lambda);
      }
    }
    alignment[t + 1] = greedy_assignment(scores, n);
  }
  return alignment;
}

AlignedClip align_clip(std::span<const FrameDetections> clip, double lambda) {
  AlignedClip out;
  out.alignment = link_tracks(clip, lambda);
  for (std::size_t t = 0; t < clip.size(); ++t) {
    FrameDetections f;
    f.frame_index = clip[t].frame_index;
    f.padded = clip[t].padded;
    for (std::size_t idx : out.alignment[t]) f.regions.push_back(clip[t].regions[idx]);
    out.frames.push_back(std::move(f));
  }
  return out;
}

// ---------------------------------------------------------------- learnable

void init_graph_params(ParamStore& params, const GraphConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t d = cfg.hidden, loc = cfg.location_dim();
  params.add_uniform("graph.loc.W", {5, loc}, 5, rng);
  params.add_uniform("graph.loc.b", {loc}, 5, rng);
  params.add_uniform("graph.obj.W", {cfg.region_dim + loc, d}, cfg.region_dim + loc, rng);
  params.add_uniform("graph.obj.b", {d}, cfg.region_dim + loc, rng);
  params.add_uniform("graph.rel.Wk", {d, d / 2}, d, rng);
  params.add_uniform("graph.rel.Wv", {d, d / 2}, d, rng);
}

Tensor node_features(const Tensor& region_features, const Tensor& geometry, const ParamStore& params) {
  const Tensor& w_obj = params.get("graph.obj.W");
  const Tensor& w_loc = params.get("graph.loc.W");
  check(geometry.cols() == 5, "node_features: geometry must have 5 columns");
  check(region_features.rows() == geometry.rows(), "node_features: region and geometry row counts differ");
  check(region_features.cols() + w_loc.cols() == w_obj.rows(),
        "node_features: region feature size " + std::to_string(region_features.cols()) + " does not match W_o");
  Tensor loc = add_bias(matmul(geometry, w_loc), params.get("graph.loc.b"));
  std::vector<Tensor> parts{region_features, loc};
  return elu(add_bias(matmul(concat_cols(parts), w_obj), params.get("graph.obj.b")));
}

Tensor node_features(std::span<const double> region_feature, const Box& box, const ParamStore& params) {
  box.validate();
  auto g = box.geometry();
  return node_features(Tensor::row(std::vector<double>(region_feature.begin(), region_feature.end())),
                       Tensor::row(std::vector<double>(g.begin(), g.end())), params);
}

Tensor init_relations(const Tensor& nodes, const ParamStore& params) {
  return init_relations(nodes, nodes.rows(), params);
}

Tensor init_relations(const Tensor& nodes, std::size_t objects, const ParamStore& params) {
  const Tensor& wk = params.get("graph.rel.Wk");
  const Tensor& wv = params.get("graph.rel.Wv");
  check(nodes.cols() % 2 == 0, "init_relations: d must be even");
  check(wk.rows() == nodes.cols() && wk.cols() == nodes.cols() / 2, "init_relations: W_ak must be d x d/2");
  check(objects > 0 && nodes.rows() % objects == 0, "init_relations: rows not divisible by object count");
  const std::size_t frames = nodes.rows() / objects;
  return softmax_rows(batched_matmul_nt(matmul(nodes, wk), matmul(nodes, wv), frames));
}

}  // namespace vgt
