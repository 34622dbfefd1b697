// SPDX-License-Identifier: Apache-2.0
#include "vgt/dgt.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "vgt/error.hpp"

namespace vgt {

Ablation Ablation::parse(const std::string& list) {
  Ablation a;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item == "dgt") a.no_dgt = true;
    else if (item == "ttrans") a.no_ttrans = true;
    else if (item == "ntrans") a.no_ntrans = true;
    else if (item == "etrans") a.no_etrans = true;
    else if (item == "fi") a.no_frame_feature = true;
    else throw Error("unknown ablation flag '" + item + "' (expected dgt, ttrans, ntrans, etrans, fi)");
  }
  return a;
}

std::string Ablation::str() const {
  std::string out;
  auto put = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  put(no_dgt, "dgt");
  put(no_ttrans, "ttrans");
  put(no_ntrans, "ntrans");
  put(no_etrans, "etrans");
  put(no_frame_feature, "fi");
  return out;
}

void DgtConfig::validate() const {
  graph.validate();
  node_mhsa().validate();
  const std::size_t n2 = graph.objects * graph.objects;
  check(edge_heads > 0 && n2 % edge_heads == 0, "DgtConfig: n^2 = " + std::to_string(n2) +
                                                    " is not divisible by the edge head count " +
                                                    std::to_string(edge_heads));
  check(layers >= 1, "DgtConfig: H must be at least 1");
  check(gcn_layers >= 1, "DgtConfig: U must be at least 1");
  check(frame_dim > 0, "DgtConfig: frame feature size must be positive");
}

void init_dgt_params(ParamStore& params, const DgtConfig& cfg, Rng& rng) {
  cfg.validate();
  init_graph_params(params, cfg.graph, rng);
  const std::size_t d = cfg.graph.hidden;
  init_mhsa(params, "dgt.ntrans", cfg.node_mhsa(), rng);
  init_mhsa(params, "dgt.etrans", cfg.edge_mhsa(), rng);
  for (std::size_t u = 0; u < cfg.gcn_layers; ++u) params.add_uniform("dgt.gcn.W" + std::to_string(u), {d, d}, d, rng);
  params.add_uniform("dgt.pool.W", {d, 1}, d, rng);
  params.add_uniform("dgt.fuse.Wf", {cfg.frame_dim, d}, cfg.frame_dim, rng);
  params.add_uniform("dgt.fuse.bf", {d}, cfg.frame_dim, rng);
  params.add_uniform("dgt.fuse.Wm", {2 * d, d}, 2 * d, rng);
  params.add_uniform("dgt.fuse.bm", {d}, 2 * d, rng);
}

namespace {

// Row order (clip, object, frame-in-clip) <- frame-major (frame, object).
std::vector<std::size_t> object_major(std::size_t rows, std::size_t objects, std::size_t clip_length) {
  check(objects > 0 && clip_length > 0 && rows % (objects * clip_length) == 0,
        "node layout: rows not divisible by n * l_c");
  const std::size_t clips = rows / (objects * clip_length);
  std::vector<std::size_t> idx;
  idx.reserve(rows);
  for (std::size_t c = 0; c < clips; ++c)
    for (std::size_t i = 0; i < objects; ++i)
      for (std::size_t f = 0; f < clip_length; ++f) idx.push_back((c * clip_length + f) * objects + i);
  return idx;
}

std::vector<std::size_t> inverse(const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t k = 0; k < perm.size(); ++k) inv[perm[k]] = k;
  return inv;
}

}  // namespace

std::vector<std::size_t> canonical_anchor_order(const Tensor& nodes, std::size_t objects, std::size_t clip_length) {
  check(objects > 0 && clip_length > 0 && nodes.rows() % (objects * clip_length) == 0,
        "canonical_anchor_order: rows not divisible by n * l_c");
  const std::size_t d = nodes.cols(), frames = nodes.rows() / objects;
  auto v = nodes.values();
  std::vector<std::size_t> rows;
  rows.reserve(nodes.rows());
  std::vector<std::size_t> order(objects);
  for (std::size_t t = 0; t < frames; ++t) {
    if (t % clip_length == 0) {
      const double* first = v.data() + t * objects * d;
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(first + a * d, first + (a + 1) * d, first + b * d, first + (b + 1) * d);
      });
    }
    for (std::size_t i : order) rows.push_back(t * objects + i);
  }
  return rows;
}

Tensor node_transformer(const Tensor& nodes, std::size_t objects, std::size_t clip_length, const ParamStore& params,
                        const MhsaConfig& cfg) {
  if (objects == 1) return mhsa(nodes, params, "dgt.ntrans", cfg, clip_length);
  auto perm = object_major(nodes.rows(), objects, clip_length);
  Tensor seq = mhsa(gather_rows(nodes, perm), params, "dgt.ntrans", cfg, clip_length);
  return gather_rows(seq, inverse(perm));
}

Tensor recompute_relations(const Tensor& nodes, std::size_t objects, const ParamStore& params) {
  return init_relations(nodes, objects, params);
}

Tensor edge_transformer(const Tensor& relations, std::size_t objects, std::size_t clip_length,
                        const ParamStore& params, const MhsaConfig& cfg) {
  check(relations.cols() == objects && relations.rows() % objects == 0,
        "edge_transformer: relations must be stacked n x n blocks");
  const std::size_t frames = relations.rows() / objects;
  check(frames % clip_length == 0, "edge_transformer: frame count not divisible by l_c");
  Tensor flat = reshape(relations, {frames, objects * objects});
  return reshape(mhsa(flat, params, "dgt.etrans", cfg, clip_length), {frames * objects, objects});
}

Tensor graph_conv(const Tensor& nodes, const Tensor& relations, std::size_t objects, const ParamStore& params,
                  std::size_t layers) {
  check(relations.rows() == nodes.rows() && relations.cols() == objects,
        "graph_conv: relation blocks do not match node rows");
  const std::size_t frames = nodes.rows() / objects;
  Tensor h = nodes;
  for (std::size_t u = 0; u < layers; ++u) {
    const Tensor& w = params.get("dgt.gcn.W" + std::to_string(u));
    check(w.rows() == h.cols(), "graph_conv: W^(" + std::to_string(u + 1) + ") has " + std::to_string(w.rows()) +
                                    " rows for width " + std::to_string(h.cols()));
    Tensor y = matmul(h, w);
    h = relu(add(batched_matmul(relations, y, frames), y));
  }
  return add(nodes, h);
}

FramePool frame_pool(const Tensor& nodes, std::size_t objects, const ParamStore& params) {
  check(objects > 0 && nodes.rows() % objects == 0, "frame_pool: rows not divisible by n");
  const std::size_t frames = nodes.rows() / objects;
  Tensor alpha = softmax_rows(reshape(matmul(nodes, params.get("dgt.pool.W")), {frames, objects}));
  return {batched_matmul(alpha, nodes, frames), alpha};
}

Tensor fuse_frame_context(const Tensor& frame_graph, const Tensor& frame_features, const ParamStore& params) {
  const Tensor& wf = params.get("dgt.fuse.Wf");
  check(frame_features.cols() == wf.rows(), "fuse_frame_context: frame feature size " +
                                                std::to_string(frame_features.cols()) + " != " +
                                                std::to_string(wf.rows()));
  check(frame_features.rows() == frame_graph.rows(), "fuse_frame_context: frame counts differ");
  Tensor fi = add_bias(matmul(frame_features, wf), params.get("dgt.fuse.bf"));
  std::vector<Tensor> parts{fi, frame_graph};
  return elu(add_bias(matmul(concat_cols(parts), params.get("dgt.fuse.Wm")), params.get("dgt.fuse.bm")));
}

Tensor clip_pool(const Tensor& frames, std::size_t clip_length) {
  check(clip_length > 0 && frames.rows() > 0, "clip_pool: empty clip");
  return segment_mean_rows(frames, clip_length);
}

DgtOutput dgt_forward(const Tensor& nodes, const Tensor& frame_features, const DgtConfig& cfg,
                      const ParamStore& params, const Ablation& ablation, const CrossModalConfig& cross,
                      const TextContext* text) {
  const GraphConfig& g = cfg.graph;
  const std::size_t n = g.objects;
  check(nodes.rows() == g.frames * n, "dgt_forward: expected " + std::to_string(g.frames) + " frames of " +
                                          std::to_string(n) + " objects, got " + std::to_string(nodes.rows()) +
                                          " node rows");
  check(frame_features.rows() == g.frames, "dgt_forward: frame feature rows != l_v");
  check(g.frames == g.clips * g.clip_length, "dgt_forward: l_v != k * l_c");
  if ((cross.at_object() || cross.at_frame()) && text == nullptr)
    throw Error("dgt_forward: object/frame cross-modal interaction needs text");

  DgtOutput out;
  Tensor objs = gather_rows(nodes, canonical_anchor_order(nodes, n, g.clip_length));
  if (cross.at_object()) objs = cross_modal_interact(objs, *text);

  Tensor frame_graph;
  if (ablation.no_dgt) {
    frame_graph = segment_mean_rows(objs, n);
  } else {
    if (ablation.use_ntrans()) objs = node_transformer(objs, n, g.clip_length, params, cfg.node_mhsa());
    Tensor rel = recompute_relations(objs, n, params);
    if (ablation.use_etrans()) rel = edge_transformer(rel, n, g.clip_length, params, cfg.edge_mhsa());
    objs = graph_conv(objs, rel, n, params, cfg.gcn_layers);
    FramePool fp = frame_pool(objs, n, params);
    frame_graph = fp.pooled;
    out.frame_weights = fp.weights;
  }

  out.frames = ablation.no_frame_feature ? frame_graph : fuse_frame_context(frame_graph, frame_features, params);
  if (cross.at_frame()) out.frames = cross_modal_interact(out.frames, *text);
  out.clips = clip_pool(out.frames, g.clip_length);
  return out;
}

}  // namespace vgt
