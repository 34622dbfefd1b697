#pragma once

#include <vector>

#include "oracles.hpp"
#include "vgt/model.hpp"

namespace vgt::testing {

struct RawVideo {
  std::vector<FrameDetections> frames;
  std::vector<std::vector<double>> frame_features;
};

inline RawVideo random_video(const GraphConfig& g, std::size_t frame_dim, Rng& rng, std::size_t extra_regions = 1) {
  RawVideo v;
  v.frames = oracle::random_clip(g.frames, g.objects + extra_regions, g.region_dim, rng);
  for (std::size_t t = 0; t < g.frames; ++t) {
    std::vector<double> f(frame_dim);
    for (double& x : f) x = rng.normal();
    v.frame_features.push_back(f);
  }
  return v;
}

/// 2 clips x 2 frames x 3 objects, d = 8, small text encoder.
inline ModelConfig tiny_config() {
  ModelConfig cfg;
  auto& g = cfg.dgt.graph;
  g.clips = 2;
  g.clip_length = 2;
  g.frames = 4;
  g.objects = 3;
  g.hidden = 8;
  g.region_dim = 4;
  cfg.dgt.heads = 2;
  cfg.dgt.edge_heads = 3;
  cfg.dgt.layers = 1;
  cfg.dgt.gcn_layers = 2;
  cfg.dgt.frame_dim = 3;
  cfg.text.dim = 8;
  cfg.text.heads = 2;
  cfg.text.layers = 1;
  cfg.text.max_len = 16;
  return cfg;
}

inline Vocab tiny_vocab() {
  return Vocab::build({"what moved first", "which object moved last", "red green blue yellow purple cube ball"});
}

}  // namespace vgt::testing
