// SPDX-License-Identifier: Apache-2.0
#include "vgt/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "vgt/error.hpp"

namespace vgt {

TaskFamily parse_family(const std::string& text) {
  if (text == "attribute") return TaskFamily::Attribute;
  if (text == "transition") return TaskFamily::Transition;
  if (text == "order") return TaskFamily::Order;
  if (text == "mixed") return TaskFamily::Mixed;
  throw Error("unknown task family '" + text + "' (expected attribute, transition, order or mixed)");
}

std::string family_name(TaskFamily f) {
  switch (f) {
    case TaskFamily::Attribute: return "attribute";
    case TaskFamily::Transition: return "transition";
    case TaskFamily::Order: return "order";
    case TaskFamily::Mixed: return "mixed";
  }
  return "mixed";
}

const std::vector<std::string>& color_names() {
  static const std::vector<std::string> names = {"red",    "green", "blue",  "yellow", "purple",
                                                 "orange", "white", "black", "pink",   "brown"};
  return names;
}

std::vector<double> color_prototype(std::size_t color, std::size_t dim) {
  Rng rng(splitmix64(fnv1a("palette") + color));
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.normal();
  return v;
}

void SyntheticSpec::validate() const {
  check(frames > 0 && clips > 0 && clip_length > 0 && frames == clips * clip_length,
        "SyntheticSpec: l_v must equal k * l_c");
  check(objects >= 2, "SyntheticSpec: need at least 2 objects");
  check(objects <= color_names().size(), "SyntheticSpec: at most " + std::to_string(color_names().size()) + " objects");
  check(num_candidates >= 2, "SyntheticSpec: |A| must be at least 2");
  check(num_candidates <= color_names().size(),
        "SyntheticSpec: at most " + std::to_string(color_names().size()) + " candidates");
  check(region_dim > 0 && frame_dim > 0, "SyntheticSpec: feature sizes must be positive");
  check(family == TaskFamily::Attribute || clips >= 2,
        "SyntheticSpec: transition and order videos need at least 2 clips");
}

namespace {

struct Placed {
  double x = 0, y = 0, w = 0, h = 0;
  Box box() const { return {x, y, x + w, y + h}; }
};

// A w x h box at a random position that stays inside the frame.
Placed place(double w, double h, Rng& rng) {
  return {rng.uniform(0.0, 1.0 - w), rng.uniform(0.0, 1.0 - h), w, h};
}

Placed jitter(Placed p, Rng& rng) {
  p.x = std::clamp(p.x + rng.uniform(-0.005, 0.005), 0.0, 1.0 - p.w);
  p.y = std::clamp(p.y + rng.uniform(-0.005, 0.005), 0.0, 1.0 - p.h);
  return p;
}

struct Plan {
  std::vector<std::size_t> colors;                 // object -> palette index
  std::vector<std::vector<Placed>> boxes;          // frame -> object -> box
};

std::vector<std::size_t> pick_colors(std::size_t n, Rng& rng) {
  std::vector<std::size_t> all(color_names().size());
  std::iota(all.begin(), all.end(), 0);
  rng.shuffle(all);
  all.resize(n);
  return all;
}

std::string article_object(std::size_t color) { return "the " + color_names()[color] + " object"; }

struct Story {
  Plan plan;
  std::string question;
  std::size_t gold_object = 0;
  std::string description;
};

Story attribute_story(const SyntheticSpec& s, Rng& rng) {
  Story st;
  st.plan.colors = pick_colors(s.objects, rng);
  std::vector<double> sizes(s.objects);
  for (std::size_t i = 0; i < s.objects; ++i) sizes[i] = 0.08 + 0.3 * double(i) / double(s.objects - 1);
  rng.shuffle(sizes);
  std::vector<Placed> base;
  for (double sz : sizes) base.push_back(place(sz, sz * rng.uniform(0.8, 1.2) * 0.9, rng));
  for (std::size_t t = 0; t < s.frames; ++t) {
    std::vector<Placed> f;
    for (const auto& p : base) f.push_back(jitter(p, rng));
    st.plan.boxes.push_back(std::move(f));
  }
  const auto largest = std::size_t(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  const auto smallest = std::size_t(std::min_element(sizes.begin(), sizes.end()) - sizes.begin());
  if (rng.bernoulli(0.5)) {
    st.question = "what color is the largest object";
    st.gold_object = largest;
  } else {
    st.question = "what color is the smallest object";
    st.gold_object = smallest;
  }
  st.description = "the largest object is " + color_names()[st.plan.colors[largest]] + " and the smallest object is " +
                   color_names()[st.plan.colors[smallest]];
  return st;
}

// One object grows and another shrinks between the first and second half.
Story transition_story(const SyntheticSpec& s, Rng& rng) {
  Story st;
  st.plan.colors = pick_colors(s.objects, rng);
  const std::size_t grower = 0, shrinker = 1;  // colors are already shuffled
  std::vector<Placed> base;
  for (std::size_t i = 0; i < s.objects; ++i) {
    const double sz = i == grower ? 0.1 : (i == shrinker ? 0.3 : rng.uniform(0.12, 0.25));
    base.push_back(place(sz, sz, rng));
  }
  const std::size_t switch_clip = s.clips / 2;
  for (std::size_t t = 0; t < s.frames; ++t) {
    const bool after = t / s.clip_length >= switch_clip;
    std::vector<Placed> f;
    for (std::size_t i = 0; i < s.objects; ++i) {
      Placed p = jitter(base[i], rng);
      if (after && (i == grower || i == shrinker)) {
        const double scale = i == grower ? 2.5 : 0.4;
        const double cx = p.x + p.w / 2, cy = p.y + p.h / 2;
        p.w *= scale;
        p.h *= scale;
        p.x = std::clamp(cx - p.w / 2, 0.0, 1.0 - p.w);
        p.y = std::clamp(cy - p.h / 2, 0.0, 1.0 - p.h);
      }
      f.push_back(p);
    }
    st.plan.boxes.push_back(std::move(f));
  }
  const bool ask_grew = rng.bernoulli(0.5);
  // When played backwards the grower shrinks and vice versa.
  const std::size_t g = s.reverse ? shrinker : grower, k = s.reverse ? grower : shrinker;
  st.question = ask_grew ? "what grew" : "what shrank";
  st.gold_object = ask_grew ? g : k;
  st.description = article_object(st.plan.colors[g]) + " grew and " + article_object(st.plan.colors[k]) + " shrank";
  return st;
}

// Object A moves during the first half of the clips and object B during the
// second half (the middle clip of an odd count stays still). Both move for the
// same number of clips, so only their temporal order tells them apart. A
// moving object's detection box is blurred to kBlur times its size.
Story order_story(const SyntheticSpec& s, Rng& rng) {
  constexpr double kBlur = 3.0;
  Story st;
  st.plan.colors = pick_colors(s.objects, rng);
  std::vector<std::size_t> perm(s.objects);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  const std::size_t a_obj = perm[0], b_obj = perm[1], none = s.objects;
  std::vector<std::size_t> movers(s.clips, none);
  for (std::size_t c = 0; c < s.clips; ++c) {
    if (c < s.clips / 2) movers[c] = a_obj;
    else if (c >= (s.clips + 1) / 2) movers[c] = b_obj;
  }
  for (std::size_t c = 0; c < s.clips; ++c) {
    std::vector<Placed> start;
    std::vector<double> dx(s.objects, 0.0), dy(s.objects, 0.0);
    for (std::size_t i = 0; i < s.objects; ++i) {
      const double sz = rng.uniform(0.12, 0.2);
      Placed p{0, 0, sz, sz};
      if (i == movers[c]) {
        p.w = p.h = kBlur * sz;
        const double dist = rng.uniform(0.25, 0.35);
        const bool horizontal = rng.bernoulli(0.5);
        const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
        (horizontal ? dx[i] : dy[i]) = sign * dist;
        const double lo_x = std::max(0.0, -dx[i]), hi_x = std::min(1.0 - p.w, 1.0 - p.w - dx[i]);
        const double lo_y = std::max(0.0, -dy[i]), hi_y = std::min(1.0 - p.h, 1.0 - p.h - dy[i]);
        p.x = rng.uniform(lo_x, hi_x);
        p.y = rng.uniform(lo_y, hi_y);
      } else {
        p = place(sz, sz, rng);
      }
      start.push_back(p);
    }
    for (std::size_t f = 0; f < s.clip_length; ++f) {
      const double t = s.clip_length > 1 ? double(f) / double(s.clip_length - 1) : 0.0;
      std::vector<Placed> frame;
      for (std::size_t i = 0; i < s.objects; ++i) {
        Placed p = start[i];
        if (i == movers[c]) {
          p.x += t * dx[i];
          p.y += t * dy[i];
        } else {
          p = jitter(p, rng);
        }
        frame.push_back(p);
      }
      st.plan.boxes.push_back(std::move(frame));
    }
  }
  const std::size_t first_obj = s.reverse ? b_obj : a_obj, last_obj = s.reverse ? a_obj : b_obj;
  const bool first = rng.bernoulli(0.5);
  st.question = first ? "what moved first" : "what moved last";
  st.gold_object = first ? first_obj : last_obj;
  st.description = article_object(st.plan.colors[first_obj]) + " moved first and " +
                   article_object(st.plan.colors[last_obj]) + " moved last";
  return st;
}

Sample render(const SyntheticSpec& s, const Story& st, const std::string& id, Rng& rng) {
  static thread_local std::vector<double> scene;
  scene.resize(s.frame_dim * s.region_dim);
  {
    Rng fixed(fnv1a("scene"));
    const double scale = 1.0 / std::sqrt(double(s.region_dim));
    for (auto& x : scene) x = scale * fixed.normal();
  }
  Sample out;
  out.id = id;
  // Each object instance keeps its look across frames; detections add a
  // little per-frame noise on top.
  std::vector<std::vector<double>> look;
  for (std::size_t i = 0; i < s.objects; ++i) {
    look.push_back(color_prototype(st.plan.colors[i], s.region_dim));
    for (auto& x : look.back()) x += 0.1 * rng.normal();
  }
  for (std::size_t t = 0; t < s.frames; ++t) {
    FrameRecord f;
    f.t = int(t);
    for (std::size_t i = 0; i < s.objects; ++i) {
      Region r;
      r.feature = look[i];
      for (auto& x : r.feature) x += 0.01 * rng.normal();
      r.box = st.plan.boxes[t][i].box();
      r.confidence = rng.uniform(0.5, 1.0);
      f.regions.push_back(std::move(r));
    }
    for (std::size_t c = 0; c < s.clutter; ++c) {
      Region r;
      r.feature.resize(s.region_dim);
      for (auto& x : r.feature) x = rng.normal();
      r.box = place(rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3), rng).box();
      r.confidence = rng.uniform(0.05, 0.3);
      f.regions.push_back(std::move(r));
    }
    rng.shuffle(f.regions);
    // A global scene descriptor: fixed projection of the mean object look.
    f.frame_feat.assign(s.frame_dim, 0.0);
    for (std::size_t i = 0; i < s.objects; ++i) {
      const auto proto = color_prototype(st.plan.colors[i], s.region_dim);
      for (std::size_t r = 0; r < s.frame_dim; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < s.region_dim; ++c) acc += scene[r * s.region_dim + c] * proto[c];
        f.frame_feat[r] += acc / double(s.objects);
      }
    }
    for (auto& x : f.frame_feat) x += 0.1 * rng.normal();
    out.frames.push_back(std::move(f));
  }
  if (s.reverse) {
    std::reverse(out.frames.begin(), out.frames.end());
    for (std::size_t t = 0; t < out.frames.size(); ++t) out.frames[t].t = int(t);
  }
  if (s.descriptions) {
    out.description = st.description;
    return out;
  }
  out.question = st.question;
  // The video's own colors come first as distractors, then absent ones.
  const std::size_t gold_color = st.plan.colors[st.gold_object];
  std::vector<std::size_t> present, absent;
  for (std::size_t c : st.plan.colors)
    if (c != gold_color) present.push_back(c);
  for (std::size_t c = 0; c < color_names().size(); ++c)
    if (std::find(st.plan.colors.begin(), st.plan.colors.end(), c) == st.plan.colors.end()) absent.push_back(c);
  rng.shuffle(present);
  rng.shuffle(absent);
  std::vector<std::size_t> cands{gold_color};
  for (std::size_t c : present)
    if (cands.size() < s.num_candidates) cands.push_back(c);
  for (std::size_t c : absent)
    if (cands.size() < s.num_candidates) cands.push_back(c);
  rng.shuffle(cands);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    out.candidates.push_back(color_names()[cands[i]]);
    if (cands[i] == gold_color) out.answer = int(i);
  }
  return out;
}

}  // namespace

std::vector<Sample> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<Sample> out;
  out.reserve(spec.num_videos);
  static const TaskFamily cycle[] = {TaskFamily::Attribute, TaskFamily::Transition, TaskFamily::Order};
  for (std::size_t v = 0; v < spec.num_videos; ++v) {
    // Per-video streams keep each video independent of the others.
    Rng rng(splitmix64(spec.seed * 0x9E3779B97F4A7C15ull + v));
    const TaskFamily fam = spec.family == TaskFamily::Mixed ? cycle[v % 3] : spec.family;
    Story st;
    switch (fam) {
      case TaskFamily::Attribute: st = attribute_story(spec, rng); break;
      case TaskFamily::Transition: st = transition_story(spec, rng); break;
      default: st = order_story(spec, rng); break;
    }
    char id[64];
    std::snprintf(id, sizeof id, "%s-%06zu", family_name(fam).c_str(), v);
    out.push_back(render(spec, st, id, rng));
  }
  return out;
}

std::vector<std::string> synthetic_lexicon() {
  std::vector<std::string> words = {"what", "color", "is",   "the",   "largest", "smallest", "object", "grew",
                                    "shrank", "moved", "first", "last", "and"};
  words.insert(words.end(), color_names().begin(), color_names().end());
  return words;
}

}  // namespace vgt
