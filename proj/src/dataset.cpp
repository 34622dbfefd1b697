// SPDX-License-Identifier: Apache-2.0
#include "vgt/dataset.hpp"

#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "vgt/error.hpp"

namespace vgt {

using nlohmann::json;

std::string Sample::family() const {
  const auto dash = id.rfind('-');
  return dash == std::string::npos ? id : id.substr(0, dash);
}

std::string sample_to_json(const Sample& s) {
  json row;
  row["id"] = s.id;
  json frames = json::array();
  for (const auto& f : s.frames) {
    json regions = json::array();
    for (const auto& r : f.regions) {
      regions.push_back({{"feat", r.feature}, {"box", {r.box.x1, r.box.y1, r.box.x2, r.box.y2}}, {"conf", r.confidence}});
    }
    frames.push_back({{"t", f.t}, {"regions", regions}, {"frame_feat", f.frame_feat}});
  }
  row["frames"] = frames;
  if (s.is_pretrain()) {
    row["description"] = s.description;
  } else {
    row["question"] = s.question;
    row["candidates"] = s.candidates;
    row["answer"] = s.answer;
  }
  return row.dump();
}

namespace {

const json& field(const json& obj, const char* name, const std::string& where) {
  if (!obj.is_object()) throw Error(where + ": expected an object");
  auto it = obj.find(name);
  if (it == obj.end()) throw Error(where + ": missing field '" + name + "'");
  return *it;
}

std::vector<double> numbers(const json& v, const std::string& where) {
  if (!v.is_array()) throw Error(where + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) throw Error(where + ": expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::string text(const json& v, const std::string& where) {
  if (!v.is_string()) throw Error(where + ": expected a string");
  return v.get<std::string>();
}

}  // namespace

Sample sample_from_json(const std::string& line_text, std::size_t line) {
  const std::string at = "line " + std::to_string(line);
  json row;
  try {
    row = json::parse(line_text);
  } catch (const json::parse_error& e) {
    throw Error(at + ": malformed JSON (" + e.what() + ")");
  }
  Sample s;
  s.id = text(field(row, "id", at), at + ": field 'id'");
  const json& frames = field(row, "frames", at);
  if (!frames.is_array() || frames.empty()) throw Error(at + ": field 'frames': expected a non-empty array");
  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const std::string fw = at + ": field 'frames[" + std::to_string(fi) + "]";
    const json& fj = frames[fi];
    FrameRecord f;
    const json& t = field(fj, "t", fw + "'");
    if (!t.is_number_integer()) throw Error(fw + ".t': expected an integer");
    f.t = t.get<int>();
    f.frame_feat = numbers(field(fj, "frame_feat", fw + "'"), fw + ".frame_feat'");
    const json& regions = field(fj, "regions", fw + "'");
    if (!regions.is_array() || regions.empty()) throw Error(fw + ".regions': expected a non-empty array");
    for (std::size_t ri = 0; ri < regions.size(); ++ri) {
      const std::string rw = fw + ".regions[" + std::to_string(ri) + "]";
      Region r;
      r.feature = numbers(field(regions[ri], "feat", rw + "'"), rw + ".feat'");
      auto b = numbers(field(regions[ri], "box", rw + "'"), rw + ".box'");
      if (b.size() != 4) throw Error(rw + ".box': expected 4 numbers");
      r.box = {b[0], b[1], b[2], b[3]};
      try {
        r.box.validate();
      } catch (const Error& e) {
        throw Error(rw + ".box': " + e.what());
      }
      const json& conf = field(regions[ri], "conf", rw + "'");
      if (!conf.is_number()) throw Error(rw + ".conf': expected a number");
      r.confidence = conf.get<double>();
      f.regions.push_back(std::move(r));
    }
    s.frames.push_back(std::move(f));
  }
  if (row.contains("description")) {
    s.description = text(row["description"], at + ": field 'description'");
    if (s.description.empty()) throw Error(at + ": field 'description': must not be empty");
    return s;
  }
  s.question = text(field(row, "question", at), at + ": field 'question'");
  const json& cands = field(row, "candidates", at);
  if (!cands.is_array() || cands.size() < 2) throw Error(at + ": field 'candidates': expected at least 2 strings");
  for (const auto& c : cands) s.candidates.push_back(text(c, at + ": field 'candidates'"));
  const json& ans = field(row, "answer", at);
  if (!ans.is_number_integer()) throw Error(at + ": field 'answer': expected an integer");
  s.answer = ans.get<int>();
  if (s.answer < 0 || std::size_t(s.answer) >= s.candidates.size())
    throw Error(at + ": field 'answer': index " + std::to_string(s.answer) + " out of range");
  return s;
}

std::vector<Sample> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset '" + path + "'");
  std::vector<Sample> out;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(sample_from_json(line, no));
    } catch (const Error& e) {
      throw Error(path + ": " + e.what());
    }
  }
  return out;
}

void save_dataset(const std::string& path, const std::vector<Sample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset '" + path + "'");
  for (const auto& s : samples) out << sample_to_json(s) << '\n';
  if (!out) throw Error("failed writing dataset '" + path + "'");
}

std::vector<std::size_t> shuffled_order(std::size_t size, Rng& rng) {
  std::vector<std::size_t> order(size);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  return order;
}

VideoInput to_video_input(const Sample& s, const GraphConfig& cfg) {
  std::vector<FrameDetections> frames;
  std::vector<std::vector<double>> features;
  for (const auto& f : s.frames) {
    frames.push_back({f.t, f.regions, false});
    features.push_back(f.frame_feat);
  }
  try {
    return prepare_video(frames, features, cfg);
  } catch (const Error& e) {
    throw Error("sample '" + s.id + "': " + e.what());
  }
}

std::vector<std::string> families(const std::vector<Sample>& samples) {
  std::set<std::string> names;
  for (const auto& s : samples) names.insert(s.family());
  return {names.begin(), names.end()};
}

std::vector<std::string> corpus_texts(const std::vector<Sample>& samples) {
  std::vector<std::string> out;
  for (const auto& s : samples) {
    if (s.is_pretrain()) {
      out.push_back(s.description);
      continue;
    }
    out.push_back(s.question);
    out.insert(out.end(), s.candidates.begin(), s.candidates.end());
  }
  return out;
}

}  // namespace vgt
