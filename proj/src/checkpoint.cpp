// SPDX-License-Identifier: Apache-2.0
#include "vgt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vgt/error.hpp"

namespace vgt {

static_assert(std::endian::native == std::endian::little, "checkpoints assume a little-endian host");

namespace {

class Writer {
 public:
  template <typename T>
  void put(T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out_.append(b, sizeof(T));
  }
  void put_bytes(const std::string& s) {
    put<std::uint64_t>(s.size());
    out_ += s;
  }
  void put_doubles(std::span<const double> v) {
    put<std::uint64_t>(v.size());
    out_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_bytes() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> get_doubles() {
    const auto n = get<std::uint64_t>();
    check(n <= (in_.size() - pos_) / sizeof(double), "checkpoint: truncated file");
    std::vector<double> v(n);
    std::memcpy(v.data(), in_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::uint64_t n) const { check(n <= in_.size() - pos_, "checkpoint: truncated file"); }
  const std::string& in_;
  std::size_t pos_ = 0;
};

std::string tensor_payload(const Tensor& t, bool frozen) {
  Writer w;
  w.put<std::uint8_t>(frozen ? 1 : 0);
  w.put<std::uint32_t>(std::uint32_t(t.shape().size()));
  for (auto d : t.shape()) w.put<std::uint64_t>(d);
  w.put_doubles(t.values());
  return w.take();
}

std::string doubles_payload(std::span<const double> v) {
  Writer w;
  w.put_doubles(v);
  return w.take();
}

bool starts_with(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }

}  // namespace

ModelConfig model_config(const RunConfig& cfg, const Vocab& vocab) {
  ModelConfig m = cfg.model();
  m.text.vocab_size = vocab.size();
  m.text.out_dim = m.hidden();
  return m;
}

Model Checkpoint::model() const {
  Model m{model_config(config, vocab), vocab, params.clone()};
  m.cfg.validate();
  // A throwaway init tells which names and shapes the config implies.
  Rng rng(0);
  Model ref = Model::create(m.cfg, vocab, rng);
  for (const auto& [name, t] : ref.params.tensors()) {
    check(params.contains(name), "checkpoint does not match config: missing parameter '" + name + "'");
    check(params.get(name).shape() == t.shape(), "checkpoint does not match config: '" + name + "' has shape " +
                                                     shape_str(params.get(name).shape()) + ", config implies " +
                                                     shape_str(t.shape()));
  }
  for (const auto& [name, _] : params.tensors()) {
    check(ref.params.contains(name), "checkpoint does not match config: unexpected parameter '" + name + "'");
  }
  return m;
}

std::string serialize_checkpoint(const Checkpoint& ck) {
  std::vector<std::pair<std::string, std::string>> records;
  records.emplace_back("config", ck.config.to_text());
  records.emplace_back("vocab", ck.vocab.to_text());
  if (!ck.answers.empty()) {
    Writer w;
    w.put<std::uint64_t>(ck.answers.size());
    for (const auto& a : ck.answers) w.put_bytes(a);
    records.emplace_back("answers", w.take());
  }
  for (const auto& [name, t] : ck.params.tensors())
    records.emplace_back("param/" + name, tensor_payload(t, ck.params.is_frozen(name)));
  {
    Writer w;
    w.put<std::uint64_t>(ck.optimizer.step);
    w.put<double>(ck.optimizer.base_lr);
    w.put<std::uint64_t>(ck.optimizer.total_steps);
    w.put<double>(ck.optimizer.hyper.beta1);
    w.put<double>(ck.optimizer.hyper.beta2);
    w.put<double>(ck.optimizer.hyper.eps);
    records.emplace_back("adam", w.take());
  }
  for (const auto& [name, m] : ck.optimizer.first_moment) records.emplace_back("adam.m/" + name, doubles_payload(m));
  for (const auto& [name, v] : ck.optimizer.second_moment) records.emplace_back("adam.v/" + name, doubles_payload(v));
  for (const auto& [name, state] : ck.rng) records.emplace_back("rng/" + name, state);
  {
    Writer w;
    w.put<std::uint64_t>(ck.epoch);
    records.emplace_back("epoch", w.take());
  }
  for (const auto& [name, x] : ck.scalars) {
    Writer w;
    w.put<double>(x);
    records.emplace_back("scalar/" + name, w.take());
  }
  Writer out;
  for (char c : std::string("VGTK")) out.put<char>(c);
  out.put<std::uint32_t>(kCheckpointVersion);
  out.put<std::uint32_t>(std::uint32_t(records.size()));
  for (const auto& [name, payload] : records) {
    out.put_bytes(name);
    out.put_bytes(payload);
  }
  return out.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  std::string magic(4, '\0');
  for (auto& c : magic) c = in.get<char>();
  check(magic == "VGTK", "checkpoint: bad magic bytes (not a checkpoint file)");
  const auto version = in.get<std::uint32_t>();
  check(version == kCheckpointVersion, "checkpoint: format version " + std::to_string(version) +
                                           " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  const auto count = in.get<std::uint32_t>();
  Checkpoint ck;
  bool have_config = false, have_vocab = false, have_epoch = false;
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::string name = in.get_bytes();
    const std::string payload = in.get_bytes();
    Reader p(payload);
    if (name == "config") {
      ck.config = RunConfig::parse(payload);
      have_config = true;
    } else if (name == "vocab") {
      ck.vocab = Vocab::from_text(payload);
      have_vocab = true;
    } else if (name == "answers") {
      const auto n = p.get<std::uint64_t>();
      check(n <= payload.size(), "checkpoint: corrupted answer list");
      ck.answers.resize(n);
      for (auto& a : ck.answers) a = p.get_bytes();
    } else if (starts_with(name, "param/")) {
      const std::string pname = name.substr(6);
      const bool frozen = p.get<std::uint8_t>() != 0;
      const auto rank = p.get<std::uint32_t>();
      check(rank <= 8, "checkpoint: corrupted shape for '" + pname + "'");
      Shape shape(rank);
      for (auto& d : shape) d = p.get<std::uint64_t>();
      auto values = p.get_doubles();
      check(values.size() == shape_size(shape), "checkpoint: parameter '" + pname + "' size does not match its shape");
      ck.params.add(pname, Tensor(shape, std::move(values)));
      if (frozen) ck.params.freeze(pname);
    } else if (name == "adam") {
      ck.optimizer.step = p.get<std::uint64_t>();
      ck.optimizer.base_lr = p.get<double>();
      ck.optimizer.total_steps = p.get<std::uint64_t>();
      ck.optimizer.hyper.beta1 = p.get<double>();
      ck.optimizer.hyper.beta2 = p.get<double>();
      ck.optimizer.hyper.eps = p.get<double>();
    } else if (starts_with(name, "adam.m/")) {
      ck.optimizer.first_moment[name.substr(7)] = p.get_doubles();
    } else if (starts_with(name, "adam.v/")) {
      ck.optimizer.second_moment[name.substr(7)] = p.get_doubles();
    } else if (starts_with(name, "rng/")) {
      ck.rng[name.substr(4)] = payload;
      continue;
    } else if (name == "epoch") {
      ck.epoch = p.get<std::uint64_t>();
      have_epoch = true;
    } else if (starts_with(name, "scalar/")) {
      ck.scalars[name.substr(7)] = p.get<double>();
    } else {
      throw Error("checkpoint: unknown record '" + name + "'");
    }
    if (name != "config" && name != "vocab") check(p.done(), "checkpoint: record '" + name + "' has trailing bytes");
  }
  check(in.done(), "checkpoint: trailing bytes after the last record");
  check(have_config && have_vocab && have_epoch, "checkpoint: missing config, vocab or epoch record");
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  const std::string bytes = serialize_checkpoint(ck);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return deserialize_checkpoint(ss.str());
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

}  // namespace vgt
