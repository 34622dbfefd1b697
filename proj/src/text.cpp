// SPDX-License-Identifier: Apache-2.0
#include "vgt/text.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "vgt/error.hpp"

namespace vgt {

Vocab::Vocab() {
  for (const char* w : {"[PAD]", "[MASK]", "[UNK]", "[CLS]", "[SEP]"}) add(w);
}

Vocab Vocab::build(const std::vector<std::string>& texts) {
  std::set<std::string> words;
  for (const auto& t : texts)
    for (auto& w : split_words(t)) words.insert(std::move(w));
  Vocab v;
  for (const auto& w : words) v.add(w);
  return v;
}

int Vocab::add(const std::string& word) {
  check(!word.empty(), "Vocab: empty token");
  auto it = ids_.find(word);
  if (it != ids_.end()) return it->second;
  const int id = int(words_.size());
  words_.push_back(word);
  ids_.emplace(word, id);
  return id;
}

int Vocab::id(const std::string& word) const {
  auto it = ids_.find(word);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::word(int id) const {
  check(id >= 0 && std::size_t(id) < words_.size(), "Vocab: id " + std::to_string(id) + " out of range");
  return words_[std::size_t(id)];
}

std::string Vocab::to_text() const {
  std::string out;
  for (const auto& w : words_) out += w + '\n';
  return out;
}

Vocab Vocab::from_text(const std::string& text) {
  std::vector<std::string> lines;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) lines.push_back(line);
  Vocab v;
  check(lines.size() >= std::size_t(kReserved), "Vocab: file lacks the reserved tokens");
  for (std::size_t i = 0; i < std::size_t(kReserved); ++i)
    check(lines[i] == v.words_[i], "Vocab: reserved token " + std::to_string(i) + " is '" + lines[i] + "'");
  for (std::size_t i = kReserved; i < lines.size(); ++i) {
    check(!lines[i].empty() && !v.contains(lines[i]), "Vocab: bad or duplicate token on line " + std::to_string(i + 1));
    v.add(lines[i]);
  }
  return v;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isspace(c) || std::ispunct(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(char(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<int> tokenize(const std::string& text, const Vocab& vocab) {
  std::vector<int> ids{Vocab::kCls};
  for (const auto& w : split_words(text)) ids.push_back(vocab.id(w));
  return ids;
}

TokenizedPair tokenize_pair(const std::string& question, const std::string& answer, const Vocab& vocab) {
  TokenizedPair p;
  p.ids = tokenize(question, vocab);
  p.question.assign(p.ids.size(), 1);
  p.question[0] = 0;
  p.ids.push_back(Vocab::kSep);
  p.question.push_back(0);
  auto words = split_words(answer);
  p.answer.assign(p.ids.size(), 0);
  if (words.empty()) p.answer.back() = 1;
  for (const auto& w : words) {
    p.ids.push_back(vocab.id(w));
    p.answer.push_back(1);
    p.question.push_back(0);
  }
  // A question without words falls back to CLS.
  if (std::none_of(p.question.begin(), p.question.end(), [](std::uint8_t f) { return f != 0; })) p.question[0] = 1;
  return p;
}

TextBatch TextBatch::from(const std::vector<std::vector<int>>& sequences, std::vector<std::string> raw) {
  return from(sequences, 0, std::move(raw));
}

TextBatch TextBatch::from(const std::vector<std::vector<int>>& sequences, std::size_t len,
                          std::vector<std::string> raw) {
  check(!sequences.empty(), "TextBatch: no sequences");
  TextBatch b;
  b.batch = sequences.size();
  b.max_len = len;
  for (const auto& s : sequences) {
    check(!s.empty(), "TextBatch: empty sequence");
    b.max_len = std::max(b.max_len, s.size());
  }
  b.ids.assign(b.batch * b.max_len, Vocab::kPad);
  b.mask.assign(b.batch * b.max_len, 0);
  for (std::size_t i = 0; i < b.batch; ++i) {
    for (std::size_t j = 0; j < sequences[i].size(); ++j) {
      b.ids[i * b.max_len + j] = sequences[i][j];
      b.mask[i * b.max_len + j] = 1;
    }
  }
  b.raw = std::move(raw);
  return b;
}

std::span<const std::uint8_t> TextBatch::row_mask(std::size_t i) const {
  return std::span<const std::uint8_t>(mask).subspan(i * max_len, max_len);
}

void TextEncoderConfig::validate() const {
  check(vocab_size > std::size_t(Vocab::kReserved), "TextEncoderConfig: vocabulary holds only reserved tokens");
  check(dim > 0 && out_dim > 0 && max_len > 0, "TextEncoderConfig: sizes must be positive");
  mhsa().validate();
}

void init_text_params(ParamStore& params, const TextEncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  params.add_uniform("text.embed", {cfg.vocab_size, cfg.dim}, 1, rng);
  params.add("text.pos", sinusoidal_table(cfg.max_len, cfg.dim));
  init_mhsa(params, "text.mhsa", cfg.mhsa(), rng);
  params.add_uniform("text.proj.W", {cfg.dim, cfg.out_dim}, cfg.dim, rng);
  params.add_uniform("text.proj.b", {cfg.out_dim}, cfg.dim, rng);
}

Tensor TextEncoding::sequence(std::size_t i) const {
  check(i < batch, "TextEncoding: sequence index out of range");
  return slice_rows(tokens, i * max_len, max_len);
}

std::vector<std::uint8_t> TextEncoding::sequence_mask(std::size_t i) const {
  check(i < batch, "TextEncoding: sequence index out of range");
  return {mask.begin() + std::ptrdiff_t(i * max_len), mask.begin() + std::ptrdiff_t((i + 1) * max_len)};
}

TextEncoding encode_text(const TextBatch& batch, const ParamStore& params, const TextEncoderConfig& cfg) {
  const Tensor& table = params.get("text.pos");
  check(batch.max_len <= table.rows(), "encode_text: sequence length " + std::to_string(batch.max_len) +
                                           " exceeds the position table (" + std::to_string(table.rows()) + ")");
  const Tensor& embed = params.get("text.embed");
  std::vector<std::size_t> rows(batch.ids.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int id = batch.ids[i];
    check(id >= 0 && std::size_t(id) < embed.rows(), "encode_text: token id " + std::to_string(id) +
                                                         " outside the vocabulary");
    rows[i] = std::size_t(id);
  }
  Tensor x = add_position(gather_rows(embed, rows), table, batch.max_len);
  TextEncoding out;
  out.hidden = mhsa(x, params, "text.mhsa", cfg.mhsa(), batch.max_len, batch.mask);
  out.tokens = add_bias(matmul(out.hidden, params.get("text.proj.W")), params.get("text.proj.b"));
  out.batch = batch.batch;
  out.max_len = batch.max_len;
  out.mask = batch.mask;
  return out;
}

Tensor pool_text(const Tensor& tokens, std::span<const std::uint8_t> include) {
  check(include.size() == tokens.rows(), "pool_text: mask length differs from token count");
  check(std::any_of(include.begin(), include.end(), [](std::uint8_t f) { return f != 0; }),
        "pool_text: nothing to pool (all positions are padding)");
  return masked_mean_rows(tokens, include);
}

}  // namespace vgt
