// SPDX-License-Identifier: Apache-2.0
//
// Word-level tokenizer and a small trainable transformer text encoder whose
// token outputs are projected to the visual width.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vgt/attention.hpp"
#include "vgt/param_store.hpp"
#include "vgt/rng.hpp"
#include "vgt/tensor.hpp"

namespace vgt {

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kMask = 1;
  static constexpr int kUnk = 2;
  static constexpr int kCls = 3;
  static constexpr int kSep = 4;
  static constexpr int kReserved = 5;

  Vocab();

  /// Sorted unique words of the texts (min frequency 1), after the reserved ids.
  static Vocab build(const std::vector<std::string>& texts);

  int add(const std::string& word);
  int id(const std::string& word) const;  // kUnk when absent
  const std::string& word(int id) const;
  bool contains(const std::string& word) const { return ids_.count(word) != 0; }
  std::size_t size() const { return words_.size(); }
  static bool is_reserved(int id) { return id >= 0 && id < kReserved; }

  /// One token per line, in id order.
  std::string to_text() const;
  static Vocab from_text(const std::string& text);

  bool operator==(const Vocab& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> ids_;
};

/// Lowercased words; whitespace and ASCII punctuation separate words.
std::vector<std::string> split_words(const std::string& text);

/// [CLS, w1, w2, ...]; unknown words map to UNK.
std::vector<int> tokenize(const std::string& text, const Vocab& vocab);

struct TokenizedPair {
  std::vector<int> ids;                 // [CLS, q..., SEP, a...]
  std::vector<std::uint8_t> answer;     // 1 on answer tokens
  std::vector<std::uint8_t> question;   // 1 on question tokens
};

/// Question and candidate joined by SEP. An empty answer keeps the SEP token
/// as its span so that pooling stays defined.
TokenizedPair tokenize_pair(const std::string& question, const std::string& answer, const Vocab& vocab);

struct TextBatch {
  std::size_t batch = 0;
  std::size_t max_len = 0;
  std::vector<int> ids;              // batch x max_len, PAD padded
  std::vector<std::uint8_t> mask;    // batch x max_len, 1 = real token, 0 = PAD
  std::vector<std::string> raw;

  static TextBatch from(const std::vector<std::vector<int>>& sequences, std::vector<std::string> raw = {});
  /// Same sequences padded to at least `len` positions.
  static TextBatch from(const std::vector<std::vector<int>>& sequences, std::size_t len, std::vector<std::string> raw);
  std::span<const std::uint8_t> row_mask(std::size_t i) const;
};

struct TextEncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t dim = 64;      // d_text
  std::size_t heads = 4;
  std::size_t layers = 2;    // H_text
  std::size_t max_len = 32;
  std::size_t out_dim = 64;  // d

  MhsaConfig mhsa() const { return {dim, heads, layers}; }
  void validate() const;
};

/// text.embed (V x d_text), text.pos (max_len x d_text), text.mhsa.*,
/// text.proj.{W,b} (d_text -> d).
void init_text_params(ParamStore& params, const TextEncoderConfig& cfg, Rng& rng);

struct TextEncoding {
  Tensor hidden;  // (batch * max_len) x d_text, contextual outputs
  Tensor tokens;  // (batch * max_len) x d, projected
  std::size_t batch = 0;
  std::size_t max_len = 0;
  std::vector<std::uint8_t> mask;

  /// Projected rows of sequence i with its mask.
  Tensor sequence(std::size_t i) const;
  std::vector<std::uint8_t> sequence_mask(std::size_t i) const;
};

TextEncoding encode_text(const TextBatch& batch, const ParamStore& params, const TextEncoderConfig& cfg);

/// Mean over the rows whose flag is set; throws when none is.
Tensor pool_text(const Tensor& tokens, std::span<const std::uint8_t> include);

}  // namespace vgt
