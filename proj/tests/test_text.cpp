#include <cmath>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "vgt/error.hpp"
#include "vgt/gradcheck.hpp"
#include "vgt/text.hpp"

using namespace vgt;
using vgt::testing::max_abs_diff;
using vgt::testing::random_matrix;

namespace {

Vocab small_vocab() { return Vocab::build({"what happens next", "the red ball moved", "a cube"}); }

TextEncoderConfig small_config(const Vocab& v) {
  TextEncoderConfig cfg;
  cfg.vocab_size = v.size();
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.layers = 2;
  cfg.max_len = 12;
  cfg.out_dim = 6;
  return cfg;
}

ParamStore make_params(const TextEncoderConfig& cfg, std::uint64_t seed) {
  ParamStore p;
  Rng rng(seed);
  init_text_params(p, cfg, rng);
  return p;
}

}  // namespace

TEST_CASE("vocab reserves the special ids") {
  Vocab v = small_vocab();
  CHECK(v.word(Vocab::kPad) == "[PAD]");
  CHECK(v.word(Vocab::kMask) == "[MASK]");
  CHECK(v.word(Vocab::kUnk) == "[UNK]");
  CHECK(v.word(Vocab::kCls) == "[CLS]");
  CHECK(v.word(Vocab::kSep) == "[SEP]");
  CHECK(v.size() == 5 + 9);
  CHECK(v.id("zebra") == Vocab::kUnk);
  CHECK(v.add("red") == v.id("red"));
  CHECK_THROWS_AS(v.word(100), Error);
}

TEST_CASE("vocab text round trip") {
  Vocab v = small_vocab();
  Vocab back = Vocab::from_text(v.to_text());
  CHECK(back == v);
  CHECK(back.id("moved") == v.id("moved"));
  CHECK_THROWS_AS(Vocab::from_text("[PAD]\n[MASK]\n"), Error);
  CHECK_THROWS_AS(Vocab::from_text("[PAD]\n[MASK]\n[UNK]\n[CLS]\n[SEP]\nred\nred\n"), Error);
  CHECK_THROWS_AS(Vocab::from_text("[PAD]\n[UNK]\n[MASK]\n[CLS]\n[SEP]\n"), Error);
}

TEST_CASE("tokenize") {
  Vocab v = small_vocab();
  CHECK(tokenize("what happens", v) == std::vector<int>{Vocab::kCls, v.id("what"), v.id("happens")});
  CHECK(tokenize("What happens, ZEBRA?", v) ==
        std::vector<int>{Vocab::kCls, v.id("what"), v.id("happens"), Vocab::kUnk});
  CHECK(tokenize("the red ball", v) == tokenize("the red ball", v));
  CHECK(tokenize("", v) == std::vector<int>{Vocab::kCls});
  CHECK(split_words("A,b!c  d") == std::vector<std::string>{"a", "b", "c", "d"});
}

TEST_CASE("tokenize_pair marks the question and answer spans") {
  Vocab v = small_vocab();
  auto p = tokenize_pair("what happens", "red ball", v);
  CHECK(p.ids == std::vector<int>{Vocab::kCls, v.id("what"), v.id("happens"), Vocab::kSep, v.id("red"), v.id("ball")});
  CHECK(p.answer == std::vector<std::uint8_t>{0, 0, 0, 0, 1, 1});
  CHECK(p.question == std::vector<std::uint8_t>{0, 1, 1, 0, 0, 0});
  auto empty = tokenize_pair("", "", v);
  CHECK(empty.ids == std::vector<int>{Vocab::kCls, Vocab::kSep});
  CHECK(empty.answer == std::vector<std::uint8_t>{0, 1});
  CHECK(empty.question == std::vector<std::uint8_t>{1, 0});
}

TEST_CASE("TextBatch pads to the longest sequence") {
  auto b = TextBatch::from({{3, 7}, {3, 8, 9, 10}}, {"a", "b"});
  CHECK(b.max_len == 4);
  CHECK(b.ids == std::vector<int>{3, 7, 0, 0, 3, 8, 9, 10});
  CHECK(b.mask == std::vector<std::uint8_t>{1, 1, 0, 0, 1, 1, 1, 1});
  CHECK(b.raw.size() == 2);
  CHECK(TextBatch::from({{3}}, 5, {}).max_len == 5);
  CHECK_THROWS_AS(TextBatch::from({{3}, {}}), Error);
}

TEST_CASE("encode_text") {
  Vocab v = small_vocab();
  auto cfg = small_config(v);
  auto p = make_params(cfg, 1);

  SUBCASE("output shape") {
    auto b = TextBatch::from({tokenize("what happens next", v), tokenize("a cube", v)});
    auto enc = encode_text(b, p, cfg);
    CHECK(enc.tokens.shape() == Shape{8, 6});
    CHECK(enc.hidden.shape() == Shape{8, 8});
    CHECK(enc.sequence(1).shape() == Shape{4, 6});
    CHECK(enc.sequence_mask(1) == std::vector<std::uint8_t>{1, 1, 1, 0});
  }

  SUBCASE("single token is a projection of its contextual embedding") {
    auto enc = encode_text(TextBatch::from({{Vocab::kCls}}), p, cfg);
    auto expect = add_bias(matmul(enc.hidden, p.get("text.proj.W")), p.get("text.proj.b"));
    CHECK(max_abs_diff(enc.tokens, expect) == 0.0);
  }

  SUBCASE("padding invariance") {
    for (std::uint64_t seed : {0, 1, 2}) {
      auto ps = make_params(cfg, seed);
      std::vector<std::vector<int>> seqs{tokenize("the red ball moved", v), tokenize("what happens", v)};
      auto short_enc = encode_text(TextBatch::from(seqs), ps, cfg);
      auto long_enc = encode_text(TextBatch::from(seqs, 11, {}), ps, cfg);
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t t = 0; t < seqs[i].size(); ++t)
          for (std::size_t c = 0; c < 6; ++c)
            CHECK(std::abs(short_enc.tokens.at(i * 5 + t, c) - long_enc.tokens.at(i * 11 + t, c)) <= 1e-9);
    }
  }

  SUBCASE("too long for the position table") {
    CHECK_THROWS_AS(encode_text(TextBatch::from({std::vector<int>(13, 5)}), p, cfg), Error);
  }

  SUBCASE("gradient check through the full stack") {
    auto b = TextBatch::from({tokenize("the red ball", v), tokenize("a cube", v)});
    CHECK(finite_diff_check_params(
              [&] {
                auto enc = encode_text(b, p, cfg);
                return add(testing::project(pool_text(enc.tokens, b.mask)), testing::project(enc.tokens, 7));
              },
              p) < 1e-4);
  }
}

TEST_CASE("pool_text") {
  Tensor one = Tensor::matrix(2, 2, {1, 2, 9, 9});
  std::vector<std::uint8_t> first{1, 0};
  CHECK(max_abs_diff(pool_text(one, first), Tensor::matrix(1, 2, {1, 2})) == 0.0);
  Tensor two = Tensor::matrix(2, 2, {1, 0, 3, 2});
  std::vector<std::uint8_t> both{1, 1};
  CHECK(max_abs_diff(pool_text(two, both), Tensor::matrix(1, 2, {2, 1})) == 0.0);
  Tensor same = Tensor::matrix(2, 2, {4, 5, 4, 5});
  CHECK(max_abs_diff(pool_text(same, both), Tensor::matrix(1, 2, {4, 5})) == 0.0);
  std::vector<std::uint8_t> none{0, 0};
  CHECK_THROWS_AS(pool_text(two, none), Error);
}

TEST_CASE("pooled text is order-invariant once positions are zeroed") {
  Vocab v = small_vocab();
  auto cfg = small_config(v);
  auto p = make_params(cfg, 4);
  p.replace("text.pos", Tensor::zeros(p.get("text.pos").shape()));
  auto a = TextBatch::from({tokenize("the red ball moved", v)});
  auto b = TextBatch::from({{Vocab::kCls, v.id("moved"), v.id("ball"), v.id("the"), v.id("red")}});
  auto pa = pool_text(encode_text(a, p, cfg).tokens, a.mask);
  auto pb = pool_text(encode_text(b, p, cfg).tokens, b.mask);
  CHECK(max_abs_diff(pa, pb) < 1e-12);
}
