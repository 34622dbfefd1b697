#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "test_util.hpp"
#include "vgt/error.hpp"
#include "vgt/gradcheck.hpp"
#include "vgt/pretrain.hpp"

using namespace vgt;
using vgt::testing::max_abs_diff;
using vgt::testing::random_matrix;

TEST_CASE("sample_negatives") {
  Rng rng(0);
  auto all = sample_negatives(6, 2, 5, rng);
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<std::size_t>{0, 1, 3, 4, 5});

  Rng a(7), b(7);
  CHECK(sample_negatives(50, 3, 10, a) == sample_negatives(50, 3, 10, b));

  for (int i = 0; i < 100; ++i) {
    auto draw = sample_negatives(20, 4, 8, rng);
    std::set<std::size_t> unique(draw.begin(), draw.end());
    CHECK(unique.size() == 8);
    CHECK(unique.count(4) == 0);
  }

  CHECK_THROWS_AS(sample_negatives(5, 0, 5, rng), Error);
  CHECK_THROWS_AS(sample_negatives(5, 5, 1, rng), Error);
}

TEST_CASE("sample_negatives is uniform over the other indices") {
  // Single draws: each of the n-1 other indices has probability 1/(n-1).
  const std::size_t n = 10, draws = 10000;
  Rng rng(11);
  std::vector<double> hits(n, 0.0);
  for (std::size_t i = 0; i < draws; ++i) hits[sample_negatives(n, 0, 1, rng)[0]] += 1;
  CHECK(hits[0] == 0.0);
  const double p = 1.0 / double(n - 1), sigma = std::sqrt(draws * p * (1 - p));
  for (std::size_t i = 1; i < n; ++i) CHECK(std::abs(hits[i] - draws * p) <= 3 * sigma);
}

TEST_CASE("contrastive_loss") {
  Tensor zero_q = Tensor::zeros({1, 4});
  CHECK(std::abs(contrastive_loss(zero_q, Tensor::zeros({1, 4}), Tensor::zeros({63, 4})).item() - 4.158883083359672) <
        1e-9);

  Tensor q = Tensor::matrix(1, 2, {1, 0});
  CHECK(contrastive_loss(q, Tensor::matrix(1, 2, {50, 0}), Tensor::zeros({5, 2})).item() < 1e-20);
  CHECK(std::abs(contrastive_loss(q, Tensor::matrix(1, 2, {1, 0}), Tensor::zeros({1, 2})).item() -
                 0.3132616875182228) < 1e-12);

  Rng rng(1);
  Tensor fq = random_matrix(1, 4, rng), fp = random_matrix(1, 4, rng), fn = random_matrix(7, 4, rng);
  auto base = contrastive_loss(fq, fp, fn).item();
  CHECK(base > 0.0);
  std::vector<std::size_t> perm{6, 2, 0, 5, 1, 4, 3};
  CHECK(std::abs(contrastive_loss(fq, fp, gather_rows(fn, perm)).item() - base) < 1e-12);

  std::vector<std::size_t> rep(9, 0);
  CHECK(std::abs(contrastive_loss(fq, fp, gather_rows(fp, rep)).item() - std::log(10.0)) < 1e-9);

  // Growing the positive dot lowers the loss.
  CHECK(contrastive_loss(fq, scale(fq, 3.0), fn).item() < contrastive_loss(fq, fq, fn).item());

  CHECK(finite_diff_check([&](const Tensor& x) { return contrastive_loss(x, fp, fn); }, fq) < 1e-6);
  CHECK_THROWS_AS(contrastive_loss(fq, fp, Tensor::zeros({0, 4})), Error);

  for (double mag : {1.0, 1e3, 1e9}) {
    auto pr = contrastive_probabilities(scale(fq, mag), fp, fn);
    CHECK(std::abs(testing::row_sums(pr)[0] - 1.0) < 1e-9);
  }
}

TEST_CASE("corrupt_tokens") {
  std::vector<int> seq{Vocab::kCls, 7, 8, Vocab::kSep, 9, 10, Vocab::kPad};
  Rng rng(0);
  auto none = corrupt_tokens(seq, 20, rng, 0.0);
  CHECK(none.positions.empty());
  CHECK(none.tokens == seq);

  Rng a(3), b(3);
  auto x = corrupt_tokens(seq, 20, a, 0.5);
  auto y = corrupt_tokens(seq, 20, b, 0.5);
  CHECK(x.tokens == y.tokens);
  CHECK(x.positions == y.positions);

  CHECK(corrupt_tokens(std::vector<int>{}, 20, rng).positions.empty());

  auto all = corrupt_tokens(seq, 20, rng, 1.0);
  CHECK(all.positions == std::vector<std::size_t>{1, 2, 4, 5});
  CHECK(all.originals == std::vector<int>{7, 8, 9, 10});
  for (std::size_t i : {0, 3, 6}) CHECK(all.tokens[i] == seq[i]);
}

TEST_CASE("corrupt_tokens frequencies") {
  const std::size_t n = 100000, vocab = 50;
  Rng gen(5);
  std::vector<int> tokens(n);
  for (int& t : tokens) t = Vocab::kReserved + int(gen.below(vocab - Vocab::kReserved));
  Rng rng(6);
  auto t = corrupt_tokens(tokens, vocab, rng);
  const double frac = double(t.positions.size()) / double(n);
  CHECK(std::abs(frac - 0.15) <= 0.005);
  std::size_t masked = 0, kept = 0;
  for (std::size_t k = 0; k < t.positions.size(); ++k) {
    int now = t.tokens[t.positions[k]];
    masked += now == Vocab::kMask;
    kept += now == t.originals[k];
    CHECK((!Vocab::is_reserved(now) || now == Vocab::kMask));
  }
  CHECK(std::abs(double(masked) / double(t.positions.size()) - 0.80) <= 0.01);
  // Unchanged share is 10% plus random draws that hit the original (~10%/45).
  CHECK(std::abs(double(kept) / double(t.positions.size()) - (0.10 + 0.10 / 45)) <= 0.01);
}

TEST_CASE("mlm_loss") {
  ParamStore p;
  Rng rng(0);
  init_mlm_params(p, 4, 12, rng);
  Tensor hidden = random_matrix(5, 4, rng);
  std::vector<std::size_t> rows{1, 3};
  std::vector<int> orig{6, 9};

  CHECK(mlm_loss(hidden, {}, {}, p).item() == 0.0);

  ParamStore zero;
  zero.add_constant("mlm.W", {4, 12}, 0.0);
  zero.add_constant("mlm.b", {12}, 0.0);
  CHECK(std::abs(mlm_loss(hidden, rows, orig, zero).item() - std::log(12.0)) < 1e-9);

  ParamStore sharp;
  sharp.add_constant("mlm.W", {4, 12}, 0.0);
  std::vector<double> b(12, 0.0);
  b[6] = 50.0;
  sharp.add("mlm.b", Tensor({12}, b));
  std::vector<std::size_t> one{2};
  std::vector<int> six{6};
  CHECK(mlm_loss(hidden, one, six, sharp).item() < 1e-20);

  CHECK(finite_diff_check([&](const Tensor& h) { return mlm_loss(h, rows, orig, p); }, hidden) < 1e-6);
  CHECK(finite_diff_check_params([&] { return mlm_loss(hidden, rows, orig, p); }, p) < 1e-6);
}

TEST_CASE("pretrain_loss and pretrain_step") {
  auto cfg = testing::tiny_config();
  Rng rng(1);
  std::vector<std::string> descs{"red cube moved first", "blue ball moved last", "green cube moved",
                                 "yellow ball", "purple cube first"};
  Vocab vocab = Vocab::build(descs);
  Model model = Model::create(cfg, vocab, rng);
  std::vector<VideoInput> videos;
  for (int i = 0; i < 5; ++i) {
    auto raw = testing::random_video(model.cfg.dgt.graph, 3, rng);
    videos.push_back(prepare_video(raw.frames, raw.frame_features, model.cfg.dgt.graph));
  }
  std::vector<PretrainItem> batch;
  for (std::size_t i = 0; i < 2; ++i) {
    PretrainItem item{&videos[i], descs[i], {}};
    Rng neg(i);
    for (std::size_t j : sample_negatives(5, i, 3, neg)) item.negatives.push_back(descs[j]);
    batch.push_back(item);
  }

  PretrainConfig pc;
  pc.negatives = 3;
  SUBCASE("without MLM the total is the contrastive term") {
    pc.mlm_weight = 0.0;
    Rng m(0);
    auto l = pretrain_loss(batch, model, pc, m);
    CHECK(std::abs(l.total.item() - l.contrastive) < 1e-15);
    CHECK(std::isfinite(l.total.item()));
  }

  SUBCASE("MLM contributes and the step updates parameters") {
    pc.mask_prob = 0.5;
    Rng m(0);
    auto l = pretrain_loss(batch, model, pc, m);
    CHECK(l.mlm > 0.0);
    CHECK(std::abs(l.total.item() - (l.contrastive + l.mlm)) < 1e-12);
    Tensor before = model.params.get("mlm.W").detach();
    OptimizerState opt;
    opt.total_steps = 10;
    opt.base_lr = 1e-2;
    Rng m2(0);
    pretrain_step(batch, model, opt, pc, m2);
    CHECK(max_abs_diff(before, model.params.get("mlm.W")) > 0.0);
    CHECK(opt.step == 1);
  }

  SUBCASE("gradient check") {
    pc.mask_prob = 0.5;
    CHECK(finite_diff_check_params(
              [&] {
                Rng m(4);
                return pretrain_loss(batch, model, pc, m).total;
              },
              model.params) < 1e-4);
  }
}
