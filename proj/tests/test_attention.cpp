#include <cmath>
#include <vector>

#include "doctest.h"
#include "mhsa_oracle.hpp"
#include "test_util.hpp"
#include "vgt/attention.hpp"
#include "vgt/error.hpp"
#include "vgt/gradcheck.hpp"
#include "vgt/optim.hpp"

using namespace vgt;
using vgt::testing::max_abs_diff;
using vgt::testing::random_matrix;
using vgt::oracle::Mat;
using vgt::oracle::scripted_layer;
using vgt::oracle::to_mat;

namespace {

ParamStore random_mhsa(const MhsaConfig& cfg, std::uint64_t seed) {
  ParamStore p;
  Rng rng(seed);
  init_mhsa(p, "m", cfg, rng);
  // Non-trivial LN parameters so the check covers them too.
  for (const auto& [name, t] : p.tensors())
    if (name.find(".ln.") != std::string::npos)
      for (double& x : p.get(name).mutable_values()) x += 0.3 * rng.normal();
  return p;
}

}  // namespace

TEST_CASE("self_attention examples") {
  Rng rng(0);
  Tensor v1 = random_matrix(1, 4, rng);
  CHECK(max_abs_diff(self_attention(random_matrix(1, 4, rng), random_matrix(1, 4, rng), v1), v1) == 0.0);

  // Equal logits: zero keys.
  Tensor v = random_matrix(3, 2, rng);
  auto out = self_attention(random_matrix(3, 2, rng), Tensor::zeros({3, 2}), v);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < 2; ++c) CHECK(std::abs(out.at(i, c) - (v.at(0, c) + v.at(1, c) + v.at(2, c)) / 3) < 1e-12);

  // d_k = 1: logits K Q^T = [[0, ln3], [0, 0]] with k = (1, 0), q = (0, ln3).
  Tensor q = Tensor::matrix(2, 1, {0.0, std::log(3.0)});
  Tensor k = Tensor::matrix(2, 1, {1.0, 0.0});
  auto w = attention_weights(q, k);
  CHECK(std::abs(w.at(0, 0) - 0.25) < 1e-12);
  CHECK(std::abs(w.at(0, 1) - 0.75) < 1e-12);
  CHECK(std::abs(w.at(1, 0) - 0.5) < 1e-12);
  CHECK(std::abs(w.at(1, 1) - 0.5) < 1e-12);
  Tensor vv = Tensor::matrix(2, 2, {1, 2, 3, 4});
  auto o = self_attention(q, k, vv);
  CHECK(std::abs(o.at(0, 0) - (0.25 * 1 + 0.75 * 3)) < 1e-12);
  CHECK(std::abs(o.at(1, 1) - 3.0) < 1e-12);

  CHECK_THROWS_AS(self_attention(Tensor::zeros({0, 2}), Tensor::zeros({0, 2}), Tensor::zeros({0, 2})), Error);
}

TEST_CASE("attention rows are convex weights at any magnitude") {
  for (std::uint64_t seed : {0, 1, 2}) {
    Rng rng(seed);
    for (double mag : {1.0, 1e3, 1e9}) {
      auto w = attention_weights(random_matrix(6, 4, rng, mag), random_matrix(6, 4, rng, mag), 3);
      CHECK(w.shape() == Shape{6, 3});
      for (double s : testing::row_sums(w)) CHECK(std::abs(s - 1.0) < 1e-9);
      for (double x : w.values()) CHECK(x >= 0.0);
    }
  }
}

TEST_CASE("self_attention is permutation equivariant") {
  for (std::uint64_t seed : {0, 1, 2}) {
    Rng rng(seed);
    Tensor q = random_matrix(5, 3, rng), k = random_matrix(5, 3, rng), v = random_matrix(5, 3, rng);
    std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    auto a = gather_rows(self_attention(q, k, v), perm);
    auto b = self_attention(gather_rows(q, perm), gather_rows(k, perm), gather_rows(v, perm));
    CHECK(max_abs_diff(a, b) < 1e-9);
  }
}

TEST_CASE("batched sequences are independent") {
  Rng rng(4);
  Tensor q = random_matrix(6, 2, rng), k = random_matrix(6, 2, rng), v = random_matrix(6, 2, rng);
  auto batched = self_attention(q, k, v, 3);
  auto second = self_attention(slice_rows(q, 3, 3), slice_rows(k, 3, 3), slice_rows(v, 3, 3));
  CHECK(max_abs_diff(slice_rows(batched, 3, 3), second) < 1e-15);
  CHECK_THROWS_AS(self_attention(q, k, v, 4), Error);
}

TEST_CASE("masked positions do not influence real positions") {
  Rng rng(6);
  Tensor q = random_matrix(4, 2, rng), k = random_matrix(4, 2, rng), v = random_matrix(4, 2, rng);
  std::vector<std::uint8_t> mask{1, 1, 0, 0};
  auto full = self_attention(q, k, v, 0, mask);
  auto cut = self_attention(slice_rows(q, 0, 2), slice_rows(k, 0, 2), slice_rows(v, 0, 2));
  CHECK(max_abs_diff(slice_rows(full, 0, 2), cut) < 1e-12);
}

TEST_CASE("mhsa_layer") {
  SUBCASE("zero weights reduce to LN of the input") {
    MhsaConfig cfg{8, 2, 1};
    ParamStore p;
    Rng rng(1);
    init_mhsa(p, "m", cfg, rng);
    for (const auto& [name, t] : p.tensors())
      if (name.find(".ln.") == std::string::npos) p.replace(name, Tensor::zeros(t.shape()));
    Tensor x = random_matrix(3, 8, rng);
    auto out = mhsa_layer(x, p, "m.l0", 2);
    auto ln = layer_norm(x, p.get("m.l0.ln.g"), p.get("m.l0.ln.b"));
    CHECK(max_abs_diff(out, ln) < 1e-15);
  }

  SUBCASE("shape contract") {
    MhsaConfig cfg{64, 8, 1};
    ParamStore p;
    Rng rng(2);
    init_mhsa(p, "m", cfg, rng);
    CHECK(mhsa(random_matrix(7, 64, rng), p, "m", cfg).shape() == Shape{7, 64});
  }

  SUBCASE("matches a scripted recomputation") {
    for (std::uint64_t seed : {0, 1, 2}) {
      MhsaConfig cfg{8, 2, 1};
      ParamStore p = random_mhsa(cfg, seed);
      Rng rng(seed + 10);
      Tensor x = random_matrix(3, 8, rng);
      Mat expect = scripted_layer(to_mat(x), p, "m.l0", 2);
      auto got = mhsa_layer(x, p, "m.l0", 2);
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 8; ++j) CHECK(std::abs(got.at(i, j) - expect[i][j]) < 1e-10);
    }
  }

  SUBCASE("layers are untied and applied in order") {
    MhsaConfig cfg{4, 2, 2};
    ParamStore p = random_mhsa(cfg, 5);
    CHECK(p.contains("m.l1.q.W"));
    Rng rng(3);
    Tensor x = random_matrix(4, 4, rng);
    CHECK(max_abs_diff(mhsa(x, p, "m", cfg), mhsa_layer(mhsa_layer(x, p, "m.l0", 2), p, "m.l1", 2)) == 0.0);
  }

  SUBCASE("indivisible head count") {
    MhsaConfig bad{10, 4, 1};
    CHECK_THROWS_AS(bad.validate(), Error);
    ParamStore p;
    Rng rng(0);
    CHECK_THROWS_AS(init_mhsa(p, "m", bad, rng), Error);
  }

  SUBCASE("gradient check against input and every weight") {
    for (std::uint64_t seed : {0, 1, 2}) {
      MhsaConfig cfg{6, 3, 2};
      ParamStore p = random_mhsa(cfg, seed);
      Rng rng(seed + 20);
      Tensor x = random_matrix(6, 6, rng);
      std::vector<std::uint8_t> mask{1, 1, 0, 1, 1, 1};
      CHECK(finite_diff_check([&](const Tensor& in) { return testing::project(mhsa(in, p, "m", cfg, 3, mask)); }, x) <
            1e-4);
      CHECK(finite_diff_check_params([&] { return testing::project(mhsa(x, p, "m", cfg, 3, mask)); }, p) < 1e-4);
    }
  }
}

TEST_CASE("position table") {
  auto t = sinusoidal_table(5, 6);
  for (std::size_t c = 0; c < 6; ++c) CHECK(t.at(0, c) == (c % 2 == 0 ? 0.0 : 1.0));
  CHECK(std::abs(t.at(3, 0) - std::sin(3.0)) < 1e-15);
  CHECK(std::abs(t.at(3, 3) - std::cos(3.0 / std::pow(10000.0, 2.0 / 6.0))) < 1e-15);

  Rng rng(0);
  Tensor x = random_matrix(4, 6, rng);
  CHECK(max_abs_diff(add_position(x, Tensor::zeros({5, 6})), x) == 0.0);
  auto shifted = add_position(x, t, 2);
  CHECK(shifted.at(2, 1) == x.at(2, 1) + 1.0);
  CHECK_THROWS_AS(add_position(random_matrix(6, 6, rng), t), Error);

  // Learnable: one optimizer step on a loss through the table changes it.
  ParamStore p;
  p.add("pe", t.detach());
  auto grads = backward(testing::project(add_position(x, p.get("pe"))), p);
  double norm = 0;
  for (double g : grads["pe"]) norm += g * g;
  CHECK(norm > 0.0);
  OptimizerState opt;
  opt.total_steps = 10;
  adam_step(p, grads, opt);
  CHECK(max_abs_diff(p.get("pe"), t) > 0.0);
  CHECK(finite_diff_check([&](const Tensor& tab) { return testing::project(add_position(x, tab, 2)); }, t) < 1e-6);
}
