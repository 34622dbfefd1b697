// SPDX-License-Identifier: Apache-2.0
#include "vgt/attention.hpp"

#include <cmath>

#include "vgt/error.hpp"

namespace vgt {

namespace {

std::size_t groups_for(const Tensor& x, std::size_t segment, const char* who) {
  check(x.rows() > 0, std::string(who) + ": empty sequence");
  if (segment == 0) return 1;
  check(x.rows() % segment == 0, std::string(who) + ": " + std::to_string(x.rows()) +
                                     " rows is not a multiple of the sequence length " + std::to_string(segment));
  return x.rows() / segment;
}

}  // namespace

Tensor attention_weights(const Tensor& q, const Tensor& k, std::size_t segment, PositionMask mask) {
  check(q.shape() == k.shape(), "attention: query/key shapes differ (" + shape_str(q.shape()) + " vs " +
                                    shape_str(k.shape()) + ")");
  const std::size_t groups = groups_for(q, segment, "attention");
  const std::size_t len = q.rows() / groups;
  Tensor logits = scale(batched_matmul_nt(k, q, groups), 1.0 / std::sqrt(double(q.cols())));
  if (mask.empty()) return softmax_rows(logits);
  check(mask.size() == q.rows(), "attention: mask has " + std::to_string(mask.size()) + " entries for " +
                                     std::to_string(q.rows()) + " rows");
  return masked_softmax_rows(logits, mask, len);
}

Tensor self_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t segment, PositionMask mask) {
  check(v.rows() == q.rows(), "attention: value rows differ from query rows");
  Tensor a = attention_weights(q, k, segment, mask);
  return batched_matmul(a, v, q.rows() / (segment == 0 ? q.rows() : segment));
}

void MhsaConfig::validate() const {
  check(dim > 0 && heads > 0, "MHSA: dim and heads must be positive");
  check(dim % heads == 0, "MHSA: model dim " + std::to_string(dim) + " not divisible by " + std::to_string(heads) +
                              " heads");
}

std::string mhsa_layer_prefix(const std::string& prefix, std::size_t layer) {
  return prefix + ".l" + std::to_string(layer);
}

void init_mhsa(ParamStore& params, const std::string& prefix, const MhsaConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t d = cfg.dim;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string p = mhsa_layer_prefix(prefix, l);
    for (const char* m : {".q", ".k", ".v", ".c"}) {
      params.add_uniform(p + m + ".W", {d, d}, d, rng);
      params.add_uniform(p + m + ".b", {d}, d, rng);
    }
    params.add_constant(p + ".ln.g", {d}, 1.0);
    params.add_constant(p + ".ln.b", {d}, 0.0);
  }
}

Tensor mhsa_layer(const Tensor& x, const ParamStore& params, const std::string& p, std::size_t heads,
                  std::size_t segment, PositionMask mask) {
  const std::size_t d = x.cols();
  check(heads > 0 && d % heads == 0,
        "MHSA: model dim " + std::to_string(d) + " not divisible by " + std::to_string(heads) + " heads");
  auto proj = [&](const char* m) {
    return add_bias(matmul(x, params.get(p + m + ".W")), params.get(p + m + ".b"));
  };
  Tensor q = proj(".q"), k = proj(".k"), v = proj(".v");
  const std::size_t dk = d / heads;
  Tensor attended;
  if (heads == 1) {
    attended = self_attention(q, k, v, segment, mask);
  } else {
    std::vector<Tensor> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
      outs.push_back(self_attention(slice_cols(q, h * dk, dk), slice_cols(k, h * dk, dk), slice_cols(v, h * dk, dk),
                                    segment, mask));
    }
    attended = concat_cols(outs);
  }
  Tensor out = add_bias(matmul(attended, params.get(p + ".c.W")), params.get(p + ".c.b"));
  return layer_norm(add(out, x), params.get(p + ".ln.g"), params.get(p + ".ln.b"));
}

Tensor mhsa(const Tensor& x, const ParamStore& params, const std::string& prefix, const MhsaConfig& cfg,
            std::size_t segment, PositionMask mask) {
  cfg.validate();
  check(x.cols() == cfg.dim, "MHSA: input width " + std::to_string(x.cols()) + " != " + std::to_string(cfg.dim));
  Tensor h = x;
  for (std::size_t l = 0; l < cfg.layers; ++l) h = mhsa_layer(h, params, mhsa_layer_prefix(prefix, l), cfg.heads, segment, mask);
  return h;
}

Tensor sinusoidal_table(std::size_t length, std::size_t dim) {
  std::vector<double> v(length * dim);
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t c = 0; c < dim; ++c) {
      const double freq = std::pow(10000.0, double(c - c % 2) / double(dim));
      v[pos * dim + c] = (c % 2 == 0) ? std::sin(double(pos) / freq) : std::cos(double(pos) / freq);
    }
  }
  return Tensor::matrix(length, dim, std::move(v));
}

Tensor add_position(const Tensor& x, const Tensor& table, std::size_t segment) {
  const std::size_t len = segment == 0 ? x.rows() : segment;
  check(len > 0 && x.rows() % len == 0, "add_position: rows not a multiple of the sequence length");
  check(len <= table.rows(), "add_position: sequence length " + std::to_string(len) + " exceeds table length " +
                                 std::to_string(table.rows()));
  check(table.cols() == x.cols(), "add_position: table width differs from input width");
  std::vector<std::size_t> idx(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) idx[r] = r % len;
  return add(x, gather_rows(table, idx));
}

}  // namespace vgt
