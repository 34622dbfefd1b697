// SPDX-License-Identifier: Apache-2.0
//
// Scaled dot-product attention, stacked multi-head self-attention layers with
// a post-norm skip, and trainable sinusoidal position tables.
//
// Sequences may be batched: a matrix of G * L rows is treated as G independent
// sequences of L consecutive rows ("segment" = L; 0 means one sequence).
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vgt/param_store.hpp"
#include "vgt/rng.hpp"
#include "vgt/tensor.hpp"

namespace vgt {

/// Sequence positions to drop from attention, one flag per row of the
/// batched input (1 = real token, 0 = padding). Empty span = no mask.
using PositionMask = std::span<const std::uint8_t>;

/// softmax_rows(K Q^T / sqrt(d_k)) per sequence. Row i belongs to key i and is
/// normalized over the query axis.
Tensor attention_weights(const Tensor& q, const Tensor& k, std::size_t segment = 0, PositionMask mask = {});

/// softmax_rows(K Q^T / sqrt(d_k)) V per sequence.
Tensor self_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t segment = 0,
                      PositionMask mask = {});

struct MhsaConfig {
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::size_t layers = 1;

  std::size_t head_dim() const { return dim / heads; }
  void validate() const;
};

/// Registers `<prefix>.l<i>.{q,k,v,c}.{W,b}` and `<prefix>.l<i>.ln.{g,b}`.
void init_mhsa(ParamStore& params, const std::string& prefix, const MhsaConfig& cfg, Rng& rng);

/// One layer: LN(W_c concat_h(attention_h) + b_c + X).
Tensor mhsa_layer(const Tensor& x, const ParamStore& params, const std::string& layer_prefix, std::size_t heads,
                  std::size_t segment = 0, PositionMask mask = {});

/// cfg.layers untied layers in sequence.
Tensor mhsa(const Tensor& x, const ParamStore& params, const std::string& prefix, const MhsaConfig& cfg,
            std::size_t segment = 0, PositionMask mask = {});

std::string mhsa_layer_prefix(const std::string& prefix, std::size_t layer);

/// length x dim table: even columns sin(pos / 10000^(2i/dim)), odd cos(...).
Tensor sinusoidal_table(std::size_t length, std::size_t dim);

/// Adds rows 0..L-1 of the table to every sequence of length L = segment.
Tensor add_position(const Tensor& x, const Tensor& table, std::size_t segment = 0);

}  // namespace vgt
