#pragma once
// Straight-line recomputation of one self-attention layer.

#include <cmath>
#include <string>
#include <vector>

#include "vgt/param_store.hpp"
#include "vgt/tensor.hpp"

namespace vgt::oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
  return m;
}

inline Mat affine(const Mat& x, const Tensor& w, const Tensor& b) {
  std::size_t in = w.rows(), out = w.cols();
  Mat y(x.size(), std::vector<double>(out));
  for (std::size_t r = 0; r < x.size(); ++r)
    for (std::size_t j = 0; j < out; ++j) {
      double acc = b[j];
      for (std::size_t i = 0; i < in; ++i) acc += x[r][i] * w.at(i, j);
      y[r][j] = acc;
    }
  return y;
}

// Scripted single layer: heads on column blocks, printed K Q^T ordering.
inline Mat scripted_layer(const Mat& x, const ParamStore& p, const std::string& pre, std::size_t heads) {
  std::size_t L = x.size(), d = x[0].size(), dk = d / heads;
  Mat q = affine(x, p.get(pre + ".q.W"), p.get(pre + ".q.b"));
  Mat k = affine(x, p.get(pre + ".k.W"), p.get(pre + ".k.b"));
  Mat v = affine(x, p.get(pre + ".v.W"), p.get(pre + ".v.b"));
  Mat cat(L, std::vector<double>(d, 0.0));
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < L; ++i) {
      std::vector<double> logit(L);
      double mx = -INFINITY;
      for (std::size_t j = 0; j < L; ++j) {
        double s = 0;
        for (std::size_t c = 0; c < dk; ++c) s += k[i][h * dk + c] * q[j][h * dk + c];
        logit[j] = s / std::sqrt(double(dk));
        mx = std::max(mx, logit[j]);
      }
      double z = 0;
      for (double& l : logit) z += (l = std::exp(l - mx));
      for (std::size_t j = 0; j < L; ++j)
        for (std::size_t c = 0; c < dk; ++c) cat[i][h * dk + c] += logit[j] / z * v[j][h * dk + c];
    }
  }
  Mat o = affine(cat, p.get(pre + ".c.W"), p.get(pre + ".c.b"));
  const Tensor& g = p.get(pre + ".ln.g");
  const Tensor& b = p.get(pre + ".ln.b");
  for (std::size_t r = 0; r < L; ++r) {
    double mean = 0, var = 0;
    for (std::size_t c = 0; c < d; ++c) mean += (o[r][c] += x[r][c]);
    mean /= d;
    for (std::size_t c = 0; c < d; ++c) var += (o[r][c] - mean) * (o[r][c] - mean);
    var /= d;
    for (std::size_t c = 0; c < d; ++c) o[r][c] = g[c] * (o[r][c] - mean) / std::sqrt(var + 1e-5) + b[c];
  }
  return o;
}

}  // namespace vgt::oracle
