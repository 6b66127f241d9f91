/*
 * Copyright (c) 2026, The fodswin authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Row-major dense kernels with hand-written backward passes. Activations are
// [tokens, channels] with channels contiguous; weights are [in, out].

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace fodswin::swin::ops {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<Mat<T>>;
template <typename T>
using CMatMap = Eigen::Map<const Mat<T>>;
template <typename T>
using RowMap = Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>;
template <typename T>
using CRowMap = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;

/// y = x W (+ b)
template <typename T>
void linear_forward(const T* x, int n, int in, const T* w, const T* b, int out, T* y) {
  MatMap<T> ym(y, n, out);
  ym.noalias() = CMatMap<T>(x, n, in) * CMatMap<T>(w, in, out);
  if (b) ym.rowwise() += CRowMap<T>(b, out);
}

/// dW += x^T dy, db += colsum(dy), dx = dy W^T (or += when accumulate).
template <typename T>
void linear_backward(const T* x, int n, int in, const T* w, int out, const T* dy, T* dx, T* dw, T* db,
                     bool accumulate_dx = false) {
  CMatMap<T> dym(dy, n, out);
  MatMap<T>(dw, in, out).noalias() += CMatMap<T>(x, n, in).transpose() * dym;
  if (db) RowMap<T>(db, out) += dym.colwise().sum();
  if (dx) {
    MatMap<T> dxm(dx, n, in);
    if (accumulate_dx)
      dxm.noalias() += dym * CMatMap<T>(w, in, out).transpose();
    else
      dxm.noalias() = dym * CMatMap<T>(w, in, out).transpose();
  }
}

constexpr double kLayerNormEps = 1e-5;

template <typename T>
struct LayerNormCache {
  std::vector<T> xhat;
  std::vector<T> rstd;
};

template <typename T>
void layernorm_forward(const T* x, int n, int c, const T* gamma, const T* beta, T* y, LayerNormCache<T>& cache) {
  cache.xhat.resize(static_cast<std::size_t>(n) * c);
  cache.rstd.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const T* xi = x + static_cast<std::size_t>(i) * c;
    T mean = 0;
    for (int k = 0; k < c; ++k) mean += xi[k];
    mean /= c;
    T var = 0;
    for (int k = 0; k < c; ++k) var += (xi[k] - mean) * (xi[k] - mean);
    var /= c;
    const T rstd = T(1) / std::sqrt(var + T(kLayerNormEps));
    cache.rstd[i] = rstd;
    T* xh = cache.xhat.data() + static_cast<std::size_t>(i) * c;
    T* yi = y + static_cast<std::size_t>(i) * c;
    for (int k = 0; k < c; ++k) {
      xh[k] = (xi[k] - mean) * rstd;
      yi[k] = xh[k] * gamma[k] + beta[k];
    }
  }
}

/// dx (+)= LN'(dy); dgamma += sum dy*xhat; dbeta += sum dy.
template <typename T>
void layernorm_backward(const T* dy, int n, int c, const T* gamma, const LayerNormCache<T>& cache, T* dx,
                        T* dgamma, T* dbeta, bool accumulate_dx) {
  for (int i = 0; i < n; ++i) {
    const T* dyi = dy + static_cast<std::size_t>(i) * c;
    const T* xh = cache.xhat.data() + static_cast<std::size_t>(i) * c;
    T mean_g = 0, mean_gx = 0;
    for (int k = 0; k < c; ++k) {
      const T g = dyi[k] * gamma[k];
      mean_g += g;
      mean_gx += g * xh[k];
      dgamma[k] += dyi[k] * xh[k];
      dbeta[k] += dyi[k];
    }
    mean_g /= c;
    mean_gx /= c;
    const T rstd = cache.rstd[i];
    T* dxi = dx + static_cast<std::size_t>(i) * c;
    for (int k = 0; k < c; ++k) {
      const T v = rstd * (dyi[k] * gamma[k] - mean_g - xh[k] * mean_gx);
      dxi[k] = accumulate_dx ? dxi[k] + v : v;
    }
  }
}

/// Exact (erf) GELU.
template <typename T>
void gelu_forward(const T* x, std::size_t n, T* y) {
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  for (std::size_t i = 0; i < n; ++i) y[i] = T(0.5) * x[i] * (T(1) + std::erf(x[i] * inv_sqrt2));
}

template <typename T>
void gelu_backward(const T* x, const T* dy, std::size_t n, T* dx) {
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
  for (std::size_t i = 0; i < n; ++i) {
    const T cdf = T(0.5) * (T(1) + std::erf(x[i] * inv_sqrt2));
    const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * x[i] * x[i]);
    dx[i] = dy[i] * (cdf + x[i] * pdf);
  }
}

/// out[k] = in[perm[k]] row-wise.
template <typename T>
void gather_rows(const T* in, const std::vector<int>& perm, int c, T* out) {
  for (std::size_t k = 0; k < perm.size(); ++k) {
    const T* src = in + static_cast<std::size_t>(perm[k]) * c;
    std::copy(src, src + c, out + k * c);
  }
}

/// out[perm[k]] = in[k] row-wise (inverse of gather_rows for a bijection).
template <typename T>
void scatter_rows(const T* in, const std::vector<int>& perm, int c, T* out) {
  for (std::size_t k = 0; k < perm.size(); ++k) {
    const T* src = in + k * c;
    std::copy(src, src + c, out + static_cast<std::size_t>(perm[k]) * c);
  }
}

/// Row concatenation [a | b].
template <typename T>
void concat_cols(const T* a, int ca, const T* b, int cb, int n, T* out) {
  for (int i = 0; i < n; ++i) {
    std::copy(a + static_cast<std::size_t>(i) * ca, a + static_cast<std::size_t>(i + 1) * ca,
              out + static_cast<std::size_t>(i) * (ca + cb));
    std::copy(b + static_cast<std::size_t>(i) * cb, b + static_cast<std::size_t>(i + 1) * cb,
              out + static_cast<std::size_t>(i) * (ca + cb) + ca);
  }
}

template <typename T>
void split_cols(const T* in, int ca, int cb, int n, T* a, T* b) {
  for (int i = 0; i < n; ++i) {
    const T* row = in + static_cast<std::size_t>(i) * (ca + cb);
    std::copy(row, row + ca, a + static_cast<std::size_t>(i) * ca);
    std::copy(row + ca, row + ca + cb, b + static_cast<std::size_t>(i) * cb);
  }
}

}  // namespace fodswin::swin::ops
