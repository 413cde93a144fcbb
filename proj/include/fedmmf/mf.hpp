/*
 * Copyright 2026 The FedMMF Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Matrix factorization primitives. Everything here is templated on the scalar
// type and accepts Eigen expressions, so callers can pass rows, maps or blocks
// of larger factor matrices without copies.

#ifndef FEDMMF_MF_HPP_
#define FEDMMF_MF_HPP_

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

#include <Eigen/Dense>

#include "fedmmf/dataset.hpp"
#include "fedmmf/errors.hpp"
#include "fedmmf/random.hpp"

namespace fedmmf::mf {

template <typename Scalar>
using FactorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// p_u rows and q_i rows of the factorization.
template <typename Scalar>
struct LatentFactors {
  FactorMatrix<Scalar> users;
  FactorMatrix<Scalar> items;

  Eigen::Index k() const { return users.cols(); }
};

using LatentFactorsd = LatentFactors<double>;

struct Hyperparams {
  int k = 16;
  double gamma = 0.01;
  double lambda = 0.1;
  int epochs = 100;
  std::uint64_t seed = 0;
  // Factors start uniform in +-init_scale / sqrt(k).
  double init_scale = 0.01;

  void validate() const {
    if (k < 1) throw ConfigError("hyperparams.k must be >= 1");
    if (!std::isfinite(gamma) || gamma < 0.0) throw ConfigError("hyperparams.gamma must be finite and >= 0");
    if (!std::isfinite(lambda) || lambda < 0.0) throw ConfigError("hyperparams.lambda must be finite and >= 0");
    if (epochs < 1) throw ConfigError("hyperparams.epochs must be >= 1");
    if (!std::isfinite(init_scale) || init_scale <= 0.0) throw ConfigError("hyperparams.init_scale must be finite and > 0");
  }
};

// i.i.d. uniform(-scale/sqrt(k), scale/sqrt(k)); user rows first, then items.
template <typename Scalar = double>
LatentFactors<Scalar> init_factors(std::size_t n_users, std::size_t n_items, int k,
                                   std::uint64_t seed, double scale = 0.01) {
  Rng rng(seed);
  const double bound = scale / std::sqrt(static_cast<double>(k));
  LatentFactors<Scalar> f{FactorMatrix<Scalar>(n_users, k), FactorMatrix<Scalar>(n_items, k)};
  for (Eigen::Index r = 0; r < f.users.rows(); ++r)
    for (Eigen::Index c = 0; c < k; ++c) f.users(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
  for (Eigen::Index r = 0; r < f.items.rows(); ++r)
    for (Eigen::Index c = 0; c < k; ++c) f.items(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
  return f;
}

template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar predict(const Eigen::MatrixBase<DerivedP>& p,
                                  const Eigen::MatrixBase<DerivedQ>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("predict: dimension mismatch");
  typename DerivedP::Scalar acc(0);
  for (Eigen::Index j = 0; j < p.size(); ++j) acc += q(j) * p(j);
  return acc;
}

// 1/2 * sum (r - q.p)^2 + lambda * (|q|^2 + |p|^2), the regularizer counted
// once per known pair.
template <typename Scalar>
Scalar loss(std::span<const RatingTriple> ratings, const LatentFactors<Scalar>& factors,
            Scalar lambda) {
  Scalar total(0);
  for (const RatingTriple& t : ratings) {
    const auto p = factors.users.row(t.user_id);
    const auto q = factors.items.row(t.item_id);
    const Scalar e = static_cast<Scalar>(t.rating) - predict(p, q);
    total += Scalar(0.5) * e * e + lambda * (q.squaredNorm() + p.squaredNorm());
  }
  return total;
}

// eta_ui = lambda * q_i - e_ui * p_u, as an unevaluated expression over q
// and p (both column vectors), so it can be written straight into a row.
template <typename DerivedQ, typename DerivedP>
auto item_gradient(const Eigen::MatrixBase<DerivedQ>& q, const Eigen::MatrixBase<DerivedP>& p,
                   typename DerivedQ::Scalar error, typename DerivedQ::Scalar lambda) {
  if (p.size() != q.size()) throw std::invalid_argument("item_gradient: dimension mismatch");
  return lambda * q.derived() - error * p.derived();
}

// p_u - gamma * sum_i (lambda * p_u - e_ui * q_i). `item_rows` holds q_i of
// the rated items, one per row in ascending item id; `errors` matches it.
template <typename DerivedP, typename DerivedQ, typename DerivedE>
Vector<typename DerivedP::Scalar> update_user(const Eigen::MatrixBase<DerivedP>& p,
                                              const Eigen::MatrixBase<DerivedQ>& item_rows,
                                              const Eigen::MatrixBase<DerivedE>& errors,
                                              typename DerivedP::Scalar gamma,
                                              typename DerivedP::Scalar lambda) {
  using Scalar = typename DerivedP::Scalar;
  if (item_rows.rows() != errors.size())
    throw std::invalid_argument("update_user: one error per rated item required");
  if (item_rows.rows() > 0 && item_rows.cols() != p.size())
    throw std::invalid_argument("update_user: dimension mismatch");
  const Vector<Scalar> pv = p;
  Vector<Scalar> step = Vector<Scalar>::Zero(pv.size());
  for (Eigen::Index r = 0; r < item_rows.rows(); ++r)
    step += lambda * pv - errors(r) * item_rows.row(r).transpose();
  return pv - gamma * step;
}

struct ErrorMetrics {
  double rmse = 0.0;
  double mae = 0.0;
};

// Pooled over every prediction, not averaged per user.
inline ErrorMetrics rmse_mae(std::span<const double> predictions, std::span<const double> truths) {
  if (predictions.size() != truths.size())
    throw std::invalid_argument("rmse_mae: length mismatch");
  if (predictions.empty()) throw std::invalid_argument("rmse_mae: empty input");
  double sq = 0.0;
  double abs = 0.0;
  for (std::size_t j = 0; j < predictions.size(); ++j) {
    const double d = predictions[j] - truths[j];
    sq += d * d;
    abs += std::abs(d);
  }
  const double n = static_cast<double>(predictions.size());
  return {std::sqrt(sq / n), abs / n};
}

}  // namespace fedmmf::mf

#endif  // FEDMMF_MF_HPP_
