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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fedmmf/mf.hpp"

namespace fedmmf {
namespace {

using Eigen::VectorXd;

TEST(MfPredict, DotProduct) {
  EXPECT_DOUBLE_EQ(mf::predict(Eigen::Vector2d(1, 0), Eigen::Vector2d(0.5, 2)), 0.5);
  EXPECT_DOUBLE_EQ(mf::predict(Eigen::Vector2d::Zero(), Eigen::Vector2d(3, -7)), 0.0);
  EXPECT_DOUBLE_EQ(mf::predict(Eigen::Vector3d::Ones(), Eigen::Vector3d::Ones()), 3.0);
}

TEST(MfPredict, AcceptsFloatAndRows) {
  mf::FactorMatrix<float> q(2, 3);
  q << 1, 2, 3, 4, 5, 6;
  const Eigen::Vector3f p(1, 0, -1);
  EXPECT_FLOAT_EQ(mf::predict(p, q.row(1).transpose()), -2.0f);
}

TEST(MfPredict, Bilinear) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    VectorXd p(5), q(5);
    for (int j = 0; j < 5; ++j) {
      p(j) = rng.normal();
      q(j) = rng.normal();
    }
    const double a = rng.uniform(-3, 3);
    EXPECT_NEAR(mf::predict(VectorXd(a * p), q), a * mf::predict(p, q), 1e-12);
  }
}

TEST(MfPredict, RejectsMismatchedDimensions) {
  EXPECT_THROW(mf::predict(Eigen::Vector2d(1, 0), Eigen::Vector3d(1, 0, 0)), std::invalid_argument);
}

mf::LatentFactorsd single_pair(double p, double q) {
  mf::LatentFactorsd f{mf::FactorMatrix<double>(1, 1), mf::FactorMatrix<double>(1, 1)};
  f.users(0, 0) = p;
  f.items(0, 0) = q;
  return f;
}

TEST(MfLoss, HandValues) {
  const std::vector<RatingTriple> one{{0, 0, 1.0}};
  EXPECT_DOUBLE_EQ(mf::loss<double>(one, single_pair(0, 0), 0.0), 0.5);
  const std::vector<RatingTriple> zero{{0, 0, 0.0}};
  EXPECT_NEAR(mf::loss<double>(zero, single_pair(1, 1), 0.1), 0.7, 1e-15);
  const std::vector<RatingTriple> exact{{0, 0, 6.0}};
  EXPECT_DOUBLE_EQ(mf::loss<double>(exact, single_pair(2, 3), 0.0), 0.0);
}

TEST(MfItemGradient, HandValues) {
  const VectorXd zero = mf::item_gradient(Eigen::Vector2d(1, 2), Eigen::Vector2d(3, 4), 0.0, 0.0);
  EXPECT_EQ(zero, VectorXd::Zero(2));
  // q=1, p=2, r=3: e = 1 and eta = 0.1 * 1 - 1 * 2.
  const Eigen::VectorXd q = Eigen::VectorXd::Constant(1, 1.0);
  const Eigen::VectorXd p = Eigen::VectorXd::Constant(1, 2.0);
  const double e = 3.0 - mf::predict(p, q);
  const VectorXd eta = mf::item_gradient(q, p, e, 0.1);
  EXPECT_NEAR(eta(0), -1.9, 1e-15);
}

TEST(MfItemGradient, LinearInPForFixedError) {
  const Eigen::Vector3d q(0.3, -0.2, 0.5), p(1.0, 2.0, -1.0);
  const VectorXd base = mf::item_gradient(q, p, 0.7, 0.0);
  const VectorXd scaled = mf::item_gradient(q, Eigen::Vector3d(3.0 * p), 0.7, 0.0);
  EXPECT_TRUE(scaled.isApprox(3.0 * base, 1e-14));
}

TEST(MfUpdateUser, HandValues) {
  const Eigen::VectorXd p = Eigen::VectorXd::Constant(1, 1.0);
  mf::FactorMatrix<double> q(1, 1);
  q(0, 0) = 1.0;
  const Eigen::VectorXd e = Eigen::VectorXd::Constant(1, 2.0 - 1.0);
  EXPECT_NEAR(mf::update_user(p, q, e, 0.1, 0.0)(0), 1.1, 1e-15);
  EXPECT_EQ(mf::update_user(p, q, Eigen::VectorXd::Zero(1), 0.1, 0.0), p);
  EXPECT_EQ(mf::update_user(p, q, e, 0.0, 0.3), p);
}

// Central differences of the pairwise loss against the analytic terms: the
// item gradient is d/dq and the user-step summand is d/dp of the per-pair
// loss with regularizer lambda/2 (|q|^2 + |p|^2).
TEST(MfGradients, MatchFiniteDifferences) {
  Rng rng(11);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(6));
    VectorXd p(k), q(k);
    for (int j = 0; j < k; ++j) {
      p(j) = rng.normal();
      q(j) = rng.normal();
    }
    const double r = rng.uniform(1, 5);
    const double lambda = rng.uniform(0, 0.5);
    auto pair_loss = [&](const VectorXd& pp, const VectorXd& qq) {
      const double e = r - mf::predict(pp, qq);
      return 0.5 * e * e + 0.5 * lambda * (qq.squaredNorm() + pp.squaredNorm());
    };
    const double e = r - mf::predict(p, q);
    const VectorXd grad_q = mf::item_gradient(q, p, e, lambda);
    mf::FactorMatrix<double> rows(1, k);
    rows.row(0) = q.transpose();
    // update_user with gamma = 1 returns p - grad_p.
    const VectorXd grad_p = p - mf::update_user(p, rows, Eigen::VectorXd::Constant(1, e), 1.0, lambda);
    for (int j = 0; j < k; ++j) {
      VectorXd qp = q, qm = q, pp = p, pm = p;
      qp(j) += h;
      qm(j) -= h;
      pp(j) += h;
      pm(j) -= h;
      const double fd_q = (pair_loss(p, qp) - pair_loss(p, qm)) / (2 * h);
      const double fd_p = (pair_loss(pp, q) - pair_loss(pm, q)) / (2 * h);
      EXPECT_NEAR(grad_q(j), fd_q, 1e-6 * std::max(1.0, std::abs(fd_q)));
      EXPECT_NEAR(grad_p(j), fd_p, 1e-6 * std::max(1.0, std::abs(fd_p)));
    }
  }
}

// k = 1, one user, one item: a small joint step never raises the loss.
TEST(MfDescent, SmallStepNeverIncreasesLoss) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const double r = rng.uniform(1, 5);
    const double lambda = rng.uniform(0.05, 0.5);
    const double gamma = 1e-3;
    mf::LatentFactorsd f = single_pair(rng.uniform(0.1, 2), rng.uniform(0.1, 2));
    const std::vector<RatingTriple> data{{0, 0, r}};
    const double before = mf::loss<double>(data, f, 0.5 * lambda);
    const VectorXd p = f.users.row(0).transpose();
    const VectorXd q = f.items.row(0).transpose();
    const double e = r - mf::predict(p, q);
    const VectorXd q_next = q - gamma * mf::item_gradient(q, p, e, lambda);
    const VectorXd p_next = mf::update_user(p, f.items, Eigen::VectorXd::Constant(1, e), gamma, lambda);
    f.users.row(0) = p_next.transpose();
    f.items.row(0) = q_next.transpose();
    EXPECT_LE(mf::loss<double>(data, f, 0.5 * lambda), before + 1e-9);
  }
}

TEST(MfInit, DeterministicAndBounded) {
  const auto a = mf::init_factors<double>(7, 9, 4, 42);
  const auto b = mf::init_factors<double>(7, 9, 4, 42);
  const auto c = mf::init_factors<double>(7, 9, 4, 43);
  EXPECT_EQ(a.users, b.users);
  EXPECT_EQ(a.items, b.items);
  EXPECT_NE(a.users, c.users);
  EXPECT_LE(a.users.cwiseAbs().maxCoeff(), 0.01 / 2.0);
  EXPECT_LE(a.items.cwiseAbs().maxCoeff(), 0.01 / 2.0);
  const auto wide = mf::init_factors<double>(7, 9, 4, 42, 0.5);
  EXPECT_LE(wide.items.cwiseAbs().maxCoeff(), 0.25);
}

TEST(MfMetrics, HandValues) {
  const std::vector<double> t{1, 2, 3};
  const auto same = mf::rmse_mae(t, t);
  EXPECT_EQ(same.rmse, 0.0);
  EXPECT_EQ(same.mae, 0.0);
  const std::vector<double> truth{0, 0};
  const auto pm = mf::rmse_mae(std::vector<double>{1, -1}, truth);
  EXPECT_DOUBLE_EQ(pm.rmse, 1.0);
  EXPECT_DOUBLE_EQ(pm.mae, 1.0);
  const auto skew = mf::rmse_mae(std::vector<double>{0, 2}, truth);
  EXPECT_NEAR(skew.rmse, std::sqrt(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(skew.mae, 1.0);
  EXPECT_THROW(mf::rmse_mae(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
}

TEST(MfMetrics, RmseNeverBelowMae) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    std::vector<double> pred(n), truth(n);
    for (std::size_t j = 0; j < n; ++j) {
      pred[j] = rng.normal();
      truth[j] = rng.normal();
    }
    const auto m = mf::rmse_mae(pred, truth);
    EXPECT_GE(m.rmse + 1e-15, m.mae);
  }
  // Equal absolute errors give equality.
  const auto eq = mf::rmse_mae(std::vector<double>{1, -1, 1}, std::vector<double>{0, 0, 0});
  EXPECT_DOUBLE_EQ(eq.rmse, eq.mae);
}

}  // namespace
}  // namespace fedmmf
