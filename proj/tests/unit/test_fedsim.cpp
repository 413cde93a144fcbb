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
#include <filesystem>
#include <vector>

#include <gtest/gtest.h>

#include "fedmmf/errors.hpp"
#include "fedmmf/fedsim.hpp"

namespace fedmmf {
namespace {

const std::filesystem::path kData = FEDMMF_TEST_DATA;

const Dataset& fixture() {
  static const Dataset d = [] {
    const auto dir = kData / "ml-100k";
    Dataset out = parse_movielens(dir / "u.data", MovieLensFormat::kMl100k);
    attach_features(out, load_ml100k_side_information(dir, out), 4);
    return out;
  }();
  return d;
}

ExperimentConfig small_config(Algorithm algorithm) {
  ExperimentConfig c;
  c.algorithm.algorithm = algorithm;
  c.hyper.k = 4;
  c.hyper.gamma = 0.002;
  c.hyper.lambda = 0.1;
  c.hyper.epochs = 20;
  c.mask.epochs = 30;
  c.evaluation.every = 5;
  c.repetitions = 1;
  return c;
}

TEST(Fedsim, RepeatRunsAreIdentical) {
  for (Algorithm a : {Algorithm::kFedMF, Algorithm::kFedMMF}) {
    ExperimentConfig c = small_config(a);
    c.th_j = 0.03;
    const RunResult x = run_experiment(c, fixture(), 0);
    const RunResult y = run_experiment(c, fixture(), 0);
    EXPECT_EQ(x.factors.items, y.factors.items);
    EXPECT_EQ(x.factors.users, y.factors.users);
    EXPECT_EQ(x.test.rmse, y.test.rmse);
    const RunResult z = run_experiment(c, fixture(), 1);
    EXPECT_NE(x.factors.items, z.factors.items);
  }
}

TEST(Fedsim, ZeroMaskIsFedMF) {
  const ExperimentConfig mf = small_config(Algorithm::kFedMF);
  ExperimentConfig zero = small_config(Algorithm::kFedMMF);
  zero.algorithm.zero_mask = true;
  zero.th_j = 100.0;  // everyone secure: plaintext sums, identical arithmetic
  const RunResult a = run_experiment(mf, fixture(), 0);
  const RunResult b = run_experiment(zero, fixture(), 0);
  EXPECT_EQ(b.n_insecure, 0u);
  EXPECT_EQ(a.factors.items, b.factors.items);
  EXPECT_EQ(a.factors.users, b.factors.users);
  EXPECT_EQ(a.test.rmse, b.test.rmse);
  EXPECT_EQ(a.train_loss, b.train_loss);

  // Through masked aggregation the only difference is fixed-point rounding.
  zero.th_j = 0.0;
  const RunResult c = run_experiment(zero, fixture(), 0);
  EXPECT_EQ(c.n_secure, 0u);
  EXPECT_LT((a.factors.items - c.factors.items).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_NEAR(a.test.rmse, c.test.rmse, 1e-6);
}

TEST(Fedsim, GroupingDoesNotChangeTheModel) {
  ExperimentConfig c = small_config(Algorithm::kFedMMF);
  c.th_j = 1.0;
  const RunResult secure = run_experiment(c, fixture(), 2);
  c.th_j = 0.0;
  const RunResult insecure = run_experiment(c, fixture(), 2);
  EXPECT_EQ(secure.n_insecure, 0u);
  EXPECT_EQ(insecure.n_secure, 0u);
  EXPECT_LT((secure.factors.items - insecure.factors.items).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_NEAR(secure.test.rmse, insecure.test.rmse, 1e-6);
}

TEST(Fedsim, DropoutIsRecovered) {
  ExperimentConfig c = small_config(Algorithm::kFedMMF);
  c.th_j = 0.0;
  c.hyper.epochs = 6;
  const RunResult base = run_experiment(c, fixture(), 0);
  const Index victim = base.parties.front().user_id;
  c.dropouts = {{3, victim}};
  const RunResult dropped = run_experiment(c, fixture(), 0);
  EXPECT_EQ(dropped.rounds_run, 6);
  EXPECT_TRUE(dropped.factors.items.allFinite());
  // Same as a run where the victim's gradients are simply absent at round 3.
  EXPECT_NE(base.factors.items, dropped.factors.items);
  EXPECT_LT((base.factors.items - dropped.factors.items).cwiseAbs().maxCoeff(), 1e-2);
}

TEST(Fedsim, ZeroLearningRateFreezesFactors) {
  ExperimentConfig c = small_config(Algorithm::kFedMF);
  c.hyper.gamma = 0.0;
  c.hyper.epochs = 1;
  const RunResult one = run_experiment(c, fixture(), 0);
  c.hyper.epochs = 7;
  const RunResult seven = run_experiment(c, fixture(), 0);
  EXPECT_EQ(one.factors.items, seven.factors.items);
  EXPECT_EQ(one.factors.users, seven.factors.users);
  EXPECT_EQ(one.train_loss.front(), seven.train_loss.back());
}

// Ratings r_ui = a_u * b_i from a rank-one model are fit almost exactly.
TEST(Fedsim, FitsRankOneData) {
  Dataset d;
  d.name = "rank1";
  d.n_users = 12;
  d.n_items = 10;
  d.scale = {1, 5, 1};
  for (Index u = 0; u < d.n_users; ++u) {
    d.user_ids.push_back(std::to_string(u));
    for (Index i = 0; i < d.n_items; ++i) {
      const double r = (1.0 + 0.1 * u) * (1.0 + 0.1 * i);
      if (r <= 5.0) d.ratings.push_back({u, i, r});
    }
  }
  for (Index i = 0; i < d.n_items; ++i) d.item_ids.push_back(std::to_string(i));
  d.user_features = Eigen::MatrixXd::Zero(12, 1);
  d.item_features = Eigen::MatrixXd::Zero(10, 1);
  ExperimentConfig c = small_config(Algorithm::kFedMF);
  c.hyper.k = 1;
  c.hyper.gamma = 0.02;
  c.hyper.lambda = 0.0;
  c.hyper.epochs = 3000;
  c.hyper.init_scale = 0.5;
  c.split = {1.0, 0.0, 0.0};
  c.evaluation.every = 3000;
  const RunResult r = run_experiment(c, d, 0);
  EXPECT_LT(r.train_loss.back(), 1e-6 * r.train_loss.front());
  for (std::size_t t = 1; t < r.train_loss.size(); ++t) ASSERT_LE(r.train_loss[t], r.train_loss[t - 1] + 1e-12);
}

TEST(Fedsim, ContextSingleShardIsLocalTraining) {
  const Dataset& d = fixture();
  const std::vector<PartySplit> splits = split_all(d, {}, 3);
  const PartySplit& split = splits.front();
  MaskHyperparams hyper;
  hyper.closed_form_init = false;
  hyper.epochs = 40;
  for (MaskKind kind : {MaskKind::kOneOrder, MaskKind::kTwoOrder, MaskKind::kHighOrder}) {
    std::vector<ContextShard> shards(1);
    shards[0].inputs = mask_inputs(d, split.train);
    shards[0].targets.resize(static_cast<Eigen::Index>(split.train.size()));
    for (std::size_t r = 0; r < split.train.size(); ++r) shards[0].targets(r) = split.train[r].rating;
    const FeatureSpec spec{d.user_features.cols(), d.item_features.cols()};
    const MaskModel global = train_context_model(shards, spec, kind, hyper);
    const MaskModel local = train_mask_model(shards[0].inputs, shards[0].targets, spec, kind, hyper);
    EXPECT_LT((global.parameters() - local.parameters()).cwiseAbs().maxCoeff(), 1e-12) << to_string(kind);
  }
}

TEST(Fedsim, BaselinesRun) {
  for (Algorithm a : {Algorithm::kLocalOnly, Algorithm::kFedContext}) {
    ExperimentConfig c = small_config(a);
    c.algorithm.mask = MaskKind::kOneOrder;
    const RunResult r = run_experiment(c, fixture(), 0);
    EXPECT_TRUE(std::isfinite(r.test.rmse));
    EXPECT_GE(r.test.rmse, r.test.mae);
  }
  EXPECT_EQ((AlgorithmSpec{Algorithm::kLocalOnly, MaskKind::kOneOrder}).label(), "LocalLR");
  EXPECT_EQ((AlgorithmSpec{Algorithm::kFedContext, MaskKind::kTwoOrder}).label(), "FedFM");
  EXPECT_EQ((AlgorithmSpec{Algorithm::kFedMMF, MaskKind::kHighOrder}).label(), "High-order FedMMF");
}

// The server sees group tags, item requests and fixed-layout gradient
// messages, and nothing sized by ratings or user factors.
TEST(Fedsim, TranscriptCarriesOnlyProtocolMessages) {
  ExperimentConfig c = small_config(Algorithm::kFedMMF);
  c.th_j = 0.03;
  c.hyper.epochs = 2;
  c.record_transcript = true;
  const RunResult r = run_experiment(c, fixture(), 0);
  std::size_t gradients = 0;
  for (const TranscriptEntry& e : r.transcript) {
    if (e.kind != MessageKind::kGradient) continue;
    ++gradients;
    const auto& party = *std::find_if(r.parties.begin(), r.parties.end(),
                                      [&](const PartyState& p) { return p.user_id == e.party; });
    EXPECT_EQ(e.payload_bytes, wire::kHeaderBytes + party.split.train.size() * (4 + 8 * 4));
  }
  EXPECT_EQ(gradients, 2 * r.parties.size());
}

TEST(MaskedUpdate, MatchesHandComputation) {
  PartyState party;
  party.user_id = 0;
  party.p = Eigen::VectorXd::Constant(1, 1.0);
  party.split.train = {{0, 4, 3.0}};
  mf::FactorMatrix<double> q(1, 1);
  q(0, 0) = 2.0;
  mf::Hyperparams hyper;
  hyper.k = 1;
  hyper.gamma = 0.1;
  hyper.lambda = 0.5;
  const PlainSubmission out = masked_update(party, q, hyper);
  // e = 3 - 2 = 1; p = 1 + 0.1 (1 * 2 - 0.5 * 1) = 1.15; e' = 3 - 2.3 = 0.7.
  EXPECT_NEAR(party.p(0), 1.15, 1e-15);
  ASSERT_EQ(out.items, std::vector<Index>{4});
  EXPECT_NEAR(out.eta(0, 0), 0.5 * 2.0 - 0.7 * 1.15, 1e-14);
}

}  // namespace
}  // namespace fedmmf
