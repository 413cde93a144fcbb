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

// Federated training simulation: party and server roles, the round loop of
// masked federated MF with adaptive secure aggregation, and the baselines.

#ifndef FEDMMF_FEDSIM_HPP_
#define FEDMMF_FEDSIM_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedmmf/dataset.hpp"
#include "fedmmf/field.hpp"
#include "fedmmf/localmask.hpp"
#include "fedmmf/mf.hpp"
#include "fedmmf/secagg.hpp"
#include "fedmmf/wire.hpp"
#include "json.hpp"

namespace fedmmf {

enum class Algorithm { kFedMF, kFedMMF, kLocalOnly, kFedContext };

struct AlgorithmSpec {
  Algorithm algorithm = Algorithm::kFedMF;
  MaskKind mask = MaskKind::kTwoOrder;
  // FedMMF with f_u^mask == 0; reduces exactly to FedMF.
  bool zero_mask = false;

  // Row label as used in result tables, e.g. "FedMF", "Two-order FedMMF",
  // "LocalLR", "FedFM".
  std::string label() const;
};

struct DropoutEvent {
  std::uint32_t round = 0;
  Index party = 0;
};

struct EvaluationConfig {
  int every = 10;
  bool early_stopping = false;
  int patience = 10;
};

struct ExperimentConfig {
  std::string dataset;  // bundle directory
  SplitRatios split;
  AlgorithmSpec algorithm;
  mf::Hyperparams hyper;
  MaskHyperparams mask;
  double th_j = 0.05;
  FieldParams field;
  // Per-entry gradient magnitude the field encoding must accommodate.
  double max_gradient_abs = 1.0e4;
  int threshold = 0;  // Shamir threshold; 0 selects ceil(2n/3)
  std::vector<DropoutEvent> dropouts;
  int repetitions = 10;
  std::uint64_t seed_base = 1;
  EvaluationConfig evaluation;
  int threads = 1;
  bool record_transcript = false;
  // Parties (fewest ratings first) whose last two rounds of plaintext
  // gradients are kept for the gradient-leakage attack.
  int leakage_parties = 0;

  void validate() const;
  nlohmann::json to_json() const;
  // Throws ConfigError naming the offending field.
  static ExperimentConfig from_json(const nlohmann::json& j);
  std::string hash() const;
};

struct PartyState {
  Index user_id = 0;
  Eigen::VectorXd p;
  PartySplit split;
  std::optional<MaskModel> mask_model;
  std::vector<MaskedRating> masked_ratings;
  PartyGroup group = PartyGroup::kSecure;
  PairSeedBook pair_seeds;

  // Values e_ui is computed against: masked ratings if a mask exists, raw
  // train ratings otherwise. Aligned with split.train.
  Eigen::VectorXd targets() const;
};

enum class MessageKind { kItemRequest, kGradient, kGroupTag };

struct TranscriptEntry {
  MessageKind kind = MessageKind::kGradient;
  Index party = 0;
  std::uint32_t round = 0;
  std::size_t payload_bytes = 0;
};

struct ServerConfig {
  double gamma = 0.0;
  double lambda = 0.0;
  std::size_t n_items = 0;
  int k = 0;
};

// Everything the server holds. It has no member able to carry a rating,
// masked rating or user factor.
struct ServerState {
  mf::FactorMatrix<double> item_factors;
  std::uint32_t round = 0;
  ServerConfig config;
  Eigen::MatrixXd aggregate;
  std::vector<TranscriptEntry> transcript;

  // q_i <- q_i - gamma * aggregate_i.
  void apply_aggregate();
};

// One MaskedUpdate: e = target - q.p against the current p, descent step on
// p_u, then eta_ui = lambda q_i - e_ui p_u with the updated p_u. `item_rows`
// holds q_i for split.train in order.
PlainSubmission masked_update(
    PartyState& party, const Eigen::Ref<const mf::FactorMatrix<double>>& item_rows,
    const mf::Hyperparams& hyper);

// Routes a party's gradients by group: secure parties send plaintext, insecure
// parties send pairwise-masked field vectors.
wire::RoundMessage emit_update(const PartyState& party,
                               const PlainSubmission& gradients,
                               std::uint32_t round, const InsecureGroup& group,
                               const std::vector<std::vector<Index>>& item_participants,
                               const FieldParams& params, double max_gradient_abs);

// Gradients a party produced in two consecutive rounds, with the item factors
// it downloaded. Ground truth is kept apart for scoring.
struct LeakageSnapshot {
  Index party = 0;
  double gamma = 0.0;
  double lambda = 0.0;
  std::vector<Index> items;
  std::vector<Eigen::VectorXd> q_prev, q_curr, eta_prev, eta_curr;
  Eigen::VectorXd truth_p_prev, truth_p_curr;
  std::vector<double> truth_targets;
  std::vector<double> truth_ratings;
};

struct RunResult {
  std::string label;
  std::uint64_t seed = 0;
  mf::ErrorMetrics test;
  mf::ErrorMetrics validation;
  int rounds_run = 0;
  int best_round = 0;
  mf::LatentFactorsd factors;
  std::vector<PartyState> parties;
  std::vector<PrivacyReport> privacy;
  std::size_t n_secure = 0;
  std::size_t n_insecure = 0;
  // Regularized MF loss on train targets after every round (MF algorithms only).
  std::vector<double> train_loss;
  // (round, validation, test) at every evaluation.
  struct Checkpoint {
    int round = 0;
    mf::ErrorMetrics validation, test;
  };
  std::vector<Checkpoint> history;
  std::vector<TranscriptEntry> transcript;
  std::vector<LeakageSnapshot> leakage;
  double seconds_local = 0.0;
  double seconds_federated = 0.0;
};

// One party's contribution to the federated context baseline.
struct ContextShard {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd targets;
};

// Federated averaging of per-party full-batch gradients with equal weights.
// Starts from init_mask_model with the mean of party target means as bias;
// with a single shard and closed_form_init off it retraces
// train_mask_model on that shard.
MaskModel train_context_model(std::span<const ContextShard> shards, const FeatureSpec& features,
                              MaskKind kind, const MaskHyperparams& hyper);

RunResult run_fedmf(const ExperimentConfig& config, const Dataset& dataset, std::uint64_t seed);
RunResult run_fedmmf(const ExperimentConfig& config, const Dataset& dataset, std::uint64_t seed);
RunResult run_baseline(const ExperimentConfig& config, const Dataset& dataset, std::uint64_t seed);

// Dispatches on config.algorithm with seed = seed_base + repetition.
RunResult run_experiment(const ExperimentConfig& config, const Dataset& dataset, int repetition);

}  // namespace fedmmf

#endif  // FEDMMF_FEDSIM_HPP_
