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

// Per-party private models that produce personalized masks. A model only ever
// sees its own party's train split.

#ifndef FEDMMF_LOCALMASK_HPP_
#define FEDMMF_LOCALMASK_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedmmf/dataset.hpp"
#include "json.hpp"

namespace fedmmf {

enum class MaskKind { kOneOrder, kTwoOrder, kHighOrder };

std::string to_string(MaskKind kind);
MaskKind mask_kind_from_string(const std::string& name);

struct MaskHyperparams {
  // Ridge strength on every non-bias weight. The training objective is
  // mean squared error + (l2 / n) * |weights|^2.
  double l2 = 30.0;
  double learning_rate = 0.05;
  int epochs = 200;
  int fm_factors = 8;
  int hidden_units = 32;
  std::uint64_t seed = 0;
  // Start OneOrder from the ridge solution (and TwoOrder from it before the
  // factor descent). Off means plain gradient descent from zero.
  bool closed_form_init = true;
};

// Model input is the user feature row followed by the item feature row.
struct FeatureSpec {
  Eigen::Index user_dim = 0;
  Eigen::Index item_dim = 0;

  Eigen::Index input_dim() const { return user_dim + item_dim; }
};

Eigen::VectorXd mask_input(const Dataset& dataset, Index user, Index item);
Eigen::MatrixXd mask_inputs(const Dataset& dataset, std::span<const RatingTriple> ratings);

struct MaskModel {
  MaskKind kind = MaskKind::kOneOrder;
  FeatureSpec features;
  double bias = 0.0;
  Eigen::VectorXd linear;          // d, OneOrder and TwoOrder
  Eigen::MatrixXd factors;         // d x k_fm, TwoOrder
  Eigen::MatrixXd hidden_weights;  // h x d, HighOrder
  Eigen::VectorXd hidden_bias;     // h
  Eigen::VectorXd output_weights;  // h

  // A model of `kind` that predicts `value` everywhere.
  static MaskModel constant(MaskKind kind, const FeatureSpec& features, double value);

  double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd predict_rows(const Eigen::MatrixXd& inputs) const;

  // Flat parameter order: bias, linear, factors (column-major), hidden
  // weights (column-major), hidden bias, output weights.
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::Ref<const Eigen::VectorXd>& flat);

  // Regularized training objective on (inputs, targets) and, if requested,
  // its analytic gradient in flat parameter order.
  double objective(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets, double l2,
                   Eigen::VectorXd* gradient = nullptr) const;

  bool finite() const;

  nlohmann::json to_json() const;
  static MaskModel from_json(const nlohmann::json& j);
};

// Starting point of gradient training: bias `bias`, zero linear weights and
// small random factor or hidden weights drawn from hyper.seed.
MaskModel init_mask_model(MaskKind kind, const FeatureSpec& features, double bias,
                          const MaskHyperparams& hyper);

// Full-batch gradient descent from `model` on an objective given as
// value(theta, gradient*). The step halves whenever it would raise the value.
using MaskObjective = std::function<double(const MaskModel&, Eigen::VectorXd*)>;
void descend_mask_model(MaskModel& model, const MaskObjective& objective,
                        const MaskHyperparams& hyper);

// Fits f_u^mask on the train split only. One training rating falls back to a
// constant predictor of that rating.
MaskModel train_mask_model(const PartySplit& split, const Dataset& dataset, MaskKind kind,
                           const MaskHyperparams& hyper);

// Same as above on explicit inputs/targets.
MaskModel train_mask_model(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                           const FeatureSpec& features, MaskKind kind,
                           const MaskHyperparams& hyper);

struct MaskedRating {
  Index user_id = 0;
  Index item_id = 0;
  double value = 0.0;
};

// r_ui - f_u^mask(i) for every train triple.
std::vector<MaskedRating> mask_ratings(const PartySplit& split, const Dataset& dataset,
                                       const MaskModel& model);

// q_i . p_u + f_u^mask(i). When the item has no collaborative factor (never
// rated in training anywhere) the mask output alone is returned.
double predict_fedmmf(const Eigen::Ref<const Eigen::VectorXd>& p_u, const Eigen::VectorXd* q_i,
                      double mask_output);

enum class PartyGroup { kSecure, kInsecure };

std::string to_string(PartyGroup group);

struct PrivacyReport {
  Index user_id = 0;
  double j_estimate = 0.0;
  std::size_t n_samples = 0;
  // Set when no validation ratings existed and J was computed on train.
  bool optimistic = false;
  PartyGroup group = PartyGroup::kInsecure;
};

// Mean squared residual on ratings rescaled to [0, 1]. Uses the validation
// split, or train (flagged optimistic) when validation is empty.
PrivacyReport estimate_privacy_indicator(const MaskModel& model, const PartySplit& split,
                                         const Dataset& dataset);

// Empirical J of arbitrary predictions against ratings on `scale`.
double privacy_indicator(std::span<const double> predictions, std::span<const double> ratings,
                         const RatingScale& scale);

// Secure iff j_estimate <= th_j; a nonpositive th_j makes every party insecure.
PartyGroup assign_group(const PrivacyReport& report, double th_j);

// ln(2|F| / delta) / epsilon^2: samples sufficient for empirical-risk
// selection over a finite class to be within epsilon of the best member
// with probability at least 1 - delta.
double sample_complexity_bound(std::uint64_t hypothesis_count, double epsilon, double delta);

}  // namespace fedmmf

#endif  // FEDMMF_LOCALMASK_HPP_
