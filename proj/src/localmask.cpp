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

#include "fedmmf/localmask.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedmmf/errors.hpp"
#include "fedmmf/random.hpp"

namespace fedmmf {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Ridge with an unpenalized intercept: minimizes mean squared error plus
// (l2 / n) |w|^2. Returns false when the normal equations are singular.
bool ridge(const MatrixXd& x, const VectorXd& y, double l2, double& bias, VectorXd& w) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  MatrixXd a(n, d + 1);
  a.col(0).setOnes();
  a.rightCols(d) = x;
  MatrixXd gram = a.transpose() * a;
  gram.diagonal().tail(d).array() += l2;
  Eigen::LDLT<MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success) return false;
  const VectorXd sol = solver.solve(a.transpose() * y);
  if (!sol.allFinite() || !(gram * sol).isApprox(a.transpose() * y, 1e-6)) return false;
  bias = sol(0);
  w = sol.tail(d);
  return true;
}

void fill_normal(MatrixXd& m, Rng& rng, double sd) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.normal(0.0, sd);
}

}  // namespace

std::string to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::kOneOrder: return "one_order";
    case MaskKind::kTwoOrder: return "two_order";
    case MaskKind::kHighOrder: return "high_order";
  }
  return "unknown";
}

MaskKind mask_kind_from_string(const std::string& name) {
  if (name == "one_order" || name == "OneOrder" || name == "lr") return MaskKind::kOneOrder;
  if (name == "two_order" || name == "TwoOrder" || name == "fm") return MaskKind::kTwoOrder;
  if (name == "high_order" || name == "HighOrder" || name == "nn") return MaskKind::kHighOrder;
  throw ConfigError("unknown mask kind '" + name + "'");
}

std::string to_string(PartyGroup group) { return group == PartyGroup::kSecure ? "secure" : "insecure"; }

VectorXd mask_input(const Dataset& dataset, Index user, Index item) {
  VectorXd x(dataset.user_features.cols() + dataset.item_features.cols());
  x << dataset.user_features.row(user).transpose(), dataset.item_features.row(item).transpose();
  return x;
}

MatrixXd mask_inputs(const Dataset& dataset, std::span<const RatingTriple> ratings) {
  const Eigen::Index du = dataset.user_features.cols();
  const Eigen::Index di = dataset.item_features.cols();
  MatrixXd x(static_cast<Eigen::Index>(ratings.size()), du + di);
  for (std::size_t r = 0; r < ratings.size(); ++r) {
    x.row(r).head(du) = dataset.user_features.row(ratings[r].user_id);
    x.row(r).tail(di) = dataset.item_features.row(ratings[r].item_id);
  }
  return x;
}

MaskModel MaskModel::constant(MaskKind kind, const FeatureSpec& features, double value) {
  MaskModel m;
  m.kind = kind;
  m.features = features;
  m.bias = value;
  const Eigen::Index d = features.input_dim();
  if (kind != MaskKind::kHighOrder) m.linear = VectorXd::Zero(d);
  if (kind == MaskKind::kTwoOrder) m.factors = MatrixXd::Zero(d, 0);
  if (kind == MaskKind::kHighOrder) {
    m.hidden_weights = MatrixXd::Zero(0, d);
    m.hidden_bias = VectorXd::Zero(0);
    m.output_weights = VectorXd::Zero(0);
  }
  return m;
}

VectorXd MaskModel::predict_rows(const MatrixXd& inputs) const {
  if (inputs.cols() != features.input_dim()) throw std::invalid_argument("mask model: input width mismatch");
  VectorXd out = VectorXd::Constant(inputs.rows(), bias);
  switch (kind) {
    case MaskKind::kOneOrder:
      out.noalias() += inputs * linear;
      break;
    case MaskKind::kTwoOrder: {
      out.noalias() += inputs * linear;
      if (factors.cols() > 0) {
        const MatrixXd xv = inputs * factors;
        const MatrixXd x2v2 = inputs.array().square().matrix() * factors.array().square().matrix();
        out += 0.5 * (xv.array().square() - x2v2.array()).matrix().rowwise().sum();
      }
      break;
    }
    case MaskKind::kHighOrder:
      if (output_weights.size() > 0) {
        const MatrixXd hidden = ((inputs * hidden_weights.transpose()).rowwise() + hidden_bias.transpose()).array().tanh();
        out.noalias() += hidden * output_weights;
      }
      break;
  }
  return out;
}

double MaskModel::predict(const Eigen::Ref<const VectorXd>& x) const {
  const MatrixXd row = x.transpose();
  return predict_rows(row)(0);
}

VectorXd MaskModel::parameters() const {
  VectorXd flat(1 + linear.size() + factors.size() + hidden_weights.size() + hidden_bias.size() + output_weights.size());
  Eigen::Index at = 0;
  flat(at++) = bias;
  auto put = [&](const auto& block) {
    flat.segment(at, block.size()) = Eigen::Map<const VectorXd>(block.data(), block.size());
    at += block.size();
  };
  put(linear);
  put(factors);
  put(hidden_weights);
  put(hidden_bias);
  put(output_weights);
  return flat;
}

void MaskModel::set_parameters(const Eigen::Ref<const VectorXd>& flat) {
  const Eigen::Index expected = 1 + linear.size() + factors.size() + hidden_weights.size() + hidden_bias.size() + output_weights.size();
  if (flat.size() != expected) throw std::invalid_argument("mask model: parameter vector has wrong length");
  Eigen::Index at = 0;
  bias = flat(at++);
  auto take = [&](auto& block) {
    Eigen::Map<VectorXd>(block.data(), block.size()) = flat.segment(at, block.size());
    at += block.size();
  };
  take(linear);
  take(factors);
  take(hidden_weights);
  take(hidden_bias);
  take(output_weights);
}

double MaskModel::objective(const MatrixXd& inputs, const VectorXd& targets, double l2, VectorXd* gradient) const {
  const Eigen::Index n = inputs.rows();
  if (n == 0 || targets.size() != n) throw std::invalid_argument("mask objective: need matching nonempty data");
  const double inv_n = 1.0 / static_cast<double>(n);
  const double ridge_weight = l2 * inv_n;

  VectorXd pred = VectorXd::Constant(n, bias);
  MatrixXd xv, hidden;
  switch (kind) {
    case MaskKind::kOneOrder:
      pred.noalias() += inputs * linear;
      break;
    case MaskKind::kTwoOrder:
      pred.noalias() += inputs * linear;
      if (factors.cols() > 0) {
        xv = inputs * factors;
        const MatrixXd x2v2 = inputs.array().square().matrix() * factors.array().square().matrix();
        pred += 0.5 * (xv.array().square() - x2v2.array()).matrix().rowwise().sum();
      }
      break;
    case MaskKind::kHighOrder:
      if (output_weights.size() > 0) {
        hidden = ((inputs * hidden_weights.transpose()).rowwise() + hidden_bias.transpose()).array().tanh();
        pred.noalias() += hidden * output_weights;
      }
      break;
  }
  const VectorXd residual = pred - targets;
  const double penalty = linear.squaredNorm() + factors.squaredNorm() + hidden_weights.squaredNorm() +
                         output_weights.squaredNorm();
  const double value = residual.squaredNorm() * inv_n + ridge_weight * penalty;
  if (gradient == nullptr) return value;

  const VectorXd dpred = 2.0 * inv_n * residual;
  MaskModel g = *this;
  g.bias = dpred.sum();
  if (kind != MaskKind::kHighOrder) g.linear = inputs.transpose() * dpred + 2.0 * ridge_weight * linear;
  if (kind == MaskKind::kTwoOrder && factors.cols() > 0) {
    const MatrixXd weighted = xv.array().colwise() * dpred.array();
    const VectorXd x2 = inputs.array().square().matrix().transpose() * dpred;
    g.factors = inputs.transpose() * weighted - (factors.array().colwise() * x2.array()).matrix() +
                2.0 * ridge_weight * factors;
  }
  if (kind == MaskKind::kHighOrder && output_weights.size() > 0) {
    g.output_weights = hidden.transpose() * dpred + 2.0 * ridge_weight * output_weights;
    const MatrixXd dz = (dpred * output_weights.transpose()).array() * (1.0 - hidden.array().square());
    g.hidden_weights = dz.transpose() * inputs + 2.0 * ridge_weight * hidden_weights;
    g.hidden_bias = dz.colwise().sum().transpose();
  }
  *gradient = g.parameters();
  return value;
}

bool MaskModel::finite() const { return parameters().allFinite(); }

nlohmann::json MaskModel::to_json() const {
  auto matrix = [](const MatrixXd& m) {
    return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()},
                          {"data", std::vector<double>(m.data(), m.data() + m.size())}};
  };
  auto vec = [](const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"kind", to_string(kind)},
          {"user_dim", features.user_dim},
          {"item_dim", features.item_dim},
          {"bias", bias},
          {"linear", vec(linear)},
          {"factors", matrix(factors)},
          {"hidden_weights", matrix(hidden_weights)},
          {"hidden_bias", vec(hidden_bias)},
          {"output_weights", vec(output_weights)}};
}

MaskModel MaskModel::from_json(const nlohmann::json& j) {
  auto matrix = [](const nlohmann::json& m) {
    const auto data = m.at("data").get<std::vector<double>>();
    const Eigen::Index rows = m.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = m.at("cols").get<Eigen::Index>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ParseError("mask model: matrix size mismatch");
    return MatrixXd(Eigen::Map<const MatrixXd>(data.data(), rows, cols));
  };
  auto vec = [](const nlohmann::json& v) {
    const auto data = v.get<std::vector<double>>();
    return VectorXd(Eigen::Map<const VectorXd>(data.data(), static_cast<Eigen::Index>(data.size())));
  };
  try {
    MaskModel m;
    m.kind = mask_kind_from_string(j.at("kind").get<std::string>());
    m.features = {j.at("user_dim").get<Eigen::Index>(), j.at("item_dim").get<Eigen::Index>()};
    m.bias = j.at("bias").get<double>();
    m.linear = vec(j.at("linear"));
    m.factors = matrix(j.at("factors"));
    m.hidden_weights = matrix(j.at("hidden_weights"));
    m.hidden_bias = vec(j.at("hidden_bias"));
    m.output_weights = vec(j.at("output_weights"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("mask model: ") + e.what());
  }
}

MaskModel init_mask_model(MaskKind kind, const FeatureSpec& features, double bias, const MaskHyperparams& hyper) {
  Rng rng(derive_seed(hyper.seed, 0x4d41534bULL));
  MaskModel model = MaskModel::constant(kind, features, bias);
  const Eigen::Index d = features.input_dim();
  if (kind == MaskKind::kTwoOrder) {
    model.factors.resize(d, hyper.fm_factors);
    fill_normal(model.factors, rng, 0.01);
  } else if (kind == MaskKind::kHighOrder) {
    const Eigen::Index h = hyper.hidden_units;
    model.hidden_weights.resize(h, d);
    fill_normal(model.hidden_weights, rng, 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(d, 1))));
    model.hidden_bias = VectorXd::Zero(h);
    model.output_weights.resize(h);
    for (Eigen::Index j = 0; j < h; ++j) model.output_weights(j) = rng.normal(0.0, 1.0 / std::sqrt(static_cast<double>(h)));
  }
  return model;
}

void descend_mask_model(MaskModel& model, const MaskObjective& objective, const MaskHyperparams& hyper) {
  VectorXd theta = model.parameters();
  VectorXd grad;
  double value = objective(model, &grad);
  double rate = hyper.learning_rate;
  MaskModel trial = model;
  VectorXd trial_grad;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    const VectorXd candidate = theta - rate * grad;
    trial.set_parameters(candidate);
    const double trial_value = objective(trial, &trial_grad);
    if (std::isfinite(trial_value) && trial_value <= value) {
      theta = candidate;
      value = trial_value;
      grad.swap(trial_grad);
    } else {
      rate *= 0.5;
      if (rate < 1e-12) break;
    }
  }
  model.set_parameters(theta);
}

MaskModel train_mask_model(const MatrixXd& inputs, const VectorXd& targets, const FeatureSpec& features,
                           MaskKind kind, const MaskHyperparams& hyper) {
  const Eigen::Index n = inputs.rows();
  if (n == 0) throw ConfigError("train_mask_model: empty train split");
  if (targets.size() != n || inputs.cols() != features.input_dim())
    throw std::invalid_argument("train_mask_model: inputs, targets and feature spec disagree");
  if (hyper.l2 < 0.0 || hyper.learning_rate <= 0.0 || hyper.epochs < 0 || hyper.fm_factors < 1 || hyper.hidden_units < 1)
    throw ConfigError("invalid mask hyperparameters");

  const double mean = targets.mean();
  if (n == 1) return MaskModel::constant(kind, features, mean);

  double bias = mean;
  VectorXd w;
  const bool have_ridge = hyper.closed_form_init && kind != MaskKind::kHighOrder &&
                          ridge(inputs, targets, hyper.l2, bias, w);
  if (kind == MaskKind::kOneOrder && have_ridge) {
    MaskModel model = MaskModel::constant(kind, features, bias);
    model.linear = w;
    return model;
  }
  MaskModel model = init_mask_model(kind, features, have_ridge ? bias : mean, hyper);
  if (have_ridge) model.linear = w;
  descend_mask_model(
      model, [&](const MaskModel& m, VectorXd* g) { return m.objective(inputs, targets, hyper.l2, g); }, hyper);
  return model;
}

MaskModel train_mask_model(const PartySplit& split, const Dataset& dataset, MaskKind kind,
                           const MaskHyperparams& hyper) {
  if (split.train.empty()) throw ConfigError("train_mask_model: empty train split");
  const MatrixXd inputs = mask_inputs(dataset, split.train);
  VectorXd targets(static_cast<Eigen::Index>(split.train.size()));
  for (std::size_t r = 0; r < split.train.size(); ++r) targets(r) = split.train[r].rating;
  MaskHyperparams local = hyper;
  local.seed = derive_seed(hyper.seed, split.user_id);
  return train_mask_model(inputs, targets, {dataset.user_features.cols(), dataset.item_features.cols()}, kind, local);
}

std::vector<MaskedRating> mask_ratings(const PartySplit& split, const Dataset& dataset, const MaskModel& model) {
  std::vector<MaskedRating> out;
  out.reserve(split.train.size());
  if (split.train.empty()) return out;
  const VectorXd f = model.predict_rows(mask_inputs(dataset, split.train));
  for (std::size_t r = 0; r < split.train.size(); ++r) {
    const RatingTriple& t = split.train[r];
    out.push_back({t.user_id, t.item_id, t.rating - f(r)});
  }
  return out;
}

double predict_fedmmf(const Eigen::Ref<const VectorXd>& p_u, const VectorXd* q_i, double mask_output) {
  if (q_i == nullptr) return mask_output;
  if (q_i->size() != p_u.size()) throw std::invalid_argument("predict_fedmmf: dimension mismatch");
  return q_i->dot(p_u) + mask_output;
}

double privacy_indicator(std::span<const double> predictions, std::span<const double> ratings,
                         const RatingScale& scale) {
  if (predictions.size() != ratings.size() || predictions.empty())
    throw std::invalid_argument("privacy_indicator: need matching nonempty samples");
  double total = 0.0;
  for (std::size_t j = 0; j < ratings.size(); ++j) {
    const double d = scale.to_unit(ratings[j]) - scale.to_unit(predictions[j]);
    total += d * d;
  }
  return total / static_cast<double>(ratings.size());
}

PrivacyReport estimate_privacy_indicator(const MaskModel& model, const PartySplit& split, const Dataset& dataset) {
  PrivacyReport report;
  report.user_id = split.user_id;
  const bool use_train = split.validation.empty();
  const auto& sample = use_train ? split.train : split.validation;
  report.optimistic = use_train;
  report.n_samples = sample.size();
  if (sample.empty()) return report;
  const VectorXd f = model.predict_rows(mask_inputs(dataset, sample));
  std::vector<double> ratings(sample.size());
  for (std::size_t j = 0; j < sample.size(); ++j) ratings[j] = sample[j].rating;
  report.j_estimate = privacy_indicator(std::span<const double>(f.data(), static_cast<std::size_t>(f.size())),
                                        ratings, dataset.scale);
  return report;
}

PartyGroup assign_group(const PrivacyReport& report, double th_j) {
  // A nonpositive threshold trusts nobody, even a perfect local model.
  if (th_j <= 0.0) return PartyGroup::kInsecure;
  return report.j_estimate <= th_j ? PartyGroup::kSecure : PartyGroup::kInsecure;
}

double sample_complexity_bound(std::uint64_t hypothesis_count, double epsilon, double delta) {
  if (hypothesis_count < 1) throw ConfigError("hypothesis count must be >= 1");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
  if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in (0, 1]");
  return std::log(2.0 * static_cast<double>(hypothesis_count) / delta) / (epsilon * epsilon);
}

}  // namespace fedmmf
