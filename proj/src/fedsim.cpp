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

#include "fedmmf/fedsim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "fedmmf/errors.hpp"
#include "fedmmf/random.hpp"

namespace fedmmf {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Clock = std::chrono::steady_clock;

// Purpose tags for derive_seed.
constexpr std::uint64_t kSplitTag = 0x53504c4954ULL;
constexpr std::uint64_t kInitTag = 0x494e4954ULL;
constexpr std::uint64_t kMaskTag = 0x4d41534bULL;
constexpr std::uint64_t kGroupTag = 0x47524f5550ULL;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Static contiguous chunks; each index writes only its own slot, so results
// do not depend on scheduling.
template <typename F>
void parallel_for(std::size_t n, int threads, F&& body) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
  if (workers <= 1) {
    for (std::size_t j = 0; j < n; ++j) body(j);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t j = w * chunk; j < std::min(n, (w + 1) * chunk); ++j) body(j);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

mf::FactorMatrix<double> gather_rows(const mf::FactorMatrix<double>& q, const std::vector<RatingTriple>& ratings) {
  mf::FactorMatrix<double> rows(static_cast<Eigen::Index>(ratings.size()), q.cols());
  for (std::size_t r = 0; r < ratings.size(); ++r) rows.row(r) = q.row(ratings[r].item_id);
  return rows;
}

struct Evaluation {
  mf::ErrorMetrics validation{std::nan(""), std::nan("")};
  mf::ErrorMetrics test{std::nan(""), std::nan("")};
};

mf::ErrorMetrics metrics_or_nan(const std::vector<double>& pred, const std::vector<double>& truth) {
  if (pred.empty()) return {std::nan(""), std::nan("")};
  return mf::rmse_mae(pred, truth);
}

// Predictions for every party's validation and test ratings, pooled.
template <typename Predict>
Evaluation evaluate(const std::vector<PartyState>& parties, const RatingScale& scale, Predict&& predict) {
  std::vector<double> vp, vt, tp, tt;
  for (const PartyState& party : parties) {
    for (const RatingTriple& t : party.split.validation) {
      vp.push_back(scale.clip(predict(party, t)));
      vt.push_back(t.rating);
    }
    for (const RatingTriple& t : party.split.test) {
      tp.push_back(scale.clip(predict(party, t)));
      tt.push_back(t.rating);
    }
  }
  return {metrics_or_nan(vp, vt), metrics_or_nan(tp, tt)};
}

std::vector<PartyState> make_parties(const Dataset& dataset, const ExperimentConfig& config, std::uint64_t seed) {
  std::vector<PartySplit> splits = split_all(dataset, config.split, derive_seed(seed, kSplitTag));
  std::vector<PartyState> parties;
  parties.reserve(splits.size());
  for (PartySplit& s : splits) {
    if (s.train.empty()) continue;
    PartyState p;
    p.user_id = s.user_id;
    p.split = std::move(s);
    parties.push_back(std::move(p));
  }
  return parties;
}

struct MaskPhase {
  std::vector<PrivacyReport> privacy;
  double seconds = 0.0;
};

MaskPhase train_masks(std::vector<PartyState>& parties, const Dataset& dataset, const ExperimentConfig& config,
                      std::uint64_t seed) {
  const auto start = Clock::now();
  MaskHyperparams hyper = config.mask;
  hyper.seed = derive_seed(config.mask.seed, seed, kMaskTag);
  const FeatureSpec features{dataset.user_features.cols(), dataset.item_features.cols()};
  MaskPhase phase;
  phase.privacy.resize(parties.size());
  parallel_for(parties.size(), config.threads, [&](std::size_t j) {
    PartyState& party = parties[j];
    party.mask_model = config.algorithm.zero_mask
                           ? MaskModel::constant(config.algorithm.mask, features, 0.0)
                           : train_mask_model(party.split, dataset, config.algorithm.mask, hyper);
    party.masked_ratings = mask_ratings(party.split, dataset, *party.mask_model);
    PrivacyReport report = estimate_privacy_indicator(*party.mask_model, party.split, dataset);
    // th_j = 0 puts every party in the masked insecure group.
    report.group = assign_group(report, config.th_j);
    party.group = report.group;
    phase.privacy[j] = report;
  });
  phase.seconds = seconds_since(start);
  return phase;
}

double mf_loss(const std::vector<PartyState>& parties, const mf::FactorMatrix<double>& q, double lambda) {
  double total = 0.0;
  for (const PartyState& party : parties) {
    const VectorXd targets = party.targets();
    const double p_sq = party.p.squaredNorm();
    for (std::size_t r = 0; r < party.split.train.size(); ++r) {
      const auto qi = q.row(party.split.train[r].item_id);
      const double e = targets(r) - mf::predict(party.p, qi.transpose());
      total += 0.5 * e * e + lambda * (qi.squaredNorm() + p_sq);
    }
  }
  return total;
}

struct LeakageRecorder {
  std::size_t party_index = 0;
  int filled = 0;
  std::vector<VectorXd> q[2], eta[2];
  VectorXd p[2];

  void push(const mf::FactorMatrix<double>& rows, const PlainSubmission& grads, const VectorXd& p_after) {
    q[0] = std::move(q[1]);
    eta[0] = std::move(eta[1]);
    p[0] = std::move(p[1]);
    q[1].clear();
    eta[1].clear();
    for (Eigen::Index r = 0; r < rows.rows(); ++r) q[1].push_back(rows.row(r).transpose());
    for (Eigen::Index r = 0; r < grads.eta.rows(); ++r) eta[1].push_back(grads.eta.row(r).transpose());
    p[1] = p_after;
    filled = std::min(filled + 1, 2);
  }
};

// The shared round loop of FedMF and FedMMF.
RunResult run_rounds(const ExperimentConfig& config, const Dataset& dataset, std::uint64_t seed,
                     std::vector<PartyState> parties, bool masked) {
  RunResult result;
  result.label = config.algorithm.label();
  result.seed = seed;
  const mf::Hyperparams& hyper = config.hyper;
  const std::size_t k = static_cast<std::size_t>(hyper.k);

  mf::LatentFactorsd factors = mf::init_factors<double>(dataset.n_users, dataset.n_items, hyper.k,
                                                        derive_seed(hyper.seed, seed, kInitTag), hyper.init_scale);
  for (PartyState& party : parties) party.p = factors.users.row(party.user_id).transpose();

  ServerState server;
  server.item_factors = factors.items;
  server.config = {hyper.gamma, hyper.lambda, dataset.n_items, hyper.k};

  // Insecure group setup: item participant lists are announced, keys agreed.
  std::vector<Index> insecure;
  for (const PartyState& party : parties)
    if (party.group == PartyGroup::kInsecure) insecure.push_back(party.user_id);
  std::vector<std::vector<Index>> item_participants(dataset.n_items);
  std::vector<char> item_trained(dataset.n_items, 0);
  for (const PartyState& party : parties) {
    for (const RatingTriple& t : party.split.train) {
      item_trained[t.item_id] = 1;
      if (party.group == PartyGroup::kInsecure) item_participants[t.item_id].push_back(party.user_id);
    }
  }
  for (auto& list : item_participants) std::sort(list.begin(), list.end());
  config.field.validate(std::max<std::size_t>(parties.size(), 1), config.max_gradient_abs);

  const auto start = Clock::now();
  InsecureGroup group;
  if (!insecure.empty()) {
    group = InsecureGroup(insecure, config.threshold, derive_seed(seed, kGroupTag), config.field);
    // Seeds are agreed only with co-raters, the peers whose masks can meet
    // on some item. Both ends of a pair derive the same seed, so the
    // simulation computes it once and hands it to both books.
    std::vector<std::size_t> index_of(dataset.n_users, parties.size());
    for (std::size_t j = 0; j < parties.size(); ++j) index_of[parties[j].user_id] = j;
    std::vector<std::vector<Index>> higher_peers(parties.size());
    parallel_for(parties.size(), config.threads, [&](std::size_t j) {
      if (parties[j].group != PartyGroup::kInsecure) return;
      const Index u = parties[j].user_id;
      std::vector<Index>& peers = higher_peers[j];
      for (const RatingTriple& t : parties[j].split.train) {
        const auto& list = item_participants[t.item_id];
        peers.insert(peers.end(), std::upper_bound(list.begin(), list.end(), u), list.end());
      }
      std::sort(peers.begin(), peers.end());
      peers.erase(std::unique(peers.begin(), peers.end()), peers.end());
    });
    std::vector<std::vector<PairSeed>> seeds(parties.size());
    parallel_for(parties.size(), config.threads, [&](std::size_t j) {
      for (Index v : higher_peers[j]) seeds[j].push_back(group.pair_seed(parties[j].user_id, v));
    });
    for (std::size_t j = 0; j < parties.size(); ++j) {
      for (std::size_t c = 0; c < higher_peers[j].size(); ++c) {
        const Index v = higher_peers[j][c];
        parties[j].pair_seeds.emplace(v, seeds[j][c]);
        parties[index_of[v]].pair_seeds.emplace(parties[j].user_id, seeds[j][c]);
      }
    }
  }
  if (config.record_transcript) {
    for (const PartyState& party : parties)
      server.transcript.push_back({MessageKind::kGroupTag, party.user_id, 0, 1});
  }

  // Leakage targets: fewest train ratings first, then by id.
  std::vector<LeakageRecorder> recorders;
  {
    std::vector<std::size_t> order(parties.size());
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return parties[a].split.train.size() < parties[b].split.train.size();
    });
    const std::size_t n = std::min<std::size_t>(order.size(), static_cast<std::size_t>(config.leakage_parties));
    for (std::size_t j = 0; j < n; ++j) {
      LeakageRecorder rec;
      rec.party_index = order[j];
      recorders.push_back(std::move(rec));
    }
  }
  std::vector<int> recorder_of(parties.size(), -1);
  for (std::size_t r = 0; r < recorders.size(); ++r) recorder_of[recorders[r].party_index] = static_cast<int>(r);

  auto predict = [&](const mf::FactorMatrix<double>& q) {
    return [&, masked](const PartyState& party, const RatingTriple& t) {
      const VectorXd qi = q.row(t.item_id).transpose();
      if (!masked) return mf::predict(party.p, qi);
      const double f = party.mask_model->predict(mask_input(dataset, t.user_id, t.item_id));
      return predict_fedmmf(party.p, item_trained[t.item_id] ? &qi : nullptr, f);
    };
  };

  const bool can_stop = config.evaluation.early_stopping &&
                        std::any_of(parties.begin(), parties.end(), [](const PartyState& p) { return !p.split.validation.empty(); });
  double best_validation = std::numeric_limits<double>::infinity();
  int evaluations_since_best = 0;
  Evaluation best_eval;
  mf::FactorMatrix<double> best_q = server.item_factors;
  std::vector<VectorXd> best_p;

  std::vector<std::vector<std::uint8_t>> outbox(parties.size());
  std::vector<mf::FactorMatrix<double>> downloaded(parties.size());
  std::vector<PlainSubmission> grads(parties.size());

  for (int t = 1; t <= hyper.epochs; ++t) {
    const auto round = static_cast<std::uint32_t>(t);
    server.round = round;
    std::set<Index> dropping;
    for (const DropoutEvent& d : config.dropouts)
      if (d.round == round) dropping.insert(d.party);

    parallel_for(parties.size(), config.threads, [&](std::size_t j) {
      PartyState& party = parties[j];
      if (dropping.count(party.user_id)) {
        wire::RoundMessage bye;
        bye.party = party.user_id;
        bye.round = round;
        bye.group = party.group == PartyGroup::kSecure ? wire::GroupTag::kSecure : wire::GroupTag::kInsecure;
        bye.alive = false;
        bye.k = static_cast<std::uint32_t>(k);
        outbox[j] = wire::encode(bye);
        grads[j] = PlainSubmission{party.user_id, {}, {}};
        return;
      }
      downloaded[j] = gather_rows(server.item_factors, party.split.train);
      grads[j] = masked_update(party, downloaded[j], hyper);
      outbox[j] = wire::encode(emit_update(party, grads[j], round, group, item_participants, config.field,
                                           config.max_gradient_abs));
    });

    for (std::size_t j = 0; j < parties.size(); ++j) {
      const int r = recorder_of[j];
      if (r >= 0 && !grads[j].items.empty()) recorders[r].push(downloaded[j], grads[j], parties[j].p);
    }

    AggregationRound agg;
    agg.round = round;
    agg.n_items = dataset.n_items;
    agg.k = k;
    agg.item_participants = &item_participants;
    for (std::size_t j = 0; j < parties.size(); ++j) {
      const wire::RoundMessage message = wire::decode(outbox[j]);
      if (config.record_transcript) {
        server.transcript.push_back({MessageKind::kItemRequest, message.party, round, 4 * parties[j].split.train.size()});
        server.transcript.push_back({MessageKind::kGradient, message.party, round, outbox[j].size()});
      }
      if (!message.alive) {
        if (message.group == wire::GroupTag::kInsecure) agg.dropouts.insert(message.party);
        continue;
      }
      if (message.group == wire::GroupTag::kSecure) agg.plain.push_back(wire::to_plain(message));
      else agg.masked.push_back(wire::to_masked(message));
    }
    server.aggregate = adaptive_aggregate(agg, group, config.field);
    server.apply_aggregate();
    result.train_loss.push_back(mf_loss(parties, server.item_factors, hyper.lambda));
    result.rounds_run = t;

    if (t % config.evaluation.every == 0 || t == hyper.epochs) {
      const Evaluation eval = evaluate(parties, dataset.scale, predict(server.item_factors));
      result.history.push_back({t, eval.validation, eval.test});
      if (!can_stop) {
        best_eval = eval;
        result.best_round = t;
      } else if (eval.validation.rmse < best_validation) {
        best_validation = eval.validation.rmse;
        evaluations_since_best = 0;
        best_eval = eval;
        result.best_round = t;
        best_q = server.item_factors;
        best_p.clear();
        for (const PartyState& party : parties) best_p.push_back(party.p);
      } else if (++evaluations_since_best >= config.evaluation.patience) {
        break;
      }
    }
  }

  if (can_stop && !best_p.empty()) {
    server.item_factors = best_q;
    for (std::size_t j = 0; j < parties.size(); ++j) parties[j].p = best_p[j];
  }
  result.seconds_federated = seconds_since(start);
  result.test = best_eval.test;
  result.validation = best_eval.validation;

  factors.items = server.item_factors;
  for (const PartyState& party : parties) factors.users.row(party.user_id) = party.p.transpose();
  result.factors = std::move(factors);
  result.transcript = std::move(server.transcript);

  for (const LeakageRecorder& rec : recorders) {
    if (rec.filled < 2) continue;
    const PartyState& party = parties[rec.party_index];
    LeakageSnapshot snap;
    snap.party = party.user_id;
    snap.gamma = hyper.gamma;
    snap.lambda = hyper.lambda;
    for (const RatingTriple& t : party.split.train) {
      snap.items.push_back(t.item_id);
      snap.truth_ratings.push_back(t.rating);
    }
    snap.q_prev = rec.q[0];
    snap.q_curr = rec.q[1];
    snap.eta_prev = rec.eta[0];
    snap.eta_curr = rec.eta[1];
    snap.truth_p_prev = rec.p[0];
    snap.truth_p_curr = rec.p[1];
    const VectorXd targets = party.targets();
    snap.truth_targets.assign(targets.data(), targets.data() + targets.size());
    result.leakage.push_back(std::move(snap));
  }

  for (const PartyState& party : parties) {
    if (party.group == PartyGroup::kSecure) ++result.n_secure;
    else ++result.n_insecure;
  }
  result.parties = std::move(parties);
  return result;
}

}  // namespace

VectorXd PartyState::targets() const {
  VectorXd out(static_cast<Eigen::Index>(split.train.size()));
  if (mask_model.has_value()) {
    if (masked_ratings.size() != split.train.size()) throw std::logic_error("masked ratings out of sync with train split");
    for (std::size_t r = 0; r < masked_ratings.size(); ++r) out(r) = masked_ratings[r].value;
  } else {
    for (std::size_t r = 0; r < split.train.size(); ++r) out(r) = split.train[r].rating;
  }
  return out;
}

void ServerState::apply_aggregate() {
  if (aggregate.rows() != item_factors.rows() || aggregate.cols() != item_factors.cols())
    throw ProtocolError("aggregate shape does not match the item factors");
  item_factors -= config.gamma * aggregate;
}

PlainSubmission masked_update(PartyState& party, const Eigen::Ref<const mf::FactorMatrix<double>>& item_rows,
                                                      const mf::Hyperparams& hyper) {
  const VectorXd targets = party.targets();
  const std::size_t n = party.split.train.size();
  if (static_cast<std::size_t>(item_rows.rows()) != n) throw std::invalid_argument("masked_update: one q row per rated item");
  VectorXd errors(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) errors(r) = targets(r) - mf::predict(party.p, item_rows.row(r).transpose());
  party.p = mf::update_user(party.p, item_rows, errors, hyper.gamma, hyper.lambda);
  PlainSubmission out{party.user_id, std::vector<Index>(n), GradientRows(static_cast<Eigen::Index>(n), party.p.size())};
  for (std::size_t r = 0; r < n; ++r) {
    const auto q = item_rows.row(r).transpose();
    const double e = targets(r) - mf::predict(party.p, q);
    out.items[r] = party.split.train[r].item_id;
    out.eta.row(static_cast<Eigen::Index>(r)) = mf::item_gradient(q, party.p, e, hyper.lambda).transpose();
  }
  return out;
}

wire::RoundMessage emit_update(const PartyState& party, const PlainSubmission& gradients,
                               std::uint32_t round, const InsecureGroup& group,
                               const std::vector<std::vector<Index>>& item_participants, const FieldParams& params,
                               double max_gradient_abs) {
  const auto k = static_cast<std::uint32_t>(gradients.items.empty() ? party.p.size() : gradients.eta.cols());
  if (party.group == PartyGroup::kSecure) return wire::from_plain(gradients, round, k);
  if (!group.contains(party.user_id)) throw ProtocolError("insecure party missing from the key agreement");
  MaskedSubmission masked{party.user_id, {}};
  PairMasker masker(party.user_id, party.pair_seeds, round, params);
  masked.gradients.reserve(gradients.items.size());
  for (std::size_t j = 0; j < gradients.items.size(); ++j) {
    const Index item = gradients.items[j];
    const VectorXd eta = gradients.eta.row(static_cast<Eigen::Index>(j)).transpose();
    if (eta.cwiseAbs().maxCoeff() > max_gradient_abs)
      throw EncodingError("gradient of party " + std::to_string(party.user_id) + " exceeds max_gradient_abs");
    const auto& peers = item_participants.at(item);
    masked.gradients.emplace_back(item, masker.mask(encode(eta, params), peers, item));
  }
  return wire::from_masked(masked, round, k);
}

MaskModel train_context_model(std::span<const ContextShard> shards, const FeatureSpec& features, MaskKind kind,
                              const MaskHyperparams& hyper) {
  if (shards.empty()) throw ConfigError("train_context_model: no parties");
  double bias = 0.0;
  for (const ContextShard& s : shards) {
    if (s.targets.size() == 0) throw ConfigError("train_context_model: party without training data");
    bias += s.targets.mean();
  }
  bias /= static_cast<double>(shards.size());
  MaskModel model = init_mask_model(kind, features, bias, hyper);
  const double weight = 1.0 / static_cast<double>(shards.size());
  descend_mask_model(
      model,
      [&](const MaskModel& m, VectorXd* gradient) {
        double value = 0.0;
        VectorXd g;
        if (gradient != nullptr) gradient->setZero(m.parameters().size());
        for (const ContextShard& s : shards) {
          value += weight * m.objective(s.inputs, s.targets, hyper.l2, gradient ? &g : nullptr);
          if (gradient != nullptr) *gradient += weight * g;
        }
        return value;
      },
      hyper);
  return model;
}

RunResult run_fedmf(const ExperimentConfig& config, const Dataset& dataset, std::uint64_t seed) {
  config.validate();
  if (config.algorithm.algorithm != Algorithm::kFedMF) throw ConfigError("algorithm.name: run_fedmf needs fedmf");
  std::vector<PartyState> parties = make_parties(dataset, config, seed);
  for (PartyState& p : parties) p.group = PartyGroup::kSecure;
  return run_rounds(config, dataset, seed, std::move(parties), false);
}

RunResult run_fedmmf(const ExperimentConfig& config, const Dataset& dataset, std::uint64_t seed) {
  config.validate();
  if (config.algorithm.algorithm != Algorithm::kFedMMF) throw ConfigError("algorithm.name: run_fedmmf needs fedmmf");
  std::vector<PartyState> parties = make_parties(dataset, config, seed);
  MaskPhase phase = train_masks(parties, dataset, config, seed);
  RunResult result = run_rounds(config, dataset, seed, std::move(parties), true);
  result.privacy = std::move(phase.privacy);
  result.seconds_local = phase.seconds;
  return result;
}

RunResult run_baseline(const ExperimentConfig& config, const Dataset& dataset, std::uint64_t seed) {
  config.validate();
  const Algorithm a = config.algorithm.algorithm;
  if (a != Algorithm::kLocalOnly && a != Algorithm::kFedContext)
    throw ConfigError("algorithm.name: run_baseline needs local or fedcontext");
  RunResult result;
  result.label = config.algorithm.label();
  result.seed = seed;
  std::vector<PartyState> parties = make_parties(dataset, config, seed);
  const FeatureSpec features{dataset.user_features.cols(), dataset.item_features.cols()};
  MaskHyperparams hyper = config.mask;
  hyper.seed = derive_seed(config.mask.seed, seed, kMaskTag);
  const auto start = Clock::now();

  Evaluation eval;
  if (a == Algorithm::kLocalOnly) {
    parallel_for(parties.size(), config.threads, [&](std::size_t j) {
      parties[j].mask_model = train_mask_model(parties[j].split, dataset, config.algorithm.mask, hyper);
      parties[j].masked_ratings = mask_ratings(parties[j].split, dataset, *parties[j].mask_model);
    });
    result.seconds_local = seconds_since(start);
    eval = evaluate(parties, dataset.scale, [&](const PartyState& party, const RatingTriple& t) {
      return party.mask_model->predict(mask_input(dataset, t.user_id, t.item_id));
    });
  } else {
    std::vector<ContextShard> shards(parties.size());
    parallel_for(parties.size(), config.threads, [&](std::size_t j) {
      shards[j].inputs = mask_inputs(dataset, parties[j].split.train);
      shards[j].targets.resize(static_cast<Eigen::Index>(parties[j].split.train.size()));
      for (std::size_t r = 0; r < parties[j].split.train.size(); ++r) shards[j].targets(r) = parties[j].split.train[r].rating;
    });
    const MaskModel global = train_context_model(shards, features, config.algorithm.mask, hyper);
    result.seconds_federated = seconds_since(start);
    eval = evaluate(parties, dataset.scale, [&](const PartyState&, const RatingTriple& t) {
      return global.predict(mask_input(dataset, t.user_id, t.item_id));
    });
  }
  result.test = eval.test;
  result.validation = eval.validation;
  result.parties = std::move(parties);
  return result;
}

RunResult run_experiment(const ExperimentConfig& config, const Dataset& dataset, int repetition) {
  const std::uint64_t seed = config.seed_base + static_cast<std::uint64_t>(repetition);
  switch (config.algorithm.algorithm) {
    case Algorithm::kFedMF: return run_fedmf(config, dataset, seed);
    case Algorithm::kFedMMF: return run_fedmmf(config, dataset, seed);
    case Algorithm::kLocalOnly:
    case Algorithm::kFedContext: return run_baseline(config, dataset, seed);
  }
  throw ConfigError("algorithm.name: unknown algorithm");
}

}  // namespace fedmmf
