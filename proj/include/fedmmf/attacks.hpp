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

// Leakage quantification: solving consecutive-gradient systems for the rating,
// plus recovery and ranking attacks on masked ratings.

#ifndef FEDMMF_ATTACKS_HPP_
#define FEDMMF_ATTACKS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedmmf/dataset.hpp"

namespace fedmmf {

// Observations the server has for one party over two consecutive rounds,
// one entry per rated item. Unknowns are p_prev, p_curr and one rating per
// item.
struct LeakageInstance {
  double gamma = 0.0;
  double lambda = 0.0;
  std::vector<Eigen::VectorXd> q_prev, q_curr, eta_prev, eta_curr;

  std::size_t n_items() const { return q_prev.size(); }
  Eigen::Index k() const { return q_prev.empty() ? 0 : q_prev.front().size(); }
};

struct LeakageTruth {
  Eigen::VectorXd p_prev, p_curr;
  std::vector<double> ratings;
};

// Simulates two MaskedUpdate rounds from `p_start` with the given targets
// (raw or masked ratings) and returns what the server observes.
LeakageInstance forward_leakage_instance(const Eigen::VectorXd& p_start,
                                         const std::vector<Eigen::VectorXd>& q_prev,
                                         const std::vector<Eigen::VectorXd>& q_curr,
                                         const std::vector<double>& targets, double gamma,
                                         double lambda, LeakageTruth* truth = nullptr);

// Residual of the gradient and user-update equations at a candidate solution
// (p_prev, p_curr, ratings) stacked as one vector.
Eigen::VectorXd leakage_residual(const LeakageInstance& instance,
                                 const Eigen::VectorXd& unknowns);

struct LeakageOptions {
  int starts = 16;
  int max_iterations = 200;
  double resolved_tolerance = 1e-6;
  std::uint64_t seed = 0;
};

struct LeakageSolution {
  std::vector<double> ratings;
  Eigen::VectorXd p_prev, p_curr;
  double residual_norm = 0.0;
  bool resolved = false;
  // Jacobian rank-deficient at the solution: the ratings are not identified.
  bool ambiguous = false;
  int starts_tried = 0;
};

// Multi-start Levenberg-Marquardt on the residual; keeps the lowest-residual
// solution. The system is invariant under (p, r) -> (-p, -r), so the result is
// reported on the branch whose ratings sum to a nonnegative value.
LeakageSolution gradient_leakage_solve(const LeakageInstance& instance,
                                       const LeakageOptions& options = {});

struct PartyRatings {
  Index party = 0;
  std::vector<Index> items;
  std::vector<double> masked;
  std::vector<double> original;
};

// Rescales masked values affinely onto [min, max] of the party's original
// ratings; a rating is recovered at level g if it lands within
// g * scale.step of the truth. Returns one rate per level.
std::vector<double> recovery_attack(std::span<const double> masked,
                                    std::span<const double> original, const RatingScale& scale,
                                    std::span<const double> error_levels);

// Overlap of the top-h items by masked value with the top-h items by original
// rating, ties broken by ascending item id. Empty when the party has fewer
// than ceil(1/h) items.
std::optional<double> ranking_attack(std::span<const Index> items, std::span<const double> masked,
                                     std::span<const double> original, double top_proportion);

struct Histogram {
  std::string metric;  // "alpha_g1", "beta_h0.01", ...
  std::vector<double> bin_low, bin_high;
  std::vector<std::size_t> counts;
  std::size_t attacked = 0;

  double proportion(std::size_t bin) const;
};

struct PartyAttackRow {
  Index party = 0;
  std::size_t n_items = 0;
  std::vector<double> alpha;                // per error level
  std::vector<std::optional<double>> beta;  // per top proportion
};

struct AttackReport {
  std::vector<double> error_levels;
  std::vector<double> top_proportions;
  std::vector<PartyAttackRow> rows;
  std::vector<Histogram> alpha_histograms;
  std::vector<Histogram> beta_histograms;

  // Fraction of attacked parties whose rate is strictly above (alpha) or at
  // least (beta) the cutoff.
  double fraction_alpha_above(std::size_t level, double cutoff) const;
  double fraction_beta_at_least(std::size_t level, double cutoff) const;
};

AttackReport attack_report(std::span<const PartyRatings> parties, const RatingScale& scale,
                           std::span<const double> error_levels,
                           std::span<const double> top_proportions, int n_bins = 10);

// attack_report.csv plus histogram_<metric>.csv per level.
void write_attack_report(const AttackReport& report, const std::filesystem::path& directory);

std::string format_level(double value);

}  // namespace fedmmf

#endif  // FEDMMF_ATTACKS_HPP_
