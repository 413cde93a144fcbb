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

#include "fedmmf/attacks.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "fedmmf/errors.hpp"
#include "fedmmf/random.hpp"

namespace fedmmf {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void check_instance(const LeakageInstance& in) {
  const std::size_t m = in.n_items();
  if (m == 0) throw std::invalid_argument("leakage instance has no items");
  if (in.q_curr.size() != m || in.eta_prev.size() != m || in.eta_curr.size() != m)
    throw std::invalid_argument("leakage instance: per-item lists differ in length");
}

// One MaskedUpdate on a single party: returns the updated p and fills eta.
VectorXd masked_step(const VectorXd& p, const std::vector<VectorXd>& q, const std::vector<double>& targets,
                     double gamma, double lambda, std::vector<VectorXd>& eta) {
  VectorXd step = VectorXd::Zero(p.size());
  for (std::size_t i = 0; i < q.size(); ++i) step += lambda * p - (targets[i] - q[i].dot(p)) * q[i];
  const VectorXd next = p - gamma * step;
  eta.clear();
  for (std::size_t i = 0; i < q.size(); ++i) eta.push_back(lambda * q[i] - (targets[i] - q[i].dot(next)) * next);
  return next;
}

MatrixXd leakage_jacobian(const LeakageInstance& in, const VectorXd& x) {
  const Eigen::Index k = in.k();
  const std::size_t m = in.n_items();
  const VectorXd pa = x.head(k);
  const VectorXd pb = x.segment(k, k);
  MatrixXd jac = MatrixXd::Zero(static_cast<Eigen::Index>(2 * m) * k + k, 2 * k + static_cast<Eigen::Index>(m));
  const MatrixXd eye = MatrixXd::Identity(k, k);
  for (std::size_t i = 0; i < m; ++i) {
    const double r = x(2 * k + static_cast<Eigen::Index>(i));
    const Eigen::Index ra = static_cast<Eigen::Index>(i) * k;
    const Eigen::Index rb = static_cast<Eigen::Index>(m + i) * k;
    const VectorXd& qa = in.q_prev[i];
    const VectorXd& qb = in.q_curr[i];
    jac.block(ra, 0, k, k) = -(r - qa.dot(pa)) * eye + pa * qa.transpose();
    jac.block(ra, 2 * k + i, k, 1) = -pa;
    jac.block(rb, k, k, k) = -(r - qb.dot(pb)) * eye + pb * qb.transpose();
    jac.block(rb, 2 * k + i, k, 1) = -pb;
  }
  const Eigen::Index ru = static_cast<Eigen::Index>(2 * m) * k;
  MatrixXd dpa = -eye;
  for (std::size_t i = 0; i < m; ++i) {
    const VectorXd& qb = in.q_curr[i];
    dpa += in.gamma * (in.lambda * eye + qb * qb.transpose());
    jac.block(ru, 2 * k + i, k, 1) = -in.gamma * qb;
  }
  jac.block(ru, 0, k, k) = dpa;
  jac.block(ru, k, k, k) = eye;
  return jac;
}

// Starting point on the manifold the gradient equations imply: with
// v_i = lambda q_i - eta_i we have v_i = e_i p, so p is parallel to v_i.
VectorXd structured_start(const LeakageInstance& in, Rng& rng) {
  const Eigen::Index k = in.k();
  const std::size_t m = in.n_items();
  VectorXd x(2 * k + static_cast<Eigen::Index>(m));
  std::size_t pivot = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double norm = (in.lambda * in.q_prev[i] - in.eta_prev[i]).norm();
    if (norm > best) {
      best = norm;
      pivot = i;
    }
  }
  VectorXd direction = in.lambda * in.q_prev[pivot] - in.eta_prev[pivot];
  if (best <= 0.0) {
    for (Eigen::Index j = 0; j < k; ++j) direction(j) = rng.normal();
  }
  direction.normalize();
  const VectorXd pa = rng.normal(0.0, 2.0) * direction;
  const double pa_sq = std::max(pa.squaredNorm(), 1e-300);
  VectorXd step = VectorXd::Zero(k);
  for (std::size_t i = 0; i < m; ++i) {
    const VectorXd v = in.lambda * in.q_prev[i] - in.eta_prev[i];
    const double r = in.q_prev[i].dot(pa) + v.dot(pa) / pa_sq;
    x(2 * k + static_cast<Eigen::Index>(i)) = r;
    step += in.lambda * pa - (r - in.q_curr[i].dot(pa)) * in.q_curr[i];
  }
  x.head(k) = pa;
  x.segment(k, k) = pa - in.gamma * step;
  return x;
}

VectorXd random_start(const LeakageInstance& in, Rng& rng) {
  VectorXd x(2 * in.k() + static_cast<Eigen::Index>(in.n_items()));
  for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = rng.normal(0.0, 2.0);
  return x;
}

double levenberg_marquardt(const LeakageInstance& in, VectorXd& x, int max_iterations) {
  VectorXd res = leakage_residual(in, x);
  double cost = res.squaredNorm();
  double mu = 1e-3;
  for (int it = 0; it < max_iterations && cost > 1e-30; ++it) {
    const MatrixXd jac = leakage_jacobian(in, x);
    const MatrixXd jtj = jac.transpose() * jac;
    const VectorXd jtr = jac.transpose() * res;
    bool improved = false;
    for (int attempt = 0; attempt < 30; ++attempt) {
      MatrixXd damped = jtj;
      damped.diagonal().array() += mu * (1.0 + jtj.diagonal().array());
      const VectorXd delta = damped.ldlt().solve(-jtr);
      if (!delta.allFinite()) {
        mu *= 4.0;
        continue;
      }
      const VectorXd candidate = x + delta;
      const VectorXd cand_res = leakage_residual(in, candidate);
      const double cand_cost = cand_res.squaredNorm();
      if (std::isfinite(cand_cost) && cand_cost < cost) {
        const bool stalled = cost - cand_cost <= 1e-16 * cost && delta.norm() <= 1e-14 * (1.0 + x.norm());
        x = candidate;
        res = cand_res;
        cost = cand_cost;
        mu = std::max(mu / 3.0, 1e-15);
        improved = !stalled;
        break;
      }
      mu *= 4.0;
    }
    if (!improved) break;
  }
  return std::sqrt(cost);
}


}  // namespace

LeakageInstance forward_leakage_instance(const VectorXd& p_start, const std::vector<VectorXd>& q_prev,
                                         const std::vector<VectorXd>& q_curr, const std::vector<double>& targets,
                                         double gamma, double lambda, LeakageTruth* truth) {
  if (q_prev.size() != targets.size() || q_curr.size() != targets.size() || targets.empty())
    throw std::invalid_argument("forward_leakage_instance: one q pair per target required");
  LeakageInstance in;
  in.gamma = gamma;
  in.lambda = lambda;
  in.q_prev = q_prev;
  in.q_curr = q_curr;
  const VectorXd pa = masked_step(p_start, q_prev, targets, gamma, lambda, in.eta_prev);
  const VectorXd pb = masked_step(pa, q_curr, targets, gamma, lambda, in.eta_curr);
  if (truth != nullptr) *truth = {pa, pb, targets};
  return in;
}

VectorXd leakage_residual(const LeakageInstance& in, const VectorXd& x) {
  check_instance(in);
  const Eigen::Index k = in.k();
  const std::size_t m = in.n_items();
  if (x.size() != 2 * k + static_cast<Eigen::Index>(m)) throw std::invalid_argument("leakage_residual: wrong unknown count");
  const VectorXd pa = x.head(k);
  const VectorXd pb = x.segment(k, k);
  VectorXd res(static_cast<Eigen::Index>(2 * m) * k + k);
  VectorXd step = VectorXd::Zero(k);
  for (std::size_t i = 0; i < m; ++i) {
    const double r = x(2 * k + static_cast<Eigen::Index>(i));
    const VectorXd& qa = in.q_prev[i];
    const VectorXd& qb = in.q_curr[i];
    res.segment(static_cast<Eigen::Index>(i) * k, k) = in.lambda * qa - (r - qa.dot(pa)) * pa - in.eta_prev[i];
    res.segment(static_cast<Eigen::Index>(m + i) * k, k) = in.lambda * qb - (r - qb.dot(pb)) * pb - in.eta_curr[i];
    step += in.lambda * pa - (r - qb.dot(pa)) * qb;
  }
  res.tail(k) = pb - (pa - in.gamma * step);
  return res;
}

LeakageSolution gradient_leakage_solve(const LeakageInstance& instance, const LeakageOptions& options) {
  check_instance(instance);
  if (options.starts < 1) throw ConfigError("leakage solver needs at least one start");
  Rng rng(derive_seed(options.seed, 0x4c45414bULL));
  const Eigen::Index k = instance.k();
  VectorXd best;
  double best_norm = std::numeric_limits<double>::infinity();
  LeakageSolution sol;
  for (int s = 0; s < options.starts; ++s) {
    // Alternate structured and unstructured starts.
    VectorXd x = s % 4 == 3 ? random_start(instance, rng) : structured_start(instance, rng);
    const double norm = levenberg_marquardt(instance, x, options.max_iterations);
    ++sol.starts_tried;
    if (norm < best_norm) {
      best_norm = norm;
      best = x;
    }
    if (best_norm < 1e-13) break;
  }
  // (p, r) and (-p, -r) produce identical gradients and updates. Report the
  // branch with nonnegative rating sum, the only one a positive scale admits.
  const auto m = static_cast<Eigen::Index>(instance.n_items());
  if (best.tail(m).sum() < 0.0) best = -best;
  sol.residual_norm = best_norm;
  sol.resolved = best_norm <= options.resolved_tolerance;
  sol.p_prev = best.head(k);
  sol.p_curr = best.segment(k, k);
  sol.ratings.assign(best.data() + 2 * k, best.data() + best.size());

  const Eigen::JacobiSVD<MatrixXd> svd(leakage_jacobian(instance, best));
  const VectorXd sv = svd.singularValues();
  sol.ambiguous = sv.size() == 0 || sv(sv.size() - 1) <= 1e-8 * std::max(sv(0), 1e-300);
  return sol;
}

std::vector<double> recovery_attack(std::span<const double> masked, std::span<const double> original,
                                    const RatingScale& scale, std::span<const double> error_levels) {
  if (masked.size() != original.size() || masked.empty())
    throw std::invalid_argument("recovery_attack: need matching nonempty ratings");
  const auto [omin, omax] = std::minmax_element(original.begin(), original.end());
  const auto [mmin, mmax] = std::minmax_element(masked.begin(), masked.end());
  const double range = *mmax - *mmin;
  std::vector<double> rates;
  rates.reserve(error_levels.size());
  for (double g : error_levels) {
    if (g < 0.0) throw ConfigError("error level must be >= 0");
    const double tolerance = g * scale.step * (1.0 + 1e-12) + 1e-12;
    std::size_t hits = 0;
    for (std::size_t j = 0; j < masked.size(); ++j) {
      const double recovered =
          range > 0.0 ? *omin + (masked[j] - *mmin) / range * (*omax - *omin) : 0.5 * (*omin + *omax);
      if (std::abs(recovered - original[j]) <= tolerance) ++hits;
    }
    rates.push_back(static_cast<double>(hits) / static_cast<double>(masked.size()));
  }
  return rates;
}

std::optional<double> ranking_attack(std::span<const Index> items, std::span<const double> masked,
                                     std::span<const double> original, double top_proportion) {
  if (items.size() != masked.size() || items.size() != original.size())
    throw std::invalid_argument("ranking_attack: length mismatch");
  if (!(top_proportion > 0.0 && top_proportion <= 1.0)) throw ConfigError("top proportion must lie in (0, 1]");
  const std::size_t n = items.size();
  const auto needed = static_cast<std::size_t>(std::ceil(1.0 / top_proportion - 1e-9));
  if (n == 0 || n < needed) return std::nullopt;
  const std::size_t count = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(top_proportion * n + 1e-9)));

  auto top = [&](std::span<const double> values) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (values[a] != values[b]) return values[a] > values[b];
      return items[a] < items[b];
    });
    std::vector<Index> chosen;
    for (std::size_t j = 0; j < count; ++j) chosen.push_back(items[order[j]]);
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  };
  const auto a = top(masked);
  const auto b = top(original);
  std::vector<Index> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  return static_cast<double>(both.size()) / static_cast<double>(count);
}

double Histogram::proportion(std::size_t bin) const {
  return attacked == 0 ? 0.0 : static_cast<double>(counts.at(bin)) / static_cast<double>(attacked);
}

double AttackReport::fraction_alpha_above(std::size_t level, double cutoff) const {
  std::size_t hits = 0;
  for (const PartyAttackRow& row : rows)
    if (row.alpha.at(level) > cutoff) ++hits;
  return rows.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(rows.size());
}

double AttackReport::fraction_beta_at_least(std::size_t level, double cutoff) const {
  std::size_t attacked = 0;
  std::size_t hits = 0;
  for (const PartyAttackRow& row : rows) {
    if (!row.beta.at(level)) continue;
    ++attacked;
    if (*row.beta[level] >= cutoff) ++hits;
  }
  return attacked == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(attacked);
}

std::string format_level(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

AttackReport attack_report(std::span<const PartyRatings> parties, const RatingScale& scale,
                           std::span<const double> error_levels, std::span<const double> top_proportions, int n_bins) {
  if (n_bins < 1) throw ConfigError("histograms need at least one bin");
  AttackReport report;
  report.error_levels.assign(error_levels.begin(), error_levels.end());
  report.top_proportions.assign(top_proportions.begin(), top_proportions.end());
  for (const PartyRatings& p : parties) {
    if (p.masked.empty()) continue;
    PartyAttackRow row;
    row.party = p.party;
    row.n_items = p.items.size();
    row.alpha = recovery_attack(p.masked, p.original, scale, error_levels);
    for (double h : top_proportions) row.beta.push_back(ranking_attack(p.items, p.masked, p.original, h));
    report.rows.push_back(std::move(row));
  }

  auto make = [n_bins](const std::string& metric) {
    Histogram h;
    h.metric = metric;
    for (int b = 0; b < n_bins; ++b) {
      h.bin_low.push_back(static_cast<double>(b) / n_bins);
      h.bin_high.push_back(static_cast<double>(b + 1) / n_bins);
    }
    h.counts.assign(static_cast<std::size_t>(n_bins), 0);
    return h;
  };
  auto bin_of = [n_bins](double v) {
    return static_cast<std::size_t>(std::clamp(static_cast<int>(std::floor(v * n_bins)), 0, n_bins - 1));
  };
  for (std::size_t g = 0; g < error_levels.size(); ++g) {
    Histogram h = make("alpha_g" + format_level(error_levels[g]));
    for (const PartyAttackRow& row : report.rows) {
      ++h.counts[bin_of(row.alpha[g])];
      ++h.attacked;
    }
    report.alpha_histograms.push_back(std::move(h));
  }
  for (std::size_t j = 0; j < top_proportions.size(); ++j) {
    Histogram h = make("beta_h" + format_level(top_proportions[j]));
    for (const PartyAttackRow& row : report.rows) {
      if (!row.beta[j]) continue;
      ++h.counts[bin_of(*row.beta[j])];
      ++h.attacked;
    }
    report.beta_histograms.push_back(std::move(h));
  }
  return report;
}

void write_attack_report(const AttackReport& report, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  std::ofstream out(directory / "attack_report.csv", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write attack_report.csv");
  out << "party_id,n_items";
  for (double g : report.error_levels) out << ",alpha_g" << format_level(g);
  for (double h : report.top_proportions) out << ",beta_h" << format_level(h);
  out << '\n';
  for (const PartyAttackRow& row : report.rows) {
    out << row.party << ',' << row.n_items;
    for (double a : row.alpha) out << ',' << format_level(a);
    for (const auto& b : row.beta) {
      out << ',';
      if (b) out << format_level(*b);
    }
    out << '\n';
  }
  auto write_hist = [&](const Histogram& h) {
    std::ofstream f(directory / ("histogram_" + h.metric + ".csv"), std::ios::binary);
    if (!f) throw std::runtime_error("cannot write histogram for " + h.metric);
    f << "bin_low,bin_high,proportion\n";
    for (std::size_t b = 0; b < h.counts.size(); ++b)
      f << format_level(h.bin_low[b]) << ',' << format_level(h.bin_high[b]) << ',' << format_level(h.proportion(b)) << '\n';
  };
  for (const Histogram& h : report.alpha_histograms) write_hist(h);
  for (const Histogram& h : report.beta_histograms) write_hist(h);
}

}  // namespace fedmmf
