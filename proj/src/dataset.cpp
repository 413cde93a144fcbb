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

#include "fedmmf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string_view>

#include "fedmmf/errors.hpp"
#include "fedmmf/random.hpp"

namespace fedmmf {
namespace {

std::vector<std::string_view> split_on(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (text.empty()) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

bool is_integer_token(std::string_view text) {
  text = trim(text);
  return !text.empty() && std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

// Assigns dense ids in order of first appearance and rejects duplicate pairs.
class RatingBuilder {
 public:
  explicit RatingBuilder(const std::filesystem::path& path) : path_(path) {}

  void add(std::string_view user, std::string_view item, double rating, std::size_t line_no) {
    const Index u = intern(std::string(trim(user)), user_index_, dataset_.user_ids);
    const Index i = intern(std::string(trim(item)), item_index_, dataset_.item_ids);
    const std::uint64_t key = (static_cast<std::uint64_t>(u) << 32) | i;
    if (!seen_.insert(key).second) {
      throw ParseError(path_.string() + ":" + std::to_string(line_no) + ": duplicate rating for (user " +
                       std::string(trim(user)) + ", item " + std::string(trim(item)) + ")");
    }
    dataset_.ratings.push_back({u, i, rating});
  }

  Dataset finish(std::string name, const RatingScale& scale) {
    if (dataset_.ratings.empty()) throw ParseError(path_.string() + ": no ratings");
    dataset_.name = std::move(name);
    dataset_.scale = scale;
    dataset_.n_users = dataset_.user_ids.size();
    dataset_.n_items = dataset_.item_ids.size();
    dataset_.user_features = FeatureMatrix::Zero(dataset_.n_users, 0);
    dataset_.item_features = FeatureMatrix::Zero(dataset_.n_items, 0);
    return std::move(dataset_);
  }

 private:
  static Index intern(const std::string& key, std::unordered_map<std::string, Index>& index,
                      std::vector<std::string>& ids) {
    const auto [it, inserted] = index.try_emplace(key, static_cast<Index>(ids.size()));
    if (inserted) ids.push_back(key);
    return it->second;
  }

  std::filesystem::path path_;
  Dataset dataset_;
  std::unordered_map<std::string, Index> user_index_;
  std::unordered_map<std::string, Index> item_index_;
  std::set<std::uint64_t> seen_;
};

std::string malformed(const std::filesystem::path& path, std::size_t line_no, const std::string& why) {
  return path.string() + ":" + std::to_string(line_no) + ": malformed line (" + why + ")";
}

}  // namespace

void Dataset::validate() const {
  if (!(scale.min < scale.max)) throw ParseError("dataset: rating_min must be below rating_max");
  if (user_ids.size() != n_users || item_ids.size() != n_items)
    throw ParseError("dataset: id maps do not match entity counts");
  if (static_cast<std::size_t>(user_features.rows()) != n_users ||
      static_cast<std::size_t>(item_features.rows()) != n_items)
    throw ParseError("dataset: every user and item needs a feature row");
  if (!user_features.allFinite() || !item_features.allFinite())
    throw ParseError("dataset: non-finite feature value");
  std::set<std::uint64_t> seen;
  for (const RatingTriple& t : ratings) {
    if (t.user_id >= n_users || t.item_id >= n_items) throw ParseError("dataset: rating id out of range");
    if (!scale.contains(t.rating)) throw ParseError("dataset: rating outside declared scale");
    const std::uint64_t key = (static_cast<std::uint64_t>(t.user_id) << 32) | t.item_id;
    if (!seen.insert(key).second)
      throw ParseError("dataset: duplicate rating for (user " + user_ids[t.user_id] + ", item " +
                       item_ids[t.item_id] + ")");
  }
}

std::unordered_map<std::string, Index> Dataset::user_index() const {
  std::unordered_map<std::string, Index> index;
  for (std::size_t u = 0; u < user_ids.size(); ++u) index.emplace(user_ids[u], static_cast<Index>(u));
  return index;
}

std::unordered_map<std::string, Index> Dataset::item_index() const {
  std::unordered_map<std::string, Index> index;
  for (std::size_t i = 0; i < item_ids.size(); ++i) index.emplace(item_ids[i], static_cast<Index>(i));
  return index;
}

Dataset parse_movielens(const std::filesystem::path& path, MovieLensFormat format) {
  std::ifstream in = open_or_throw(path);
  const bool is_100k = format == MovieLensFormat::kMl100k;
  const std::string_view sep = is_100k ? "\t" : "::";
  const RatingScale scale = is_100k ? RatingScale{1.0, 5.0, 1.0} : RatingScale{0.5, 5.0, 0.5};

  RatingBuilder builder(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_on(trim(line), sep);
    if (fields.size() != 4) throw ParseError(malformed(path, line_no, "expected 4 fields"));
    if (!is_integer_token(fields[0]) || !is_integer_token(fields[1]))
      throw ParseError(malformed(path, line_no, "non-numeric id"));
    double rating = 0.0;
    if (!parse_double(fields[2], rating)) throw ParseError(malformed(path, line_no, "bad rating"));
    if (!scale.contains(rating)) throw ParseError(malformed(path, line_no, "rating outside scale"));
    builder.add(fields[0], fields[1], rating, line_no);
  }
  return builder.finish(is_100k ? "ml100k" : "ml10m", scale);
}

std::vector<int> quantile_bins(const std::vector<double>& counts, int n_bins) {
  if (n_bins < 1) throw ConfigError("quantile_bins: n_bins must be >= 1");
  std::vector<double> sorted = counts;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(counts.size());
  std::vector<int> bins(counts.size());
  for (std::size_t j = 0; j < counts.size(); ++j) {
    const auto below = std::lower_bound(sorted.begin(), sorted.end(), counts[j]) - sorted.begin();
    const int bin = 1 + static_cast<int>(std::floor(n_bins * static_cast<double>(below) / n));
    bins[j] = std::min(bin, n_bins);
  }
  return bins;
}

Dataset parse_lastfm(const std::filesystem::path& path, int n_bins) {
  if (n_bins < 2) throw ConfigError("parse_lastfm: n_bins must be >= 2");
  std::ifstream in = open_or_throw(path);
  struct Raw {
    std::string user, item;
    double count;
    std::size_t line_no;
  };
  std::vector<Raw> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view t = trim(line);
    if (t.empty()) continue;
    const auto fields = split_on(t, "\t");
    if (line_no == 1 && !fields.empty() && !is_integer_token(fields[0])) continue;  // header
    if (fields.size() != 3) throw ParseError(malformed(path, line_no, "expected 3 fields"));
    if (!is_integer_token(fields[0]) || !is_integer_token(fields[1]))
      throw ParseError(malformed(path, line_no, "non-numeric id"));
    double count = 0.0;
    if (!parse_double(fields[2], count)) throw ParseError(malformed(path, line_no, "bad count"));
    if (count <= 0.0)
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": listening count must be positive");
    raw.push_back({std::string(trim(fields[0])), std::string(trim(fields[1])), count, line_no});
  }
  std::vector<double> counts;
  counts.reserve(raw.size());
  for (const Raw& r : raw) counts.push_back(r.count);
  const std::vector<int> bins = quantile_bins(counts, n_bins);

  RatingBuilder builder(path);
  for (std::size_t j = 0; j < raw.size(); ++j)
    builder.add(raw[j].user, raw[j].item, static_cast<double>(bins[j]), raw[j].line_no);
  return builder.finish("lastfm", RatingScale{1.0, static_cast<double>(n_bins), 1.0});
}

int TagCorpus::intern(const std::string& tag) {
  const auto [it, inserted] = lookup.try_emplace(tag, static_cast<int>(vocabulary.size()));
  if (inserted) vocabulary.push_back(tag);
  return it->second;
}

Eigen::MatrixXd tfidf(const std::vector<std::vector<int>>& documents, int vocabulary_size) {
  if (documents.empty()) throw ConfigError("tfidf: empty corpus");
  const Eigen::Index n = static_cast<Eigen::Index>(documents.size());
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(n, vocabulary_size);
  for (Eigen::Index e = 0; e < n; ++e) {
    for (int tag : documents[e]) {
      if (tag < 0 || tag >= vocabulary_size) throw ConfigError("tfidf: tag id outside vocabulary");
      counts(e, tag) += 1.0;
    }
  }
  Eigen::VectorXd idf = Eigen::VectorXd::Zero(vocabulary_size);
  for (int t = 0; t < vocabulary_size; ++t) {
    const double df = static_cast<double>((counts.col(t).array() > 0.0).count());
    if (df > 0.0) idf(t) = std::log(static_cast<double>(n) / df);
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, vocabulary_size);
  for (Eigen::Index e = 0; e < n; ++e) {
    const double total = counts.row(e).sum();
    if (total == 0.0) continue;
    out.row(e) = (counts.row(e).array() / total) * idf.transpose().array();
  }
  return out;
}

PcaResult pca(const Eigen::MatrixXd& features, Eigen::Index target_dim) {
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  if (target_dim < 0 || target_dim > std::min(n, d))
    throw ConfigError("pca: target_dim must not exceed min(rows, cols)");
  PcaResult result;
  result.mean = features.colwise().mean();
  const Eigen::MatrixXd centred = features.rowwise() - result.mean;
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  const Eigen::MatrixXd covariance = (centred.transpose() * centred) / denom;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(covariance);
  const Eigen::VectorXd values = solver.eigenvalues().reverse();
  const Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();
  const double top = values.size() > 0 ? std::max(values(0), 0.0) : 0.0;
  const double tolerance = top * 1e-10 * static_cast<double>(std::max<Eigen::Index>(d, 1));

  result.components = Eigen::MatrixXd::Zero(d, target_dim);
  result.explained_variance = Eigen::VectorXd::Zero(target_dim);
  for (Eigen::Index c = 0; c < target_dim; ++c) {
    if (!(values(c) > tolerance)) break;
    Eigen::VectorXd v = vectors.col(c);
    Eigen::Index pivot = 0;
    v.cwiseAbs().maxCoeff(&pivot);
    if (v(pivot) < 0.0) v = -v;
    result.components.col(c) = v;
    result.explained_variance(c) = values(c);
    result.rank = c + 1;
  }
  if (result.rank < target_dim) {
    std::clog << "warning: pca requested " << target_dim << " components but the data has rank "
              << result.rank << "; padding with zeros\n";
  }
  result.projection = centred * result.components;
  return result;
}

PartySplit split_party(std::vector<RatingTriple> ratings, const SplitRatios& ratios,
                       std::uint64_t seed) {
  const double sum = ratios.train + ratios.validation + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9 || ratios.train <= 0.0 || ratios.validation < 0.0 || ratios.test < 0.0)
    throw ConfigError("split ratios must be nonnegative, train positive, and sum to 1");
  if (ratings.empty()) throw ConfigError("split_party: user has no ratings");

  PartySplit split;
  split.user_id = ratings.front().user_id;
  auto by_item = [](const RatingTriple& a, const RatingTriple& b) { return a.item_id < b.item_id; };
  std::sort(ratings.begin(), ratings.end(), by_item);
  const std::size_t n = ratings.size();
  if (n < 3) {
    split.train = std::move(ratings);
    return split;
  }
  Rng rng(seed);
  rng.shuffle(std::span<RatingTriple>(ratings));

  auto portion = [n](double ratio) -> std::size_t {
    if (ratio <= 0.0) return 0;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratio)));
  };
  std::size_t n_val = portion(ratios.validation);
  std::size_t n_test = portion(ratios.test);
  while (n_val + n_test >= n) {
    if (n_test >= n_val && n_test > 0) --n_test;
    else --n_val;
  }
  const std::size_t n_train = n - n_val - n_test;
  split.train.assign(ratings.begin(), ratings.begin() + n_train);
  split.validation.assign(ratings.begin() + n_train, ratings.begin() + n_train + n_val);
  split.test.assign(ratings.begin() + n_train + n_val, ratings.end());
  std::sort(split.train.begin(), split.train.end(), by_item);
  std::sort(split.validation.begin(), split.validation.end(), by_item);
  std::sort(split.test.begin(), split.test.end(), by_item);
  return split;
}

std::vector<PartySplit> split_all(const Dataset& dataset, const SplitRatios& ratios,
                                  std::uint64_t seed) {
  std::vector<std::vector<RatingTriple>> by_user(dataset.n_users);
  for (const RatingTriple& t : dataset.ratings) by_user[t.user_id].push_back(t);
  std::vector<PartySplit> splits;
  splits.reserve(dataset.n_users);
  for (std::size_t u = 0; u < dataset.n_users; ++u) {
    if (by_user[u].empty()) {
      PartySplit empty;
      empty.user_id = static_cast<Index>(u);
      splits.push_back(std::move(empty));
      continue;
    }
    splits.push_back(split_party(std::move(by_user[u]), ratios, derive_seed(seed, u)));
  }
  return splits;
}

}  // namespace fedmmf
