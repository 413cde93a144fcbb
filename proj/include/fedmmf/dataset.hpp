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

// Rating datasets, side-information features and per-party splits.

#ifndef FEDMMF_DATASET_HPP_
#define FEDMMF_DATASET_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace fedmmf {

using Index = std::uint32_t;

struct RatingTriple {
  Index user_id = 0;
  Index item_id = 0;
  double rating = 0.0;

  friend bool operator==(const RatingTriple&, const RatingTriple&) = default;
};

struct RatingScale {
  double min = 1.0;
  double max = 5.0;
  // Distance between adjacent admissible ratings (1 for ML-100K, 0.5 for
  // ML-10M). Used by the recovery attack as its unit of error.
  double step = 1.0;

  double clip(double value) const { return value < min ? min : (value > max ? max : value); }
  double to_unit(double value) const { return (value - min) / (max - min); }
  bool contains(double value) const { return value >= min && value <= max; }

  friend bool operator==(const RatingScale&, const RatingScale&) = default;
};

// Features are stored row-wise: row e is the feature vector of dense entity e.
// Every entity has a row; entities without side information get zeros.
using FeatureMatrix = Eigen::MatrixXd;

struct Dataset {
  std::string name;
  std::vector<RatingTriple> ratings;
  FeatureMatrix user_features;
  FeatureMatrix item_features;
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  RatingScale scale;
  // Dense id -> original id as it appeared in the raw file.
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;

  // Throws ParseError if any dataset invariant is violated.
  void validate() const;
  // Reverse lookup of the dense-id maps.
  std::unordered_map<std::string, Index> user_index() const;
  std::unordered_map<std::string, Index> item_index() const;
};

struct PartySplit {
  Index user_id = 0;
  std::vector<RatingTriple> train;
  std::vector<RatingTriple> validation;
  std::vector<RatingTriple> test;

  std::size_t size() const { return train.size() + validation.size() + test.size(); }
};

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

enum class MovieLensFormat { kMl100k, kMl10m };

// `u.data` (tab separated) or `ratings.dat` (`::` separated). Dense ids are
// assigned in order of first appearance.
Dataset parse_movielens(const std::filesystem::path& path, MovieLensFormat format);

// `user_artists.dat`: header line then `user<TAB>artist<TAB>count`. Counts are
// turned into ratings 1..n_bins by global equal-frequency binning.
Dataset parse_lastfm(const std::filesystem::path& path, int n_bins = 5);

// Rank-based equal-frequency binning: a count's bin is
// 1 + floor(n_bins * #{counts strictly below it} / N). Equal counts share the
// lower bin.
std::vector<int> quantile_bins(const std::vector<double>& counts, int n_bins);

// Bag of tag ids per entity (row index = dense entity id).
struct TagCorpus {
  std::vector<std::vector<int>> documents;
  std::vector<std::string> vocabulary;
  std::unordered_map<std::string, int> lookup;

  int intern(const std::string& tag);
};

// tf = count / entity total, idf = ln(N / df). Entities without tags map to
// zero rows.
Eigen::MatrixXd tfidf(const std::vector<std::vector<int>>& documents, int vocabulary_size);

struct PcaResult {
  Eigen::MatrixXd projection;  // n x target_dim
  Eigen::MatrixXd components;  // d x target_dim, unit columns
  Eigen::VectorXd explained_variance;
  Eigen::RowVectorXd mean;
  Eigen::Index rank = 0;
};

// Projects mean-centred rows onto the leading eigenvectors of the sample
// covariance. Components beyond the numerical rank are zero-padded.
PcaResult pca(const Eigen::MatrixXd& features, Eigen::Index target_dim);

// Deterministic per-party split. Users with fewer than three ratings keep
// everything in train. Each list is sorted by item id.
PartySplit split_party(std::vector<RatingTriple> ratings, const SplitRatios& ratios,
                       std::uint64_t seed);

// Groups the dataset by user and splits every party with a seed derived from
// (seed, user id).
std::vector<PartySplit> split_all(const Dataset& dataset, const SplitRatios& ratios,
                                  std::uint64_t seed);

// Side information loaders. Each returns tag corpora indexed by the dense ids
// of `dataset`; entities missing from the side files get empty documents.
struct SideInformation {
  TagCorpus users;
  TagCorpus items;
};

SideInformation load_ml100k_side_information(const std::filesystem::path& directory,
                                             const Dataset& dataset);
SideInformation load_ml10m_side_information(const std::filesystem::path& directory,
                                            const Dataset& dataset);
SideInformation load_lastfm_side_information(const std::filesystem::path& directory,
                                             const Dataset& dataset);

// TF-IDF followed by PCA to `pca_dim` columns for both entity classes. Only
// the kMaxVocabulary most document-frequent tags are kept so the covariance
// stays small on tag-heavy corpora. An empty corpus yields zero columns.
inline constexpr std::size_t kMaxVocabulary = 2000;
void attach_features(Dataset& dataset, const SideInformation& side, Eigen::Index pca_dim);

// Canonical CSV bundle: ratings.csv, user_features.csv, item_features.csv and
// manifest.json. Returns the content hash recorded in the manifest.
std::string write_bundle(const Dataset& dataset, const std::filesystem::path& directory,
                         std::uint64_t seed);
Dataset read_bundle(const std::filesystem::path& directory);

// Content hash of the dataset's canonical serialization.
std::string dataset_hash(const Dataset& dataset);

}  // namespace fedmmf

#endif  // FEDMMF_DATASET_HPP_
