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

// Side-information loaders, feature construction and the on-disk bundle.

#include <sodium.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string_view>

#include "json.hpp"

#include "fedmmf/dataset.hpp"
#include "fedmmf/errors.hpp"

namespace fedmmf {
namespace {

using json = nlohmann::json;

std::vector<std::string> split_fields(const std::string& line, std::string_view sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      std::string last = line.substr(start);
      if (!last.empty() && last.back() == '\r') last.pop_back();
      out.push_back(std::move(last));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Year from "Title (1995)" or a date ending in the year.
int trailing_year(const std::string& text) {
  for (std::size_t pos = text.size(); pos >= 4; --pos) {
    const std::string_view cand(text.data() + pos - 4, 4);
    if (std::all_of(cand.begin(), cand.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      int year = 0;
      std::from_chars(cand.data(), cand.data() + 4, year);
      if (year >= 1800 && year <= 2100) return year;
    }
  }
  return 0;
}

std::string decade_token(int year) { return "decade:" + std::to_string(year / 10 * 10); }

SideInformation empty_side(const Dataset& dataset) {
  SideInformation side;
  side.users.documents.resize(dataset.n_users);
  side.items.documents.resize(dataset.n_items);
  return side;
}

bool open_optional(std::ifstream& in, const std::filesystem::path& path) {
  in.open(path, std::ios::binary);
  if (!in) {
    std::clog << "warning: side information file " << path.string() << " not found\n";
    return false;
  }
  return true;
}

// Keeps the `limit` tags with the highest document frequency and remaps ids.
TagCorpus prune(const TagCorpus& corpus, std::size_t limit) {
  if (corpus.vocabulary.size() <= limit) return corpus;
  std::vector<std::size_t> df(corpus.vocabulary.size(), 0);
  for (const auto& doc : corpus.documents) {
    std::vector<int> uniq = doc;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (int t : uniq) ++df[t];
  }
  std::vector<int> order(corpus.vocabulary.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return df[a] > df[b]; });
  std::vector<int> remap(corpus.vocabulary.size(), -1);
  TagCorpus out;
  for (std::size_t j = 0; j < limit; ++j) {
    remap[order[j]] = static_cast<int>(j);
    out.vocabulary.push_back(corpus.vocabulary[order[j]]);
    out.lookup.emplace(out.vocabulary.back(), static_cast<int>(j));
  }
  out.documents.resize(corpus.documents.size());
  for (std::size_t e = 0; e < corpus.documents.size(); ++e)
    for (int t : corpus.documents[e])
      if (remap[t] >= 0) out.documents[e].push_back(remap[t]);
  return out;
}

Eigen::MatrixXd corpus_features(const TagCorpus& raw, Eigen::Index pca_dim, const char* what) {
  const Eigen::Index n = static_cast<Eigen::Index>(raw.documents.size());
  if (raw.vocabulary.empty()) return Eigen::MatrixXd::Zero(n, 0);
  const TagCorpus corpus = prune(raw, kMaxVocabulary);
  const Eigen::MatrixXd weights = tfidf(corpus.documents, static_cast<int>(corpus.vocabulary.size()));
  const Eigen::Index reachable = std::min(weights.rows(), weights.cols());
  const Eigen::Index dim = std::min(pca_dim, reachable);
  if (dim < pca_dim) {
    std::clog << "warning: " << what << " features support only " << reachable
              << " components; padding to " << pca_dim << "\n";
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, pca_dim);
  out.leftCols(dim) = pca(weights, dim).projection;
  return out;
}

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

std::string ratings_csv(const Dataset& d) {
  std::string out = "user,item,rating\n";
  for (const RatingTriple& t : d.ratings) {
    out += std::to_string(t.user_id);
    out += ',';
    out += std::to_string(t.item_id);
    out += ',';
    append_double(out, t.rating);
    out += '\n';
  }
  return out;
}

std::string features_csv(const FeatureMatrix& m, const char* key) {
  std::string out = key;
  for (Eigen::Index c = 0; c < m.cols(); ++c) out += ",f" + std::to_string(c);
  out += '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out += std::to_string(r);
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out += ',';
      append_double(out, m(r, c));
    }
    out += '\n';
  }
  return out;
}

std::string sha256_hex(const std::string& payload) {
  if (sodium_init() < 0) throw std::runtime_error("libsodium failed to initialise");
  // Git-style framing so the hash is tied to the payload length.
  const std::string framed = "blob " + std::to_string(payload.size()) + std::string(1, '\0') + payload;
  unsigned char digest[crypto_hash_sha256_BYTES];
  crypto_hash_sha256(digest, reinterpret_cast<const unsigned char*>(framed.data()), framed.size());
  char hex[crypto_hash_sha256_BYTES * 2 + 1];
  sodium_bin2hex(hex, sizeof(hex), digest, sizeof(digest));
  return hex;
}

std::string canonical(const Dataset& d) {
  std::string out = "name=" + d.name + "\n";
  out += "scale=";
  append_double(out, d.scale.min);
  out += ',';
  append_double(out, d.scale.max);
  out += ',';
  append_double(out, d.scale.step);
  out += '\n';
  out += ratings_csv(d);
  out += features_csv(d.user_features, "user");
  out += features_csv(d.item_features, "item");
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::vector<std::vector<double>> read_csv(const std::filesystem::path& path, std::size_t& width) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header");
  width = split_fields(line, ",").size();
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_fields(line, ",");
    if (fields.size() != width)
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": wrong field count");
    std::vector<double> row(width);
    for (std::size_t c = 0; c < width; ++c) {
      const auto& f = fields[c];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), row[c]);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size())
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

FeatureMatrix read_features(const std::filesystem::path& path, std::size_t n) {
  std::size_t width = 0;
  const auto rows = read_csv(path, width);
  if (rows.size() != n) throw ParseError(path.string() + ": expected one row per entity");
  FeatureMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width - 1));
  for (std::size_t r = 0; r < n; ++r) {
    if (rows[r][0] != static_cast<double>(r)) throw ParseError(path.string() + ": rows out of order");
    for (std::size_t c = 1; c < width; ++c) m(r, c - 1) = rows[r][c];
  }
  return m;
}

}  // namespace

SideInformation load_ml100k_side_information(const std::filesystem::path& directory,
                                             const Dataset& dataset) {
  static const char* const kGenres[] = {
      "unknown", "Action",    "Adventure", "Animation", "Children's", "Comedy", "Crime",
      "Documentary", "Drama", "Fantasy",   "Film-Noir", "Horror",     "Musical", "Mystery",
      "Romance", "Sci-Fi",    "Thriller",  "War",       "Western"};
  SideInformation side = empty_side(dataset);
  const auto users = dataset.user_index();
  const auto items = dataset.item_index();
  std::string line;

  std::ifstream user_file;
  if (open_optional(user_file, directory / "u.user")) {
    while (std::getline(user_file, line)) {
      const auto f = split_fields(line, "|");
      if (f.size() < 4) continue;
      const auto it = users.find(f[0]);
      if (it == users.end()) continue;
      int age = 0;
      std::from_chars(f[1].data(), f[1].data() + f[1].size(), age);
      auto& doc = side.users.documents[it->second];
      doc.push_back(side.users.intern("gender:" + f[2]));
      doc.push_back(side.users.intern("occupation:" + f[3]));
      doc.push_back(side.users.intern("age:" + std::to_string(std::min(age / 10, 6))));
    }
  }

  std::ifstream item_file;
  if (open_optional(item_file, directory / "u.item")) {
    while (std::getline(item_file, line)) {
      const auto f = split_fields(line, "|");
      if (f.size() < 5 + 19) continue;
      const auto it = items.find(f[0]);
      if (it == items.end()) continue;
      auto& doc = side.items.documents[it->second];
      for (int g = 0; g < 19; ++g)
        if (f[5 + g] == "1") doc.push_back(side.items.intern(std::string("genre:") + kGenres[g]));
      int year = trailing_year(f[2]);
      if (year == 0) year = trailing_year(f[1]);
      if (year != 0) doc.push_back(side.items.intern(decade_token(year)));
    }
  }
  return side;
}

SideInformation load_ml10m_side_information(const std::filesystem::path& directory,
                                            const Dataset& dataset) {
  SideInformation side = empty_side(dataset);
  const auto users = dataset.user_index();
  const auto items = dataset.item_index();
  std::string line;

  std::ifstream movies;
  if (open_optional(movies, directory / "movies.dat")) {
    while (std::getline(movies, line)) {
      const auto f = split_fields(line, "::");
      if (f.size() < 3) continue;
      const auto it = items.find(f[0]);
      if (it == items.end()) continue;
      auto& doc = side.items.documents[it->second];
      for (const std::string& g : split_fields(f[2], "|"))
        if (!g.empty() && g != "(no genres listed)") doc.push_back(side.items.intern("genre:" + g));
      if (const int year = trailing_year(f[1]); year != 0) doc.push_back(side.items.intern(decade_token(year)));
    }
  }

  std::ifstream tags;
  if (open_optional(tags, directory / "tags.dat")) {
    while (std::getline(tags, line)) {
      const auto f = split_fields(line, "::");
      if (f.size() < 3) continue;
      const std::string tag = "tag:" + lower(f[2]);
      if (const auto u = users.find(f[0]); u != users.end())
        side.users.documents[u->second].push_back(side.users.intern(tag));
      if (const auto i = items.find(f[1]); i != items.end())
        side.items.documents[i->second].push_back(side.items.intern(tag));
    }
  }
  return side;
}

SideInformation load_lastfm_side_information(const std::filesystem::path& directory,
                                             const Dataset& dataset) {
  SideInformation side = empty_side(dataset);
  const auto users = dataset.user_index();
  const auto items = dataset.item_index();
  std::string line;

  std::unordered_map<std::string, std::string> tag_names;
  std::ifstream names;
  if (open_optional(names, directory / "tags.dat")) {
    std::getline(names, line);
    while (std::getline(names, line)) {
      const auto f = split_fields(line, "\t");
      if (f.size() >= 2) tag_names[f[0]] = lower(f[1]);
    }
  }

  std::ifstream tagged;
  if (open_optional(tagged, directory / "user_taggedartists.dat")) {
    std::getline(tagged, line);
    while (std::getline(tagged, line)) {
      const auto f = split_fields(line, "\t");
      if (f.size() < 3) continue;
      const auto name = tag_names.find(f[2]);
      const std::string tag = "tag:" + (name != tag_names.end() ? name->second : f[2]);
      if (const auto u = users.find(f[0]); u != users.end())
        side.users.documents[u->second].push_back(side.users.intern(tag));
      if (const auto i = items.find(f[1]); i != items.end())
        side.items.documents[i->second].push_back(side.items.intern(tag));
    }
  }
  return side;
}

void attach_features(Dataset& dataset, const SideInformation& side, Eigen::Index pca_dim) {
  if (pca_dim < 0) throw ConfigError("pca_dim must be nonnegative");
  if (side.users.documents.size() != dataset.n_users || side.items.documents.size() != dataset.n_items)
    throw ConfigError("attach_features: corpus size does not match dataset");
  dataset.user_features = corpus_features(side.users, pca_dim, "user");
  dataset.item_features = corpus_features(side.items, pca_dim, "item");
}

std::string dataset_hash(const Dataset& dataset) { return sha256_hex(canonical(dataset)); }

std::string write_bundle(const Dataset& dataset, const std::filesystem::path& directory,
                         std::uint64_t seed) {
  dataset.validate();
  std::filesystem::create_directories(directory);
  write_text(directory / "ratings.csv", ratings_csv(dataset));
  write_text(directory / "user_features.csv", features_csv(dataset.user_features, "user"));
  write_text(directory / "item_features.csv", features_csv(dataset.item_features, "item"));
  const std::string hash = dataset_hash(dataset);
  json manifest = {
      {"format_version", 1},
      {"name", dataset.name},
      {"n_users", dataset.n_users},
      {"n_items", dataset.n_items},
      {"n_ratings", dataset.ratings.size()},
      {"rating_min", dataset.scale.min},
      {"rating_max", dataset.scale.max},
      {"rating_step", dataset.scale.step},
      {"seed", seed},
      {"content_hash", hash},
      {"user_ids", dataset.user_ids},
      {"item_ids", dataset.item_ids},
  };
  write_text(directory / "manifest.json", manifest.dump(1) + "\n");
  return hash;
}

Dataset read_bundle(const std::filesystem::path& directory) {
  std::ifstream in(directory / "manifest.json");
  if (!in) throw ParseError("cannot open " + (directory / "manifest.json").string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest.json: ") + e.what());
  }
  Dataset d;
  try {
    d.name = manifest.at("name").get<std::string>();
    d.n_users = manifest.at("n_users").get<std::size_t>();
    d.n_items = manifest.at("n_items").get<std::size_t>();
    d.scale = {manifest.at("rating_min").get<double>(), manifest.at("rating_max").get<double>(),
               manifest.at("rating_step").get<double>()};
    d.user_ids = manifest.at("user_ids").get<std::vector<std::string>>();
    d.item_ids = manifest.at("item_ids").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest.json: ") + e.what());
  }

  std::size_t width = 0;
  const auto rows = read_csv(directory / "ratings.csv", width);
  if (width != 3) throw ParseError("ratings.csv: expected user,item,rating");
  d.ratings.reserve(rows.size());
  for (const auto& r : rows)
    d.ratings.push_back({static_cast<Index>(r[0]), static_cast<Index>(r[1]), r[2]});
  d.user_features = read_features(directory / "user_features.csv", d.n_users);
  d.item_features = read_features(directory / "item_features.csv", d.n_items);
  d.validate();

  const std::string expected = manifest.value("content_hash", std::string());
  if (!expected.empty() && expected != dataset_hash(d))
    throw ParseError("bundle content does not match the manifest hash");
  return d;
}

}  // namespace fedmmf
