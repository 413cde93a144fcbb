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

// Experiment configuration: validation and the JSON mirror of every field.

#include <sodium.h>

#include <cmath>
#include <set>

#include "fedmmf/errors.hpp"
#include "fedmmf/fedsim.hpp"

namespace fedmmf {
namespace {

using json = nlohmann::json;

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kFedMF: return "fedmf";
    case Algorithm::kFedMMF: return "fedmmf";
    case Algorithm::kLocalOnly: return "local";
    case Algorithm::kFedContext: return "fedcontext";
  }
  return "unknown";
}

Algorithm algorithm_from_name(const std::string& name) {
  if (name == "fedmf") return Algorithm::kFedMF;
  if (name == "fedmmf") return Algorithm::kFedMMF;
  if (name == "local") return Algorithm::kLocalOnly;
  if (name == "fedcontext") return Algorithm::kFedContext;
  throw ConfigError("algorithm.name: unknown algorithm '" + name + "'");
}

// Reads `key` from `obj` into `out` when present. Wrong types and unknown keys
// are reported with the dotted path of the field.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where("") + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + ": wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string where(const std::string& key) const {
    if (path_.empty()) return key;
    return key.empty() ? path_ : path_ + "." + key;
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items())
      if (!seen_.count(key)) throw ConfigError(where(key) + ": unknown field");
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

std::string AlgorithmSpec::label() const {
  static const char* const kSuffix[] = {"LR", "FM", "NN"};
  static const char* const kOrder[] = {"One-order", "Two-order", "High-order"};
  const int m = static_cast<int>(mask);
  switch (algorithm) {
    case Algorithm::kFedMF: return "FedMF";
    case Algorithm::kFedMMF: return zero_mask ? "Zero-mask FedMMF" : std::string(kOrder[m]) + " FedMMF";
    case Algorithm::kLocalOnly: return std::string("Local") + kSuffix[m];
    case Algorithm::kFedContext: return std::string("Fed") + kSuffix[m];
  }
  return "unknown";
}

void ExperimentConfig::validate() const {
  hyper.validate();
  const double sum = split.train + split.validation + split.test;
  if (std::abs(sum - 1.0) > 1e-9 || split.train <= 0.0 || split.validation < 0.0 || split.test < 0.0)
    throw ConfigError("split: ratios must be nonnegative, train positive, and sum to 1");
  if (!std::isfinite(th_j) || th_j < 0.0) throw ConfigError("th_j: must be finite and >= 0");
  if (mask.l2 < 0.0 || !std::isfinite(mask.l2)) throw ConfigError("mask.l2: must be finite and >= 0");
  if (!(mask.learning_rate > 0.0)) throw ConfigError("mask.learning_rate: must be > 0");
  if (mask.epochs < 0) throw ConfigError("mask.epochs: must be >= 0");
  if (mask.fm_factors < 1) throw ConfigError("mask.fm_factors: must be >= 1");
  if (mask.hidden_units < 1) throw ConfigError("mask.hidden_units: must be >= 1");
  if (threshold < 0) throw ConfigError("threshold: must be >= 0");
  if (repetitions < 1) throw ConfigError("repetitions: must be >= 1");
  if (evaluation.every < 1) throw ConfigError("evaluation.every: must be >= 1");
  if (evaluation.patience < 1) throw ConfigError("evaluation.patience: must be >= 1");
  if (threads < 1) throw ConfigError("threads: must be >= 1");
  if (leakage_parties < 0) throw ConfigError("leakage_parties: must be >= 0");
  for (const DropoutEvent& d : dropouts)
    if (d.round < 1 || d.round > static_cast<std::uint32_t>(hyper.epochs))
      throw ConfigError("dropouts: round must lie in [1, hyper.epochs]");
  try {
    // Headroom for a million summands at the configured gradient clamp.
    field.validate(1000000, max_gradient_abs);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("field: ") + e.what());
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  json drops = json::array();
  for (const DropoutEvent& d : dropouts) drops.push_back({{"round", d.round}, {"party", d.party}});
  return {
      {"dataset", dataset},
      {"split", {{"train", split.train}, {"validation", split.validation}, {"test", split.test}}},
      {"algorithm", {{"name", algorithm_name(algorithm.algorithm)}, {"mask", to_string(algorithm.mask)}, {"zero_mask", algorithm.zero_mask}}},
      {"hyper", {{"k", hyper.k}, {"gamma", hyper.gamma}, {"lambda", hyper.lambda}, {"epochs", hyper.epochs}, {"seed", hyper.seed}, {"init_scale", hyper.init_scale}}},
      {"mask",
       {{"l2", mask.l2},
        {"learning_rate", mask.learning_rate},
        {"epochs", mask.epochs},
        {"fm_factors", mask.fm_factors},
        {"hidden_units", mask.hidden_units},
        {"seed", mask.seed},
        {"closed_form_init", mask.closed_form_init}}},
      {"th_j", th_j},
      {"field", {{"prime", field.prime}, {"scale_bits", field.scale_bits}}},
      {"max_gradient_abs", max_gradient_abs},
      {"threshold", threshold},
      {"dropouts", drops},
      {"repetitions", repetitions},
      {"seed_base", seed_base},
      {"evaluation", {{"every", evaluation.every}, {"early_stopping", evaluation.early_stopping}, {"patience", evaluation.patience}}},
      {"threads", threads},
      {"record_transcript", record_transcript},
      {"leakage_parties", leakage_parties},
  };
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  Reader top(j, "");
  top.get("dataset", c.dataset);
  if (const json* s = top.child("split")) {
    Reader r(*s, "split");
    r.get("train", c.split.train);
    r.get("validation", c.split.validation);
    r.get("test", c.split.test);
    r.finish();
  }
  if (const json* a = top.child("algorithm")) {
    Reader r(*a, "algorithm");
    std::string name = "fedmf";
    std::string mask = to_string(c.algorithm.mask);
    r.get("name", name);
    r.get("mask", mask);
    r.get("zero_mask", c.algorithm.zero_mask);
    r.finish();
    c.algorithm.algorithm = algorithm_from_name(name);
    try {
      c.algorithm.mask = mask_kind_from_string(mask);
    } catch (const ConfigError&) {
      throw ConfigError("algorithm.mask: unknown mask kind '" + mask + "'");
    }
  }
  if (const json* h = top.child("hyper")) {
    Reader r(*h, "hyper");
    r.get("k", c.hyper.k);
    r.get("gamma", c.hyper.gamma);
    r.get("lambda", c.hyper.lambda);
    r.get("epochs", c.hyper.epochs);
    r.get("seed", c.hyper.seed);
    r.get("init_scale", c.hyper.init_scale);
    r.finish();
  }
  if (const json* m = top.child("mask")) {
    Reader r(*m, "mask");
    r.get("l2", c.mask.l2);
    r.get("learning_rate", c.mask.learning_rate);
    r.get("epochs", c.mask.epochs);
    r.get("fm_factors", c.mask.fm_factors);
    r.get("hidden_units", c.mask.hidden_units);
    r.get("seed", c.mask.seed);
    r.get("closed_form_init", c.mask.closed_form_init);
    r.finish();
  }
  top.get("th_j", c.th_j);
  if (const json* f = top.child("field")) {
    Reader r(*f, "field");
    r.get("prime", c.field.prime);
    r.get("scale_bits", c.field.scale_bits);
    r.finish();
  }
  top.get("max_gradient_abs", c.max_gradient_abs);
  top.get("threshold", c.threshold);
  if (const json* d = top.child("dropouts")) {
    if (!d->is_array()) throw ConfigError("dropouts: expected an array");
    for (std::size_t n = 0; n < d->size(); ++n) {
      Reader r((*d)[n], "dropouts[" + std::to_string(n) + "]");
      DropoutEvent e;
      r.get("round", e.round);
      r.get("party", e.party);
      r.finish();
      c.dropouts.push_back(e);
    }
  }
  top.get("repetitions", c.repetitions);
  top.get("seed_base", c.seed_base);
  if (const json* e = top.child("evaluation")) {
    Reader r(*e, "evaluation");
    r.get("every", c.evaluation.every);
    r.get("early_stopping", c.evaluation.early_stopping);
    r.get("patience", c.evaluation.patience);
    r.finish();
  }
  top.get("threads", c.threads);
  top.get("record_transcript", c.record_transcript);
  top.get("leakage_parties", c.leakage_parties);
  top.finish();
  c.validate();
  return c;
}

std::string ExperimentConfig::hash() const {
  if (sodium_init() < 0) throw std::runtime_error("libsodium failed to initialise");
  const std::string text = to_json().dump();
  unsigned char digest[crypto_hash_sha256_BYTES];
  crypto_hash_sha256(digest, reinterpret_cast<const unsigned char*>(text.data()), text.size());
  char hex[crypto_hash_sha256_BYTES * 2 + 1];
  sodium_bin2hex(hex, sizeof(hex), digest, sizeof(digest));
  return hex;
}

}  // namespace fedmmf
