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

// Command-line entry point: prepare, run, attack, report.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "fedmmf/attacks.hpp"
#include "fedmmf/dataset.hpp"
#include "fedmmf/errors.hpp"
#include "fedmmf/fedsim.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace fedmmf;

namespace {

std::string number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Writes through a temporary file so readers never see a partial output.
void write_atomically(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
  }
  fs::rename(tmp, path);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string mean_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << mean << " ± " << sd;
  return s.str();
}

// ---- prepare --------------------------------------------------------------

struct PrepareArgs {
  std::string dataset = "ml100k";
  std::string in;
  std::string out = "bundles";
  int pca_dim = 25;
  int bins = 5;
  std::uint64_t seed = 0;
};

fs::path default_raw_dir(const std::string& dataset) {
  const char* env = std::getenv("FEDMMF_DATA_DIR");
  const fs::path root = env ? fs::path(env) : fs::path("data");
  if (dataset == "ml100k") return root / "ml-100k";
  if (dataset == "ml10m") return root / "ml-10M100K";
  return root / "hetrec2011-lastfm-2k";
}

int cmd_prepare(const PrepareArgs& a) {
  const fs::path in = a.in.empty() ? default_raw_dir(a.dataset) : fs::path(a.in);
  struct Layout {
    const char* ratings;
    const char* expected;
  };
  static const std::map<std::string, Layout> layouts = {
      {"ml100k", {"u.data", "u.data (user<TAB>item<TAB>rating<TAB>time), u.user, u.item"}},
      {"ml10m", {"ratings.dat", "ratings.dat (user::item::rating::time), movies.dat, tags.dat"}},
      {"lastfm", {"user_artists.dat", "user_artists.dat, user_taggedartists.dat, tags.dat"}},
  };
  const auto layout = layouts.find(a.dataset);
  if (layout == layouts.end()) throw ConfigError("--dataset must be ml100k, ml10m or lastfm");
  if (!fs::exists(in / layout->second.ratings))
    throw ParseError("missing " + (in / layout->second.ratings).string() + "; expected layout in " + in.string() +
                     ": " + layout->second.expected);

  Dataset d;
  SideInformation side;
  if (a.dataset == "ml100k") {
    d = parse_movielens(in / "u.data", MovieLensFormat::kMl100k);
    side = load_ml100k_side_information(in, d);
  } else if (a.dataset == "ml10m") {
    d = parse_movielens(in / "ratings.dat", MovieLensFormat::kMl10m);
    side = load_ml10m_side_information(in, d);
  } else {
    d = parse_lastfm(in / "user_artists.dat", a.bins);
    side = load_lastfm_side_information(in, d);
  }
  attach_features(d, side, a.pca_dim);
  const fs::path out = fs::path(a.out) / a.dataset;
  const std::string hash = write_bundle(d, out, a.seed);
  std::cout << "bundle " << out.string() << ": " << d.n_users << " users, " << d.n_items << " items, "
            << d.ratings.size() << " ratings, hash " << hash << "\n";
  return 0;
}

// ---- run --------------------------------------------------------------------

struct RunArgs {
  std::string config;
  std::string out = "runs/latest";
  int repetitions = 0;
  int threads = 0;
};

void write_repetition(const fs::path& dir, const RunResult& r, const Dataset& d) {
  fs::create_directories(dir);
  if (!r.privacy.empty()) {
    std::string text = "party_id,j_estimate,n_samples,optimistic,group\n";
    for (const PrivacyReport& p : r.privacy)
      text += std::to_string(p.user_id) + "," + number(p.j_estimate) + "," + std::to_string(p.n_samples) + "," +
              (p.optimistic ? "1" : "0") + "," + to_string(p.group) + "\n";
    write_atomically(dir / "privacy.csv", text);
  }
  bool any_mask = false;
  std::string masked = "party_id,item_id,masked,original\n";
  for (const PartyState& party : r.parties) {
    if (!party.mask_model) continue;
    any_mask = true;
    for (std::size_t j = 0; j < party.masked_ratings.size(); ++j)
      masked += std::to_string(party.user_id) + "," + std::to_string(party.masked_ratings[j].item_id) + "," +
                number(party.masked_ratings[j].value) + "," + number(party.split.train[j].rating) + "\n";
  }
  if (any_mask && !r.privacy.empty()) write_atomically(dir / "masked_ratings.csv", masked);
  if (!r.train_loss.empty()) {
    std::string text = "round,train_loss\n";
    for (std::size_t t = 0; t < r.train_loss.size(); ++t) text += std::to_string(t + 1) + "," + number(r.train_loss[t]) + "\n";
    write_atomically(dir / "train_loss.csv", text);
  }
  if (!r.history.empty()) {
    std::string text = "round,val_rmse,val_mae,test_rmse,test_mae\n";
    for (const auto& c : r.history)
      text += std::to_string(c.round) + "," + number(c.validation.rmse) + "," + number(c.validation.mae) + "," +
              number(c.test.rmse) + "," + number(c.test.mae) + "\n";
    write_atomically(dir / "history.csv", text);
  }
  if (!r.leakage.empty()) {
    json snaps = json::array();
    auto vecs = [](const std::vector<Eigen::VectorXd>& vs) {
      json a = json::array();
      for (const auto& v : vs) a.push_back(std::vector<double>(v.data(), v.data() + v.size()));
      return a;
    };
    for (const LeakageSnapshot& s : r.leakage) {
      snaps.push_back({{"party", s.party},
                       {"gamma", s.gamma},
                       {"lambda", s.lambda},
                       {"items", s.items},
                       {"q_prev", vecs(s.q_prev)},
                       {"q_curr", vecs(s.q_curr)},
                       {"eta_prev", vecs(s.eta_prev)},
                       {"eta_curr", vecs(s.eta_curr)},
                       {"truth_p_prev", std::vector<double>(s.truth_p_prev.data(), s.truth_p_prev.data() + s.truth_p_prev.size())},
                       {"truth_p_curr", std::vector<double>(s.truth_p_curr.data(), s.truth_p_curr.data() + s.truth_p_curr.size())},
                       {"truth_targets", s.truth_targets},
                       {"truth_ratings", s.truth_ratings}});
    }
    write_atomically(dir / "leakage.json", snaps.dump() + "\n");
  }
  if (!r.transcript.empty()) {
    static const char* const kKinds[] = {"item_request", "gradient", "group_tag"};
    std::string text = "kind,party_id,round,payload_bytes\n";
    for (const TranscriptEntry& e : r.transcript)
      text += std::string(kKinds[static_cast<int>(e.kind)]) + "," + std::to_string(e.party) + "," +
              std::to_string(e.round) + "," + std::to_string(e.payload_bytes) + "\n";
    write_atomically(dir / "transcript.csv", text);
  }
  (void)d;
}

int cmd_run(const RunArgs& a) {
  ExperimentConfig config = ExperimentConfig::from_json(read_json(a.config));
  if (a.repetitions > 0) config.repetitions = a.repetitions;
  if (a.threads > 0) config.threads = a.threads;
  config.validate();
  const Dataset dataset = read_bundle(config.dataset);
  const std::string data_hash = dataset_hash(dataset);
  const fs::path out(a.out);
  fs::create_directories(out);

  std::string metrics = "algorithm,dataset,repetition,seed,rmse,mae,val_rmse,val_mae,rounds_run,best_round,n_secure,n_insecure\n";
  json rows = json::array();
  json seeds = json::array();
  std::vector<double> rmse, mae;
  for (int rep = 0; rep < config.repetitions; ++rep) {
    const RunResult r = run_experiment(config, dataset, rep);
    write_repetition(out / ("rep_" + std::to_string(rep)), r, dataset);
    metrics += r.label + "," + dataset.name + "," + std::to_string(rep) + "," + std::to_string(r.seed) + "," +
               number(r.test.rmse) + "," + number(r.test.mae) + "," + number(r.validation.rmse) + "," +
               number(r.validation.mae) + "," + std::to_string(r.rounds_run) + "," + std::to_string(r.best_round) +
               "," + std::to_string(r.n_secure) + "," + std::to_string(r.n_insecure) + "\n";
    rows.push_back({{"repetition", rep},
                    {"seed", r.seed},
                    {"rmse", r.test.rmse},
                    {"mae", r.test.mae},
                    {"val_rmse", r.validation.rmse},
                    {"val_mae", r.validation.mae},
                    {"rounds_run", r.rounds_run},
                    {"best_round", r.best_round},
                    {"n_secure", r.n_secure},
                    {"n_insecure", r.n_insecure},
                    {"seconds_local", r.seconds_local},
                    {"seconds_federated", r.seconds_federated}});
    seeds.push_back(r.seed);
    rmse.push_back(r.test.rmse);
    mae.push_back(r.test.mae);
    std::cerr << r.label << " rep " << rep << ": RMSE " << number(r.test.rmse) << " MAE " << number(r.test.mae)
              << " (" << r.rounds_run << " rounds, " << std::fixed << std::setprecision(1)
              << r.seconds_local + r.seconds_federated << std::defaultfloat << " s)\n";
    write_atomically(out / "metrics.csv", metrics);
  }
  const json manifest = {{"format_version", 1},
                         {"label", config.algorithm.label()},
                         {"dataset", dataset.name},
                         {"config", config.to_json()},
                         {"config_hash", config.hash()},
                         {"dataset_hash", data_hash},
                         {"seeds", seeds},
                         {"rows", rows},
                         {"rmse", mean_std(rmse)},
                         {"mae", mean_std(mae)}};
  write_atomically(out / "manifest.json", manifest.dump(1) + "\n");
  std::cout << config.algorithm.label() << " | " << dataset.name << " | RMSE " << mean_std(rmse) << " | MAE "
            << mean_std(mae) << "\n";
  return 0;
}

// ---- attack -----------------------------------------------------------------

struct AttackArgs {
  std::string run;
  std::vector<double> g{1, 2, 3};
  std::vector<double> h{0.01, 0.02, 0.05};
  bool leakage = false;
  int repetition = 0;
  std::string out;
};

std::vector<PartyRatings> read_masked(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::map<Index, PartyRatings> by_party;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream s(line);
    std::string f[4];
    for (auto& x : f) std::getline(s, x, ',');
    const Index party = static_cast<Index>(std::stoul(f[0]));
    PartyRatings& pr = by_party[party];
    pr.party = party;
    pr.items.push_back(static_cast<Index>(std::stoul(f[1])));
    pr.masked.push_back(std::stod(f[2]));
    pr.original.push_back(std::stod(f[3]));
  }
  std::vector<PartyRatings> out;
  for (auto& [id, pr] : by_party) out.push_back(std::move(pr));
  return out;
}

void run_leakage(const fs::path& rep_dir, const fs::path& out) {
  const json snaps = read_json(rep_dir / "leakage.json");
  auto vecs = [](const json& a) {
    std::vector<Eigen::VectorXd> out;
    for (const auto& v : a) {
      const auto d = v.get<std::vector<double>>();
      out.emplace_back(Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size())));
    }
    return out;
  };
  std::string text = "party_id,item_id,truth_rating,truth_target,recovered,residual_norm,resolved,ambiguous\n";
  for (const json& s : snaps) {
    LeakageInstance in;
    in.gamma = s.at("gamma").get<double>();
    in.lambda = s.at("lambda").get<double>();
    in.q_prev = vecs(s.at("q_prev"));
    in.q_curr = vecs(s.at("q_curr"));
    in.eta_prev = vecs(s.at("eta_prev"));
    in.eta_curr = vecs(s.at("eta_curr"));
    const LeakageSolution sol = gradient_leakage_solve(in);
    const auto items = s.at("items").get<std::vector<Index>>();
    const auto ratings = s.at("truth_ratings").get<std::vector<double>>();
    const auto targets = s.at("truth_targets").get<std::vector<double>>();
    for (std::size_t j = 0; j < items.size(); ++j)
      text += std::to_string(s.at("party").get<Index>()) + "," + std::to_string(items[j]) + "," + number(ratings[j]) +
              "," + number(targets[j]) + "," + number(sol.ratings[j]) + "," + number(sol.residual_norm) + "," +
              (sol.resolved ? "1" : "0") + "," + (sol.ambiguous ? "1" : "0") + "\n";
  }
  write_atomically(out / "leakage_report.csv", text);
}

int cmd_attack(const AttackArgs& a) {
  const fs::path run(a.run);
  const json manifest = read_json(run / "manifest.json");
  const fs::path rep_dir = run / ("rep_" + std::to_string(a.repetition));
  const fs::path out = a.out.empty() ? run / "attack" : fs::path(a.out);
  fs::create_directories(out);
  const bool has_masks = fs::exists(rep_dir / "masked_ratings.csv");
  if (!has_masks && !a.leakage)
    throw ConfigError("run " + run.string() + " has no masked ratings; recovery and ranking attacks need a FedMMF run");
  if (a.leakage) {
    if (!fs::exists(rep_dir / "leakage.json")) throw ConfigError("run has no leakage snapshots; set leakage_parties");
    run_leakage(rep_dir, out);
  }
  if (has_masks) {
    const Dataset bundle = read_bundle(manifest.at("config").at("dataset").get<std::string>());
    const auto parties = read_masked(rep_dir / "masked_ratings.csv");
    const AttackReport report = attack_report(parties, bundle.scale, a.g, a.h);
    write_attack_report(report, out);
    for (std::size_t j = 0; j < a.g.size(); ++j)
      std::cout << "g=" << format_level(a.g[j]) << ": parties with alpha > 0.5: " << report.fraction_alpha_above(j, 0.5) << "\n";
    for (std::size_t j = 0; j < a.h.size(); ++j)
      std::cout << "h=" << format_level(a.h[j]) << ": parties with beta >= 0.5: " << report.fraction_beta_at_least(j, 0.5) << "\n";
  }
  json attack_manifest = {{"run", run.string()},
                          {"config_hash", manifest.at("config_hash")},
                          {"repetition", a.repetition},
                          {"g", a.g},
                          {"h", a.h},
                          {"leakage", a.leakage}};
  write_atomically(out / "manifest.json", attack_manifest.dump(1) + "\n");
  return 0;
}

// ---- report -----------------------------------------------------------------

int cmd_report(const std::vector<std::string>& runs, const std::string& out) {
  std::vector<std::string> datasets;
  std::vector<std::string> labels;
  std::map<std::pair<std::string, std::string>, std::pair<std::string, std::string>> cells;
  for (const std::string& r : runs) {
    const json m = read_json(fs::path(r) / "manifest.json");
    const std::string label = m.at("label");
    const std::string dataset = m.at("dataset");
    if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
    if (std::find(datasets.begin(), datasets.end(), dataset) == datasets.end()) datasets.push_back(dataset);
    std::vector<double> rmse, mae;
    for (const json& row : m.at("rows")) {
      rmse.push_back(row.at("rmse").get<double>());
      mae.push_back(row.at("mae").get<double>());
    }
    cells[{label, dataset}] = {mean_std(rmse), mean_std(mae)};
  }
  std::ostringstream table;
  table << "| Method |";
  for (const auto& d : datasets) table << " " << d << " RMSE | " << d << " MAE |";
  table << "\n|---|";
  for (std::size_t j = 0; j < datasets.size(); ++j) table << "---|---|";
  table << "\n";
  for (const auto& l : labels) {
    table << "| " << l << " |";
    for (const auto& d : datasets) {
      const auto it = cells.find({l, d});
      if (it == cells.end()) table << " - | - |";
      else table << " " << it->second.first << " | " << it->second.second << " |";
    }
    table << "\n";
  }
  std::cout << table.str();
  if (!out.empty()) write_atomically(out, table.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated masked matrix factorization experiments"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Parse, feature and bundle a raw dataset");
  prepare->add_option("--dataset", prep.dataset, "ml100k, ml10m or lastfm")->capture_default_str();
  prepare->add_option("--in", prep.in, "Raw dataset directory (default: $FEDMMF_DATA_DIR/<dataset dir>)");
  prepare->add_option("--out", prep.out, "Bundle root; the bundle goes to <out>/<dataset>")->capture_default_str();
  prepare->add_option("--pca-dim", prep.pca_dim, "Feature dimension after PCA")->capture_default_str();
  prepare->add_option("--bins", prep.bins, "LastFM rating bins")->capture_default_str();
  prepare->add_option("--seed", prep.seed, "Seed recorded in the bundle manifest")->capture_default_str();

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment config with repetitions");
  run_cmd->add_option("--config", run.config, "Experiment JSON")->required();
  run_cmd->add_option("--out", run.out, "Output directory")->capture_default_str();
  run_cmd->add_option("--repetitions", run.repetitions, "Override config repetitions");
  run_cmd->add_option("--threads", run.threads, "Override config threads");

  AttackArgs atk;
  auto* attack = app.add_subcommand("attack", "Recovery, ranking and gradient-leakage attacks on a run");
  attack->add_option("--run", atk.run, "Run directory")->required();
  attack->add_option("--g", atk.g, "Error levels")->delimiter(',')->capture_default_str();
  attack->add_option("--h", atk.h, "Top proportions")->delimiter(',')->capture_default_str();
  attack->add_flag("--leakage", atk.leakage, "Solve stored gradient snapshots for ratings");
  attack->add_option("--repetition", atk.repetition, "Repetition to attack")->capture_default_str();
  attack->add_option("--out", atk.out, "Output directory (default <run>/attack)");

  std::vector<std::string> report_runs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Table of mean ± std over run directories");
  report->add_option("runs", report_runs, "Run directories")->required();
  report->add_option("--out", report_out, "Also write the table here");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*prepare) return cmd_prepare(prep);
    if (*run_cmd) return cmd_run(run);
    if (*attack) return cmd_attack(atk);
    if (*report) return cmd_report(report_runs, report_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
