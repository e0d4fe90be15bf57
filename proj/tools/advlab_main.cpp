#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "advlab/advlab.hpp"

namespace fs = std::filesystem;

namespace {

using namespace advlab;

struct GlobalArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t workers = 1;
  bool overwrite = false;
};

CliConfig resolve_config(const GlobalArgs& g) {
  CliConfig cfg = load_config(g.config_path);
  if (!g.out_dir.empty()) cfg.out = g.out_dir;
  if (g.seed_set) cfg.seed = g.seed;
  return cfg;
}

std::string out_path(const CliConfig& cfg, const std::string& explicit_path,
                     const char* default_name) {
  if (!explicit_path.empty()) return explicit_path;
  return (fs::path(cfg.out) / default_name).string();
}

void prepare_output(const std::string& path, bool overwrite) {
  if (fs::exists(path) && !overwrite)
    throw ValidationError("output file already exists: " + path + " (pass --overwrite)");
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void require_aligned(const RecordSet& records, const Dataset& ds) {
  if (records.size() != ds.size())
    throw ValidationError("records and dataset disagree on example count");
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].example_id != ds.examples[i].id)
      throw ValidationError("records and dataset disagree on example ids at row " +
                            std::to_string(i));
}

// A ranking file carries a "measure=" header; anything else is read as an
// id,value score table and converted to an ascending-value ranking.
QualityRanking load_ranking_or_scores(const std::string& path) {
  std::ifstream probe(path);
  if (!probe) throw ValidationError("cannot open ranking file: " + path);
  std::string first;
  std::getline(probe, first);
  probe.close();
  if (first.rfind("measure=", 0) == 0) return load_ranking(path);

  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  std::vector<long long> ids;
  std::vector<double> values;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() != 2)
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected id,value");
    ids.push_back(detail::parse_int(fields[0], lineno, path));
    values.push_back(detail::parse_double(fields[1], lineno, path));
  }
  if (ids.empty()) throw ValidationError(path + ": no score rows");
  QualityRanking r;
  r.ids = ids;
  r.rank = rank_values(values, ids, true);
  return r;
}

int cmd_gen_data(const GlobalArgs& g, const std::string& train_out,
                 const std::string& test_out, const std::string& oracle_out) {
  const CliConfig cfg = resolve_config(g);
  const std::string train_path = out_path(cfg, train_out, "train.csv");
  const std::string test_path = out_path(cfg, test_out, "test.csv");
  const std::string oracle_path = out_path(cfg, oracle_out, "oracle.csv");
  prepare_output(train_path, g.overwrite);
  prepare_output(test_path, g.overwrite);
  prepare_output(oracle_path, g.overwrite);

  const Dataset full = generate_synthetic(cfg.data).first;
  const auto split = stratified_split(full, cfg.test_fraction, cfg.data.seed);
  save_delimited(split.first, train_path);
  save_delimited(split.second, test_path);

  const auto means = resolve_means(cfg.data);
  std::ofstream os(oracle_path, std::ios::trunc);
  if (!os) throw ValidationError("cannot open oracle file for writing: " + oracle_path);
  os << "id,ambiguity\n";
  char buf[64];
  for (const Example& e : split.first.examples) {
    detail::format_double(buf, sizeof buf,
                          mixture_ambiguity(e.features, e.label, means, cfg.data.spread));
    os << e.id << ',' << buf << '\n';
  }
  std::cout << "wrote " << train_path << " (" << split.first.size() << " examples), "
            << test_path << " (" << split.second.size() << " examples), " << oracle_path
            << '\n';
  return 0;
}

int cmd_train(const GlobalArgs& g, const std::string& train_in, const std::string& test_in,
              const std::string& objective_override, const std::string& run_out,
              const std::string& records_out, const std::string& best_out,
              const std::string& last_out) {
  CliConfig cfg = resolve_config(g);
  if (!objective_override.empty())
    cfg.objective.kind = objective_kind_from_string(objective_override);
  const std::string train_path = out_path(cfg, train_in, "train.csv");
  const std::string test_path = out_path(cfg, test_in, "test.csv");
  const std::string run_path = out_path(cfg, run_out, "run.json");
  const std::string records_path = out_path(cfg, records_out, "records.csv");
  const std::string best_path = out_path(cfg, best_out, "best.ckpt");
  const std::string last_path = out_path(cfg, last_out, "last.ckpt");
  prepare_output(run_path, g.overwrite);
  prepare_output(records_path, g.overwrite);
  prepare_output(best_path, g.overwrite);
  prepare_output(last_path, g.overwrite);

  const Dataset train = load_delimited(train_path);
  const Dataset test = load_delimited(test_path);
  TrainOptions opt;
  opt.measure_min_pert = cfg.measure_min_pert;
  opt.min_pert_step = cfg.min_pert_step;
  opt.min_pert_max = cfg.min_pert_max;
  const RunResult run = train_run(train, test, cfg.model, cfg.train, cfg.objective,
                                  cfg.eval_attack, cfg.seed, opt);

  save_json(run_to_json(run), run_path);
  std::vector<std::size_t> labels;
  labels.reserve(train.size());
  for (const Example& e : train.examples) labels.push_back(e.label);
  save_records(run.records, labels, run.epochs, records_path);
  save_checkpoint(run.best_net, cfg.train, best_path);
  save_checkpoint(run.last_net, cfg.train, last_path);
  std::cout << "trained " << to_string(cfg.objective.kind) << " for " << run.epochs
            << " epochs, best robust test acc " << run.best_robust_test() << " at epoch "
            << run.best_epoch << '\n';
  return 0;
}

int cmd_profile(const GlobalArgs& g, const std::string& records_in, const std::string& run_in,
                const std::string& data_in, const std::string& checkpoint_in,
                const std::string& profile_out) {
  const CliConfig cfg = resolve_config(g);
  const std::string records_path = out_path(cfg, records_in, "records.csv");
  const std::string run_path = out_path(cfg, run_in, "run.json");
  const std::string profile_path = out_path(cfg, profile_out, "profile.csv");
  prepare_output(profile_path, g.overwrite);

  LoadedRecords loaded = load_records(records_path);
  const json run = load_json(run_path);
  if (!run.contains("best_epoch") || !run["best_epoch"].is_number_integer())
    throw ValidationError(run_path + ": missing best_epoch");
  const long long best_signed = run["best_epoch"].get<long long>();
  const std::size_t best_epoch = best_signed >= 0 ? static_cast<std::size_t>(best_signed) : 0;

  if (cfg.measure_min_pert) {
    const std::string data_path = out_path(cfg, data_in, "train.csv");
    const std::string ckpt_path = out_path(cfg, checkpoint_in, "best.ckpt");
    const Dataset train = load_delimited(data_path);
    require_aligned(loaded.records, train);
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    Mat X;
    std::vector<std::size_t> Y;
    pack(train, X, Y);
    ProfilerScratch scratch;
    measure_min_perturbation(loaded.records, ckpt.net, X, Y, cfg.min_pert_step,
                             cfg.min_pert_max, scratch);
  }

  const QualityRanking ranking =
      ranking_from_records(loaded.records, cfg.measure, loaded.epochs, best_epoch);
  const auto rows =
      make_profile(loaded.records, loaded.labels, loaded.epochs, best_epoch, ranking);
  save_profile(rows, profile_path);
  std::cout << "wrote " << profile_path << " (" << rows.size() << " rows)\n";
  return 0;
}

int cmd_rank(const GlobalArgs& g, const std::vector<std::string>& inputs,
             const std::string& measure_override, const std::string& ranking_out) {
  CliConfig cfg = resolve_config(g);
  if (!measure_override.empty()) cfg.measure = quality_measure_from_string(measure_override);
  const std::string ranking_path = out_path(cfg, ranking_out, "ranking.csv");
  prepare_output(ranking_path, g.overwrite);
  if (inputs.empty()) throw ValidationError("rank: at least one profile file required");

  std::vector<QualityRanking> rankings;
  for (const std::string& path : inputs)
    rankings.push_back(ranking_from_profile(load_profile(path), cfg.measure));
  const QualityRanking ensembled = ensemble_rank(rankings);
  save_ranking(ensembled, ranking_path);
  std::cout << "wrote " << ranking_path << " (ensemble of " << rankings.size() << ")\n";
  return 0;
}

int cmd_split(const GlobalArgs& g, const std::string& data_in, const std::string& ranking_in,
              const std::string& high_out, const std::string& low_out) {
  const CliConfig cfg = resolve_config(g);
  const std::string data_path = out_path(cfg, data_in, "train.csv");
  const std::string ranking_path = out_path(cfg, ranking_in, "ranking.csv");
  const std::string high_path = out_path(cfg, high_out, "high.csv");
  const std::string low_path = out_path(cfg, low_out, "low.csv");
  prepare_output(high_path, g.overwrite);
  prepare_output(low_path, g.overwrite);

  const Dataset ds = load_delimited(data_path);
  const QualityRanking ranking = load_ranking(ranking_path);
  const auto halves = class_balanced_halves(ds, ranking);
  save_delimited(halves.first, high_path);
  save_delimited(halves.second, low_path);
  std::cout << "wrote " << high_path << " (" << halves.first.size() << ") and " << low_path
            << " (" << halves.second.size() << ")\n";
  return 0;
}

int cmd_prune(const GlobalArgs& g, const std::string& data_in, const std::string& ranking_in,
              double fraction, const std::string& mode_name, const std::string& pruned_out,
              const std::string& manifest_out) {
  const CliConfig cfg = resolve_config(g);
  const RemovalMode mode = removal_mode_from_string(mode_name);
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw ValidationError("prune: fraction must lie in [0,1)");
  const std::string data_path = out_path(cfg, data_in, "train.csv");
  const std::string ranking_path = out_path(cfg, ranking_in, "ranking.csv");
  const std::string pruned_path = out_path(cfg, pruned_out, "pruned.csv");
  const std::string manifest_path = out_path(cfg, manifest_out, "manifest.csv");
  prepare_output(pruned_path, g.overwrite);
  prepare_output(manifest_path, g.overwrite);

  const Dataset ds = load_delimited(data_path);
  const QualityRanking ranking = load_ranking(ranking_path);
  auto removed = removal_order(ds, ranking, mode, cfg.seed);
  removed.resize(static_cast<std::size_t>(fraction * static_cast<double>(ds.size())));
  const Dataset pruned = remove_ids(ds, removed);
  save_prune_manifest(manifest_path, mode, fraction, cfg.seed, removed);
  save_delimited(pruned, pruned_path);
  std::cout << "removed " << removed.size() << " of " << ds.size() << " examples, wrote "
            << pruned_path << " and " << manifest_path << '\n';
  return 0;
}

ExperimentProtocol protocol_from(const CliConfig& cfg) {
  ExperimentProtocol proto =
      bulk_protocol(cfg.model, cfg.train, cfg.objective, cfg.eval_attack, cfg.eval_suite);
  return proto;
}

int cmd_curve(const GlobalArgs& g, const std::string& train_in, const std::string& test_in,
              const std::string& ranking_in, const std::string& curve_json_out,
              const std::string& curve_csv_out) {
  const CliConfig cfg = resolve_config(g);
  const std::string train_path = out_path(cfg, train_in, "train.csv");
  const std::string test_path = out_path(cfg, test_in, "test.csv");
  const std::string ranking_path = out_path(cfg, ranking_in, "ranking.csv");
  const std::string json_path = out_path(cfg, curve_json_out, "curve.json");
  const std::string csv_path = out_path(cfg, curve_csv_out, "curve.csv");
  prepare_output(json_path, g.overwrite);
  prepare_output(csv_path, g.overwrite);

  const Dataset train = load_delimited(train_path);
  const Dataset test = load_delimited(test_path);
  const QualityRanking ranking = load_ranking(ranking_path);
  const ExperimentProtocol proto = protocol_from(cfg);

  struct Job {
    double fraction;
    RemovalMode mode;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (double fraction : cfg.fractions)
    for (RemovalMode mode : cfg.modes)
      for (std::uint64_t seed : cfg.seeds) jobs.push_back({fraction, mode, seed});

  std::vector<CurveCondition> curve(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        curve[i] = run_condition(train, test, ranking, jobs[i].fraction, jobs[i].mode,
                                 jobs[i].seed, proto);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(g.workers, jobs.size()));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (err) std::rethrow_exception(err);

  save_json(curve_to_json(curve), json_path);
  save_curve_csv(curve, csv_path);
  std::cout << "wrote " << json_path << " and " << csv_path << " (" << curve.size()
            << " conditions)\n";
  return 0;
}

int cmd_eval_attacks(const GlobalArgs& g, const std::string& checkpoint_in,
                     const std::string& data_in, const std::string& surrogate_in,
                     const std::string& eval_out) {
  const CliConfig cfg = resolve_config(g);
  const std::string ckpt_path = out_path(cfg, checkpoint_in, "best.ckpt");
  const std::string data_path = out_path(cfg, data_in, "test.csv");
  const std::string eval_path = out_path(cfg, eval_out, "eval.json");
  prepare_output(eval_path, g.overwrite);

  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Dataset test = load_delimited(data_path);
  EvalSuite suite = cfg.eval_suite;
  suite.run_seed = cfg.seed;
  Checkpoint surrogate;
  const Network* surrogate_net = nullptr;
  if (!surrogate_in.empty()) {
    surrogate = load_checkpoint(surrogate_in);
    surrogate_net = &surrogate.net;
  }
  const auto table = overestimation_eval(ckpt.net, test, suite, surrogate_net);

  json j;
  j["evaluators"] = evaluators_to_json(table);
  j["overestimation_gap"] =
      overestimation_gap(evaluator_accuracy(table, "pgd"), strong_accuracy(table));
  j["strong_accuracy"] = strong_accuracy(table);
  save_json(j, eval_path);
  std::cout << "wrote " << eval_path << '\n';
  return 0;
}

int cmd_spearman(const GlobalArgs& g, const std::string& a_in, const std::string& b_in,
                 std::size_t shuffles, const std::string& result_out) {
  const CliConfig cfg = resolve_config(g);
  const QualityRanking a = load_ranking_or_scores(a_in);
  const QualityRanking b = load_ranking_or_scores(b_in);
  const double rho = spearman(a, b);

  const auto b_by_id = rank_by_id(b);
  std::vector<double> av, bv;
  av.reserve(a.ids.size());
  bv.reserve(a.ids.size());
  for (std::size_t i = 0; i < a.ids.size(); ++i) {
    av.push_back(a.rank[i]);
    bv.push_back(b_by_id.at(a.ids[i]));
  }
  const double p = permutation_test(av, bv, shuffles, cfg.seed);

  json j;
  j["n"] = a.ids.size();
  j["p_value"] = p;
  j["shuffles"] = shuffles;
  j["spearman"] = rho;
  std::cout << j.dump(2) << '\n';
  if (!result_out.empty()) {
    prepare_output(result_out, g.overwrite);
    save_json(j, result_out);
  }
  return 0;
}

int cmd_report(const GlobalArgs& g, const std::string& curve_in,
               const std::string& report_out) {
  const CliConfig cfg = resolve_config(g);
  const std::string curve_path = out_path(cfg, curve_in, "curve.json");
  const std::string report_path = out_path(cfg, report_out, "report.json");
  prepare_output(report_path, g.overwrite);

  const json curve = load_json(curve_path);
  if (!curve.is_array() || curve.empty())
    throw ValidationError(curve_path + ": expected a nonempty array of conditions");

  struct Key {
    double fraction;
    std::string mode;
    bool operator<(const Key& o) const {
      if (fraction != o.fraction) return fraction < o.fraction;
      return mode < o.mode;
    }
  };
  std::map<Key, std::map<std::string, std::vector<double>>> groups;
  for (const json& cond : curve) {
    const Key key{cond.at("fraction").get<double>(), cond.at("mode").get<std::string>()};
    auto& metrics = groups[key];
    metrics["best_robust_test"].push_back(cond.at("adv_run").at("best_robust_test_acc"));
    metrics["last_robust_test"].push_back(cond.at("adv_run").at("last_robust_test_acc"));
    const json& gaps = cond.at("gaps");
    metrics["robust_overfitting_gap"].push_back(gaps.at("robust_overfitting_gap"));
    metrics["overestimation_gap"].push_back(gaps.at("overestimation_gap"));
    metrics["cross_generalization_gap"].push_back(gaps.at("cross_generalization_gap"));
  }

  json out = json::array();
  for (const auto& [key, metrics] : groups) {
    json entry;
    entry["fraction"] = key.fraction;
    entry["mode"] = key.mode;
    for (const auto& [name, values] : metrics) {
      const SeedAggregate agg = aggregate(values);
      json m;
      m["mean"] = agg.mean;
      m["n"] = agg.n;
      m["stddev"] = agg.stddev;
      entry[name] = m;
    }
    out.push_back(std::move(entry));
  }
  json wrapper;
  wrapper["conditions"] = out;
  wrapper["config_digest"] =
      config_digest(cfg.model, cfg.train, cfg.objective, cfg.eval_attack);
  save_json(wrapper, report_path);
  std::cout << "wrote " << report_path << " (" << out.size() << " condition groups)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial training laboratory"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path,
                 "config file path (default: $ADVLAB_CONFIG, else built-in defaults)");
  app.add_option("--out", g.out_dir, "output directory (default from config)");
  auto* seed_opt = app.add_option("--seed", g.seed, "override the config seed");
  app.add_option("--workers", g.workers, "worker threads for curve")
      ->check(CLI::Range(std::size_t{1}, std::size_t{64}));
  app.add_flag("--overwrite", g.overwrite, "replace existing output files");

  std::string train_in, test_in, data_in, records_in, run_in, checkpoint_in, surrogate_in;
  std::string ranking_in, curve_in, a_in, b_in;
  std::string train_out, test_out, oracle_out, run_out, records_out, best_out, last_out;
  std::string profile_out, ranking_out, high_out, low_out, pruned_out, manifest_out;
  std::string curve_json_out, curve_csv_out, eval_out, report_out, result_out;
  std::string objective_override, measure_override, mode_name = "ascending_quality";
  std::vector<std::string> rank_inputs;
  double fraction = 0.0;
  std::size_t shuffles = 10000;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic train/test split");
  gen->add_option("--train-out", train_out, "training set path");
  gen->add_option("--test-out", test_out, "test set path");
  gen->add_option("--oracle-out", oracle_out, "ambiguity oracle path");

  auto* train = app.add_subcommand("train", "run one training job");
  train->add_option("--train", train_in, "training set path");
  train->add_option("--test", test_in, "test set path");
  train->add_option("--objective", objective_override,
                    "override the objective kind from the config");
  train->add_option("--run-out", run_out, "run summary path");
  train->add_option("--records-out", records_out, "per-example records path");
  train->add_option("--best-out", best_out, "best checkpoint path");
  train->add_option("--last-out", last_out, "last checkpoint path");

  auto* profile = app.add_subcommand("profile", "build the per-example profile table");
  profile->add_option("--records", records_in, "records path from train");
  profile->add_option("--run", run_in, "run summary path from train");
  profile->add_option("--data", data_in, "training set path (for min perturbation)");
  profile->add_option("--checkpoint", checkpoint_in, "checkpoint path (for min perturbation)");
  profile->add_option("--profile-out", profile_out, "profile table path");

  auto* rank = app.add_subcommand("rank", "ensemble profile tables into a quality ranking");
  rank->add_option("--inputs", rank_inputs, "profile tables to ensemble")->required();
  rank->add_option("--measure", measure_override, "override the quality measure");
  rank->add_option("--ranking-out", ranking_out, "ranking path");

  auto* split = app.add_subcommand("split", "split a dataset into quality halves");
  split->add_option("--data", data_in, "dataset path");
  split->add_option("--ranking", ranking_in, "ranking path");
  split->add_option("--high-out", high_out, "high-quality half path");
  split->add_option("--low-out", low_out, "low-quality half path");

  auto* prune = app.add_subcommand("prune", "remove a fraction of a dataset");
  prune->add_option("--data", data_in, "dataset path");
  prune->add_option("--ranking", ranking_in, "ranking path");
  prune->add_option("--fraction", fraction, "fraction to remove")->required();
  prune->add_option("--mode", mode_name, "random or ascending_quality");
  prune->add_option("--pruned-out", pruned_out, "pruned dataset path");
  prune->add_option("--manifest-out", manifest_out, "removal manifest path");

  auto* curve = app.add_subcommand("curve", "run the full removal-curve protocol");
  curve->add_option("--train", train_in, "training set path");
  curve->add_option("--test", test_in, "test set path");
  curve->add_option("--ranking", ranking_in, "ranking path");
  curve->add_option("--json-out", curve_json_out, "curve report path");
  curve->add_option("--csv-out", curve_csv_out, "flat table path");

  auto* eval = app.add_subcommand("eval-attacks", "run the evaluator battery on a checkpoint");
  eval->add_option("--checkpoint", checkpoint_in, "checkpoint path");
  eval->add_option("--data", data_in, "evaluation set path");
  eval->add_option("--surrogate", surrogate_in, "surrogate checkpoint for transfer");
  eval->add_option("--eval-out", eval_out, "evaluator report path");

  auto* spear = app.add_subcommand("spearman", "rank correlation between two rankings");
  spear->add_option("a", a_in, "first ranking or id,value file")->required();
  spear->add_option("b", b_in, "second ranking or id,value file")->required();
  spear->add_option("--shuffles", shuffles, "permutation test shuffles");
  spear->add_option("--result-out", result_out, "also write the result as JSON");

  auto* report = app.add_subcommand("report", "aggregate a curve report across seeds");
  report->add_option("--curve", curve_in, "curve report path");
  report->add_option("--report-out", report_out, "aggregated report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    if (gen->parsed()) return cmd_gen_data(g, train_out, test_out, oracle_out);
    if (train->parsed())
      return cmd_train(g, train_in, test_in, objective_override, run_out, records_out,
                       best_out, last_out);
    if (profile->parsed())
      return cmd_profile(g, records_in, run_in, data_in, checkpoint_in, profile_out);
    if (rank->parsed()) return cmd_rank(g, rank_inputs, measure_override, ranking_out);
    if (split->parsed()) return cmd_split(g, data_in, ranking_in, high_out, low_out);
    if (prune->parsed())
      return cmd_prune(g, data_in, ranking_in, fraction, mode_name, pruned_out, manifest_out);
    if (curve->parsed())
      return cmd_curve(g, train_in, test_in, ranking_in, curve_json_out, curve_csv_out);
    if (eval->parsed())
      return cmd_eval_attacks(g, checkpoint_in, data_in, surrogate_in, eval_out);
    if (spear->parsed()) return cmd_spearman(g, a_in, b_in, shuffles, result_out);
    if (report->parsed()) return cmd_report(g, curve_in, report_out);
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
}
