// latent-score: generate data, train hidden-root naive-Bayes models, score
// them, and run model-selection sweeps.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "latent_score/em.hpp"
#include "latent_score/experiment.hpp"
#include "latent_score/io.hpp"
#include "latent_score/scoring.hpp"
#include "latent_score/synth.hpp"

namespace ls = latent_score;

namespace {

std::vector<ls::Measure> parse_measures(const std::string& list) {
  std::vector<ls::Measure> out;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(ls::parse_measure(item));
  }
  if (out.empty()) throw ls::ContractError("measure list is empty");
  return out;
}

std::pair<int, int> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) {
      const int c = std::stoi(text);
      return {c, c};
    }
    return {std::stoi(text.substr(0, colon)), std::stoi(text.substr(colon + 1))};
  } catch (const std::exception&) {
    throw ls::ContractError("--test-c expects LO:HI or a single integer, got '" + text + "'");
  }
}

struct GenerateArgs {
  std::size_t n = 8;
  int c = 4;
  std::size_t samples = 400;
  std::uint64_t seed = 1;
  std::string model_out = "model.json";
  std::string data_out = "data.csv";
  bool keep_hidden = false;
};

int run_generate(const GenerateArgs& a) {
  const auto spec = ls::binary_spec(a.n, a.c);
  ls::SeededStream model_stream(a.seed, 0);
  const auto model = ls::generate_model(spec, model_stream);
  ls::SeededStream data_stream(a.seed, 1);
  auto data = ls::sample_dataset(model, a.samples, data_stream);
  ls::write_model(model, a.model_out);
  ls::write_dataset(a.keep_hidden ? data : ls::strip_hidden(data), a.data_out);
  std::cout << "wrote " << a.model_out << " and " << a.data_out << "\n";
  return 0;
}

struct TrainArgs {
  std::string data;
  int c = 2;
  double epsilon = 0.01;
  std::uint64_t seed = 1;
  std::string mode = "map";
  double rel_tol = 1e-5;
  std::size_t max_iters = 200;
  std::size_t tournament_start = 64;
  bool stop_early = false;
  std::string out = "trained.json";
};

int run_train(const TrainArgs& a) {
  auto data = ls::read_dataset(a.data);
  if (data.has_hidden()) data = ls::strip_hidden(data);
  const ls::ModelSpec spec{data.observed_arities(), a.c};
  spec.validate();
  const auto prior = ls::PriorSet::uniform(spec, 1.0 + a.epsilon);
  ls::EmConfig config;
  config.mode = a.mode == "ml" ? ls::EmMode::Ml : ls::EmMode::Map;
  config.rel_tol = a.rel_tol;
  config.max_iters_after_init = a.max_iters;
  config.tournament_start = a.tournament_start;
  config.stop_early = a.stop_early;
  config.threads = ls::threads_from_env();
  const auto result = ls::fit(data, spec, prior, config, ls::SeededStream(a.seed, 0));
  ls::write_model(result.params, a.out, ls::FitMetadata{result.final_g, result.converged, result.iterations_used});
  std::cout << "final_g=" << result.final_g << " converged=" << (result.converged ? "true" : "false")
            << " iterations=" << result.iterations_used << "\n";
  return 0;
}

struct ScoreArgs {
  std::string data;
  std::string model;
  double epsilon = 0.01;
  bool oracle = false;
  std::uint64_t oracle_cap = ls::kDefaultOracleCap;
  std::string measures = "laplace,bic,draper,mled,cs";
  std::string out;
};

int run_score(const ScoreArgs& a) {
  const auto loaded = ls::read_model(a.model);
  const auto& spec = loaded.params.spec();
  auto data = ls::read_dataset(a.data, spec.observed_arities);
  if (data.has_hidden()) data = ls::strip_hidden(data);
  const auto prior = ls::PriorSet::uniform(spec, 1.0 + a.epsilon);
  ls::ScoreOptions options;
  options.measures = parse_measures(a.measures);
  options.oracle_cap = a.oracle_cap;
  std::optional<double> oracle;
  if (a.oracle) oracle = ls::oracle_exact(data, spec, prior, a.oracle_cap);  // throws when infeasible
  std::erase(options.measures, ls::Measure::Oracle);
  auto report = ls::score_at_mode(loaded.params, data, prior, options);
  report.oracle.value = oracle;
  const std::string text = ls::score_report_csv_header() + "\n" + ls::score_report_csv_row(report) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    ls::write_text_file(a.out, text);
  }
  return 0;
}

int run_sweep_command(const CLI::App& cmd, const std::string& config_file, ls::ExperimentConfig flags,
                      const std::string& test_c, const std::string& measures) {
  ls::ExperimentConfig config;
  if (!config_file.empty()) {
    config = ls::config_from_json(nlohmann::json::parse(ls::read_text_file(config_file)));
  }
  const auto given = [&](const char* name) { return cmd.get_option(name)->count() > 0; };
  if (given("--n")) config.n_observed = flags.n_observed;
  if (given("--c-true")) config.c_true = flags.c_true;
  if (given("--samples")) config.n_samples = flags.n_samples;
  if (given("--replicates")) config.replicates = flags.replicates;
  if (given("--epsilon")) config.epsilon = flags.epsilon;
  if (given("--seed")) config.master_seed = flags.master_seed;
  if (given("--out")) config.output_dir = flags.output_dir;
  if (given("--rel-tol")) config.em_rel_tol = flags.em_rel_tol;
  if (given("--max-iters")) config.em_max_iters = flags.em_max_iters;
  if (given("--tournament-start")) config.tournament_start = flags.tournament_start;
  if (given("--stop-early")) config.em_stop_early = flags.em_stop_early;
  if (given("--oracle-cap")) config.oracle_cap = flags.oracle_cap;
  if (given("--test-c")) std::tie(config.test_c_min, config.test_c_max) = parse_range(test_c);
  if (given("--measures")) config.measures = parse_measures(measures);
  config.threads = ls::threads_from_env();
  config.validate();

  ls::prepare_output_dir(config.output_dir);
  const auto result = ls::run_sweep(config);
  ls::emit_reports(result, config.output_dir);
  std::cout << ls::summary_csv(result);
  return 0;
}

int run_report(const std::string& in_dir, const std::string& out_dir) {
  const auto doc = nlohmann::json::parse(ls::read_text_file(std::filesystem::path(in_dir) / "result.json"));
  const auto result = ls::sweep_from_json(doc);
  ls::emit_reports(result, out_dir.empty() ? in_dir : out_dir);
  std::cout << ls::summary_csv(result);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Marginal-likelihood approximations for naive-Bayes models with a hidden root"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Sample a random model and a dataset from it");
  generate->add_option("--n", gen.n, "Number of binary observed variables")->required();
  generate->add_option("--c", gen.c, "Hidden states of the generative model")->required();
  generate->add_option("--samples", gen.samples, "Number of records")->required();
  generate->add_option("--seed", gen.seed, "Master seed");
  generate->add_option("--model-out", gen.model_out, "Model JSON path");
  generate->add_option("--data-out", gen.data_out, "Dataset CSV path");
  generate->add_flag("--keep-hidden", gen.keep_hidden, "Keep the hidden column in the dataset");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Fit a model by tournament-initialized EM (hidden column ignored)");
  train->add_option("--data", tr.data, "Dataset CSV")->required();
  train->add_option("--c", tr.c, "Hidden states of the test model")->required();
  train->add_option("--epsilon", tr.epsilon, "Prior Dirichlet(1 + epsilon)");
  train->add_option("--seed", tr.seed, "Seed for random restarts");
  train->add_option("--mode", tr.mode, "map or ml")->check(CLI::IsMember({"map", "ml"}));
  train->add_option("--rel-tol", tr.rel_tol, "Relative-change convergence threshold");
  train->add_option("--max-iters", tr.max_iters, "EM iterations after initialization");
  train->add_option("--tournament-start", tr.tournament_start, "Initial random copies (power of two)");
  train->add_flag("--stop-early", tr.stop_early, "Stop at the first small relative change");
  train->add_option("--out", tr.out, "Output model JSON");

  ScoreArgs sc;
  auto* score = app.add_subcommand("score", "Score a dataset under a trained model");
  score->add_option("--data", sc.data, "Dataset CSV")->required();
  score->add_option("--model", sc.model, "Model JSON at the mode")->required();
  score->add_option("--epsilon", sc.epsilon, "Prior Dirichlet(1 + epsilon)");
  score->add_flag("--oracle", sc.oracle, "Also compute the exact marginal likelihood by enumeration");
  score->add_option("--oracle-cap", sc.oracle_cap, "Maximum number of hidden completions to enumerate");
  score->add_option("--measures", sc.measures, "Comma-separated measures");
  score->add_option("--out", sc.out, "Write the CSV here instead of stdout");

  ls::ExperimentConfig sw;
  std::string sweep_config;
  std::string sweep_test_c = "2:8";
  std::string sweep_measures;
  auto* sweep = app.add_subcommand("sweep", "Run a model-selection sweep over hidden arities");
  sweep->add_option("--config", sweep_config, "JSON config (same schema as run.json); flags override");
  sweep->add_option("--n", sw.n_observed, "Number of binary observed variables");
  sweep->add_option("--c-true", sw.c_true, "Hidden states of the generative model");
  sweep->add_option("--samples", sw.n_samples, "Records per dataset");
  sweep->add_option("--test-c", sweep_test_c, "Test hidden arities LO:HI");
  sweep->add_option("--replicates", sw.replicates, "Datasets drawn from the generative model");
  sweep->add_option("--epsilon", sw.epsilon, "Prior Dirichlet(1 + epsilon)");
  sweep->add_option("--seed", sw.master_seed, "Master seed");
  sweep->add_option("--measures", sweep_measures, "Comma-separated measures");
  sweep->add_option("--out", sw.output_dir, "Output directory");
  sweep->add_option("--rel-tol", sw.em_rel_tol, "EM relative-change threshold");
  sweep->add_option("--max-iters", sw.em_max_iters, "EM iterations after initialization");
  sweep->add_option("--tournament-start", sw.tournament_start, "Initial random copies (power of two)");
  sweep->add_flag("--stop-early", sw.em_stop_early, "Stop EM at the first small relative change");
  sweep->add_option("--oracle-cap", sw.oracle_cap, "Maximum completions for the oracle measure");

  std::string report_in;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Re-render CSVs from a stored sweep result");
  report->add_option("--in", report_in, "Sweep output directory containing result.json")->required();
  report->add_option("--out", report_out, "Output directory (defaults to --in)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (*generate) return run_generate(gen);
    if (*train) return run_train(tr);
    if (*score) return run_score(sc);
    if (*sweep) return run_sweep_command(*sweep, sweep_config, sw, sweep_test_c, sweep_measures);
    if (*report) return run_report(report_in, report_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
