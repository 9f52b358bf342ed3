#include "latent_score/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "latent_score/io.hpp"
#include "latent_score/parallel.hpp"
#include "latent_score/synth.hpp"

namespace latent_score {

using nlohmann::json;

namespace {

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t test_c_count(const ExperimentConfig& config) {
  return static_cast<std::size_t>(config.test_c_max - config.test_c_min + 1);
}

}  // namespace

void ExperimentConfig::validate() {
  if (n_observed < 1) throw ContractError("n_observed must be at least 1");
  if (c_true < 1) throw ContractError("c_true must be at least 1");
  if (n_samples < 1) throw ContractError("n_samples must be at least 1");
  if (test_c_min < 1 || test_c_max < test_c_min) throw ContractError("test_c range must be non-empty with c >= 1");
  if (replicates < 1) throw ContractError("replicates must be at least 1");
  if (!(epsilon > 0.0)) throw ContractError("epsilon must be positive");
  if (measures.empty()) throw ContractError("at least one measure is required");
  std::vector<Measure> canonical;
  for (Measure m : kAllMeasures) {
    if (std::find(measures.begin(), measures.end(), m) != measures.end()) canonical.push_back(m);
  }
  measures = std::move(canonical);
  em_config().validate();
}

EmConfig ExperimentConfig::em_config() const {
  EmConfig em;
  em.mode = EmMode::Map;
  em.rel_tol = em_rel_tol;
  em.max_iters_after_init = em_max_iters;
  em.stop_early = em_stop_early;
  em.tournament_start = tournament_start;
  em.threads = 1;
  return em;
}

json config_to_json(const ExperimentConfig& config) {
  std::vector<std::string> measures;
  for (Measure m : config.measures) measures.push_back(measure_name(m));
  return json{{"n_observed", config.n_observed},
              {"c_true", config.c_true},
              {"n_samples", config.n_samples},
              {"test_c_min", config.test_c_min},
              {"test_c_max", config.test_c_max},
              {"replicates", config.replicates},
              {"epsilon", config.epsilon},
              {"master_seed", config.master_seed},
              {"measures", measures},
              {"output_dir", config.output_dir},
              {"em_rel_tol", config.em_rel_tol},
              {"em_max_iters", config.em_max_iters},
              {"em_stop_early", config.em_stop_early},
              {"tournament_start", config.tournament_start},
              {"oracle_cap", config.oracle_cap}};
}

ExperimentConfig config_from_json(const json& doc, ExperimentConfig base) {
  if (!doc.is_object()) throw ContractError("config must be a JSON object");
  static const std::vector<std::string> known = {
      "n_observed", "c_true",     "n_samples",    "test_c_min",       "test_c_max",
      "replicates", "epsilon",    "master_seed",  "measures",         "output_dir",
      "em_rel_tol", "em_max_iters", "em_stop_early", "tournament_start", "oracle_cap"};
  for (const auto& [key, _] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ContractError("unknown config key '" + key + "'");
    }
  }
  try {
    if (doc.contains("n_observed")) base.n_observed = doc["n_observed"].get<std::size_t>();
    if (doc.contains("c_true")) base.c_true = doc["c_true"].get<int>();
    if (doc.contains("n_samples")) base.n_samples = doc["n_samples"].get<std::size_t>();
    if (doc.contains("test_c_min")) base.test_c_min = doc["test_c_min"].get<int>();
    if (doc.contains("test_c_max")) base.test_c_max = doc["test_c_max"].get<int>();
    if (doc.contains("replicates")) base.replicates = doc["replicates"].get<std::size_t>();
    if (doc.contains("epsilon")) base.epsilon = doc["epsilon"].get<double>();
    if (doc.contains("master_seed")) base.master_seed = doc["master_seed"].get<std::uint64_t>();
    if (doc.contains("measures")) {
      base.measures.clear();
      for (const auto& name : doc["measures"]) base.measures.push_back(parse_measure(name.get<std::string>()));
    }
    if (doc.contains("output_dir")) base.output_dir = doc["output_dir"].get<std::string>();
    if (doc.contains("em_rel_tol")) base.em_rel_tol = doc["em_rel_tol"].get<double>();
    if (doc.contains("em_max_iters")) base.em_max_iters = doc["em_max_iters"].get<std::size_t>();
    if (doc.contains("em_stop_early")) base.em_stop_early = doc["em_stop_early"].get<bool>();
    if (doc.contains("tournament_start")) base.tournament_start = doc["tournament_start"].get<std::size_t>();
    if (doc.contains("oracle_cap")) base.oracle_cap = doc["oracle_cap"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ContractError(std::string("config: ") + e.what());
  }
  return base;
}

int select_model(const std::map<int, double>& curve) {
  if (curve.empty()) throw SelectionError("no valid cells to select from");
  auto best = curve.begin();
  for (auto it = std::next(curve.begin()); it != curve.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first;
}

std::map<Measure, int> delta_c(const std::map<Measure, int>& selections) {
  const auto laplace = selections.find(Measure::Laplace);
  if (laplace == selections.end()) throw ContractError("delta_c needs the Laplace selection");
  std::map<Measure, int> out;
  for (const auto& [m, c] : selections) out[m] = c - laplace->second;
  return out;
}

std::map<int, double> curve_for(const std::vector<CellResult>& cells, std::size_t replicate, Measure measure) {
  std::map<int, double> curve;
  for (const auto& cell : cells) {
    if (cell.replicate != replicate || !cell.valid) continue;
    const auto& v = cell.scores.get(measure);
    if (v.value) curve[cell.test_c] = *v.value;
  }
  return curve;
}

std::vector<Selection> compute_selections(const ExperimentConfig& config, const std::vector<CellResult>& cells) {
  std::vector<Selection> out;
  for (std::size_t r = 0; r < config.replicates; ++r) {
    std::map<Measure, int> selected;
    for (Measure m : config.measures) {
      const auto curve = curve_for(cells, r, m);
      if (!curve.empty()) selected[m] = select_model(curve);
    }
    std::map<Measure, int> deltas;
    if (selected.count(Measure::Laplace)) deltas = delta_c(selected);
    for (Measure m : config.measures) {
      Selection s;
      s.replicate = r;
      s.measure = m;
      if (auto it = selected.find(m); it != selected.end()) s.selected_c = it->second;
      if (auto it = deltas.find(m); it != deltas.end()) s.delta_c = it->second;
      out.push_back(s);
    }
  }
  return out;
}

SweepResult run_sweep(ExperimentConfig config) {
  config.validate();
  const ModelSpec generative = binary_spec(config.n_observed, config.c_true);
  SeededStream model_stream(config.master_seed, 0);
  const ParamSet model = generate_model(generative, model_stream);

  std::vector<Dataset> datasets;
  datasets.reserve(config.replicates);
  for (std::size_t r = 0; r < config.replicates; ++r) {
    SeededStream stream(config.master_seed, 1 + r);
    datasets.push_back(strip_hidden(sample_dataset(model, config.n_samples, stream)));
  }

  const std::size_t per_replicate = test_c_count(config);
  SweepResult result;
  result.cells.resize(config.replicates * per_replicate);
  const EmConfig em = config.em_config();
  ScoreOptions options;
  options.measures = config.measures;
  options.oracle_cap = config.oracle_cap;

  parallel_for(result.cells.size(), config.threads, [&](std::size_t index) {
    CellResult& cell = result.cells[index];
    cell.replicate = index / per_replicate;
    cell.test_c = config.test_c_min + static_cast<int>(index % per_replicate);
    const Dataset& data = datasets[cell.replicate];
    const ModelSpec spec = binary_spec(config.n_observed, cell.test_c);
    const PriorSet prior = PriorSet::uniform(spec, 1.0 + config.epsilon);
    const SeededStream stream(config.master_seed, 1 + config.replicates + index);
    try {
      const EmResult fitted = fit(data, spec, prior, em, stream);
      cell.final_g = fitted.final_g;
      cell.converged = fitted.converged;
      cell.iterations_used = fitted.iterations_used;
      cell.scores = score_at_mode(fitted.params, data, prior, options);
    } catch (const std::exception& e) {
      cell.valid = false;
      cell.reason = e.what();
    }
  });

  result.config = std::move(config);
  result.selections = compute_selections(result.config, result.cells);
  return result;
}

std::vector<DeltaSummary> summarize(const SweepResult& result) {
  std::vector<DeltaSummary> out;
  for (Measure m : result.config.measures) {
    std::vector<double> deltas;
    for (const auto& s : result.selections) {
      if (s.measure == m && s.delta_c) deltas.push_back(*s.delta_c);
    }
    DeltaSummary summary;
    summary.measure = m;
    summary.count = deltas.size();
    if (!deltas.empty()) {
      double sum = 0.0;
      for (double v : deltas) sum += v;
      const double mean = sum / static_cast<double>(deltas.size());
      summary.mean = mean;
      if (deltas.size() >= 2) {
        double ss = 0.0;
        for (double v : deltas) ss += (v - mean) * (v - mean);
        summary.sd = std::sqrt(ss / static_cast<double>(deltas.size() - 1));
      }
    }
    out.push_back(summary);
  }
  return out;
}

void prepare_output_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  const auto probe = dir / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw IoError("output directory " + dir.string() + " is not writable");
  }
  std::filesystem::remove(probe, ec);
}

std::string curves_csv(const SweepResult& result) {
  std::string out = "replicate,test_c,measure,log_score,valid,reason\n";
  for (const auto& cell : result.cells) {
    for (Measure m : result.config.measures) {
      const auto& v = cell.scores.get(m);
      const bool valid = cell.valid && v.value.has_value();
      const std::string& reason = cell.valid ? v.reason : cell.reason;
      out += std::to_string(cell.replicate) + ',' + std::to_string(cell.test_c) + ',' + measure_name(m) + ',';
      if (valid) out += format_real(*v.value);
      out += valid ? ",1," : ",0,";
      std::string clean = reason;
      std::replace(clean.begin(), clean.end(), ',', ';');
      std::replace(clean.begin(), clean.end(), '\n', ' ');
      out += clean + '\n';
    }
  }
  return out;
}

std::string selection_csv(const SweepResult& result) {
  std::string out = "replicate,measure,selected_c,delta_c\n";
  for (const auto& s : result.selections) {
    out += std::to_string(s.replicate) + ',' + measure_name(s.measure) + ',';
    if (s.selected_c) out += std::to_string(*s.selected_c);
    out += ',';
    if (s.delta_c) out += std::to_string(*s.delta_c);
    out += '\n';
  }
  return out;
}

std::string summary_csv(const SweepResult& result) {
  std::string out = "measure,mean_delta_c,sd_delta_c\n";
  for (const auto& s : summarize(result)) {
    out += measure_name(s.measure) + ',';
    if (s.mean) out += format_real(*s.mean);
    out += ',';
    if (s.sd) out += format_real(*s.sd);
    out += '\n';
  }
  return out;
}

std::string run_json(const SweepResult& result) { return config_to_json(result.config).dump(2) + "\n"; }

json sweep_to_json(const SweepResult& result) {
  json cells = json::array();
  for (const auto& cell : result.cells) {
    json scores = json::object();
    json reasons = json::object();
    for (Measure m : result.config.measures) {
      const auto& v = cell.scores.get(m);
      scores[measure_name(m)] = v.value ? json(*v.value) : json(nullptr);
      if (!v.reason.empty()) reasons[measure_name(m)] = v.reason;
    }
    cells.push_back(json{{"replicate", cell.replicate},
                         {"test_c", cell.test_c},
                         {"valid", cell.valid},
                         {"reason", cell.reason},
                         {"final_g", cell.final_g},
                         {"converged", cell.converged},
                         {"iterations_used", cell.iterations_used},
                         {"d", cell.scores.d},
                         {"N", cell.scores.n},
                         {"g_at_mode", cell.scores.g_at_mode},
                         {"loglik_at_mode", cell.scores.loglik_at_mode},
                         {"scores", scores},
                         {"score_reasons", reasons}});
  }
  return json{{"config", config_to_json(result.config)}, {"cells", cells}};
}

SweepResult sweep_from_json(const json& doc) {
  SweepResult result;
  try {
    result.config = config_from_json(doc.at("config"));
    result.config.validate();
    for (const auto& c : doc.at("cells")) {
      CellResult cell;
      cell.replicate = c.at("replicate").get<std::size_t>();
      cell.test_c = c.at("test_c").get<int>();
      cell.valid = c.at("valid").get<bool>();
      cell.reason = c.at("reason").get<std::string>();
      cell.final_g = c.at("final_g").get<double>();
      cell.converged = c.at("converged").get<bool>();
      cell.iterations_used = c.at("iterations_used").get<std::size_t>();
      cell.scores.d = c.at("d").get<std::size_t>();
      cell.scores.n = c.at("N").get<std::size_t>();
      cell.scores.g_at_mode = c.at("g_at_mode").get<double>();
      cell.scores.loglik_at_mode = c.at("loglik_at_mode").get<double>();
      for (const auto& [name, value] : c.at("scores").items()) {
        auto& slot = cell.scores.get(parse_measure(name));
        if (!value.is_null()) slot.value = value.get<double>();
      }
      for (const auto& [name, value] : c.at("score_reasons").items()) {
        cell.scores.get(parse_measure(name)).reason = value.get<std::string>();
      }
      result.cells.push_back(std::move(cell));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("sweep result: ") + e.what(), 0);
  }
  result.selections = compute_selections(result.config, result.cells);
  return result;
}

void emit_reports(const SweepResult& result, const std::filesystem::path& dir) {
  prepare_output_dir(dir);
  write_text_file(dir / "curves.csv", curves_csv(result));
  write_text_file(dir / "selection.csv", selection_csv(result));
  write_text_file(dir / "summary.csv", summary_csv(result));
  write_text_file(dir / "run.json", run_json(result));
  write_text_file(dir / "result.json", sweep_to_json(result).dump(2) + "\n");
}

std::size_t threads_from_env() {
  const char* value = std::getenv("LATENT_SCORE_THREADS");
  if (value == nullptr || *value == '\0') return resolve_threads(0);
  char* end = nullptr;
  const unsigned long parsed = std::strtoul(value, &end, 10);
  if (end == value || *end != '\0') throw ContractError("LATENT_SCORE_THREADS must be a non-negative integer");
  return resolve_threads(static_cast<std::size_t>(parsed));
}

}  // namespace latent_score
