#include "latent_score/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "latent_score/synth.hpp"

namespace latent_score {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2 pi)

double bd_rows(const StatSet& stats, const PriorSet& prior) {
  check_compatible(stats.spec(), prior);
  double total = 0.0;
  for (std::size_t r = 0; r < stats.num_rows(); ++r) {
    const auto n = stats.row(r);
    const auto alpha = prior.row(r);
    double alpha_total = 0.0;
    double n_total = 0.0;
    for (std::size_t k = 0; k < n.size(); ++k) {
      if (n[k] < 0.0) throw DomainError("BD score: negative statistic");
      alpha_total += alpha[k];
      n_total += n[k];
      if (n[k] > 0.0) total += log_gamma(alpha[k] + n[k]) - log_gamma(alpha[k]);
    }
    if (n_total > 0.0) total += log_gamma(alpha_total) - log_gamma(alpha_total + n_total);
  }
  return total;
}

// Depth-first sum over completions. Adding record t with hidden state h to
// the running counts multiplies the complete-data marginal likelihood by the
// posterior predictive of (h, x_t), so each subtree is the log-sum-exp over
// h of that predictive plus the subtree below.
class CompletionSum {
 public:
  CompletionSum(const Dataset& data, const PriorSet& prior)
      : data_(data), prior_(prior), counts_(prior.spec()), row_totals_(prior.num_rows(), 0.0),
        alpha_totals_(prior.num_rows(), 0.0) {
    for (std::size_t r = 0; r < prior.num_rows(); ++r) alpha_totals_[r] = prior.row_total(r);
    const auto c = static_cast<std::size_t>(prior.spec().hidden_arity);
    scratch_.assign(data.num_samples(), std::vector<double>(c));
  }

  double run() { return visit(0); }

 private:
  double visit(std::size_t t) {
    if (t == data_.num_samples()) return 0.0;
    const auto c = static_cast<std::size_t>(prior_.spec().hidden_arity);
    const auto rec = data_.record(t);
    auto& terms = scratch_[t];
    for (std::size_t h = 0; h < c; ++h) {
      double log_pred = std::log((prior_.root(h) + counts_.root(h)) / (alpha_totals_[0] + row_totals_[0]));
      for (std::size_t var = 0; var < rec.size(); ++var) {
        const std::size_t row = counts_.leaf_row(var, h);
        const auto k = static_cast<std::size_t>(rec[var]);
        log_pred += std::log((prior_.leaf(var, h, k) + counts_.leaf(var, h, k)) / (alpha_totals_[row] + row_totals_[row]));
      }
      apply(rec, h, 1.0);
      terms[h] = log_pred + visit(t + 1);
      apply(rec, h, -1.0);
    }
    return log_sum_exp(terms);
  }

  void apply(std::span<const int> rec, std::size_t h, double delta) {
    counts_.root(h) += delta;
    row_totals_[0] += delta;
    for (std::size_t var = 0; var < rec.size(); ++var) {
      counts_.leaf(var, h, static_cast<std::size_t>(rec[var])) += delta;
      row_totals_[counts_.leaf_row(var, h)] += delta;
    }
  }

  const Dataset& data_;
  const PriorSet& prior_;
  StatSet counts_;
  std::vector<double> row_totals_;
  std::vector<double> alpha_totals_;
  std::vector<std::vector<double>> scratch_;
};

}  // namespace

std::string measure_name(Measure m) {
  switch (m) {
    case Measure::Laplace: return "laplace";
    case Measure::Bic: return "bic";
    case Measure::Draper: return "draper";
    case Measure::Mled: return "mled";
    case Measure::Cs: return "cs";
    case Measure::Oracle: return "oracle";
  }
  return "unknown";
}

Measure parse_measure(const std::string& name) {
  for (Measure m : kAllMeasures) {
    if (measure_name(m) == name) return m;
  }
  throw ContractError("unknown measure '" + name + "'");
}

double bd_complete(const StatSet& stats, const PriorSet& prior) {
  for (double v : stats.values()) {
    if (v != std::floor(v)) throw ContractError("bd_complete: statistics must be integer counts");
  }
  return bd_rows(stats, prior);
}

double fractional_bd(const StatSet& stats, const PriorSet& prior) { return bd_rows(stats, prior); }

double oracle_exact(const Dataset& data, const ModelSpec& spec, const PriorSet& prior, std::uint64_t cap) {
  check_compatible(spec, data);
  check_compatible(spec, prior);
  if (data.has_hidden()) throw ContractError("oracle_exact: dataset is complete");
  const auto c = static_cast<std::uint64_t>(spec.hidden_arity);
  if (c == 1) {
    return bd_complete(sufficient_stats(attach_hidden(data, std::vector<int>(data.num_samples(), 0), 1)), prior);
  }
  std::uint64_t completions = 1;
  for (std::size_t t = 0; t < data.num_samples(); ++t) {
    if (completions > cap / c) {
      throw InfeasibleError("oracle_exact: " + std::to_string(c) + "^" + std::to_string(data.num_samples()) +
                            " completions exceed the cap of " + std::to_string(cap));
    }
    completions *= c;
  }
  return CompletionSum(data, prior).run();
}

std::vector<double> hessian_steps(const FreeCoords& coords, const ModelSpec& spec) {
  const ParamSet params = from_free(coords, spec);
  std::vector<double> steps;
  steps.reserve(coords.values.size());
  for (std::size_t r = 0; r < params.num_rows(); ++r) {
    const auto row = params.row(r);
    const double tail = row[row.size() - 1];
    for (std::size_t k = 0; k + 1 < row.size(); ++k) {
      steps.push_back(1e-5 * std::min({1.0, row[k], tail}));
    }
  }
  return steps;
}

std::vector<double> raw_neg_hessian(const FreeCoords& coords, const Dataset& data, const PriorSet& prior) {
  const std::size_t d = coords.values.size();
  const auto steps = hessian_steps(coords, prior.spec());
  std::vector<double> out(d * d);
  FreeCoords probe = coords;
  for (std::size_t j = 0; j < d; ++j) {
    const double h = steps[j];
    probe.values[j] = coords.values[j] + h;
    const auto up = grad_g(probe, data, prior);
    probe.values[j] = coords.values[j] - h;
    const auto down = grad_g(probe, data, prior);
    probe.values[j] = coords.values[j];
    // Column j holds d(grad)/d(coord_j).
    for (std::size_t i = 0; i < d; ++i) out[i * d + j] = -(up[i] - down[i]) / (2.0 * h);
  }
  return out;
}

SymMatrix neg_hessian(const FreeCoords& coords, const Dataset& data, const PriorSet& prior) {
  const ModelSpec& spec = prior.spec();
  check_compatible(spec, data);
  const ParamSet params = from_free(coords, spec);
  const std::size_t d = coords.values.size();
  const std::size_t rows = params.num_rows();

  std::vector<std::size_t> free_offset(rows + 1, 0);
  for (std::size_t r = 0; r < rows; ++r) free_offset[r + 1] = free_offset[r] + params.row_size(r) - 1;
  if (free_offset[rows] != d) throw ContractError("neg_hessian: coordinate count does not match the prior");

  std::vector<double> a(d * d, 0.0);

  // Curvature of each log theta term, weighted by expected count plus prior
  // pseudo-count. The dropped component couples its whole row.
  const auto expected = expected_stats(params, data);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto theta = params.row(r);
    const auto counts = expected.stats.row(r);
    const auto alpha = prior.row(r);
    const std::size_t last = theta.size() - 1;
    const double tail = (counts[last] + alpha[last] - 1.0) / (theta[last] * theta[last]);
    for (std::size_t j = free_offset[r]; j < free_offset[r + 1]; ++j) {
      const std::size_t k = j - free_offset[r];
      a[j * d + j] += (counts[k] + alpha[k] - 1.0) / (theta[k] * theta[k]);
      for (std::size_t l = free_offset[r]; l < free_offset[r + 1]; ++l) a[j * d + l] += tail;
    }
  }

  // Minus the posterior covariance of the per-state score vectors, one
  // sample at a time. Complete records have a point posterior and add nothing.
  if (!data.has_hidden()) {
    const auto c = static_cast<std::size_t>(spec.hidden_arity);
    std::vector<std::vector<std::pair<std::size_t, double>>> scores(c);
    std::vector<double> mean(d, 0.0);
    std::vector<char> touched(d, 0);
    std::vector<std::size_t> support;
    auto add_entry = [&](std::vector<std::pair<std::size_t, double>>& v, std::size_t r, std::size_t k) {
      const double inv = 1.0 / params.row(r)[k];
      if (k + 1 < params.row_size(r)) {
        v.emplace_back(free_offset[r] + k, inv);
      } else {
        for (std::size_t j = free_offset[r]; j < free_offset[r + 1]; ++j) v.emplace_back(j, -inv);
      }
    };
    for (std::size_t t = 0; t < data.num_samples(); ++t) {
      const auto record = data.record(t);
      const auto post = posterior_over_hidden(params, record);
      for (std::size_t h = 0; h < c; ++h) {
        auto& v = scores[h];
        v.clear();
        add_entry(v, 0, h);
        for (std::size_t var = 0; var < record.size(); ++var) {
          add_entry(v, params.leaf_row(var, h), static_cast<std::size_t>(record[var]));
        }
        for (const auto& [j, x] : v) {
          for (const auto& [l, y] : v) a[j * d + l] -= post[h] * x * y;
          if (!touched[j]) {
            touched[j] = 1;
            support.push_back(j);
          }
          mean[j] += post[h] * x;
        }
      }
      for (std::size_t j : support) {
        for (std::size_t l : support) a[j * d + l] += mean[j] * mean[l];
      }
      for (std::size_t j : support) {
        mean[j] = 0.0;
        touched[j] = 0;
      }
      support.clear();
    }
  }

  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i])) throw NumericalFailure("non-finite negative Hessian entry", i);
  }
  return SymMatrix(d, std::move(a));
}

double laplace_score(const ParamSet& mode, const Dataset& data, const PriorSet& prior) {
  require_interior(mode);
  const FreeCoords coords = to_free(mode);
  const double g = log_posterior_g(mode, data, prior);
  const double log_det = log_det_pd(neg_hessian(coords, data, prior));
  const auto d = static_cast<double>(coords.values.size());
  return g + 0.5 * d * kLog2Pi - 0.5 * log_det;
}

double laplace_score(const EmResult& em, const Dataset& data, const PriorSet& prior) {
  return laplace_score(em.params, data, prior);
}

double bic_score(double loglik_at_mode, std::size_t d, std::size_t n_samples) {
  if (n_samples < 1) throw ContractError("bic_score: need at least one sample");
  return loglik_at_mode - 0.5 * static_cast<double>(d) * std::log(static_cast<double>(n_samples));
}

double draper_score(double loglik_at_mode, std::size_t d, std::size_t n_samples) {
  return bic_score(loglik_at_mode, d, n_samples) + 0.5 * static_cast<double>(d) * kLog2Pi;
}

double mled_score(const ParamSet& mode, const Dataset& data, const PriorSet& prior) {
  return fractional_bd(e_step(mode, data), prior);
}

double mled_score(const EmResult& em, const Dataset& data, const PriorSet& prior) {
  return mled_score(em.params, data, prior);
}

double expected_complete_loglik(const StatSet& stats, const ParamSet& params) {
  check_compatible(stats.spec(), params);
  double total = 0.0;
  const auto n = stats.values();
  const auto theta = params.values();
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (n[i] > 0.0) total += n[i] * std::log(theta[i]);
  }
  return total;
}

double cs_score(const ParamSet& mode, const Dataset& data, const PriorSet& prior) {
  const StatSet expected = e_step(mode, data);
  return fractional_bd(expected, prior) - expected_complete_loglik(expected, mode) + log_likelihood(mode, data);
}

double cs_score(const EmResult& em, const Dataset& data, const PriorSet& prior) {
  return cs_score(em.params, data, prior);
}

const MeasureValue& ScoreReport::get(Measure m) const {
  switch (m) {
    case Measure::Laplace: return laplace;
    case Measure::Bic: return bic;
    case Measure::Draper: return draper;
    case Measure::Mled: return mled;
    case Measure::Cs: return cs;
    case Measure::Oracle: return oracle;
  }
  return oracle;
}

MeasureValue& ScoreReport::get(Measure m) {
  return const_cast<MeasureValue&>(std::as_const(*this).get(m));
}

ScoreReport score_at_mode(const ParamSet& mode, const Dataset& data, const PriorSet& prior,
                          const ScoreOptions& options) {
  check_compatible(mode.spec(), data);
  check_compatible(mode.spec(), prior);
  require_interior(mode);
  const auto wants = [&](Measure m) {
    return std::find(options.measures.begin(), options.measures.end(), m) != options.measures.end();
  };

  ScoreReport report;
  report.d = dimension(mode.spec());
  report.n = data.num_samples();
  const auto es = expected_stats(mode, data);
  report.loglik_at_mode = es.log_likelihood;
  report.g_at_mode = es.log_likelihood + log_prior(mode, prior);

  if (wants(Measure::Bic)) report.bic.value = bic_score(report.loglik_at_mode, report.d, report.n);
  if (wants(Measure::Draper)) report.draper.value = draper_score(report.loglik_at_mode, report.d, report.n);
  if (wants(Measure::Mled) || wants(Measure::Cs)) {
    const double mled = fractional_bd(es.stats, prior);
    if (wants(Measure::Mled)) report.mled.value = mled;
    if (wants(Measure::Cs)) {
      report.cs.value = mled - expected_complete_loglik(es.stats, mode) + report.loglik_at_mode;
    }
  }
  if (wants(Measure::Laplace)) {
    try {
      report.laplace.value = laplace_score(mode, data, prior);
    } catch (const NonPdError&) {
      report.laplace.reason = "non-PD Hessian";
    } catch (const NumericalFailure&) {
      report.laplace.reason = "non-finite Hessian";
    }
  }
  if (wants(Measure::Oracle)) {
    try {
      report.oracle.value = oracle_exact(data, mode.spec(), prior, options.oracle_cap);
    } catch (const InfeasibleError&) {
      report.oracle.reason = "enumeration infeasible";
    }
  }
  return report;
}

namespace {

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string score_report_csv_header() { return "laplace,bic,draper,mled,cs,oracle,d,N,g_at_mode,loglik_at_mode"; }

std::string score_report_csv_row(const ScoreReport& report) {
  std::string out;
  for (Measure m : kAllMeasures) {
    const auto& v = report.get(m);
    if (v.value) out += format_real(*v.value);
    out += ',';
  }
  out += std::to_string(report.d) + ',' + std::to_string(report.n) + ',' + format_real(report.g_at_mode) + ',' +
         format_real(report.loglik_at_mode);
  return out;
}

}  // namespace latent_score
