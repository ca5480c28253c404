#pragma once

// Replication harness: rejection percentages, mean detection delays and
// average numbers of selected points over simulated scenarios.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "edfmon/calibrate.hpp"
#include "edfmon/detector.hpp"
#include "edfmon/errors.hpp"
#include "edfmon/genmodels.hpp"
#include "edfmon/lrcov.hpp"
#include "edfmon/parallel.hpp"
#include "edfmon/points.hpp"

namespace edfmon {

enum class CountRule { AnyExceedance, PostChangeOnly };

struct ExperimentSpec {
  std::string id;
  /// scenario.n_post is the monitoring horizon.
  ScenarioSpec scenario;
  std::size_t reps = 200;
  /// q <= 0 means: resolve from `table` for the selected p.
  MonitorConfig monitor{};
  /// Univariate data: number of quantile points.
  std::size_t p = 5;
  /// Multivariate data: grid resolution and retention factor.
  std::size_t r = 4;
  double kappa = 1.5;
  CountRule count_rule = CountRule::AnyExceedance;
  LrcovSpec lrv{};
  QuantileTable table = default_quantile_table();
  std::size_t workers = 1;

  void validate() const {
    if (reps < 1) throw InvalidArgument("reps must be at least 1");
    if (count_rule == CountRule::PostChangeOnly && !scenario.change) {
      throw InvalidArgument("PostChangeOnly needs a change");
    }
    lrv.validate();
  }
};

struct ReplicationOutcome {
  std::optional<std::size_t> alarm_k;
  std::size_t p_selected = 0;
  bool failed = false;
  std::string error;
};

struct ResultRow {
  std::string id;
  std::size_t reps = 0;
  std::size_t reps_failed = 0;
  std::size_t reps_detected = 0;
  double rejection_pct = 0.0;
  /// Mean of alarm_k - (m + change.at) over detecting replications.
  std::optional<double> mean_delay;
  double p_bar = 0.0;
};

inline EvalPoints select_points_for(const Matrix& learning, const ExperimentSpec& spec) {
  if (learning.cols() == 1) return select_univariate(learning, spec.p);
  return select_multivariate(learning, spec.r, spec.kappa);
}

inline ReplicationOutcome run_replication(const ExperimentSpec& spec, std::uint64_t rep) {
  const Matrix data = generate_scenario(spec.scenario, rep);
  const std::size_t m = spec.scenario.m;
  const Matrix learning = data.slice_rows(0, m);

  ReplicationOutcome out;
  std::optional<Monitor> mon;
  try {
    EvalPoints pts = select_points_for(learning, spec);
    out.p_selected = pts.p();
    MonitorConfig cfg = spec.monitor;
    if (!(cfg.q > 0.0)) cfg.q = resolve_quantile(out.p_selected, cfg.alpha, spec.table);
    mon.emplace(learning, std::move(pts), spec.lrv, cfg);
  } catch (const Error& e) {
    out.failed = true;
    out.error = e.what();
    return out;
  }

  const std::size_t last_ignored =
      spec.count_rule == CountRule::PostChangeOnly ? m + spec.scenario.change->at : 0;
  mon->reserve(data.rows() - m);
  for (std::size_t i = m; i < data.rows(); ++i) {
    const StepResult r = mon->step(data.row(i));
    if (r.alarm && r.k > last_ignored) {
      out.alarm_k = r.k;
      break;
    }
  }
  return out;
}

/// `change_at` is the absolute change position m + at, if any.
inline ResultRow aggregate(const std::vector<ReplicationOutcome>& outcomes,
                           std::optional<std::size_t> change_at, std::string id = {}) {
  ResultRow row;
  row.id = std::move(id);
  row.reps = outcomes.size();
  double delay_sum = 0.0;
  double p_sum = 0.0;
  for (const auto& o : outcomes) {
    if (o.failed) {
      ++row.reps_failed;
      continue;
    }
    p_sum += static_cast<double>(o.p_selected);
    if (o.alarm_k) {
      ++row.reps_detected;
      delay_sum += static_cast<double>(*o.alarm_k) - static_cast<double>(change_at.value_or(0));
    }
  }
  const std::size_t ok = row.reps - row.reps_failed;
  if (ok > 0) {
    row.rejection_pct = 100.0 * static_cast<double>(row.reps_detected) / static_cast<double>(ok);
    row.p_bar = p_sum / static_cast<double>(ok);
  }
  if (change_at && row.reps_detected > 0) {
    row.mean_delay = delay_sum / static_cast<double>(row.reps_detected);
  }
  return row;
}

inline std::vector<ReplicationOutcome> run_replications(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<ReplicationOutcome> outcomes(spec.reps);
  parallel_for(spec.reps, spec.workers,
               [&](std::size_t rep) { outcomes[rep] = run_replication(spec, rep); });
  return outcomes;
}

inline ResultRow run_experiment(const ExperimentSpec& spec) {
  const auto outcomes = run_replications(spec);
  std::optional<std::size_t> change_at;
  if (spec.scenario.change) change_at = spec.scenario.m + spec.scenario.change->at;
  return aggregate(outcomes, change_at, spec.id);
}

}  // namespace edfmon
