#include <gtest/gtest.h>

#include <cmath>
#include <iostream>
#include <vector>

#include "edfmon/experiments.hpp"

using namespace edfmon;

namespace {

ExperimentSpec m1_spec(std::size_t reps, std::size_t horizon) {
  ExperimentSpec e;
  e.id = "m1";
  e.scenario.model = Ar1Model{0.0};
  e.scenario.m = 800;
  e.scenario.n_post = horizon;
  e.scenario.seed = 7;
  e.reps = reps;
  e.p = 5;
  return e;
}

}  // namespace

TEST(Aggregate, SyntheticOutcomes) {
  std::vector<ReplicationOutcome> o(3);
  o[0].alarm_k = 10;
  o[2].alarm_k = 30;
  for (auto& x : o) x.p_selected = 5;
  const ResultRow row = aggregate(o, std::size_t{0}, "syn");
  EXPECT_EQ(row.reps, 3u);
  EXPECT_EQ(row.reps_detected, 2u);
  EXPECT_NEAR(row.rejection_pct, 66.7, 0.05);
  ASSERT_TRUE(row.mean_delay.has_value());
  EXPECT_DOUBLE_EQ(*row.mean_delay, 20.0);
  EXPECT_DOUBLE_EQ(row.p_bar, 5.0);
}

TEST(Aggregate, FailuresExcluded) {
  std::vector<ReplicationOutcome> o(4);
  o[0].alarm_k = 5;
  o[0].p_selected = 4;
  o[1].p_selected = 8;
  o[2].failed = true;
  o[3].failed = true;
  const ResultRow row = aggregate(o, std::nullopt);
  EXPECT_EQ(row.reps_failed, 2u);
  EXPECT_DOUBLE_EQ(row.rejection_pct, 50.0);
  EXPECT_DOUBLE_EQ(row.p_bar, 6.0);
  EXPECT_FALSE(row.mean_delay.has_value());
}

TEST(Experiment, ZeroLengthHorizonNeverAlarms) {
  const ResultRow row = run_experiment(m1_spec(5, 0));
  EXPECT_EQ(row.reps_detected, 0u);
  EXPECT_EQ(row.rejection_pct, 0.0);
  EXPECT_DOUBLE_EQ(row.p_bar, 5.0);
}

TEST(Experiment, HugeShiftDetectedQuickly) {
  ExperimentSpec e = m1_spec(100, 200);
  e.scenario.change = ChangeSpec{0, MeanOffset{5.0}};
  const ResultRow row = run_experiment(e);
  EXPECT_GE(row.rejection_pct, 99.0);
  ASSERT_TRUE(row.mean_delay.has_value());
  EXPECT_GE(*row.mean_delay, 1.0);
  EXPECT_LE(*row.mean_delay, 200.0);
}

TEST(Experiment, ParallelEqualsSerial) {
  ExperimentSpec e = m1_spec(24, 300);
  e.scenario.change = ChangeSpec{100, MeanOffset{0.6}};
  e.workers = 1;
  const auto a = run_replications(e);
  e.workers = 4;
  const auto b = run_replications(e);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].alarm_k, b[i].alarm_k);
    EXPECT_EQ(a[i].p_selected, b[i].p_selected);
  }
  e.workers = 1;
  const ResultRow ra = run_experiment(e);
  e.workers = 3;
  const ResultRow rb = run_experiment(e);
  EXPECT_EQ(ra.rejection_pct, rb.rejection_pct);
  EXPECT_EQ(ra.mean_delay, rb.mean_delay);
}

TEST(Experiment, NullLevelM1) {
  ExperimentSpec e = m1_spec(200, 1000);
  e.workers = 4;
  const ResultRow row = run_experiment(e);
  EXPECT_EQ(row.reps_failed, 0u);
  EXPECT_LE(row.rejection_pct, 5.0);
}

TEST(Experiment, PostChangeOnlyIgnoresEarlyAlarms) {
  ExperimentSpec e = m1_spec(20, 400);
  e.monitor.q = 0.05;  // alarms almost at once
  e.scenario.change = ChangeSpec{200, MeanOffset{0.0}};
  e.count_rule = CountRule::PostChangeOnly;
  for (std::size_t rep = 0; rep < 20; ++rep) {
    const auto o = run_replication(e, rep);
    if (o.alarm_k) {
      EXPECT_GT(*o.alarm_k, 1000u);
    }
  }
  e.count_rule = CountRule::AnyExceedance;
  const auto o = run_replication(e, 0);
  ASSERT_TRUE(o.alarm_k.has_value());
  EXPECT_LE(*o.alarm_k, 1000u);
}

TEST(Experiment, Validation) {
  ExperimentSpec e = m1_spec(0, 10);
  EXPECT_THROW(run_experiment(e), InvalidArgument);
  e = m1_spec(1, 10);
  e.count_rule = CountRule::PostChangeOnly;
  EXPECT_THROW(run_experiment(e), InvalidArgument);
}

TEST(Experiment, DegenerateLearningCountsAsFailure) {
  ExperimentSpec e = m1_spec(3, 10);
  e.scenario.m = 3;
  e.p = 5;  // more points than learning observations
  const ResultRow row = run_experiment(e);
  EXPECT_EQ(row.reps_failed, 3u);
  EXPECT_EQ(row.rejection_pct, 0.0);
}

TEST(Experiment, GumbelPointCount) {
  ExperimentSpec e;
  e.scenario.model = MvAr1Model{2, 0.0, {CopulaFamily::GumbelHougaard, 0.6, 2}};
  e.scenario.m = 800;
  e.scenario.n_post = 0;
  e.reps = 100;
  e.r = 4;
  e.kappa = 1.5;
  e.workers = 4;
  const ResultRow row = run_experiment(e);
  EXPECT_NEAR(row.p_bar, 10.3, 1.5);
}

TEST(Experiment, ClaytonToGumbelSwapPower) {
  ExperimentSpec e;
  e.scenario.model = MvAr1Model{2, 0.0, {CopulaFamily::Clayton, 0.5, 2}};
  e.scenario.m = 800;
  e.scenario.n_post = 2000;
  e.scenario.change = ChangeSpec{1000, CopulaSwap{{CopulaFamily::GumbelHougaard, 0.5, 2}}};
  e.count_rule = CountRule::PostChangeOnly;
  e.reps = 200;
  e.r = 3;
  e.kappa = 1.5;
  e.workers = 4;
  const ResultRow row = run_experiment(e);
  std::cout << "Clayton->Gumbel rejection " << row.rejection_pct << "%, detected "
            << row.reps_detected << ", failed " << row.reps_failed << "\n";
  EXPECT_GE(row.rejection_pct, 80.0);
}

TEST(Experiment, ClaytonToGumbelSwapPowerFullHorizon) {
  ExperimentSpec e;
  e.scenario.model = MvAr1Model{2, 0.0, {CopulaFamily::Clayton, 0.5, 2}};
  e.scenario.m = 800;
  e.scenario.n_post = 5000;
  e.scenario.change = ChangeSpec{1000, CopulaSwap{{CopulaFamily::GumbelHougaard, 0.5, 2}}};
  e.count_rule = CountRule::PostChangeOnly;
  e.reps = 200;
  e.r = 3;
  e.kappa = 1.5;
  e.workers = 4;
  const ResultRow row = run_experiment(e);
  EXPECT_GE(row.rejection_pct, 96.0);
  EXPECT_NEAR(row.p_bar, 6.8, 0.5);
}
