#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recon/strategy.hpp"

namespace recon {

struct StrategySpec {
    std::string label;
    StrategyConfig cfg;
};

// "topo:T=0.5" or "nscan:n=5".
StrategySpec parse_strategy_spec(const std::string& text);

struct Experiment {
    std::vector<StrategySpec> strategies;
    int trials = 100;
    int n = 256;
    double d = 0.25;
    std::uint64_t seed_base = 1;
    int budget = 200;
    int threads = 0;  // 0: hardware concurrency
};

// One trial: every strategy on the same field.
struct TrialResult {
    int trial = 0;
    std::uint64_t field_seed = 0;
    int reseeds = 0;
    double h_topology = 0.0;
    // curves[s][k] = H(M) - H(M|V_k) for strategy s, k = 0..budget. Runs cut
    // short by a tracing failure hold their last value.
    std::vector<std::vector<double>> curves;
    std::vector<std::string> errors;
    int monotonicity_violations = 0;
};

struct CurveStats {
    std::string label;
    std::vector<double> mean, stddev;  // population std
    int trials = 0;
};

struct ExperimentResult {
    Experiment exp;
    std::vector<TrialResult> trials;
    std::vector<CurveStats> stats;
    int reseeds = 0;
    int monotonicity_violations = 0;
};

ExperimentResult run_experiment(const Experiment& exp);

std::vector<CurveStats> aggregate(const std::vector<TrialResult>& trials, const std::vector<StrategySpec>& strategies);

// Columns: trial,strategy,field_seed,k,H_M,info
std::string raw_csv(const ExperimentResult& r);
// Columns: strategy,k,mean,std,trials
std::string stats_csv(const std::vector<CurveStats>& stats);
// Recomputes the statistics from raw_csv output; '#' lines are skipped.
std::vector<CurveStats> stats_from_raw_csv(const std::string& raw);

// Line chart of the mean curves with +-1 std bands. Throws on empty input.
std::string curves_svg(const std::vector<CurveStats>& stats, const std::string& title);

// Mean of curve values over steps k in [from, to].
double window_mean(const std::vector<double>& curve, int from, int to);

// One-sided paired sign test of a > b; ties are dropped.
struct SignTest {
    int plus = 0, minus = 0, ties = 0;
    double p = 1.0;
};
SignTest sign_test(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace recon
