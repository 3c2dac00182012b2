#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "recon/mapping.hpp"

namespace recon {

enum class StrategyKind { TopologyGuided, NScan };

struct StrategyConfig {
    StrategyKind kind = StrategyKind::TopologyGuided;
    double T = 0.5;  // aggressiveness, topology-guided only
    int n = 5;       // isolines per gradient line, n-scan only
    int budget = 200;
    std::uint64_t seed = 1;
};

void validate(const StrategyConfig& cfg);

// Why a program was chosen.
enum class StepMode { Explore, Exploit, Extension, Scan };

struct Program {
    int k = 0;  // 1-based program index
    PolyKind kind = PolyKind::Gradient;
    Point origin;
    StepMode mode = StepMode::Explore;
    std::uint64_t rng_digest = 0;  // fingerprint of the run's RNG after the draw
};

struct RunTrace {
    StrategyConfig cfg;
    int field_n = 0;
    double field_d = 0.0;
    std::uint64_t field_seed = 0;
    std::vector<Program> programs;
    std::vector<StepOutcome> outcomes;
    std::vector<EntropyReport> reports;  // reports[k] after k programs
    std::vector<Polyline> polylines;
    double h_topology = 0.0;
    std::string error;  // set when a tracing failure cut the run short
};

// Exploit when R_k > k^-T or R_k <= 0.
bool exploit_rule(int k, double R, double T);

struct IsoChoice {
    int gradient = -1;  // polyline index
    int cell = -1;
    double lo = 0.0, hi = 0.0;  // range of the segment
    Point point;                // where the segment reaches (lo + hi) / 2
};

// Segments with a smaller range are treated as resolved: below it the
// isoline tracer's saddle-level shift would move the cut off the segment.
constexpr double kMinSegmentRange = 1e-6;

// Largest-range segment of a mapped gradient path inside a cell with
// chi <= -1, cut at its midpoint level. Ties within 1e-12 go to the lower
// gradient id, then the lower cell id. Empty when no segment qualifies.
// V' cells crossed only by resolved segments get no extension step.
std::optional<IsoChoice> choose_iso_origin(const MapState& state);

// Isoline origins for one n-scan gradient line: the n interior breakpoints
// of a uniform (n + 1)-part division of the range along the path. Uses the
// field and the polyline only.
std::vector<Point> scan_origins(const ScalarField& f, const Polyline& grad, int n);

RunTrace run_strategy(const MorseField& mf, const StrategyConfig& cfg, const TraceConfig& tcfg = {});

// Exploitation with every extremum known: reveal the extrema, map the gradient
// line through a point next to each one, then only place isolines with
// choose_iso_origin. A V' cell that no unresolved segment crosses gets a
// gradient from its boundary. Stops once H_bar < target, after max_isolines
// isolines, or when no program applies.
struct ExploitRun {
    int isolines = 0;
    int gradients = 0;  // extension gradients, excluding the ones at extrema
    std::vector<EntropyReport> reports;
    double final_h_bar() const { return reports.back().H_bar; }
};
ExploitRun exploit_known_extrema(const MorseField& mf, double target, int max_isolines, std::uint64_t seed,
                                 const TraceConfig& tcfg = {});

// Re-executes programs on the same field.
MapState replay_programs(const MorseField& mf, const std::vector<Program>& programs, const TraceConfig& tcfg = {});

// Replays a trace and checks it: program indices in sequence, H(M|V_k)
// non-increasing, and on topology-guided runs chi-additive exploit splits with
// R_k > 0 and R_k <= 0 on every gradient.
struct TraceVerification {
    std::vector<EntropyReport> reports;
    double h_topology = 0.0;
    std::vector<std::string> failures;
    bool ok() const { return failures.empty(); }
};
TraceVerification verify_trace(const MorseField& mf, const RunTrace& t, const TraceConfig& tcfg = {});

std::string to_string(StrategyKind k);
std::string to_string(StepMode m);
StrategyKind strategy_kind_from_string(const std::string& s);
StepMode step_mode_from_string(const std::string& s);

// JSON lines: a header record followed by one record per program.
std::string trace_to_jsonl(const RunTrace& t);
RunTrace trace_from_jsonl(const std::string& text);

// Per-step metrics, one row per report.
std::string reports_csv(const std::vector<EntropyReport>& reports, double h_topology);

}  // namespace recon
