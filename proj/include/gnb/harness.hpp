#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gnb/config.hpp"

namespace gnb {

struct TraceRow {
  std::int64_t round = 0;  // 1-based
  Index user = 0;
  std::size_t chosen_arm = 0;
  double reward = 0.0;
  double oracle_best = 0.0;
  double inst_regret = 0.0;
  double cum_regret = 0.0;
};

bool operator==(const TraceRow& a, const TraceRow& b);

struct RegretTrace {
  // false: oracle_best / regret come from realized rewards, not expectations
  bool pseudo_regret = true;
  std::vector<TraceRow> rows;
};

std::string trace_header(bool pseudo_regret);
void write_trace_csv(const std::filesystem::path& path, const RegretTrace& trace);
// Rejects traces whose cum_regret is not the exact running sum of inst_regret.
RegretTrace read_trace_csv(const std::filesystem::path& path);

// One round of the outer loop: recommend, realize, observe, maybe train.
TraceRow play_round(Environment& env, Policy& policy, std::int64_t round, double cum_before);

struct SeedResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  RegretTrace trace;
  double seconds = 0.0;
  // mean over rounds of the policy's adjacency-element std (NaN when not tracked)
  double mean_graph_spread = 0.0;

  double final_regret() const { return trace.rows.empty() ? 0.0 : trace.rows.back().cum_regret; }
};

struct SeedOptions {
  std::optional<std::filesystem::path> checkpoint_path;  // written after checkpoint_at rounds
  std::int64_t checkpoint_at = 0;
  std::optional<std::filesystem::path> resume_from;
  // Called after each round, e.g. for per-round timing or decision capture.
  std::function<void(const TraceRow&)> on_round;
};

// Runs one seed in the calling thread. Module errors are caught and recorded.
SeedResult run_seed(const RunConfig& config, std::uint64_t seed, const SeedOptions& options = {});
// Same loop over caller-owned objects (for custom policies in tests).
SeedResult run_seed(Environment& env, Policy& policy, std::int64_t rounds, std::uint64_t seed,
                    const SeedOptions& options = {});

struct SummaryRow {
  std::int64_t round = 0;
  double mean = 0.0;
  double std = 0.0;  // sample std across seeds, 0 for a single seed
  std::size_t seeds = 0;
};

// Checkpoints {T/5, 2T/5, ..., T}, deduplicated for small T.
std::vector<std::int64_t> summary_rounds(std::int64_t rounds);
std::vector<SummaryRow> summarize(const std::vector<SeedResult>& results, std::int64_t rounds);

struct RunResult {
  std::vector<SeedResult> seeds;
  std::vector<SummaryRow> summary;
  bool all_ok() const;
};

struct RunOptions {
  bool write_files = true;
  bool resume = false;  // continue from checkpoint_seed{S}.json where present
};

// Worker cap: GNB_THREADS if set, else hardware concurrency; never more than `jobs`.
std::size_t worker_count(std::size_t jobs);

// All seeds, in parallel workers. Writes trace_seed{S}.csv and summary.csv to output_dir.
RunResult run(const RunConfig& config, const RunOptions& options = {});

enum class SweepAxis { k, gamma, alpha, n_tilde };
std::string to_string(SweepAxis a);
SweepAxis parse_sweep_axis(const std::string& s);
void apply_axis(RunConfig& config, SweepAxis axis, double value);

struct SweepRow {
  double value = 0.0;
  double mean_final = 0.0;
  double std_final = 0.0;
  std::size_t seeds_ok = 0;
  double adjacency_std = 0.0;
};

// One run per value under output_dir/{axis}_{value}, consolidated into sweep_{axis}.csv.
std::vector<SweepRow> sweep(const RunConfig& base, SweepAxis axis, const std::vector<double>& values,
                            const RunOptions& options = {});

}  // namespace gnb
