#include "gnb/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <boost/algorithm/string.hpp>

#include "gnb/serialization.hpp"

namespace gnb {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::string regret_label(bool pseudo) { return pseudo ? "cum_regret" : "realized_cum_regret"; }

nlohmann::json rows_to_json(const std::vector<TraceRow>& rows) {
  auto out = nlohmann::json::array();
  for (const auto& r : rows)
    out.push_back({r.round, r.user, r.chosen_arm, r.reward, r.oracle_best, r.inst_regret, r.cum_regret});
  return out;
}

std::vector<TraceRow> rows_from_json(const nlohmann::json& j) {
  std::vector<TraceRow> rows;
  for (const auto& r : j)
    rows.push_back({r[0].get<std::int64_t>(), r[1].get<Index>(), r[2].get<std::size_t>(), r[3].get<double>(),
                    r[4].get<double>(), r[5].get<double>(), r[6].get<double>()});
  return rows;
}

std::filesystem::path checkpoint_file(const std::filesystem::path& dir, std::uint64_t seed) {
  return dir / ("checkpoint_seed" + std::to_string(seed) + ".json");
}

std::filesystem::path trace_file(const std::filesystem::path& dir, std::uint64_t seed) {
  return dir / ("trace_seed" + std::to_string(seed) + ".csv");
}

void write_summary_csv(const std::filesystem::path& path, const RunResult& result, bool pseudo, std::int64_t rounds) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto label = regret_label(pseudo);
  out << "entry,seed,round,mean_" << label << ",std_" << label << ",n,message\n";
  for (const auto& s : result.summary)
    out << "checkpoint,," << s.round << ',' << fmt(s.mean) << ',' << fmt(s.std) << ',' << s.seeds << ",\n";
  for (const auto& s : result.seeds) {
    if (s.ok)
      out << "seed," << s.seed << ',' << rounds << ',' << fmt(s.final_regret()) << ",,1,ok\n";
    else
      out << "failure," << s.seed << ',' << s.trace.rows.size() << ",,,0," << csv_quote(s.error) << '\n';
  }
}

}  // namespace

bool operator==(const TraceRow& a, const TraceRow& b) {
  return a.round == b.round && a.user == b.user && a.chosen_arm == b.chosen_arm && a.reward == b.reward &&
         a.oracle_best == b.oracle_best && a.inst_regret == b.inst_regret && a.cum_regret == b.cum_regret;
}

std::string trace_header(bool pseudo) {
  return pseudo ? "round,user,chosen_arm,reward,oracle_best,inst_regret,cum_regret"
                : "round,user,chosen_arm,reward,realized_best,realized_inst_regret,realized_cum_regret";
}

void write_trace_csv(const std::filesystem::path& path, const RegretTrace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << trace_header(trace.pseudo_regret) << '\n';
  for (const auto& r : trace.rows)
    out << r.round << ',' << r.user << ',' << r.chosen_arm << ',' << fmt(r.reward) << ',' << fmt(r.oracle_best) << ','
        << fmt(r.inst_regret) << ',' << fmt(r.cum_regret) << '\n';
}

RegretTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open trace " + path.string());
  const std::string file = path.string();
  std::string line;
  if (!std::getline(in, line)) throw parse_error(file, 1, "empty trace");
  RegretTrace trace;
  if (line == trace_header(true))
    trace.pseudo_regret = true;
  else if (line == trace_header(false))
    trace.pseudo_regret = false;
  else
    throw parse_error(file, 1, "unrecognized trace header");
  std::size_t lineno = 1;
  double running = 0.0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    boost::split(cells, line, boost::is_any_of(","));
    if (cells.size() != 7) throw parse_error(file, lineno, "expected 7 columns");
    TraceRow r;
    try {
      r.round = std::stoll(cells[0]);
      r.user = std::stoll(cells[1]);
      r.chosen_arm = std::stoull(cells[2]);
      r.reward = std::stod(cells[3]);
      r.oracle_best = std::stod(cells[4]);
      r.inst_regret = std::stod(cells[5]);
      r.cum_regret = std::stod(cells[6]);
    } catch (const std::exception&) {
      throw parse_error(file, lineno, "malformed number");
    }
    running += r.inst_regret;
    if (running != r.cum_regret) throw parse_error(file, lineno, "cum_regret is not the running sum of inst_regret");
    trace.rows.push_back(r);
  }
  return trace;
}

TraceRow play_round(Environment& env, Policy& policy, std::int64_t round, double cum_before) {
  const Round r = env.next_round();
  const Decision d = policy.recommend(r.user, r.arms);
  const double reward = env.reward(d.chosen_index);
  policy.observe(r.user, d, reward);
  policy.maybe_train();
  TraceRow row;
  row.round = round;
  row.user = r.user;
  row.chosen_arm = d.chosen_index;
  row.reward = reward;
  row.oracle_best = r.oracle.best_value;
  row.inst_regret = r.oracle.best_value - r.oracle.expected_rewards(static_cast<Index>(d.chosen_index));
  row.cum_regret = cum_before + row.inst_regret;
  return row;
}

SeedResult run_seed(Environment& env, Policy& policy, std::int64_t rounds, std::uint64_t seed,
                    const SeedOptions& options) {
  SeedResult result;
  result.seed = seed;
  result.trace.pseudo_regret = env.has_oracle();
  const auto start = std::chrono::steady_clock::now();
  double spread_sum = 0.0;
  std::int64_t spread_count = 0;
  try {
    if (options.resume_from) {
      std::ifstream in(*options.resume_from);
      if (!in) throw config_error("cannot open checkpoint " + options.resume_from->string());
      const auto j = nlohmann::json::parse(in);
      if (j.at("version").get<int>() != kCheckpointVersion) throw config_error("checkpoint: unsupported version");
      if (j.at("seed").get<std::uint64_t>() != seed) throw config_error("checkpoint: seed mismatch");
      policy.load(j.at("policy"));
      env.load(j.at("env"));
      result.trace.rows = rows_from_json(j.at("rows"));
      spread_sum = j.at("spread_sum").get<double>();
      spread_count = j.at("spread_count").get<std::int64_t>();
    }
    double cum = result.trace.rows.empty() ? 0.0 : result.trace.rows.back().cum_regret;
    for (std::int64_t t = static_cast<std::int64_t>(result.trace.rows.size()) + 1; t <= rounds; ++t) {
      const TraceRow row = play_round(env, policy, t, cum);
      cum = row.cum_regret;
      result.trace.rows.push_back(row);
      const double spread = policy.last_graph_spread();
      if (std::isfinite(spread)) {
        spread_sum += spread;
        ++spread_count;
      }
      if (options.on_round) options.on_round(row);
      if (options.checkpoint_path && t == options.checkpoint_at) {
        nlohmann::json j{{"version", kCheckpointVersion}, {"seed", seed},
                         {"policy", policy.save()},       {"env", env.save()},
                         {"rows", rows_to_json(result.trace.rows)},
                         {"spread_sum", spread_sum},      {"spread_count", spread_count}};
        std::ofstream out(*options.checkpoint_path);
        if (!out) throw std::runtime_error("cannot write checkpoint " + options.checkpoint_path->string());
        out << j.dump();
      }
    }
    result.ok = true;
  } catch (const std::exception& e) {
    result.ok = false;
    result.error = e.what();
  }
  result.mean_graph_spread =
      spread_count ? spread_sum / static_cast<double>(spread_count) : std::numeric_limits<double>::quiet_NaN();
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

SeedResult run_seed(const RunConfig& config, std::uint64_t seed, const SeedOptions& options) {
  std::unique_ptr<Environment> env;
  std::unique_ptr<Policy> policy;
  try {
    env = make_environment(config.env, seed);
    policy = make_policy(config, *env, seed);
  } catch (const std::exception& e) {
    SeedResult failed;
    failed.seed = seed;
    failed.error = e.what();
    failed.mean_graph_spread = std::numeric_limits<double>::quiet_NaN();
    return failed;
  }
  return run_seed(*env, *policy, config.rounds, seed, options);
}

std::vector<std::int64_t> summary_rounds(std::int64_t rounds) {
  std::vector<std::int64_t> out;
  for (int k = 1; k <= 5; ++k) {
    const std::int64_t r = std::max<std::int64_t>(1, k * rounds / 5);
    if (out.empty() || out.back() != r) out.push_back(r);
  }
  return out;
}

std::vector<SummaryRow> summarize(const std::vector<SeedResult>& results, std::int64_t rounds) {
  std::vector<SummaryRow> out;
  for (const auto r : summary_rounds(rounds)) {
    SummaryRow row;
    row.round = r;
    std::vector<double> values;
    for (const auto& s : results)
      if (s.ok && static_cast<std::int64_t>(s.trace.rows.size()) >= r)
        values.push_back(s.trace.rows[static_cast<std::size_t>(r - 1)].cum_regret);
    row.seeds = values.size();
    if (!values.empty()) {
      for (double v : values) row.mean += v;
      row.mean /= static_cast<double>(values.size());
      if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - row.mean) * (v - row.mean);
        row.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
      }
    }
    out.push_back(row);
  }
  return out;
}

bool RunResult::all_ok() const {
  for (const auto& s : seeds)
    if (!s.ok) return false;
  return true;
}

std::size_t worker_count(std::size_t jobs) {
  std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("GNB_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) cap = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw config_error(std::string("GNB_THREADS must be a positive integer, got '") + env + "'");
    }
  }
  return std::max<std::size_t>(1, std::min(cap, jobs));
}

RunResult run(const RunConfig& config, const RunOptions& options) {
  config.validate();
  if (options.write_files) std::filesystem::create_directories(config.output_dir);
  RunResult result;
  result.seeds.resize(config.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      const auto seed = config.seeds[i];
      SeedOptions so;
      if (options.write_files && config.checkpoint_at > 0) {
        so.checkpoint_path = checkpoint_file(config.output_dir, seed);
        so.checkpoint_at = config.checkpoint_at;
      }
      if (options.resume) {
        const auto cp = checkpoint_file(config.output_dir, seed);
        if (std::filesystem::exists(cp)) so.resume_from = cp;
      }
      result.seeds[i] = run_seed(config, seed, so);
      if (options.write_files && result.seeds[i].ok) write_trace_csv(trace_file(config.output_dir, seed), result.seeds[i].trace);
    }
  };
  const auto workers = worker_count(config.seeds.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  result.summary = summarize(result.seeds, config.rounds);
  if (options.write_files) {
    bool pseudo = true;
    for (const auto& s : result.seeds)
      if (s.ok) pseudo = s.trace.pseudo_regret;
    write_summary_csv(config.output_dir / "summary.csv", result, pseudo, config.rounds);
  }
  return result;
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::k: return "k";
    case SweepAxis::gamma: return "gamma";
    case SweepAxis::alpha: return "alpha";
    case SweepAxis::n_tilde: return "n_tilde";
  }
  return "unknown";
}

SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "k") return SweepAxis::k;
  if (s == "gamma") return SweepAxis::gamma;
  if (s == "alpha") return SweepAxis::alpha;
  if (s == "n_tilde") return SweepAxis::n_tilde;
  throw config_error("unknown sweep axis '" + s + "' (expected k, gamma, alpha or n_tilde)");
}

void apply_axis(RunConfig& config, SweepAxis axis, double value) {
  const bool graph_policy = config.policy == PolicyKind::gnb || config.policy == PolicyKind::greedy_gnb;
  auto integral = [&] {
    if (value != std::floor(value)) throw config_error("sweep: axis " + to_string(axis) + " takes integer values");
    return static_cast<std::int64_t>(value);
  };
  switch (axis) {
    case SweepAxis::k:
      if (!graph_policy) throw config_error("sweep: axis k needs a graph policy");
      config.policy_config.k = static_cast<int>(integral());
      break;
    case SweepAxis::gamma:
      if (!graph_policy) throw config_error("sweep: axis gamma needs a graph policy");
      config.policy_config.kernel.gamma = value;
      break;
    case SweepAxis::n_tilde:
      if (!graph_policy) throw config_error("sweep: axis n_tilde needs a graph policy");
      config.policy_config.n_tilde = integral();
      break;
    case SweepAxis::alpha:
      if (config.policy == PolicyKind::random || config.policy == PolicyKind::greedy_gnb)
        throw config_error("sweep: axis alpha has no effect for policy " + to_string(config.policy));
      config.policy_config.alpha = value;
      break;
  }
  config.policy_config.validate();
}

std::vector<SweepRow> sweep(const RunConfig& base, SweepAxis axis, const std::vector<double>& values,
                            const RunOptions& options) {
  if (values.empty()) throw config_error("sweep: values must be non-empty");
  std::vector<RunConfig> configs;
  for (double v : values) {
    RunConfig c = base;
    apply_axis(c, axis, v);
    c.output_dir = base.output_dir / (to_string(axis) + "_" + short_fmt(v));
    configs.push_back(std::move(c));
  }
  std::vector<SweepRow> rows;
  bool pseudo = true;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const RunResult r = run(configs[i], options);
    SweepRow row;
    row.value = values[i];
    std::vector<double> finals;
    double spread = 0.0;
    for (const auto& s : r.seeds) {
      if (!s.ok) continue;
      pseudo = s.trace.pseudo_regret;
      finals.push_back(s.final_regret());
      spread += s.mean_graph_spread;
    }
    row.seeds_ok = finals.size();
    if (!finals.empty()) {
      row.mean_final = r.summary.back().mean;
      row.std_final = r.summary.back().std;
      row.adjacency_std = spread / static_cast<double>(finals.size());
    } else {
      row.mean_final = row.std_final = row.adjacency_std = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(row);
  }
  if (options.write_files) {
    std::filesystem::create_directories(base.output_dir);
    std::ofstream out(base.output_dir / ("sweep_" + to_string(axis) + ".csv"));
    const auto label = regret_label(pseudo);
    out << "axis,value,mean_final_" << label << ",std_final_" << label << ",seeds_ok,adjacency_element_std\n";
    for (const auto& r : rows)
      out << to_string(axis) << ',' << fmt(r.value) << ',' << fmt(r.mean_final) << ',' << fmt(r.std_final) << ','
          << r.seeds_ok << ',' << fmt(r.adjacency_std) << '\n';
  }
  return rows;
}

}  // namespace gnb
