#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "gnb/baselines.hpp"
#include "gnb/environments.hpp"
#include "gnb/policy.hpp"

namespace gnb {

enum class EnvKind { synthetic, classification, feature_file };
std::string to_string(EnvKind k);
EnvKind parse_env_kind(const std::string& s);

struct EnvConfig {
  EnvKind kind = EnvKind::synthetic;
  SyntheticConfig synthetic;
  std::filesystem::path data;          // classification CSV
  Index classes = 0;                   // 0 = one more than the largest label
  std::filesystem::path features;      // feature_file
  std::filesystem::path interactions;  // feature_file
  Index arms_per_round = 5;
};

struct RunConfig {
  PolicyKind policy = PolicyKind::gnb;
  PolicyConfig policy_config;
  EnvConfig env;
  std::int64_t rounds = 1000;  // T
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output_dir = "out";
  std::int64_t checkpoint_at = 0;  // 0 = no checkpoint

  void validate() const;
};

// INI text: [run], [policy] and [environment] sections of key = value lines.
// Relative paths are resolved against base_dir.
RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// The environment and policy of one seed. Both take their streams from `seed`.
std::unique_ptr<Environment> make_environment(const EnvConfig& config, std::uint64_t seed);
std::unique_ptr<Policy> make_policy(const RunConfig& config, const Environment& env, std::uint64_t seed);

}  // namespace gnb
