#include "gnb/config.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace gnb {

namespace pt = boost::property_tree;

std::string to_string(EnvKind k) {
  switch (k) {
    case EnvKind::synthetic: return "synthetic";
    case EnvKind::classification: return "classification";
    case EnvKind::feature_file: return "feature_file";
  }
  return "unknown";
}

EnvKind parse_env_kind(const std::string& s) {
  if (s == "synthetic") return EnvKind::synthetic;
  if (s == "classification") return EnvKind::classification;
  if (s == "feature_file") return EnvKind::feature_file;
  throw config_error("unknown environment kind '" + s + "'");
}

namespace {

template <class T>
T parse_number(const std::string& section, const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    T v;
    if constexpr (std::is_floating_point_v<T>)
      v = static_cast<T>(std::stod(text, &used));
    else if constexpr (std::is_unsigned_v<T>) {
      if (!text.empty() && text[0] == '-') throw std::invalid_argument(text);
      v = static_cast<T>(std::stoull(text, &used));
    } else
      v = static_cast<T>(std::stoll(text, &used));
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw config_error("[" + section + "] " + key + ": cannot parse '" + text + "' as a number");
  }
}

// [policy] keys overlay the JSON form of the defaults; the default's type decides the parse.
PolicyConfig parse_policy_section(const pt::ptree& section) {
  nlohmann::json j = to_json(PolicyConfig{});
  for (const auto& [key, node] : section) {
    if (!j.contains(key)) throw config_error("[policy] unknown key '" + key + "'");
    const std::string text = node.get_value<std::string>();
    auto& slot = j[key];
    if (slot.is_number_float())
      slot = parse_number<double>("policy", key, text);
    else if (slot.is_number_unsigned())
      slot = parse_number<std::uint64_t>("policy", key, text);
    else if (slot.is_number_integer())
      slot = parse_number<std::int64_t>("policy", key, text);
    else
      slot = text;
  }
  try {
    return policy_config_from_json(j);
  } catch (const std::invalid_argument& e) {
    throw config_error(std::string("[policy] ") + e.what());
  }
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(","));
  std::vector<std::uint64_t> seeds;
  for (auto& p : parts) {
    boost::trim(p);
    if (!p.empty()) seeds.push_back(parse_number<std::uint64_t>("run", "seeds", p));
  }
  return seeds;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

EnvConfig parse_env_section(const pt::ptree& section, const std::filesystem::path& base) {
  EnvConfig e;
  auto& s = e.synthetic;
  for (const auto& [key, node] : section) {
    const std::string v = node.get_value<std::string>();
    auto num = [&](auto& slot) { slot = parse_number<std::decay_t<decltype(slot)>>("environment", key, v); };
    if (key == "kind") e.kind = parse_env_kind(v);
    else if (key == "users") num(s.users);
    else if (key == "dim") num(s.dim);
    else if (key == "arms") num(s.arms);
    else if (key == "groups") num(s.groups);
    else if (key == "jitter") num(s.jitter);
    else if (key == "link") s.link = parse_link(v);
    else if (key == "logit_scale") num(s.logit_scale);
    else if (key == "noise") s.noise = parse_noise(v);
    else if (key == "sigma") num(s.sigma);
    else if (key == "rho") num(s.rho);
    else if (key == "max_attempts") num(s.max_attempts);
    else if (key == "data") e.data = resolve(base, v);
    else if (key == "classes") num(e.classes);
    else if (key == "features") e.features = resolve(base, v);
    else if (key == "interactions") e.interactions = resolve(base, v);
    else if (key == "arms_per_round") num(e.arms_per_round);
    else throw config_error("[environment] unknown key '" + key + "'");
  }
  return e;
}

void require_file(const std::filesystem::path& p, const std::string& what) {
  if (p.empty()) throw config_error("environment: missing '" + what + "' path");
  if (!std::filesystem::is_regular_file(p)) throw config_error("environment: " + what + " file not found: " + p.string());
}

}  // namespace

void RunConfig::validate() const {
  if (rounds < 1) throw config_error("run: T must be >= 1");
  if (seeds.empty()) throw config_error("run: seeds must be non-empty");
  if (checkpoint_at < 0 || checkpoint_at > rounds) throw config_error("run: checkpoint_at must lie in [0, T]");
  policy_config.validate();
  switch (env.kind) {
    case EnvKind::synthetic: env.synthetic.validate(); break;
    case EnvKind::classification:
      require_file(env.data, "data");
      if (env.classes < 0) throw config_error("environment: classes must be >= 0");
      break;
    case EnvKind::feature_file:
      require_file(env.features, "features");
      require_file(env.interactions, "interactions");
      if (env.arms_per_round < 1) throw config_error("environment: arms_per_round must be >= 1");
      break;
  }
}

namespace {

// read_ini only knows whole-line comments; drop trailing "  ; note" as well.
std::string strip_inline_comments(std::istream& in) {
  std::string out, line;
  while (std::getline(in, line)) {
    for (std::size_t i = 1; i < line.size(); ++i)
      if ((line[i] == ';' || line[i] == '#') && std::isspace(static_cast<unsigned char>(line[i - 1]))) {
        line.erase(i);
        break;
      }
    out += line + '\n';
  }
  return out;
}

}  // namespace

RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream text(strip_inline_comments(in));
    pt::read_ini(text, tree);
  } catch (const pt::ini_parser_error& e) {
    throw parse_error(e.filename(), e.line(), e.message());
  }
  RunConfig c;
  static const std::set<std::string> sections{"run", "policy", "environment"};
  for (const auto& [name, node] : tree) {
    if (!sections.count(name)) throw config_error("unknown section [" + name + "]");
    if (!node.data().empty()) throw config_error("key '" + name + "' outside of a section");
  }
  if (const auto run = tree.get_child_optional("run")) {
    for (const auto& [key, node] : *run) {
      const std::string v = node.get_value<std::string>();
      if (key == "policy") c.policy = parse_policy_kind(v);
      else if (key == "T") c.rounds = parse_number<std::int64_t>("run", key, v);
      else if (key == "seeds") c.seeds = parse_seeds(v);
      else if (key == "output_dir") c.output_dir = resolve(base_dir, v);
      else if (key == "checkpoint_at") c.checkpoint_at = parse_number<std::int64_t>("run", key, v);
      else throw config_error("[run] unknown key '" + key + "'");
    }
  }
  if (const auto policy = tree.get_child_optional("policy")) c.policy_config = parse_policy_section(*policy);
  if (const auto env = tree.get_child_optional("environment")) c.env = parse_env_section(*env, base_dir);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file " + path.string());
  try {
    return parse_run_config(in, path.parent_path());
  } catch (const parse_error& e) {
    throw parse_error(path.string(), e.line(), e.message());
  }
}

std::unique_ptr<Environment> make_environment(const EnvConfig& config, std::uint64_t seed) {
  switch (config.kind) {
    case EnvKind::synthetic: {
      SyntheticConfig s = config.synthetic;
      s.seed = seed;
      return std::make_unique<SyntheticEnv>(s);
    }
    case EnvKind::classification: {
      auto samples = load_classification_csv(config.data);
      Index classes = config.classes;
      if (classes == 0)
        for (const auto& s : samples) classes = std::max(classes, s.label + 1);
      return std::make_unique<ClassificationEnv>(std::move(samples), classes, seed);
    }
    case EnvKind::feature_file:
      return std::make_unique<FeatureFileEnv>(config.features, config.interactions, config.arms_per_round, seed);
  }
  throw config_error("unknown environment kind");
}

std::unique_ptr<Policy> make_policy(const RunConfig& config, const Environment& env, std::uint64_t seed) {
  PolicyConfig pc = config.policy_config;
  pc.seed = seed;
  return make_policy(config.policy, pc, env.users(), env.context_dim());
}

}  // namespace gnb
