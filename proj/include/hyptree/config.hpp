#pragma once

/**
 * Run configuration: a flat "key: value" text file covering the search,
 * geometry, shaping, filtering and training knobs plus the synthetic
 * environment. Where the published training configuration names a key
 * (depth, breadth, num_sim, prune_per, beta, loss_type, value_head_type)
 * the same name is used here. Unknown keys are rejected.
 */

#include "errors.hpp"
#include "grpo.hpp"
#include "mcts.hpp"
#include "shaping.hpp"

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace hyptree::io {

struct RunConfig {
  // environment
  std::string env = "planted";  // planted | paraphrase | gridworld
  std::size_t dim = 8;
  int num_prompts = 1;
  std::vector<int> planted_path;  // empty: drawn from the per-prompt seed
  double noise = 0.5;
  double step = 0.6;
  int dup_groups = 3;
  int correct_group = -1;
  int width = 5;
  int height = 5;
  int goal_x = 4;
  int goal_y = 4;
  double kappa = 0.4;
  bool pool_matrices = false;  // wrap the provider in the token-matrix fixture

  // search
  SearchConfig search;

  // shaping / training
  RewardScheme scheme = RewardScheme::poincare;
  double epsilon = 0.2;
  double lambda = 0.1;
  double beta = 1e-8;
  double format_bonus = 0.0;
  int group_size = 6;
  FilterPolicy filter;
  double value_lr = 0.1;
  int value_steps = 200;
  std::string loss_type = "dr_grpo";
  std::string value_head_type = "linear";
};

namespace detail {

inline double config_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': bad number '" + value + "'");
  }
}

inline std::int64_t config_int(const std::string& key, const std::string& value) {
  std::int64_t v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
    throw ConfigError("key '" + key + "': bad integer '" + value + "'");
  }
  return v;
}

inline std::vector<int> config_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    out.push_back(static_cast<int>(config_int(key, item)));
  }
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

inline bool config_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("key '" + key + "': bad boolean '" + value + "'");
}

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  std::size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline void validate(const RunConfig& cfg) {
  hyptree::validate(cfg.search);
  if (cfg.env != "planted" && cfg.env != "paraphrase" && cfg.env != "gridworld") {
    throw ConfigError("env must be planted, paraphrase or gridworld");
  }
  if (cfg.dim < 2) throw ConfigError("dim must be >= 2");
  if (cfg.num_prompts < 1) throw ConfigError("num_prompts must be positive");
  if (cfg.noise < 0.0 || cfg.noise > 1.0) throw ConfigError("noise must be in [0, 1]");
  if (cfg.epsilon <= 0.0 || cfg.epsilon >= 1.0) throw ConfigError("epsilon must be in (0, 1)");
  if (cfg.lambda < 0.0) throw ConfigError("lambda must be nonnegative");
  if (cfg.beta < 0.0) throw ConfigError("beta must be nonnegative");
  if (cfg.group_size < 2) throw ConfigError("group_size must be >= 2");
  if (cfg.filter.max_groups_per_step < 1) throw ConfigError("max_groups must be positive");
  if (cfg.filter.success_rate_lo < 0.0 || cfg.filter.success_rate_hi > 1.0 ||
      cfg.filter.success_rate_lo >= cfg.filter.success_rate_hi) {
    throw ConfigError("filter success-rate bounds must satisfy 0 <= lo < hi <= 1");
  }
  if (cfg.filter.min_reward_range < 0.0) throw ConfigError("filter_min_range must be nonnegative");
  if (cfg.value_lr <= 0.0) throw ConfigError("value_lr must be positive");
  if (cfg.value_steps < 0) throw ConfigError("value_steps must be nonnegative");
  if (cfg.loss_type != "dr_grpo") throw ConfigError("loss_type must be dr_grpo");
  if (cfg.value_head_type != "linear") throw ConfigError("value_head_type must be linear");
}

inline RunConfig parse_config_string(const std::string& contents) {
  RunConfig cfg;
  std::istringstream in(contents);
  std::string line;
  long line_no = 0;
  std::map<std::string, int> seen;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = detail::trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t colon = stripped.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key: value'");
    }
    const std::string key = detail::trim(stripped.substr(0, colon));
    const std::string value = detail::trim(stripped.substr(colon + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty key or value");
    }
    if (++seen[key] > 1) throw ConfigError("duplicate key '" + key + "'");

    if (key == "env") cfg.env = value;
    else if (key == "dim") cfg.dim = static_cast<std::size_t>(detail::config_int(key, value));
    else if (key == "num_prompts") cfg.num_prompts = static_cast<int>(detail::config_int(key, value));
    else if (key == "planted_path") cfg.planted_path = detail::config_int_list(key, value);
    else if (key == "noise") cfg.noise = detail::config_double(key, value);
    else if (key == "step") cfg.step = detail::config_double(key, value);
    else if (key == "dup_groups") cfg.dup_groups = static_cast<int>(detail::config_int(key, value));
    else if (key == "correct_group") cfg.correct_group = static_cast<int>(detail::config_int(key, value));
    else if (key == "width") cfg.width = static_cast<int>(detail::config_int(key, value));
    else if (key == "height") cfg.height = static_cast<int>(detail::config_int(key, value));
    else if (key == "goal_x") cfg.goal_x = static_cast<int>(detail::config_int(key, value));
    else if (key == "goal_y") cfg.goal_y = static_cast<int>(detail::config_int(key, value));
    else if (key == "kappa") cfg.kappa = detail::config_double(key, value);
    else if (key == "pool_matrices") cfg.pool_matrices = detail::config_bool(key, value);
    else if (key == "depth") cfg.search.max_depth = static_cast<int>(detail::config_int(key, value));
    else if (key == "breadth") cfg.search.branching = static_cast<int>(detail::config_int(key, value));
    else if (key == "num_sim") cfg.search.num_sim = static_cast<int>(detail::config_int(key, value));
    else if (key == "prune_per") cfg.search.prune_interval = static_cast<int>(detail::config_int(key, value));
    else if (key == "exploration_c") cfg.search.exploration_c = detail::config_double(key, value);
    else if (key == "mix_eta") cfg.search.mix_eta = detail::config_double(key, value);
    else if (key == "prune_ratio") cfg.search.prune_ratio = detail::config_double(key, value);
    else if (key == "cluster_threshold") cfg.search.cluster_threshold = detail::config_double(key, value);
    else if (key == "max_action_tokens") cfg.search.max_action_tokens = detail::config_int(key, value);
    else if (key == "seed") cfg.search.rng_seed = static_cast<std::uint64_t>(detail::config_int(key, value));
    else if (key == "delta") cfg.search.geo.stability_delta = detail::config_double(key, value);
    else if (key == "projection_margin") cfg.search.geo.projection_margin = detail::config_double(key, value);
    else if (key == "scheme") cfg.scheme = parse_reward_scheme(value);
    else if (key == "epsilon") cfg.epsilon = detail::config_double(key, value);
    else if (key == "lambda") cfg.lambda = detail::config_double(key, value);
    else if (key == "beta") cfg.beta = detail::config_double(key, value);
    else if (key == "format_bonus") cfg.format_bonus = detail::config_double(key, value);
    else if (key == "group_size") cfg.group_size = static_cast<int>(detail::config_int(key, value));
    else if (key == "filter_success_lo") cfg.filter.success_rate_lo = detail::config_double(key, value);
    else if (key == "filter_success_hi") cfg.filter.success_rate_hi = detail::config_double(key, value);
    else if (key == "filter_min_range") cfg.filter.min_reward_range = detail::config_double(key, value);
    else if (key == "max_groups") cfg.filter.max_groups_per_step = static_cast<int>(detail::config_int(key, value));
    else if (key == "value_lr") cfg.value_lr = detail::config_double(key, value);
    else if (key == "value_steps") cfg.value_steps = static_cast<int>(detail::config_int(key, value));
    else if (key == "loss_type") cfg.loss_type = value;
    else if (key == "value_head_type") cfg.value_head_type = value;
    else throw ConfigError("unknown key '" + key + "'");
  }
  validate(cfg);
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_string(buf.str());
}

}  // namespace hyptree::io
