#pragma once

/**
 * Command layer behind the CLI: rollout, shape, train and export-disk.
 * Each command returns a process exit code: 0 ok, 1 runtime failure,
 * 2 config error, 3 unshapeable tree, 4 nothing survived filtering.
 * Output files are written atomically, so re-running a command with the
 * same seed and config reproduces them byte for byte.
 */

#include "config.hpp"
#include "grpo.hpp"
#include "logging.hpp"
#include "mcts.hpp"
#include "shaping.hpp"
#include "synthenv.hpp"
#include "tree_io.hpp"
#include "value_head.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hyptree::io {

struct Environment {
  std::shared_ptr<PolicyProvider> provider;
  std::shared_ptr<Verifier> verifier;
};

/// Instantiate the configured synthetic environment. The rollout tree shape
/// (depth, breadth) always follows the search configuration. For the
/// paraphrase environment the latent dimension is fixed by its group layout
/// and the `dim` key is ignored.
inline Environment make_environment(const RunConfig& cfg, std::uint64_t seed) {
  Environment env;
  if (cfg.env == "planted") {
    synth::PlantedTreeSpec spec;
    spec.branching = cfg.search.branching;
    spec.depth = cfg.search.max_depth;
    spec.noise = cfg.noise;
    spec.step = cfg.step;
    spec.dimension = cfg.dim;
    spec.planted_path =
        cfg.planted_path.empty() ? synth::random_planted_path(spec, seed) : cfg.planted_path;
    auto provider = std::make_shared<synth::PlantedTreeProvider>(spec, seed);
    env.verifier = std::make_shared<synth::PlantedTreeVerifier>(provider);
    env.provider = provider;
  } else if (cfg.env == "paraphrase") {
    synth::ParaphraseClusterSpec spec;
    spec.branching = cfg.search.branching;
    spec.depth = cfg.search.max_depth;
    spec.dup_groups = cfg.dup_groups;
    spec.correct_group = cfg.correct_group;
    spec.cluster_threshold = cfg.search.cluster_threshold;
    auto provider = std::make_shared<synth::ParaphraseClusterProvider>(spec, seed);
    env.verifier = std::make_shared<synth::ParaphraseClusterVerifier>(provider);
    env.provider = provider;
  } else if (cfg.env == "gridworld") {
    synth::GridworldSpec spec;
    spec.width = cfg.width;
    spec.height = cfg.height;
    spec.goal_x = cfg.goal_x;
    spec.goal_y = cfg.goal_y;
    spec.kappa = cfg.kappa;
    spec.dimension = cfg.dim;
    auto [provider, verifier] = synth::gridworld_mdp(spec, seed);
    env.provider = provider;
    env.verifier = verifier;
  } else {
    throw ConfigError("unknown env '" + cfg.env + "'");
  }
  if (cfg.pool_matrices) {
    env.provider = std::make_shared<synth::MatrixPoolingProvider>(
        env.provider, splitmix64(seed ^ 0x706f6f6cULL));
  }
  return env;
}

namespace detail {

/// Output file for prompt i: the path itself for single-prompt runs,
/// otherwise "<stem>_p<i><extension>".
inline std::filesystem::path prompt_output_path(const std::filesystem::path& out, int index,
                                                int num_prompts) {
  if (num_prompts <= 1) return out;
  std::filesystem::path p = out;
  const std::string ext = p.extension().string();
  p.replace_extension();
  return std::filesystem::path(p.string() + "_p" + std::to_string(index) + ext);
}

/// '*' wildcard match over a file name.
inline bool wildcard_match(std::string_view pattern, std::string_view name) {
  std::size_t p = 0, n = 0, star = std::string_view::npos, backtrack = 0;
  while (n < name.size()) {
    if (p < pattern.size() && (pattern[p] == name[n])) {
      ++p;
      ++n;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      backtrack = n;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      n = ++backtrack;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

inline std::vector<std::filesystem::path> expand_glob(const std::string& pattern) {
  namespace fs = std::filesystem;
  if (pattern.find('*') == std::string::npos) {
    if (!fs::exists(pattern)) throw Error("no such file: '" + pattern + "'");
    return {fs::path(pattern)};
  }
  const fs::path full(pattern);
  const fs::path dir = full.parent_path().empty() ? fs::path(".") : full.parent_path();
  const std::string name_pattern = full.filename().string();
  if (dir.string().find('*') != std::string::npos) {
    throw Error("wildcards are only supported in the file name: '" + pattern + "'");
  }
  if (!fs::is_directory(dir)) throw Error("no such directory: '" + dir.string() + "'");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (wildcard_match(name_pattern, entry.path().filename().string())) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error("pattern matched no files: '" + pattern + "'");
  return out;
}

inline ValueFn head_valuer(const ValueHead& head) {
  return [head](const Vec& pooled) { return predict(head, pooled); };
}

}  // namespace detail

// ============================================================================
// rollout
// ============================================================================

inline int cmd_rollout(const std::string& config_path, const std::string& out_path,
                       std::optional<std::uint64_t> seed_override = std::nullopt) {
  RunConfig cfg;
  try {
    cfg = load_config(config_path);
    if (seed_override) cfg.search.rng_seed = *seed_override;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
  try {
    for (int i = 0; i < cfg.num_prompts; ++i) {
      SearchConfig scfg = cfg.search;
      scfg.rng_seed = cfg.search.rng_seed + static_cast<std::uint64_t>(i);
      Environment env;
      try {
        env = make_environment(cfg, scfg.rng_seed);
      } catch (const InvalidSpec& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
      }
      const ValueHead head = ValueHead::zeros(env.provider->dimension());
      const SearchTree tree =
          run_search(*env.provider, detail::head_valuer(head), *env.verifier, scfg,
                     nullptr, "p" + std::to_string(i));
      const std::filesystem::path out =
          detail::prompt_output_path(out_path, i, cfg.num_prompts);
      dump_tree(tree, out);

      int terminals = 0;
      for (const SearchNode& n : tree.nodes()) {
        if (n.terminal && n.terminal->reason != TerminalReason::pruned_dead_end) ++terminals;
      }
      std::printf("prompt=%s file=%s nodes=%zu terminals=%d success_rate=%.4f\n",
                  tree.prompt_id().c_str(), out.string().c_str(), tree.size(), terminals,
                  terminal_success_rate(tree));
    }
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "rollout failed: %s\n", e.what());
    return 1;
  }
}

// ============================================================================
// shape
// ============================================================================

inline int cmd_shape(const std::string& tree_path, const std::string& scheme_name,
                     const std::string& out_path) {
  RewardScheme scheme;
  try {
    scheme = parse_reward_scheme(scheme_name);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
  try {
    SearchTree tree = load_tree(tree_path);
    try {
      shape_tree(tree, scheme);
    } catch (const EmptyGoalSet& e) {
      std::fprintf(stderr, "shaping refused: %s\n", e.what());
      return 3;
    }
    dump_tree(tree, out_path);
    std::printf("shaped=%s scheme=%s nodes=%zu\n", out_path.c_str(), to_string(scheme),
                tree.size());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "shape failed: %s\n", e.what());
    return 1;
  }
}

// ============================================================================
// train
// ============================================================================

inline int cmd_train(const std::string& config_path, const std::string& trees_glob,
                     const std::string& out_checkpoint) {
  RunConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
  try {
    std::vector<SearchTree> trees;
    for (const std::filesystem::path& path : detail::expand_glob(trees_glob)) {
      trees.push_back(load_tree(path));
    }

    // Shape every tree that can carry the configured scheme; the rest are
    // dropped by the success-rate filter before their potentials are needed.
    for (SearchTree& tree : trees) {
      if (cfg.scheme == RewardScheme::sparse01 || !verified_correct_leaves(tree).empty()) {
        shape_tree(tree, cfg.scheme);
      }
    }

    const std::vector<std::size_t> kept = filter_tree_indices(trees, cfg.filter);
    if (kept.empty()) {
      std::fprintf(stderr, "no tree survived filtering\n");
      return 4;
    }

    Rng rng(cfg.search.rng_seed);
    std::vector<RolloutGroup> groups;
    for (std::size_t idx : kept) {
      if (auto group = build_group(trees[idx], cfg.group_size, rng, cfg.format_bonus)) {
        groups.push_back(std::move(*group));
      }
    }
    if (groups.empty()) {
      std::fprintf(stderr, "no tree yielded a trainable group\n");
      return 4;
    }

    double policy_loss = 0.0;
    double kl = 0.0;
    std::size_t traj_count = 0;
    for (const RolloutGroup& group : groups) {
      policy_loss += clipped_policy_loss(group, cfg.epsilon);
      for (const Trajectory& t : group.trajectories) {
        kl += kl_penalty(t.token_logprobs_new, t.token_logprobs_old, cfg.beta);
        ++traj_count;
      }
    }
    policy_loss /= static_cast<double>(groups.size());
    kl /= static_cast<double>(traj_count);

    ValueBatch batch;
    const std::size_t dim = trees[kept.front()].root_pooled().size();
    for (std::size_t idx : kept) {
      if (trees[idx].root_pooled().size() != dim) {
        throw Error("trees disagree on the latent dimension");
      }
      for (const SearchNode& n : trees[idx].nodes()) {
        batch.inputs.push_back(n.pooled);
        batch.targets.push_back(*n.potential);
      }
    }

    ValueHead head = ValueHead::zeros(dim);
    for (int s = 1; s <= cfg.value_steps; ++s) {
      const double v_loss = value_loss(head, batch);
      std::printf("step=%d policy_loss=%.6f value_loss=%.6f kl=%.3e joint_loss=%.6f\n", s,
                  policy_loss, v_loss, kl, joint_loss(policy_loss, v_loss, cfg.lambda));
      const ValueGrad grad = value_grad(head, batch);
      head = sgd_step(std::move(head), grad, cfg.value_lr);
    }
    const double final_loss = value_loss(head, batch);
    std::printf("final groups=%zu examples=%zu policy_loss=%.6f value_loss=%.6f joint_loss=%.6f\n",
                groups.size(), batch.size(), policy_loss, final_loss,
                joint_loss(policy_loss, final_loss, cfg.lambda));
    save_value_head(head, out_checkpoint);
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "train failed: %s\n", e.what());
    return 1;
  }
}

// ============================================================================
// export-disk
// ============================================================================

inline int cmd_export_disk(const std::string& tree_path, const std::string& out_path) {
  try {
    const SearchTree tree = load_tree(tree_path);
    export_disk(tree, out_path);
    std::printf("exported=%s nodes=%zu\n", out_path.c_str(), tree.size());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "export-disk failed: %s\n", e.what());
    return 1;
  }
}

}  // namespace hyptree::io
