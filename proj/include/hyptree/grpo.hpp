#pragma once

/**
 * Group-relative policy optimization over rollout groups.
 *
 * Advantages are mean-centered per group with no standard-deviation or
 * length normalization, and the clipped surrogate sums over tokens without a
 * per-token 1/|o_i| factor. Returns aggregate the dense step rewards along a
 * trajectory's root-to-leaf path. Trees are filtered by terminal success
 * rate and reward range before groups are formed.
 */

#include "errors.hpp"
#include "rng.hpp"
#include "shaping.hpp"
#include "tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hyptree {

struct Trajectory {
  std::vector<NodeId> node_path;  // root to leaf, inclusive
  std::vector<double> token_logprobs_new;
  std::vector<double> token_logprobs_old;
  double return_value = 0.0;
};

struct RolloutGroup {
  std::string prompt_id;
  std::vector<Trajectory> trajectories;

  std::size_t size() const { return trajectories.size(); }
  std::vector<double> returns() const {
    std::vector<double> out;
    out.reserve(trajectories.size());
    for (const Trajectory& t : trajectories) out.push_back(t.return_value);
    return out;
  }
};

struct FilterPolicy {
  double success_rate_lo = 0.0;    // exclusive lower bound
  double success_rate_hi = 0.8;    // inclusive upper bound
  double min_reward_range = 1e-2;  // max - min trajectory return must exceed this
  int max_groups_per_step = 8;
};

/// Token-wise likelihood ratio exp(new - old).
inline double token_ratio(double new_lp, double old_lp) { return std::exp(new_lp - old_lp); }

/// Centered group advantages A_i = R_i - mean(R). No variance normalization.
inline std::vector<double> group_advantages(const std::vector<double>& returns) {
  if (returns.size() < 2) {
    throw GroupTooSmall("group_advantages: need at least 2 trajectories, got " +
                        std::to_string(returns.size()));
  }
  double mean = 0.0;
  for (double r : returns) mean += r;
  mean /= static_cast<double>(returns.size());
  std::vector<double> out(returns.size());
  for (std::size_t i = 0; i < returns.size(); ++i) out[i] = returns[i] - mean;
  return out;
}

namespace detail {
inline void check_group(const RolloutGroup& group, double epsilon) {
  if (group.size() < 2) {
    throw GroupTooSmall("policy loss: group of size " + std::to_string(group.size()));
  }
  if (epsilon <= 0.0 || epsilon >= 1.0) throw ConfigError("epsilon must be in (0, 1)");
  for (const Trajectory& t : group.trajectories) {
    if (t.token_logprobs_new.size() != t.token_logprobs_old.size()) {
      throw LengthMismatch("policy loss: new/old log-probability arrays differ in length");
    }
    if (t.token_logprobs_new.empty()) {
      throw LengthMismatch("policy loss: trajectory with no tokens");
    }
  }
}
}  // namespace detail

/// Clipped surrogate for one group:
///   -(1/G) sum_i sum_t min(r_it * A_i, clip(r_it, 1-eps, 1+eps) * A_i),
/// with the advantage shared across a trajectory's tokens.
inline double clipped_policy_loss(const RolloutGroup& group, double epsilon) {
  detail::check_group(group, epsilon);
  const std::vector<double> advantages = group_advantages(group.returns());
  double total = 0.0;
  for (std::size_t i = 0; i < group.size(); ++i) {
    const Trajectory& t = group.trajectories[i];
    const double adv = advantages[i];
    for (std::size_t k = 0; k < t.token_logprobs_new.size(); ++k) {
      const double r = token_ratio(t.token_logprobs_new[k], t.token_logprobs_old[k]);
      const double clipped = std::clamp(r, 1.0 - epsilon, 1.0 + epsilon);
      total += std::min(r * adv, clipped * adv);
    }
  }
  return -total / static_cast<double>(group.size());
}

/// Gradient of clipped_policy_loss with respect to each new token
/// log-probability. Zero wherever the clip saturates the min.
inline std::vector<std::vector<double>> clipped_policy_loss_grad(const RolloutGroup& group,
                                                                 double epsilon) {
  detail::check_group(group, epsilon);
  const std::vector<double> advantages = group_advantages(group.returns());
  const double inv_g = 1.0 / static_cast<double>(group.size());
  std::vector<std::vector<double>> grad(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    const Trajectory& t = group.trajectories[i];
    const double adv = advantages[i];
    grad[i].resize(t.token_logprobs_new.size(), 0.0);
    for (std::size_t k = 0; k < t.token_logprobs_new.size(); ++k) {
      const double r = token_ratio(t.token_logprobs_new[k], t.token_logprobs_old[k]);
      const bool active = adv > 0.0 ? r <= 1.0 + epsilon : adv < 0.0 ? r >= 1.0 - epsilon : false;
      if (active) grad[i][k] = -inv_g * adv * r;
    }
  }
  return grad;
}

/// Scalar trajectory return: the dense step rewards along the root-to-leaf
/// path summed up, plus an optional format bonus. Requires a shaped tree.
inline double trajectory_return(const SearchTree& tree, NodeId leaf,
                                double format_bonus = 0.0) {
  if (!tree.node(leaf).is_terminal()) {
    throw NotTerminal("trajectory_return: node " + std::to_string(leaf) + " is not terminal");
  }
  double total = format_bonus;
  for (NodeId cur = leaf; cur != kRootId; cur = tree.node(cur).parent) {
    total += incoming_step_reward(tree, cur);
  }
  return total;
}

/// Spread of trajectory returns over a shaped tree's terminal leaves.
inline double reward_range(const SearchTree& tree, double format_bonus = 0.0) {
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (NodeId leaf : tree.terminal_leaves()) {
    const double r = trajectory_return(tree, leaf, format_bonus);
    if (!any) {
      lo = hi = r;
      any = true;
    } else {
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
  }
  return any ? hi - lo : 0.0;
}

/// Indices of trees that survive the filter, in input order: success rate in
/// (lo, hi], reward range above the floor, truncated to the group budget.
/// The success-rate test runs first, so goal-free trees are dropped before
/// any potential is consulted.
inline std::vector<std::size_t> filter_tree_indices(const std::vector<SearchTree>& trees,
                                                    const FilterPolicy& policy) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < trees.size(); ++i) {
    if (static_cast<int>(kept.size()) >= policy.max_groups_per_step) break;
    const double rate = terminal_success_rate(trees[i]);
    if (rate <= policy.success_rate_lo || rate > policy.success_rate_hi) continue;
    if (reward_range(trees[i]) <= policy.min_reward_range) continue;
    kept.push_back(i);
  }
  return kept;
}

inline std::vector<SearchTree> filter_trees(std::vector<SearchTree> trees,
                                            const FilterPolicy& policy) {
  std::vector<SearchTree> out;
  for (std::size_t i : filter_tree_indices(trees, policy)) {
    out.push_back(std::move(trees[i]));
  }
  return out;
}

/// Monte-Carlo KL estimate scaled by beta:
///   beta * (1/T) * sum_t (exp(ref - new) - (ref - new) - 1),
/// nonnegative, and exactly zero when the sampled log-probabilities agree.
inline double kl_penalty(const std::vector<double>& new_lp, const std::vector<double>& ref_lp,
                         double beta) {
  if (new_lp.size() != ref_lp.size()) {
    throw LengthMismatch("kl_penalty: arrays of length " + std::to_string(new_lp.size()) +
                         " vs " + std::to_string(ref_lp.size()));
  }
  if (new_lp.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t t = 0; t < new_lp.size(); ++t) {
    const double delta = ref_lp[t] - new_lp[t];
    total += std::expm1(delta) - delta;
  }
  return beta * total / static_cast<double>(new_lp.size());
}

/**
 * Build one rollout group from a shaped tree: each distinct terminal leaf
 * yields one trajectory whose token log-probabilities are the concatenation
 * of its actions' stored log-probabilities (old = new at capture time).
 * Trees with more leaves than the group size contribute a seeded sample
 * without replacement; trees with fewer than 2 leaves cannot form a group.
 */
inline std::optional<RolloutGroup> build_group(const SearchTree& tree, int group_size,
                                               Rng& rng, double format_bonus = 0.0) {
  std::vector<NodeId> leaves = tree.terminal_leaves();
  if (leaves.size() < 2) return std::nullopt;
  if (group_size >= 2 && static_cast<int>(leaves.size()) > group_size) {
    // Partial Fisher-Yates: the first group_size slots are the sample.
    for (int i = 0; i < group_size; ++i) {
      const std::size_t j =
          static_cast<std::size_t>(i) +
          static_cast<std::size_t>(next_index(rng, leaves.size() - static_cast<std::size_t>(i)));
      std::swap(leaves[static_cast<std::size_t>(i)], leaves[j]);
    }
    leaves.resize(static_cast<std::size_t>(group_size));
  }

  RolloutGroup group;
  group.prompt_id = tree.prompt_id();
  for (NodeId leaf : leaves) {
    Trajectory traj;
    traj.node_path = tree.path_to(leaf);
    for (std::size_t i = 1; i < traj.node_path.size(); ++i) {
      const SearchNode& n = tree.node(traj.node_path[i]);
      traj.token_logprobs_new.insert(traj.token_logprobs_new.end(),
                                     n.token_logprobs.begin(), n.token_logprobs.end());
    }
    traj.token_logprobs_old = traj.token_logprobs_new;
    traj.return_value = trajectory_return(tree, leaf, format_bonus);
    group.trajectories.push_back(std::move(traj));
  }
  return group;
}

}  // namespace hyptree
