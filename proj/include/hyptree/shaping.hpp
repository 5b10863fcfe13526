#pragma once

/**
 * Potential-based shaping over a rollout tree.
 *
 * Verified-correct leaves (plus optional goal anchors) form the goal set.
 * Every node gets a bounded potential V = d_root / (d_root + d_goal), and an
 * edge (i -> j) earns the step reward V(j) - V(i), which telescopes to
 * V(leaf) - V(root) along any path. Three metric regimes are supported:
 * the geodesic default, the ambient Euclidean ablation, and a binary 0/1
 * step reward over the verified path set.
 */

#include "geometry.hpp"
#include "logging.hpp"
#include "tree.hpp"

#include <algorithm>
#include <set>
#include <string>
#include <vector>

namespace hyptree {

enum class RewardScheme { poincare, euclidean, sparse01 };

inline const char* to_string(RewardScheme s) {
  switch (s) {
    case RewardScheme::poincare: return "poincare";
    case RewardScheme::euclidean: return "euclidean";
    case RewardScheme::sparse01: return "sparse01";
  }
  return "?";
}

inline RewardScheme parse_reward_scheme(const std::string& s) {
  if (s == "poincare") return RewardScheme::poincare;
  if (s == "euclidean") return RewardScheme::euclidean;
  if (s == "sparse01") return RewardScheme::sparse01;
  throw ConfigError("unknown reward scheme: " + s);
}

/// Goal latents: verified-correct leaves, optionally extended by anchors.
struct GoalSet {
  std::vector<BallPoint> latents;

  bool empty() const { return latents.empty(); }
};

namespace detail {
inline double scheme_distance(const BallPoint& a, const BallPoint& b, RewardScheme scheme) {
  switch (scheme) {
    case RewardScheme::poincare: return geodesic_distance(a, b);
    case RewardScheme::euclidean: return euclidean_distance(a, b);
    case RewardScheme::sparse01: break;
  }
  throw Error("sparse01 carries no distance; use sparse_step_reward");
}
}  // namespace detail

/// Distance from y to the closest goal latent under the scheme's metric.
inline double goal_distance(const BallPoint& y, const GoalSet& goals, RewardScheme scheme) {
  if (goals.empty()) throw EmptyGoalSet("goal_distance: no goal latents");
  double best = detail::scheme_distance(y, goals.latents.front(), scheme);
  for (std::size_t i = 1; i < goals.latents.size(); ++i) {
    best = std::min(best, detail::scheme_distance(y, goals.latents[i], scheme));
  }
  return best;
}

/// Distance from y to the root latent, which is the origin by construction.
inline double root_distance(const BallPoint& y, RewardScheme scheme) {
  return detail::scheme_distance(y, ball_origin(y.dim()), scheme);
}

/// Bounded potential V = d_root / (d_root + d_goal) in [0, 1].
/// V is exactly 0 at the root and exactly 1 at any goal latent. The
/// degenerate case d_root = d_goal = 0 means the prompt itself is a verified
/// goal; shaping returns 1 there and warns.
inline double potential(const BallPoint& y, const GoalSet& goals, RewardScheme scheme) {
  const double d_root = root_distance(y, scheme);
  const double d_goal = goal_distance(y, goals, scheme);
  if (d_root == 0.0 && d_goal == 0.0) {
    log_warn("potential: root coincides with a goal latent; returning V = 1");
    return 1.0;
  }
  return d_root / (d_root + d_goal);
}

/// Step reward for an edge (i -> j): V(j) - V(i), in [-1, 1].
inline double step_reward(double potential_i, double potential_j) {
  return potential_j - potential_i;
}

/// Union of root-to-leaf paths over the verified-correct leaves, root excluded.
inline std::set<NodeId> success_path_set(const SearchTree& tree,
                                         const std::set<NodeId>& correct_leaves) {
  std::set<NodeId> p_plus;
  for (NodeId leaf : correct_leaves) {
    if (leaf < 0 || static_cast<std::size_t>(leaf) >= tree.size() ||
        !tree.node(leaf).is_terminal()) {
      throw UnknownLeaf("success_path_set: node " + std::to_string(leaf) +
                        " is not a terminal leaf of this tree");
    }
    for (NodeId cur = leaf; cur != kRootId; cur = tree.node(cur).parent) {
      p_plus.insert(cur);
    }
  }
  return p_plus;
}

/// Binary step reward: 1 when the next node lies on a verified path.
inline double sparse_step_reward(NodeId j, const std::set<NodeId>& p_plus) {
  return p_plus.count(j) ? 1.0 : 0.0;
}

/// Augment the goal set with anchor latents. Distances over the union are
/// pointwise no larger than over the original set.
inline GoalSet extend_goal_anchors(GoalSet goals, const std::vector<BallPoint>& anchors) {
  goals.latents.insert(goals.latents.end(), anchors.begin(), anchors.end());
  return goals;
}

/// Goal set built from a tree's verified-correct leaves.
inline GoalSet goal_set_from_tree(const SearchTree& tree) {
  GoalSet goals;
  for (NodeId leaf : verified_correct_leaves(tree)) {
    goals.latents.push_back(tree.node(leaf).latent);
  }
  return goals;
}

/**
 * Single shaping pass: computes and caches the potential of every node.
 *
 * Potential schemes require a non-empty goal set (verified leaves plus
 * anchors); a goal-free tree is refused loudly instead of yielding an
 * all-zero signal. Under sparse01 the cached value is the P+ membership
 * indicator and no goal set is involved.
 */
inline void shape_tree(SearchTree& tree, RewardScheme scheme,
                       const std::vector<BallPoint>& anchors = {}) {
  if (scheme == RewardScheme::sparse01) {
    std::set<NodeId> correct;
    for (NodeId leaf : verified_correct_leaves(tree)) correct.insert(leaf);
    const std::set<NodeId> p_plus = success_path_set(tree, correct);
    for (SearchNode& n : tree.nodes()) {
      n.potential = sparse_step_reward(n.id, p_plus);
    }
  } else {
    const GoalSet goals = extend_goal_anchors(goal_set_from_tree(tree), anchors);
    if (goals.empty()) {
      throw EmptyGoalSet("shape_tree: no verified-correct leaf and no anchors");
    }
    for (SearchNode& n : tree.nodes()) {
      n.potential = potential(n.latent, goals, scheme);
    }
  }
  tree.set_shaped_scheme(std::string(to_string(scheme)));
}

/// Step reward of the incoming edge of a shaped node. Under potential
/// schemes this is V(node) - V(parent); under sparse01 it is the node's
/// P+ indicator.
inline double incoming_step_reward(const SearchTree& tree, NodeId id) {
  const SearchNode& n = tree.node(id);
  if (n.parent < 0) throw Error("incoming_step_reward: root has no incoming edge");
  if (!n.potential || !tree.node(n.parent).potential) {
    throw MissingPotential("incoming_step_reward: tree has not been shaped");
  }
  if (tree.shaped_scheme() && *tree.shaped_scheme() == "sparse01") {
    return *n.potential;
  }
  return step_reward(*tree.node(n.parent).potential, *n.potential);
}

}  // namespace hyptree
