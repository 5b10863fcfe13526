#pragma once

/**
 * Search tree over dialogue states.
 *
 * Nodes are stored densely and identified by their creation index; the root
 * is always node 0. Edge statistics live on the parent's child list, so each
 * non-root node has exactly one incoming edge addressed by (parent, child_index).
 */

#include "errors.hpp"
#include "geometry.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hyptree {

using NodeId = std::int32_t;
inline constexpr NodeId kRootId = 0;

enum class TerminalReason { answer, depth, echo, length, pruned_dead_end };

inline const char* to_string(TerminalReason r) {
  switch (r) {
    case TerminalReason::answer: return "answer";
    case TerminalReason::depth: return "depth";
    case TerminalReason::echo: return "echo";
    case TerminalReason::length: return "length";
    case TerminalReason::pruned_dead_end: return "pruned_dead_end";
  }
  return "?";
}

struct TerminalInfo {
  double reward = 0.0;  // verified return in [0, 1]
  TerminalReason reason = TerminalReason::answer;
};

/// Per-edge statistics: visit count N, running mean of terminal returns Q,
/// selection-time initialization Q0, and likelihood prior P.
struct EdgeStats {
  std::int64_t visit_count = 0;
  double mean_value = 0.0;  // meaningful once visit_count > 0
  double init_value = 0.0;  // Q0, convex mix of value head and prior
  double prior = 0.0;       // softmax of cumulative log-probabilities
};

struct ChildEdge {
  EdgeStats stats;
  NodeId child = -1;
};

struct SearchNode {
  NodeId id = -1;
  NodeId parent = -1;    // -1 for the root
  int child_index = -1;  // index within the parent's child list
  int depth = 0;

  std::vector<int> action_label;       // opaque token sequence of the incoming action
  std::vector<double> token_logprobs;  // per-token log-probabilities of that action

  Vec pooled;       // pooled ambient representation of the state
  BallPoint latent; // root-centered ball point

  double value_pred = 0.5;  // value-head output, strictly in (0, 1)
  bool enabled = true;
  std::optional<TerminalInfo> terminal;
  std::optional<double> potential;  // filled by a shaping pass

  std::vector<ChildEdge> children;  // creation (= candidate sampling) order

  bool is_terminal() const { return terminal.has_value(); }
  bool is_expanded() const { return !children.empty(); }
};

class SearchTree {
 public:
  SearchTree() = default;

  /// Create a tree whose root holds the given pooled prompt representation.
  /// The root latent is the exact origin by construction.
  static SearchTree with_root(Vec root_pooled, double root_value_pred,
                              std::string prompt_id = "p0") {
    SearchTree t;
    t.prompt_id_ = std::move(prompt_id);
    SearchNode root;
    root.id = kRootId;
    root.depth = 0;
    root.latent = ball_origin(root_pooled.size());
    root.pooled = std::move(root_pooled);
    root.value_pred = root_value_pred;
    t.nodes_.push_back(std::move(root));
    return t;
  }

  const SearchNode& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  SearchNode& node(NodeId id) { return nodes_.at(static_cast<std::size_t>(id)); }
  const SearchNode& root() const { return nodes_.front(); }
  SearchNode& root() { return nodes_.front(); }

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  const std::vector<SearchNode>& nodes() const { return nodes_; }
  std::vector<SearchNode>& nodes() { return nodes_; }

  const Vec& root_pooled() const { return nodes_.front().pooled; }
  const std::string& prompt_id() const { return prompt_id_; }
  void set_prompt_id(std::string id) { prompt_id_ = std::move(id); }

  /// Scheme of the last shaping pass, if any (kept for serialization).
  const std::optional<std::string>& shaped_scheme() const { return shaped_scheme_; }
  void set_shaped_scheme(std::optional<std::string> s) { shaped_scheme_ = std::move(s); }

  NodeId add_child(NodeId parent, SearchNode node, EdgeStats stats) {
    const NodeId id = static_cast<NodeId>(nodes_.size());
    SearchNode& p = nodes_.at(static_cast<std::size_t>(parent));
    node.id = id;
    node.parent = parent;
    node.child_index = static_cast<int>(p.children.size());
    node.depth = p.depth + 1;
    p.children.push_back(ChildEdge{stats, id});
    nodes_.push_back(std::move(node));
    return id;
  }

  /// Root-to-node path as node ids (inclusive of both endpoints).
  std::vector<NodeId> path_to(NodeId id) const {
    std::vector<NodeId> path;
    for (NodeId cur = id; cur >= 0; cur = node(cur).parent) path.push_back(cur);
    std::vector<NodeId> out(path.rbegin(), path.rend());
    return out;
  }

  /// Path as child indices from the root, the state descriptor providers see.
  std::vector<int> index_path(NodeId id) const {
    std::vector<int> rev;
    for (NodeId cur = id; cur != kRootId; cur = node(cur).parent) {
      rev.push_back(node(cur).child_index);
    }
    return std::vector<int>(rev.rbegin(), rev.rend());
  }

  const EdgeStats& incoming_edge(NodeId id) const {
    const SearchNode& n = node(id);
    if (n.parent < 0) throw Error("incoming_edge: root has no incoming edge");
    return node(n.parent).children.at(static_cast<std::size_t>(n.child_index)).stats;
  }

  EdgeStats& incoming_edge(NodeId id) {
    const SearchNode& n = node(id);
    if (n.parent < 0) throw Error("incoming_edge: root has no incoming edge");
    return node(n.parent).children.at(static_cast<std::size_t>(n.child_index)).stats;
  }

  /// Total visits over a node's outgoing edges, N(s).
  std::int64_t total_child_visits(NodeId id) const {
    std::int64_t n = 0;
    for (const ChildEdge& e : node(id).children) n += e.stats.visit_count;
    return n;
  }

  /// Terminal leaves with a real terminal reason. Dead ends produced by
  /// pruning are synthetic states, not sampled trajectories, and are skipped.
  std::vector<NodeId> terminal_leaves(bool include_dead_ends = false) const {
    std::vector<NodeId> out;
    for (const SearchNode& n : nodes_) {
      if (!n.terminal) continue;
      if (!include_dead_ends && n.terminal->reason == TerminalReason::pruned_dead_end) continue;
      out.push_back(n.id);
    }
    return out;
  }

  /// Cumulative action-token count along the root-to-node path.
  std::int64_t cumulative_action_tokens(NodeId id) const {
    std::int64_t total = 0;
    for (NodeId cur = id; cur != kRootId; cur = node(cur).parent) {
      total += static_cast<std::int64_t>(node(cur).action_label.size());
    }
    return total;
  }

 private:
  std::vector<SearchNode> nodes_;
  std::string prompt_id_ = "p0";
  std::optional<std::string> shaped_scheme_;
};

/// Leaves counted as verified-correct. Checkers emit returns in [0, 1];
/// anything at or above the threshold counts as a success.
inline constexpr double kCorrectLeafThreshold = 0.5;

inline bool is_correct_leaf(const SearchNode& n) {
  return n.terminal && n.terminal->reason != TerminalReason::pruned_dead_end &&
         n.terminal->reward >= kCorrectLeafThreshold;
}

inline std::vector<NodeId> verified_correct_leaves(const SearchTree& tree) {
  std::vector<NodeId> out;
  for (const SearchNode& n : tree.nodes()) {
    if (is_correct_leaf(n)) out.push_back(n.id);
  }
  return out;
}

/// Fraction of terminal leaves that verified correct; 0 when no leaf exists.
inline double terminal_success_rate(const SearchTree& tree) {
  std::int64_t terminals = 0;
  std::int64_t correct = 0;
  for (const SearchNode& n : tree.nodes()) {
    if (!n.terminal || n.terminal->reason == TerminalReason::pruned_dead_end) continue;
    ++terminals;
    if (is_correct_leaf(n)) ++correct;
  }
  return terminals == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(terminals);
}

}  // namespace hyptree
