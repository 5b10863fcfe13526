#pragma once

/**
 * AlphaZero-like search over dialogue states.
 *
 * Selection follows PUCT: argmax over enabled children of
 *   Q_hat + c * P * sqrt(N(s)) / (1 + N(s,a)),
 * where Q_hat is the running mean of terminal returns once the edge has been
 * visited and the Q0 initialization before that. Priors come from a softmax
 * over cumulative candidate log-probabilities; Q0 mixes the value head with
 * the prior. Only rule-verified terminal returns are ever backed up. Every K
 * iterations the frontier is pruned by single-linkage clustering of latents
 * under the geodesic metric, disabling a fraction of each cluster.
 */

#include "errors.hpp"
#include "geometry.hpp"
#include "rng.hpp"
#include "tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hyptree {

// ============================================================================
// Configuration
// ============================================================================

struct SearchConfig {
  int num_sim = 24;      // rollout budget N_sim
  int branching = 6;     // candidates per expansion B
  int max_depth = 6;
  double exploration_c = 1.25;
  double mix_eta = 0.5;            // eta: weight of the value head in Q0
  int prune_interval = 8;          // K: prune when iteration % K == 0
  double prune_ratio = 0.3;        // rho in [0, 1)
  double cluster_threshold = 0.1;  // tau: single-linkage merge distance
  std::int64_t max_action_tokens = 4096;  // cumulative length cap
  std::uint64_t rng_seed = 0;
  GeoConfig geo;
};

inline void validate(const SearchConfig& cfg) {
  if (cfg.num_sim < 1) throw ConfigError("num_sim must be positive");
  if (cfg.branching < 1) throw ConfigError("breadth must be positive");
  if (cfg.max_depth < 1) throw ConfigError("depth must be positive");
  if (cfg.exploration_c <= 0.0) throw ConfigError("exploration_c must be positive");
  if (cfg.mix_eta < 0.0 || cfg.mix_eta > 1.0) throw ConfigError("mix_eta must be in [0, 1]");
  if (cfg.prune_interval < 1) throw ConfigError("prune_per must be positive");
  if (cfg.prune_ratio < 0.0 || cfg.prune_ratio >= 1.0) {
    throw ConfigError("prune_ratio must be in [0, 1)");
  }
  if (cfg.cluster_threshold <= 0.0) throw ConfigError("cluster_threshold must be positive");
  if (cfg.max_action_tokens < 1) throw ConfigError("max_action_tokens must be positive");
  if (cfg.geo.stability_delta <= 0.0 || cfg.geo.stability_delta >= 1e-3) {
    throw ConfigError("stability_delta must be in (0, 1e-3)");
  }
  if (cfg.geo.projection_margin <= 0.0 || cfg.geo.projection_margin >= 1e-3) {
    throw ConfigError("projection_margin must be in (0, 1e-3)");
  }
}

// ============================================================================
// Provider / verifier interfaces
// ============================================================================

/// One sampled next-step completion.
struct Candidate {
  std::vector<int> action_label;       // opaque token sequence, T >= 1
  std::vector<double> token_logprobs;  // per-token, finite and <= 0
  Vec pooled;                          // pooled representation of the new state

  double cumulative_logprob() const {
    return std::accumulate(token_logprobs.begin(), token_logprobs.end(), 0.0);
  }
};

/// Abstracts the language-model backbone: candidate sampling plus the
/// answer-extraction predicate. Implementations must be deterministic.
class PolicyProvider {
 public:
  virtual ~PolicyProvider() = default;
  virtual std::size_t dimension() const = 0;
  virtual Vec root_pooled() const = 0;
  /// Sample up to `breadth` candidates at the given state. Providers with a
  /// smaller action space may return fewer, never zero.
  virtual std::vector<Candidate> sample(const SearchTree& tree, NodeId state, int breadth,
                                        Rng& rng) const = 0;
  virtual bool answer_extracted(const SearchTree& tree, NodeId state) const = 0;
};

/// Rule-based checker assigning terminal returns in [0, 1].
class Verifier {
 public:
  virtual ~Verifier() = default;
  virtual double verify(const SearchTree& tree, NodeId terminal_node) const = 0;
};

/// State-value predictor on pooled vectors; must return values in (0, 1).
using ValueFn = std::function<double(const Vec&)>;

/// Valuer that ignores its input, handy when eta = 0 or for pruning tests.
inline ValueFn constant_valuer(double v) {
  return [v](const Vec&) { return v; };
}

// ============================================================================
// Instrumentation
// ============================================================================

using EdgePath = std::vector<std::pair<NodeId, int>>;  // (parent, child index)

struct PruneReport {
  int clusters = 0;  // clusters found (including singletons)
  int disabled = 0;  // nodes disabled by the cluster rule
};

/// Optional search trace: selection paths, backup events and prune events,
/// in execution order. Tests use it to cross-check visit conservation,
/// Q-as-running-mean and the no-resurrection guarantee for pruned nodes.
struct SearchTrace {
  struct Selection {
    int iteration;
    EdgePath path;
    NodeId leaf;
  };
  struct Backup {
    int iteration;
    EdgePath path;
    double reward;
  };
  struct Prune {
    int iteration;
    PruneReport report;
    std::vector<NodeId> disabled;
  };
  std::vector<Selection> selections;
  std::vector<Backup> backups;
  std::vector<Prune> prunes;
};

// ============================================================================
// Core operations
// ============================================================================

/// Softmax of cumulative log-probabilities, computed with max subtraction.
/// Outputs are positive and sum to 1.
inline std::vector<double> candidate_priors(const std::vector<double>& cum_logprobs) {
  if (cum_logprobs.empty()) throw Error("candidate_priors: empty input");
  const double m = *std::max_element(cum_logprobs.begin(), cum_logprobs.end());
  std::vector<double> out(cum_logprobs.size());
  double total = 0.0;
  for (std::size_t k = 0; k < cum_logprobs.size(); ++k) {
    out[k] = std::exp(cum_logprobs[k] - m);
    total += out[k];
  }
  for (double& p : out) p /= total;
  return out;
}

/// Q0 = eta * value_pred + (1 - eta) * prior.
inline double init_edge_value(double value_pred, double prior, double eta) {
  return eta * value_pred + (1.0 - eta) * prior;
}

struct SelectResult {
  EdgePath path;
  NodeId leaf = kRootId;
};

/// PUCT descent from the root. Stops at a terminal node, an unexpanded node,
/// or an expanded node whose children are all disabled (a pruned dead end,
/// which the caller treats as terminal with zero reward). Ties break toward
/// the lowest child index. Note sqrt(N(s)) is taken literally: with an
/// entirely unvisited sibling set the exploration term vanishes and selection
/// degenerates to argmax Q0.
inline SelectResult puct_select(const SearchTree& tree, const SearchConfig& cfg) {
  if (tree.empty()) throw Error("puct_select: empty tree");
  if (!tree.root().enabled) throw RootDisabled("puct_select: root is disabled");

  SelectResult result;
  NodeId cur = kRootId;
  while (true) {
    const SearchNode& n = tree.node(cur);
    if (n.is_terminal() || !n.is_expanded()) break;

    const double sqrt_total =
        std::sqrt(static_cast<double>(tree.total_child_visits(cur)));
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n.children.size(); ++i) {
      const ChildEdge& e = n.children[i];
      if (!tree.node(e.child).enabled) continue;
      const double q_hat =
          e.stats.visit_count > 0 ? e.stats.mean_value : e.stats.init_value;
      const double score =
          q_hat + cfg.exploration_c * e.stats.prior * sqrt_total /
                      (1.0 + static_cast<double>(e.stats.visit_count));
      if (score > best_score) {
        best_score = score;
        best = static_cast<int>(i);
      }
    }
    if (best < 0) break;  // no enabled children: dead end
    result.path.emplace_back(cur, best);
    cur = n.children[static_cast<std::size_t>(best)].child;
  }
  result.leaf = cur;
  return result;
}

/// Terminal test for a freshly created node, by precedence:
/// answer > length > echo > depth. An extracted answer is verified even at
/// the depth limit; echo fires when the last two action labels coincide.
inline std::optional<TerminalReason> terminal_reason_for(const SearchTree& tree, NodeId id,
                                                         const PolicyProvider& provider,
                                                         const SearchConfig& cfg) {
  const SearchNode& n = tree.node(id);
  if (provider.answer_extracted(tree, id)) return TerminalReason::answer;
  if (tree.cumulative_action_tokens(id) > cfg.max_action_tokens) return TerminalReason::length;
  if (n.parent >= 0) {
    const SearchNode& p = tree.node(n.parent);
    if (!p.action_label.empty() && p.action_label == n.action_label) {
      return TerminalReason::echo;
    }
  }
  if (n.depth >= cfg.max_depth) return TerminalReason::depth;
  return std::nullopt;
}

namespace detail {
inline double clamp_unit_open(double v) {
  if (!std::isfinite(v)) throw Error("value prediction is not finite");
  return std::clamp(v, 1e-12, 1.0 - 1e-12);
}

inline void validate_candidate(const Candidate& c, std::size_t dim, int index) {
  const std::string at = "candidate " + std::to_string(index);
  if (c.action_label.empty()) throw ProviderFailure(at + ": empty action label");
  if (c.token_logprobs.empty()) throw ProviderFailure(at + ": no token log-probabilities");
  for (double lp : c.token_logprobs) {
    if (!std::isfinite(lp)) throw ProviderFailure(at + ": non-finite log-probability");
  }
  if (c.pooled.size() != dim) {
    throw ProviderFailure(at + ": pooled dimension " + std::to_string(c.pooled.size()) +
                          " != " + std::to_string(dim));
  }
  for (double x : c.pooled) {
    if (!std::isfinite(x)) throw ProviderFailure(at + ": non-finite pooled entry");
  }
}
}  // namespace detail

/// Expand a leaf: sample candidates, attach one child per candidate in
/// sampling order with prior, latent, value prediction and Q0. Children whose
/// terminal test fires are marked terminal and verified immediately; the
/// caller is responsible for backing them up through the selection path.
inline std::vector<NodeId> expand(SearchTree& tree, NodeId leaf_id,
                                  const PolicyProvider& provider, const ValueFn& valuer,
                                  const Verifier& verifier, const SearchConfig& cfg,
                                  Rng& rng) {
  const SearchNode& leaf = tree.node(leaf_id);
  if (!leaf.enabled) throw Error("expand: node is disabled");
  if (leaf.is_terminal()) throw TerminalLeaf("expand: node is terminal");
  if (leaf.is_expanded()) throw AlreadyExpanded("expand: node already expanded");
  if (leaf.depth >= cfg.max_depth) throw Error("expand: node at depth limit");

  std::vector<Candidate> candidates;
  try {
    candidates = provider.sample(tree, leaf_id, cfg.branching, rng);
  } catch (const std::exception& e) {
    throw ProviderFailure(std::string("sample failed: ") + e.what());
  }
  if (candidates.empty()) throw ProviderFailure("provider returned no candidates");
  if (static_cast<int>(candidates.size()) > cfg.branching) {
    throw ProviderFailure("provider returned more than breadth candidates");
  }

  std::vector<double> cum_logprobs(candidates.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    detail::validate_candidate(candidates[k], provider.dimension(), static_cast<int>(k));
    cum_logprobs[k] = candidates[k].cumulative_logprob();
  }
  const std::vector<double> priors = candidate_priors(cum_logprobs);

  std::vector<NodeId> created;
  created.reserve(candidates.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    Candidate& c = candidates[k];
    SearchNode child;
    child.action_label = std::move(c.action_label);
    child.token_logprobs = std::move(c.token_logprobs);
    child.latent = to_latent(c.pooled, tree.root_pooled(), cfg.geo);
    child.pooled = std::move(c.pooled);
    child.value_pred = detail::clamp_unit_open(valuer(child.pooled));

    EdgeStats stats;
    stats.prior = priors[k];
    stats.init_value = init_edge_value(child.value_pred, priors[k], cfg.mix_eta);

    const NodeId id = tree.add_child(leaf_id, std::move(child), stats);
    if (auto reason = terminal_reason_for(tree, id, provider, cfg)) {
      double reward = 0.0;
      try {
        reward = verifier.verify(tree, id);
      } catch (const std::exception& e) {
        throw ProviderFailure("candidate " + std::to_string(k) +
                              ": verifier failed: " + e.what());
      }
      if (!std::isfinite(reward) || reward < 0.0 || reward > 1.0) {
        throw ProviderFailure("candidate " + std::to_string(k) +
                              ": verifier returned reward outside [0, 1]");
      }
      tree.node(id).terminal = TerminalInfo{reward, *reason};
    }
    created.push_back(id);
  }
  return created;
}

/// Terminal-only backup along a root-anchored edge path:
/// N <- N + 1 and Q <- Q + (R - Q) / N per edge. Empty paths are no-ops.
inline void backup(SearchTree& tree, const EdgePath& path, double reward) {
  for (const auto& [parent, child_index] : path) {
    EdgeStats& e = tree.node(parent).children.at(static_cast<std::size_t>(child_index)).stats;
    e.visit_count += 1;
    e.mean_value += (reward - e.mean_value) / static_cast<double>(e.visit_count);
  }
}

/**
 * Latent-space pruning (single linkage at threshold tau).
 *
 * Clusters every enabled non-terminal node by geodesic distance, then
 * disables the floor(rho * (|C| - 1)) lowest-value members of each cluster.
 * The root is never disabled and each cluster retains at least one enabled
 * member. Disabling removes the whole subtree from future selection.
 * The report counts clusters (singletons included) and cluster-rule
 * disables, not subtree descendants.
 */
inline PruneReport prune(SearchTree& tree, const SearchConfig& cfg,
                         std::vector<NodeId>* disabled_out = nullptr) {
  std::vector<NodeId> pool;
  for (const SearchNode& n : tree.nodes()) {
    if (n.enabled && !n.is_terminal()) pool.push_back(n.id);
  }

  PruneReport report;
  if (pool.empty()) return report;

  // Union-find over pool indices; merge pairs within the threshold.
  std::vector<int> parent(pool.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (std::size_t j = i + 1; j < pool.size(); ++j) {
      const double d = geodesic_distance(tree.node(pool[i]).latent, tree.node(pool[j]).latent);
      if (d <= cfg.cluster_threshold) {
        const int a = find(static_cast<int>(i));
        const int b = find(static_cast<int>(j));
        if (a != b) parent[a] = b;
      }
    }
  }

  std::vector<std::vector<NodeId>> clusters(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    clusters[static_cast<std::size_t>(find(static_cast<int>(i)))].push_back(pool[i]);
  }

  std::function<void(NodeId)> disable_subtree = [&](NodeId id) {
    SearchNode& n = tree.node(id);
    if (!n.enabled) return;
    n.enabled = false;
    for (const ChildEdge& e : n.children) disable_subtree(e.child);
  };

  for (std::vector<NodeId>& cluster : clusters) {
    if (cluster.empty()) continue;
    ++report.clusters;
    if (cluster.size() < 2) continue;
    const int quota = static_cast<int>(cfg.prune_ratio * (static_cast<double>(cluster.size()) - 1.0));
    if (quota < 1) continue;

    std::sort(cluster.begin(), cluster.end(), [&](NodeId a, NodeId b) {
      const double va = tree.node(a).value_pred;
      const double vb = tree.node(b).value_pred;
      if (va != vb) return va < vb;
      return a < b;
    });
    int disabled_here = 0;
    for (NodeId id : cluster) {
      if (disabled_here >= quota) break;
      if (id == kRootId) continue;
      if (!tree.node(id).enabled) continue;  // already gone via an ancestor
      disable_subtree(id);
      if (disabled_out) disabled_out->push_back(id);
      ++disabled_here;
    }
    report.disabled += disabled_here;
  }
  return report;
}

// ============================================================================
// Search loop
// ============================================================================

/**
 * Full search: N_sim iterations of select -> (backup | expand) with terminal
 * children backed up at creation, pruning every K iterations. Deterministic
 * given the seed, the config and a deterministic provider.
 */
inline SearchTree run_search(const PolicyProvider& provider, const ValueFn& valuer,
                             const Verifier& verifier, const SearchConfig& cfg,
                             SearchTrace* trace = nullptr, std::string prompt_id = "p0") {
  validate(cfg);
  Vec root_pooled = provider.root_pooled();
  const double root_value = detail::clamp_unit_open(valuer(root_pooled));
  SearchTree tree = SearchTree::with_root(std::move(root_pooled), root_value,
                                          std::move(prompt_id));
  Rng rng(cfg.rng_seed);

  for (int n = 1; n <= cfg.num_sim; ++n) {
    try {
      SelectResult sel = puct_select(tree, cfg);
      if (trace) trace->selections.push_back({n, sel.path, sel.leaf});

      SearchNode& leaf = tree.node(sel.leaf);
      if (!leaf.is_terminal() && leaf.is_expanded()) {
        // Pruning disabled every child: a dead end, terminal with no reward.
        leaf.terminal = TerminalInfo{0.0, TerminalReason::pruned_dead_end};
      }

      if (leaf.is_terminal()) {
        backup(tree, sel.path, leaf.terminal->reward);
        if (trace) trace->backups.push_back({n, sel.path, leaf.terminal->reward});
      } else {
        const std::vector<NodeId> children =
            expand(tree, sel.leaf, provider, valuer, verifier, cfg, rng);
        for (NodeId child : children) {
          const SearchNode& cn = tree.node(child);
          if (!cn.is_terminal()) continue;
          EdgePath path = sel.path;
          path.emplace_back(sel.leaf, cn.child_index);
          backup(tree, path, cn.terminal->reward);
          if (trace) trace->backups.push_back({n, std::move(path), cn.terminal->reward});
        }
      }

      if (n % cfg.prune_interval == 0) {
        std::vector<NodeId> disabled;
        const PruneReport report = prune(tree, cfg, &disabled);
        if (trace) trace->prunes.push_back({n, report, std::move(disabled)});
      }
    } catch (const ProviderFailure& e) {
      throw ProviderFailure("iteration " + std::to_string(n) + ": " + e.what());
    }
  }
  return tree;
}

}  // namespace hyptree
