#pragma once

/**
 * Deterministic synthetic environments standing in for the LLM backbone and
 * the rule-based checker. Each provider plants known structure (an optimal
 * path, semantic duplicate groups, or a shortest-path grid) so brute-force
 * oracles exist for every search and shaping claim.
 *
 * Providers derive per-call randomness by hashing their own seed with the
 * state's index path, so identical (state, breadth, seed) triples produce
 * bit-identical candidates regardless of visit order.
 */

#include "geometry.hpp"
#include "mcts.hpp"
#include "rng.hpp"
#include "tree.hpp"

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace hyptree::synth {

/// Largest hyperbolic half-radius any synthetic embedding may reach;
/// tanh(3.8) < 0.999 keeps every latent clear of the ball boundary.
inline constexpr double kMaxHalfRadius = 3.8;

namespace detail {

inline Vec random_unit_vector(Rng& rng, std::size_t dim) {
  Vec v(dim);
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      // Box-Muller; portable because it only uses next_double.
      const double u1 = std::max(next_double(rng), 1e-300);
      const double u2 = next_double(rng);
      v[j] = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
      n2 += v[j] * v[j];
    }
  } while (n2 < 1e-12);
  const double inv = 1.0 / std::sqrt(n2);
  for (double& x : v) x *= inv;
  return v;
}

inline std::vector<double> split_logprob(double cumulative, int tokens) {
  // Even split keeps every per-token value <= 0 for negative totals.
  std::vector<double> out(static_cast<std::size_t>(tokens),
                          cumulative / static_cast<double>(tokens));
  return out;
}

}  // namespace detail

// ============================================================================
// Planted-path tree
// ============================================================================

struct PlantedTreeSpec {
  int branching = 3;
  int depth = 3;
  std::vector<int> planted_path;  // length == depth, entries in [0, branching)
  double noise = 0.0;             // in [0, 1]; shrinks the planted logprob margin
  std::size_t dimension = 8;
  double step = 0.6;  // hyperbolic half-radius gained per planted step
};

/// Uniformly random planted path derived from a seed.
inline std::vector<int> random_planted_path(const PlantedTreeSpec& spec, std::uint64_t seed) {
  Rng rng(splitmix64(seed ^ 0xb5e7a1f2c3d4e5f6ULL));
  std::vector<int> path(static_cast<std::size_t>(spec.depth));
  for (int& step : path) {
    step = static_cast<int>(next_index(rng, static_cast<std::uint64_t>(spec.branching)));
  }
  return path;
}

/**
 * B-ary tree of fixed depth with one planted root-to-leaf path. Candidates on
 * the path carry the highest cumulative log-probability (margin shrinking
 * with noise) and pooled vectors that march along a fixed goal direction, so
 * the planted leaf's latent is the geodesic goal. Every depth-`depth` node
 * extracts an answer; only the planted leaf verifies to 1.
 */
class PlantedTreeProvider : public PolicyProvider {
 public:
  PlantedTreeProvider(PlantedTreeSpec spec, std::uint64_t seed)
      : spec_(std::move(spec)), seed_(seed) {
    if (spec_.branching < 1) throw InvalidSpec("planted: branching must be positive");
    if (spec_.depth < 1) throw InvalidSpec("planted: depth must be positive");
    if (static_cast<int>(spec_.planted_path.size()) != spec_.depth) {
      throw InvalidSpec("planted: planted_path length must equal depth");
    }
    for (int idx : spec_.planted_path) {
      if (idx < 0 || idx >= spec_.branching) {
        throw InvalidSpec("planted: planted_path index out of range");
      }
    }
    if (spec_.noise < 0.0 || spec_.noise > 1.0) {
      throw InvalidSpec("planted: noise must be in [0, 1]");
    }
    if (spec_.dimension < 2) throw InvalidSpec("planted: dimension must be >= 2");
    if (spec_.step <= 0.0 || spec_.step * spec_.depth > kMaxHalfRadius) {
      throw InvalidSpec("planted: step * depth must stay within " +
                        std::to_string(kMaxHalfRadius));
    }
    goal_direction_ = Vec(spec_.dimension, 0.0);
    goal_direction_[0] = 1.0;
  }

  const PlantedTreeSpec& spec() const { return spec_; }

  std::size_t dimension() const override { return spec_.dimension; }

  Vec root_pooled() const override { return Vec(spec_.dimension, 0.25); }

  std::vector<Candidate> sample(const SearchTree& tree, NodeId state, int breadth,
                                Rng& /*stream*/) const override {
    const std::vector<int> path = tree.index_path(state);
    const int node_depth = static_cast<int>(path.size());
    if (node_depth >= spec_.depth) {
      throw Error("planted: sampling below the leaf layer");
    }
    const bool on_path = is_planted_prefix(path);
    const Vec& parent_pooled = tree.node(state).pooled;
    const double sqrt_h = std::sqrt(static_cast<double>(spec_.dimension));

    const int count = std::min(breadth, spec_.branching);
    std::vector<Candidate> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
      Rng local(hash_state(seed_, path) ^ splitmix64(static_cast<std::uint64_t>(k) + 17));
      const bool planted = on_path && k == spec_.planted_path[static_cast<std::size_t>(node_depth)];

      Candidate c;
      const int tokens = 2 + static_cast<int>(next_index(local, 3));
      c.action_label = {node_depth, k};
      for (int t = 2; t < tokens; ++t) {
        c.action_label.push_back(static_cast<int>(next_index(local, 1000)));
      }
      double cum_lp = -0.5;
      if (!planted) {
        const double margin =
            (1.0 - spec_.noise) * 1.0 + spec_.noise * next_double(local, 0.05, 0.3);
        cum_lp -= margin;
      }
      c.token_logprobs = detail::split_logprob(cum_lp, tokens);

      Vec direction = planted ? goal_direction_ : detail::random_unit_vector(local, spec_.dimension);
      c.pooled = parent_pooled;
      for (std::size_t j = 0; j < spec_.dimension; ++j) {
        c.pooled[j] += sqrt_h * spec_.step * direction[j];
      }
      out.push_back(std::move(c));
    }
    return out;
  }

  bool answer_extracted(const SearchTree& tree, NodeId state) const override {
    return static_cast<int>(tree.index_path(state).size()) >= spec_.depth;
  }

  /// Latent of the node reached by following the planted path for k steps.
  BallPoint planted_latent(int steps, const GeoConfig& geo = {}) const {
    Vec v(spec_.dimension, 0.0);
    v[0] = spec_.step * static_cast<double>(steps);
    return exp_map_origin(v, geo);
  }

  /// Latent of the planted leaf, the geodesic goal point.
  BallPoint goal_latent(const GeoConfig& geo = {}) const {
    return planted_latent(spec_.depth, geo);
  }

  bool is_planted_prefix(const std::vector<int>& path) const {
    if (path.size() > spec_.planted_path.size()) return false;
    for (std::size_t i = 0; i < path.size(); ++i) {
      if (path[i] != spec_.planted_path[i]) return false;
    }
    return true;
  }

 private:
  PlantedTreeSpec spec_;
  std::uint64_t seed_;
  Vec goal_direction_;
};

class PlantedTreeVerifier : public Verifier {
 public:
  explicit PlantedTreeVerifier(std::shared_ptr<const PlantedTreeProvider> provider)
      : provider_(std::move(provider)) {}

  double verify(const SearchTree& tree, NodeId terminal_node) const override {
    const std::vector<int> path = tree.index_path(terminal_node);
    return path == provider_->spec().planted_path ? 1.0 : 0.0;
  }

 private:
  std::shared_ptr<const PlantedTreeProvider> provider_;
};

// ============================================================================
// Paraphrase-cluster tree
// ============================================================================

struct ParaphraseClusterSpec {
  int branching = 6;
  int dup_groups = 3;
  int depth = 3;
  double cluster_threshold = 0.1;  // tau the pruning clusterer will be run with
  int correct_group = -1;          // -1: the last (least likely) group
  std::size_t dimension = 0;       // 0: depth * dup_groups
};

/**
 * Every expansion partitions its candidates into dup_groups semantic groups
 * (candidate k belongs to group k % dup_groups). Group members sit within
 * geodesic distance tau/2 of one another while distinct groups stay at least
 * 2 tau apart, so single-linkage clustering at threshold tau recovers the
 * partition exactly. Group centers are shared across expansions at the same
 * depth: the groups are global paraphrase regions, not per-parent ones.
 * Priors fall off sharply with the group index, and only full-depth leaves
 * in the correct group verify to 1.
 */
class ParaphraseClusterProvider : public PolicyProvider {
 public:
  ParaphraseClusterProvider(ParaphraseClusterSpec spec, std::uint64_t seed)
      : spec_(std::move(spec)), seed_(seed) {
    if (spec_.branching < 1) throw InvalidSpec("paraphrase: branching must be positive");
    if (spec_.depth < 1) throw InvalidSpec("paraphrase: depth must be positive");
    if (spec_.dup_groups < 1 || spec_.dup_groups > spec_.branching) {
      throw InvalidSpec("paraphrase: dup_groups must be in [1, branching]");
    }
    if (spec_.cluster_threshold <= 0.0) {
      throw InvalidSpec("paraphrase: cluster_threshold must be positive");
    }
    if (spec_.correct_group < 0) spec_.correct_group = spec_.dup_groups - 1;
    if (spec_.correct_group >= spec_.dup_groups) {
      throw InvalidSpec("paraphrase: correct_group out of range");
    }
    const std::size_t needed =
        static_cast<std::size_t>(spec_.depth) * static_cast<std::size_t>(spec_.dup_groups);
    if (spec_.dimension == 0) spec_.dimension = needed;
    if (spec_.dimension < needed) {
      throw InvalidSpec("paraphrase: dimension must be >= depth * dup_groups");
    }
    if (half_radius(spec_.depth) + within_group_jitter() * spec_.branching > kMaxHalfRadius) {
      throw InvalidSpec("paraphrase: depth too large for the ball safety margin");
    }
  }

  const ParaphraseClusterSpec& spec() const { return spec_; }

  std::size_t dimension() const override { return spec_.dimension; }

  Vec root_pooled() const override { return Vec(spec_.dimension, -0.5); }

  std::vector<Candidate> sample(const SearchTree& tree, NodeId state, int breadth,
                                Rng& /*stream*/) const override {
    const std::vector<int> path = tree.index_path(state);
    const int node_depth = static_cast<int>(path.size());
    if (node_depth >= spec_.depth) {
      throw Error("paraphrase: sampling below the leaf layer");
    }
    const double sqrt_h = std::sqrt(static_cast<double>(spec_.dimension));
    const int count = std::min(breadth, spec_.branching);

    std::vector<Candidate> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
      Rng local(hash_state(seed_, path) ^ splitmix64(static_cast<std::uint64_t>(k) + 101));
      const int group = k % spec_.dup_groups;
      const int rank = k / spec_.dup_groups;

      Candidate c;
      const int tokens = 2 + static_cast<int>(next_index(local, 2));
      c.action_label = {node_depth, k};
      const double cum_lp = -0.2 - 0.8 * static_cast<double>(group) -
                            0.05 * static_cast<double>(rank);
      c.token_logprobs = detail::split_logprob(cum_lp, tokens);

      // Pull the target latent back through the exponential map: the latent
      // is tanh(a) on the group axis, so the tangent vector is a * axis.
      const double a = half_radius(node_depth + 1) +
                       within_group_jitter() * static_cast<double>(rank);
      Vec v(spec_.dimension, 0.0);
      v[axis_index(node_depth + 1, group)] = a;
      c.pooled = root_pooled();
      for (std::size_t j = 0; j < spec_.dimension; ++j) c.pooled[j] += sqrt_h * v[j];
      out.push_back(std::move(c));
    }
    return out;
  }

  bool answer_extracted(const SearchTree& tree, NodeId state) const override {
    return static_cast<int>(tree.index_path(state).size()) >= spec_.depth;
  }

  /// Semantic group of a candidate index.
  int group_of(int child_index) const { return child_index % spec_.dup_groups; }

  int correct_group() const { return spec_.correct_group; }

  /// Half-radius (artanh of the latent norm) used at a given depth.
  double half_radius(int depth) const { return 0.3 + 0.5 * static_cast<double>(depth); }

  double within_group_jitter() const {
    const int max_rank = std::max(1, (spec_.branching + spec_.dup_groups - 1) / spec_.dup_groups - 1);
    return spec_.cluster_threshold / (8.0 * static_cast<double>(max_rank));
  }

  std::size_t axis_index(int depth, int group) const {
    return static_cast<std::size_t>(depth - 1) * static_cast<std::size_t>(spec_.dup_groups) +
           static_cast<std::size_t>(group);
  }

 private:
  ParaphraseClusterSpec spec_;
  std::uint64_t seed_;
};

class ParaphraseClusterVerifier : public Verifier {
 public:
  explicit ParaphraseClusterVerifier(std::shared_ptr<const ParaphraseClusterProvider> provider)
      : provider_(std::move(provider)) {}

  double verify(const SearchTree& tree, NodeId terminal_node) const override {
    const std::vector<int> path = tree.index_path(terminal_node);
    if (static_cast<int>(path.size()) < provider_->spec().depth) return 0.0;
    return provider_->group_of(path.back()) == provider_->correct_group() ? 1.0 : 0.0;
  }

 private:
  std::shared_ptr<const ParaphraseClusterProvider> provider_;
};

// ============================================================================
// Gridworld MDP
// ============================================================================

struct GridworldSpec {
  int width = 5;
  int height = 5;
  int goal_x = 4;
  int goal_y = 4;
  double kappa = 0.4;  // geodesic distance per Manhattan step
  std::size_t dimension = 4;
};

/**
 * Deterministic shortest-path gridworld starting at (0, 0). Actions are the
 * four compass moves; walking off the grid stays in place. Cells embed on a
 * single diameter of the ball so that the geodesic distance from any cell's
 * latent to the goal latent is exactly kappa times its Manhattan distance to
 * the goal. Reaching the goal extracts the answer and verifies to 1.
 */
class GridworldProvider : public PolicyProvider {
 public:
  GridworldProvider(GridworldSpec spec, std::uint64_t seed)
      : spec_(std::move(spec)), seed_(seed) {
    if (spec_.width < 1 || spec_.height < 1) throw InvalidSpec("gridworld: empty grid");
    if (spec_.goal_x < 0 || spec_.goal_x >= spec_.width || spec_.goal_y < 0 ||
        spec_.goal_y >= spec_.height) {
      throw InvalidSpec("gridworld: goal outside the grid");
    }
    if (start_to_goal() < 2) {
      throw InvalidSpec("gridworld: goal must be at least 2 Manhattan steps from the start");
    }
    if (spec_.dimension < 2) throw InvalidSpec("gridworld: dimension must be >= 2");
    const int max_dist = (spec_.width - 1) + (spec_.height - 1);
    const double max_half_radius =
        0.5 * spec_.kappa * static_cast<double>(std::max(start_to_goal(), max_dist - start_to_goal()));
    if (spec_.kappa <= 0.0 || max_half_radius > kMaxHalfRadius) {
      throw InvalidSpec("gridworld: kappa too large for the grid size");
    }
  }

  const GridworldSpec& spec() const { return spec_; }

  std::size_t dimension() const override { return spec_.dimension; }

  Vec root_pooled() const override { return Vec(spec_.dimension, 0.125); }

  std::vector<Candidate> sample(const SearchTree& tree, NodeId state, int breadth,
                                Rng& /*stream*/) const override {
    const std::vector<int> path = tree.index_path(state);
    const auto [x, y] = cell_at(path);
    const int node_depth = static_cast<int>(path.size());
    const int count = std::min(breadth, 4);

    std::vector<Candidate> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
      const auto [nx, ny] = apply_move(x, y, k);
      Candidate c;
      c.action_label = {k, node_depth};  // depth marker keeps repeats echo-free
      c.token_logprobs = detail::split_logprob(std::log(0.25), 2);
      c.pooled = pooled_for_cell(nx, ny);
      out.push_back(std::move(c));
    }
    return out;
  }

  bool answer_extracted(const SearchTree& tree, NodeId state) const override {
    const auto [x, y] = cell_at(tree.index_path(state));
    return x == spec_.goal_x && y == spec_.goal_y;
  }

  std::pair<int, int> apply_move(int x, int y, int action) const {
    int nx = x, ny = y;
    switch (action) {
      case 0: ny = y - 1; break;
      case 1: ny = y + 1; break;
      case 2: nx = x - 1; break;
      case 3: nx = x + 1; break;
      default: throw Error("gridworld: unknown action");
    }
    if (nx < 0 || nx >= spec_.width || ny < 0 || ny >= spec_.height) return {x, y};
    return {nx, ny};
  }

  std::pair<int, int> cell_at(const std::vector<int>& path) const {
    int x = 0, y = 0;
    for (int action : path) {
      std::tie(x, y) = apply_move(x, y, action);
    }
    return {x, y};
  }

  int manhattan_to_goal(int x, int y) const {
    return std::abs(x - spec_.goal_x) + std::abs(y - spec_.goal_y);
  }

  int start_to_goal() const { return manhattan_to_goal(0, 0); }

  /// Signed half-radius of a cell on the shared diameter. The start cell is
  /// exactly at the origin; the goal sits at +kappa * m0 / 2.
  double half_radius_for_cell(int x, int y) const {
    return 0.5 * spec_.kappa *
           static_cast<double>(start_to_goal() - manhattan_to_goal(x, y));
  }

  Vec pooled_for_cell(int x, int y) const {
    Vec pooled = root_pooled();
    const double sqrt_h = std::sqrt(static_cast<double>(spec_.dimension));
    pooled[0] += sqrt_h * half_radius_for_cell(x, y);
    return pooled;
  }

  BallPoint latent_for_cell(int x, int y, const GeoConfig& geo = {}) const {
    Vec v(spec_.dimension, 0.0);
    v[0] = half_radius_for_cell(x, y);
    return exp_map_origin(v, geo);
  }

 private:
  GridworldSpec spec_;
  std::uint64_t seed_;
};

class GridworldVerifier : public Verifier {
 public:
  explicit GridworldVerifier(std::shared_ptr<const GridworldProvider> provider)
      : provider_(std::move(provider)) {}

  double verify(const SearchTree& tree, NodeId terminal_node) const override {
    const auto [x, y] = provider_->cell_at(tree.index_path(terminal_node));
    return x == provider_->spec().goal_x && y == provider_->spec().goal_y ? 1.0 : 0.0;
  }

 private:
  std::shared_ptr<const GridworldProvider> provider_;
};

inline std::pair<std::shared_ptr<GridworldProvider>, std::shared_ptr<GridworldVerifier>>
gridworld_mdp(GridworldSpec spec, std::uint64_t seed) {
  auto provider = std::make_shared<GridworldProvider>(std::move(spec), seed);
  auto verifier = std::make_shared<GridworldVerifier>(provider);
  return {provider, verifier};
}

// ============================================================================
// Token-matrix pooling fixture
// ============================================================================

struct TokenMatrix {
  std::vector<Vec> rows;
  std::vector<bool> mask;
};

/**
 * Wraps any provider and rebuilds each candidate's pooled vector as the
 * masked mean of a generated L x H token matrix, exercising the full
 * pooling path end to end. Padding rows are filled with garbage so a masking
 * bug cannot hide. The matrix for a given (state, candidate) pair can be
 * regenerated for inspection.
 */
class MatrixPoolingProvider : public PolicyProvider {
 public:
  MatrixPoolingProvider(std::shared_ptr<const PolicyProvider> base, std::uint64_t seed)
      : base_(std::move(base)), seed_(seed) {}

  std::size_t dimension() const override { return base_->dimension(); }
  Vec root_pooled() const override { return base_->root_pooled(); }

  std::vector<Candidate> sample(const SearchTree& tree, NodeId state, int breadth,
                                Rng& stream) const override {
    std::vector<Candidate> out = base_->sample(tree, state, breadth, stream);
    const std::vector<int> path = tree.index_path(state);
    for (std::size_t k = 0; k < out.size(); ++k) {
      const TokenMatrix m = token_matrix_for(path, static_cast<int>(k), out[k].pooled);
      out[k].pooled = mean_pool(m.rows, m.mask);
    }
    return out;
  }

  bool answer_extracted(const SearchTree& tree, NodeId state) const override {
    return base_->answer_extracted(tree, state);
  }

  /// Deterministic token matrix whose masked rows scatter around `center`.
  TokenMatrix token_matrix_for(const std::vector<int>& state_path, int candidate,
                               const Vec& center) const {
    Rng local(hash_state(seed_, state_path) ^
              splitmix64(static_cast<std::uint64_t>(candidate) + 7919));
    const int rows = 3 + static_cast<int>(next_index(local, 4));
    TokenMatrix m;
    m.rows.reserve(static_cast<std::size_t>(rows));
    m.mask.reserve(static_cast<std::size_t>(rows));
    for (int t = 0; t < rows; ++t) {
      const bool masked_in = t == 0 || next_double(local) < 0.8;
      Vec row(center.size());
      for (std::size_t j = 0; j < center.size(); ++j) {
        row[j] = masked_in ? center[j] + next_double(local, -0.05, 0.05)
                           : 100.0 + next_double(local);  // garbage padding
      }
      m.rows.push_back(std::move(row));
      m.mask.push_back(masked_in);
    }
    return m;
  }

 private:
  std::shared_ptr<const PolicyProvider> base_;
  std::uint64_t seed_;
};

}  // namespace hyptree::synth
