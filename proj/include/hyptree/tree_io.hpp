#pragma once

/**
 * Persistence for search trees, value-head checkpoints and latent exports.
 *
 * Tree files are line-delimited UTF-8: a schema-versioned header followed by
 * one record per node in creation order, so a parent always precedes its
 * children and a single pass can rebuild the tree. Floats are written as
 * shortest round-trip decimal strings, which makes dump/load bit-exact and
 * re-runs byte-identical. Files are written to a temporary path and renamed
 * into place.
 */

#include "errors.hpp"
#include "geometry.hpp"
#include "shaping.hpp"
#include "tree.hpp"
#include "value_head.hpp"

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace hyptree::io {

inline constexpr std::string_view kTreeMagic = "hyptree-tree";
inline constexpr std::string_view kDiskMagic = "hyptree-disk";
inline constexpr std::string_view kHeadMagic = "hyptree-valuehead";
inline constexpr std::string_view kSchemaVersion = "v1";

// ============================================================================
// Scalar formatting
// ============================================================================

namespace detail {

inline void append_double(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

inline void append_int(std::string& out, std::int64_t v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

inline double parse_double(std::string_view s, long line) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ParseError("bad float '" + std::string(s) + "'", line);
  }
  return v;
}

inline std::int64_t parse_int(std::string_view s, long line) {
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ParseError("bad integer '" + std::string(s) + "'", line);
  }
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline void append_csv_doubles(std::string& out, const std::vector<double>& v) {
  if (v.empty()) {
    out.push_back('-');
    return;
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out.push_back(',');
    append_double(out, v[i]);
  }
}

inline void append_csv_ints(std::string& out, const std::vector<int>& v) {
  if (v.empty()) {
    out.push_back('-');
    return;
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out.push_back(',');
    append_int(out, v[i]);
  }
}

inline std::vector<double> parse_csv_doubles(std::string_view s, long line) {
  std::vector<double> out;
  if (s == "-") return out;
  for (std::string_view part : split(s, ',')) out.push_back(parse_double(part, line));
  return out;
}

inline std::vector<int> parse_csv_ints(std::string_view s, long line) {
  std::vector<int> out;
  if (s == "-") return out;
  for (std::string_view part : split(s, ',')) {
    out.push_back(static_cast<int>(parse_int(part, line)));
  }
  return out;
}

/// Parse "key=value" header fields after the magic and version tokens.
inline std::string_view header_field(const std::vector<std::string_view>& tokens,
                                     std::string_view key, long line) {
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (tokens[i].size() > key.size() && tokens[i].substr(0, key.size()) == key &&
        tokens[i][key.size()] == '=') {
      return tokens[i].substr(key.size() + 1);
    }
  }
  throw ParseError("missing header field '" + std::string(key) + "'", line);
}

inline void check_magic_and_version(const std::vector<std::string_view>& tokens,
                                    std::string_view magic) {
  if (tokens.empty() || tokens[0] != magic) {
    throw ParseError("expected '" + std::string(magic) + "' header", 1);
  }
  if (tokens.size() < 2 || tokens[1].empty() || tokens[1][0] != 'v') {
    throw VersionMismatch("schema version field absent");
  }
  if (tokens[1] != kSchemaVersion) {
    throw VersionMismatch("unsupported schema version '" + std::string(tokens[1]) + "'");
  }
}

inline void write_atomically(const std::filesystem::path& path, const std::string& contents) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("rename to '" + path.string() + "' failed: " + ec.message());
}

}  // namespace detail

// ============================================================================
// Tree files
// ============================================================================

/// Step reward of a node's incoming edge when the tree carries potentials.
inline std::optional<double> edge_step_reward(const SearchTree& tree, const SearchNode& n) {
  if (n.parent < 0 || !n.potential) return std::nullopt;
  if (tree.shaped_scheme() && *tree.shaped_scheme() == "sparse01") return *n.potential;
  const SearchNode& p = tree.node(n.parent);
  if (!p.potential) return std::nullopt;
  return *n.potential - *p.potential;
}

inline std::string dump_tree_string(const SearchTree& tree) {
  if (tree.empty()) throw Error("dump_tree: empty tree");
  const std::string& prompt = tree.prompt_id();
  for (char c : prompt) {
    if (c == ' ' || c == '\t' || c == '\n') throw Error("dump_tree: prompt id has whitespace");
  }

  std::string out;
  out.reserve(tree.size() * 256);
  out.append(kTreeMagic).append(" ").append(kSchemaVersion);
  out.append(" dim=");
  detail::append_int(out, static_cast<std::int64_t>(tree.root().pooled.size()));
  out.append(" nodes=");
  detail::append_int(out, static_cast<std::int64_t>(tree.size()));
  out.append(" prompt=").append(prompt.empty() ? "-" : prompt);
  out.append(" scheme=").append(tree.shaped_scheme() ? *tree.shaped_scheme() : "-");
  out.push_back('\n');

  for (const SearchNode& n : tree.nodes()) {
    detail::append_int(out, n.id);
    out.push_back('\t');
    if (n.parent < 0) {
      out.append("-\t-\t");
    } else {
      detail::append_int(out, n.parent);
      out.push_back('\t');
      detail::append_int(out, n.child_index);
      out.push_back('\t');
    }
    detail::append_int(out, n.depth);
    out.push_back('\t');
    out.push_back(n.enabled ? '1' : '0');
    out.push_back('\t');
    if (n.terminal) {
      out.append(to_string(n.terminal->reason));
      out.push_back('\t');
      detail::append_double(out, n.terminal->reward);
    } else {
      out.append("-\t-");
    }
    out.push_back('\t');
    if (n.parent < 0) {
      out.append("-\t-\t-\t-");
    } else {
      const EdgeStats& e = tree.incoming_edge(n.id);
      detail::append_int(out, e.visit_count);
      out.push_back('\t');
      detail::append_double(out, e.mean_value);
      out.push_back('\t');
      detail::append_double(out, e.init_value);
      out.push_back('\t');
      detail::append_double(out, e.prior);
    }
    out.push_back('\t');
    detail::append_double(out, n.value_pred);
    out.push_back('\t');
    if (n.potential) {
      detail::append_double(out, *n.potential);
    } else {
      out.push_back('-');
    }
    out.push_back('\t');
    if (const auto r = edge_step_reward(tree, n)) {
      detail::append_double(out, *r);
    } else {
      out.push_back('-');
    }
    out.push_back('\t');
    detail::append_csv_ints(out, n.action_label);
    out.push_back('\t');
    detail::append_csv_doubles(out, n.token_logprobs);
    out.push_back('\t');
    detail::append_csv_doubles(out, n.latent.coords);
    out.push_back('\t');
    detail::append_csv_doubles(out, n.pooled);
    out.push_back('\n');
  }
  return out;
}

inline void dump_tree(const SearchTree& tree, const std::filesystem::path& path) {
  detail::write_atomically(path, dump_tree_string(tree));
}

inline SearchTree load_tree_string(const std::string& contents) {
  std::istringstream in(contents);
  std::string line;
  long line_no = 0;

  if (!std::getline(in, line)) throw ParseError("empty tree file", 1);
  ++line_no;
  const auto header = detail::split(line, ' ');
  detail::check_magic_and_version(header, kTreeMagic);
  const std::size_t dim =
      static_cast<std::size_t>(detail::parse_int(detail::header_field(header, "dim", 1), 1));
  const std::int64_t expected_nodes =
      detail::parse_int(detail::header_field(header, "nodes", 1), 1);
  const std::string prompt{detail::header_field(header, "prompt", 1)};
  const std::string scheme{detail::header_field(header, "scheme", 1)};

  SearchTree tree;
  std::int64_t seen = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) throw ParseError("blank record line", line_no);
    const auto f = detail::split(line, '\t');
    if (f.size() != 18) {
      throw ParseError("expected 18 fields, found " + std::to_string(f.size()), line_no);
    }
    const NodeId id = static_cast<NodeId>(detail::parse_int(f[0], line_no));
    if (id != static_cast<NodeId>(seen)) {
      throw ParseError("records out of creation order at id " + std::to_string(id), line_no);
    }

    SearchNode n;
    n.id = id;
    n.depth = static_cast<int>(detail::parse_int(f[3], line_no));
    n.enabled = f[4] == "1";
    if (f[4] != "0" && f[4] != "1") throw ParseError("bad enabled flag", line_no);
    if (f[5] != "-") {
      TerminalInfo t;
      if (f[5] == "answer") t.reason = TerminalReason::answer;
      else if (f[5] == "depth") t.reason = TerminalReason::depth;
      else if (f[5] == "echo") t.reason = TerminalReason::echo;
      else if (f[5] == "length") t.reason = TerminalReason::length;
      else if (f[5] == "pruned_dead_end") t.reason = TerminalReason::pruned_dead_end;
      else throw ParseError("unknown terminal reason '" + std::string(f[5]) + "'", line_no);
      t.reward = detail::parse_double(f[6], line_no);
      n.terminal = t;
    } else if (f[6] != "-") {
      throw ParseError("terminal reward without a reason", line_no);
    }
    n.value_pred = detail::parse_double(f[11], line_no);
    if (f[12] != "-") n.potential = detail::parse_double(f[12], line_no);
    // f[13] (step reward) is derived from potentials; not stored.
    n.action_label = detail::parse_csv_ints(f[14], line_no);
    n.token_logprobs = detail::parse_csv_doubles(f[15], line_no);
    n.latent.coords = detail::parse_csv_doubles(f[16], line_no);
    n.pooled = detail::parse_csv_doubles(f[17], line_no);
    if (n.latent.coords.size() != dim || n.pooled.size() != dim) {
      throw ParseError("vector width differs from header dim", line_no);
    }

    if (f[1] == "-") {
      if (id != kRootId) throw ParseError("non-root record without parent", line_no);
      n.parent = -1;
      n.child_index = -1;
      if (n.depth != 0) throw ParseError("root record with nonzero depth", line_no);
      tree.nodes().push_back(std::move(n));
    } else {
      if (id == kRootId) throw ParseError("root record must come first", line_no);
      const NodeId parent = static_cast<NodeId>(detail::parse_int(f[1], line_no));
      if (parent < 0 || parent >= id) {
        throw ParseError("parent must precede child in file order", line_no);
      }
      EdgeStats stats;
      stats.visit_count = detail::parse_int(f[7], line_no);
      stats.mean_value = detail::parse_double(f[8], line_no);
      stats.init_value = detail::parse_double(f[9], line_no);
      stats.prior = detail::parse_double(f[10], line_no);

      const int child_index = static_cast<int>(detail::parse_int(f[2], line_no));
      SearchNode& p = tree.node(parent);
      if (child_index != static_cast<int>(p.children.size())) {
        throw ParseError("child_index breaks sibling order", line_no);
      }
      if (n.depth != p.depth + 1) throw ParseError("depth not parent depth + 1", line_no);
      n.parent = parent;
      n.child_index = child_index;
      p.children.push_back(ChildEdge{stats, id});
      tree.nodes().push_back(std::move(n));
    }
    ++seen;
  }
  if (seen != expected_nodes) {
    throw ParseError("header promises " + std::to_string(expected_nodes) + " nodes, found " +
                         std::to_string(seen),
                     line_no + 1);
  }
  if (seen == 0) throw ParseError("tree file has no records", line_no + 1);
  tree.set_prompt_id(prompt == "-" ? "" : prompt);
  if (scheme != "-") tree.set_shaped_scheme(scheme);
  return tree;
}

inline SearchTree load_tree(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_tree_string(buf.str());
}

// ============================================================================
// Value-head checkpoints
// ============================================================================

inline std::string dump_value_head_string(const ValueHead& head) {
  std::string out;
  out.append(kHeadMagic).append(" ").append(kSchemaVersion).append(" dim=");
  detail::append_int(out, static_cast<std::int64_t>(head.dim()));
  out.append("\nbias ");
  detail::append_double(out, head.bias);
  out.append("\nweights ");
  for (std::size_t j = 0; j < head.dim(); ++j) {
    if (j) out.push_back(' ');
    detail::append_double(out, head.weights[j]);
  }
  out.push_back('\n');
  return out;
}

inline void save_value_head(const ValueHead& head, const std::filesystem::path& path) {
  detail::write_atomically(path, dump_value_head_string(head));
}

inline ValueHead load_value_head_string(const std::string& contents) {
  std::istringstream in(contents);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty checkpoint", 1);
  const auto header = detail::split(line, ' ');
  detail::check_magic_and_version(header, kHeadMagic);
  const std::size_t dim =
      static_cast<std::size_t>(detail::parse_int(detail::header_field(header, "dim", 1), 1));

  ValueHead head = ValueHead::zeros(dim);
  if (!std::getline(in, line)) throw ParseError("missing bias line", 2);
  auto bias_fields = detail::split(line, ' ');
  if (bias_fields.size() != 2 || bias_fields[0] != "bias") {
    throw ParseError("malformed bias line", 2);
  }
  head.bias = detail::parse_double(bias_fields[1], 2);
  if (!std::getline(in, line)) throw ParseError("missing weights line", 3);
  auto weight_fields = detail::split(line, ' ');
  if (weight_fields.empty() || weight_fields[0] != "weights" || weight_fields.size() != dim + 1) {
    throw ParseError("malformed weights line", 3);
  }
  for (std::size_t j = 0; j < dim; ++j) {
    head.weights[j] = detail::parse_double(weight_fields[j + 1], 3);
  }
  return head;
}

inline ValueHead load_value_head(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_value_head_string(buf.str());
}

// ============================================================================
// Latent export (per-node rows plus the full geodesic distance matrix)
// ============================================================================

inline std::string export_disk_string(const SearchTree& tree) {
  std::string out;
  out.append(kDiskMagic).append(" ").append(kSchemaVersion);
  out.append(" dim=");
  detail::append_int(out, static_cast<std::int64_t>(tree.root().pooled.size()));
  out.append(" nodes=");
  detail::append_int(out, static_cast<std::int64_t>(tree.size()));
  out.push_back('\n');

  const BallPoint origin = ball_origin(tree.root().pooled.size());
  for (const SearchNode& n : tree.nodes()) {
    detail::append_int(out, n.id);
    out.push_back('\t');
    detail::append_csv_doubles(out, n.latent.coords);
    out.push_back('\t');
    detail::append_double(out, geodesic_distance(n.latent, origin));
    out.push_back('\t');
    if (n.potential) {
      detail::append_double(out, *n.potential);
    } else {
      out.push_back('-');
    }
    out.push_back('\t');
    detail::append_double(out, n.value_pred);
    out.push_back('\n');
  }
  out.append("matrix\n");
  for (const SearchNode& a : tree.nodes()) {
    bool first = true;
    for (const SearchNode& b : tree.nodes()) {
      if (!first) out.push_back(',');
      detail::append_double(out, geodesic_distance(a.latent, b.latent));
      first = false;
    }
    out.push_back('\n');
  }
  return out;
}

inline void export_disk(const SearchTree& tree, const std::filesystem::path& path) {
  detail::write_atomically(path, export_disk_string(tree));
}

}  // namespace hyptree::io
