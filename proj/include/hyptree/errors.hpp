#pragma once

#include <stdexcept>
#include <string>

namespace hyptree {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// --- geometry ---
struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& what) : Error(what) {}
};
struct AllMasked : Error {
  explicit AllMasked(const std::string& what) : Error(what) {}
};
struct OutsideBall : Error {
  explicit OutsideBall(const std::string& what) : Error(what) {}
};

// --- shaping ---
struct EmptyGoalSet : Error {
  explicit EmptyGoalSet(const std::string& what) : Error(what) {}
};
struct UnknownLeaf : Error {
  explicit UnknownLeaf(const std::string& what) : Error(what) {}
};

// --- search ---
struct RootDisabled : Error {
  explicit RootDisabled(const std::string& what) : Error(what) {}
};
struct AlreadyExpanded : Error {
  explicit AlreadyExpanded(const std::string& what) : Error(what) {}
};
struct TerminalLeaf : Error {
  explicit TerminalLeaf(const std::string& what) : Error(what) {}
};
struct ProviderFailure : Error {
  explicit ProviderFailure(const std::string& what) : Error(what) {}
};
struct InvalidSpec : Error {
  explicit InvalidSpec(const std::string& what) : Error(what) {}
};

// --- value head / grpo ---
struct EmptyBatch : Error {
  explicit EmptyBatch(const std::string& what) : Error(what) {}
};
struct GroupTooSmall : Error {
  explicit GroupTooSmall(const std::string& what) : Error(what) {}
};
struct LengthMismatch : Error {
  explicit LengthMismatch(const std::string& what) : Error(what) {}
};
struct NotTerminal : Error {
  explicit NotTerminal(const std::string& what) : Error(what) {}
};
struct MissingPotential : Error {
  explicit MissingPotential(const std::string& what) : Error(what) {}
};

// --- persistence / config ---
struct ParseError : Error {
  ParseError(const std::string& what, long line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_number(line) {}
  long line_number;
};
struct VersionMismatch : Error {
  explicit VersionMismatch(const std::string& what) : Error(what) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace hyptree
