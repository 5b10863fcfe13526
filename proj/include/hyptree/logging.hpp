#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace hyptree {

/// Log verbosity, controlled by the HYPTREE_LOG environment variable:
/// 0 = warnings only (default), 1 = info, 2 = debug.
inline int log_level() {
  static const int level = [] {
    const char* env = std::getenv("HYPTREE_LOG");
    if (!env || !*env) return 0;
    return std::atoi(env);
  }();
  return level;
}

inline void log_warn(const std::string& msg) {
  std::fprintf(stderr, "[hyptree] warning: %s\n", msg.c_str());
}

inline void log_info(const std::string& msg) {
  if (log_level() >= 1) std::fprintf(stderr, "[hyptree] %s\n", msg.c_str());
}

inline void log_debug(const std::string& msg) {
  if (log_level() >= 2) std::fprintf(stderr, "[hyptree] debug: %s\n", msg.c_str());
}

}  // namespace hyptree
