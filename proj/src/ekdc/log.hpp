#pragma once

#include <cstdio>
#include <string>

namespace ekdc::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3 };

inline Level& threshold() {
  static Level lvl = Level::info;
  return lvl;
}

inline void set_level(Level lvl) { threshold() = lvl; }

inline void emit(Level lvl, const std::string& msg) {
  if (lvl < threshold()) return;
  static const char* names[] = {"debug", "info", "warn", "error"};
  std::fprintf(stderr, "[%s] %s\n", names[static_cast<int>(lvl)], msg.c_str());
}

inline void debug(const std::string& msg) { emit(Level::debug, msg); }
inline void info(const std::string& msg) { emit(Level::info, msg); }
inline void warn(const std::string& msg) { emit(Level::warn, msg); }
inline void error(const std::string& msg) { emit(Level::error, msg); }

}  // namespace ekdc::log
