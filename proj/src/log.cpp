#include "cgcre/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace cgcre {

LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("CGCRE_LOG");
    if (env == nullptr) return LogLevel::info;
    if (std::strcmp(env, "error") == 0) return LogLevel::error;
    if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
    return LogLevel::info;
  }();
  return level;
}

namespace {
void emit(const char* prefix, const std::string& msg) {
  std::fprintf(stderr, "[%s] %s\n", prefix, msg.c_str());
}
}  // namespace

void log_error(const std::string& msg) { emit("error", msg); }

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::info) emit("info", msg);
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::debug) emit("debug", msg);
}

}  // namespace cgcre
