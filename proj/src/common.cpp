#include "kka/common.hpp"

#include <cstdlib>
#include <iostream>

namespace kka {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  return mix64(base ^ mix64(salt));
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                          std::uint64_t index) {
  // FNV-1a over the tag, then mix with the index.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return derive_seed(derive_seed(base, h), index);
}

bool all_finite(const Vec& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("KKA_LOG");
    if (env == nullptr) return LogLevel::info;
    const std::string_view s(env);
    if (s == "error") return LogLevel::error;
    if (s == "debug") return LogLevel::debug;
    return LogLevel::info;
  }();
  return level;
}

namespace {
void emit(const char* prefix, const std::string& msg) {
  std::cerr << prefix << msg << "\n";
}
}  // namespace

void log_error(const std::string& msg) { emit("[error] ", msg); }

void log_warn(const std::string& msg) { emit("[warn] ", msg); }

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::info) emit("[info] ", msg);
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::debug) emit("[debug] ", msg);
}

}  // namespace kka
