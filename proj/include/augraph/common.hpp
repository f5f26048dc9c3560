#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace augraph {

using json = nlohmann::json;

// Error taxonomy used across the library. The CLI maps Kind to exit codes
// (validation -> 2, runtime -> 3). `detail` carries a machine-readable
// payload for diagnostics output.
class Error : public std::runtime_error {
 public:
  enum class Kind { Validation, Runtime };

  Error(Kind kind, std::string message, json detail = json::object())
      : std::runtime_error(std::move(message)), kind(kind), detail(std::move(detail)) {}

  Kind kind;
  json detail;
};

[[noreturn]] inline void fail_validation(const std::string& msg, json detail = json::object()) {
  throw Error(Error::Kind::Validation, msg, std::move(detail));
}

[[noreturn]] inline void fail_runtime(const std::string& msg, json detail = json::object()) {
  throw Error(Error::Kind::Runtime, msg, std::move(detail));
}

inline std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
  });
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  for (size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace augraph
