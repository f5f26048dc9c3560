#pragma once

#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>

namespace augraph {

// FNV-1a 64-bit. Used for content hashes in manifests and graph
// fingerprints; stability across runs matters, cryptographic strength does
// not.
inline uint64_t fnv1a64(std::string_view data, uint64_t h = 0xcbf29ce484222325ULL) {
  for (char c : data) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::string content_hash(std::string_view data) { return hex64(fnv1a64(data)); }

}  // namespace augraph
