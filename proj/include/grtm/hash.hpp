#pragma once

#include <cstdint>
#include <string_view>

namespace grtm {

// FNV-1a over raw bytes; used to fingerprint corpora and run configurations.
class Hasher {
 public:
  Hasher& bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < n; ++k) {
      h_ ^= p[k];
      h_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  template <typename T>
  Hasher& value(const T& v) {
    return bytes(&v, sizeof(T));
  }
  Hasher& text(std::string_view s) {
    value(s.size());
    return bytes(s.data(), s.size());
  }
  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace grtm
