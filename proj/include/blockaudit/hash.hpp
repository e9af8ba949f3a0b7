#pragma once

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace blockaudit {

// SHA-256 is the one hash used across the repo: transaction ids, Merkle
// nodes, block links and trace fingerprints.
struct Hash256 {
  std::array<std::uint8_t, 32> bytes{};

  static Hash256 zero() { return {}; }

  bool is_zero() const {
    for (auto b : bytes)
      if (b != 0) return false;
    return true;
  }

  // The raw bytes, for feeding into another hash.
  std::string_view view() const {
    return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
  }

  std::string hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (auto b : bytes) {
      out.push_back(digits[b >> 4]);
      out.push_back(digits[b & 0x0f]);
    }
    return out;
  }

  // Lowercase only; the canonical encodings never produce uppercase hex.
  static std::optional<Hash256> from_hex(std::string_view text) {
    if (text.size() != 64) return std::nullopt;
    auto nibble = [](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      return -1;
    };
    Hash256 h;
    for (std::size_t i = 0; i < 32; ++i) {
      int hi = nibble(text[2 * i]);
      int lo = nibble(text[2 * i + 1]);
      if (hi < 0 || lo < 0) return std::nullopt;
      h.bytes[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return h;
  }

  friend auto operator<=>(const Hash256&, const Hash256&) = default;
};

inline Hash256 sha256(std::span<const std::uint8_t> data) {
  Hash256 h;
  SHA256(data.data(), data.size(), h.bytes.data());
  return h;
}

inline Hash256 sha256(std::string_view text) {
  return sha256(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// Hash of the 64-byte concatenation left || right.
inline Hash256 sha256_pair(const Hash256& left, const Hash256& right) {
  std::array<std::uint8_t, 64> buf;
  std::copy(left.bytes.begin(), left.bytes.end(), buf.begin());
  std::copy(right.bytes.begin(), right.bytes.end(), buf.begin() + 32);
  return sha256(std::span<const std::uint8_t>(buf));
}

// Incremental hasher, used for simulator trace fingerprints.
class Sha256Stream {
 public:
  Sha256Stream() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr);
  }

  Sha256Stream(const Sha256Stream& other) : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    EVP_MD_CTX_copy_ex(ctx_.get(), other.ctx_.get());
  }

  Sha256Stream& operator=(const Sha256Stream& other) {
    if (this != &other) EVP_MD_CTX_copy_ex(ctx_.get(), other.ctx_.get());
    return *this;
  }

  Sha256Stream(Sha256Stream&&) noexcept = default;
  Sha256Stream& operator=(Sha256Stream&&) noexcept = default;

  void update(std::string_view text) { EVP_DigestUpdate(ctx_.get(), text.data(), text.size()); }

  void update_u64(std::uint64_t v) {
    std::array<std::uint8_t, 8> buf;
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
    EVP_DigestUpdate(ctx_.get(), buf.data(), buf.size());
  }

  Hash256 finish() {
    Hash256 h;
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), h.bytes.data(), &len);
    return h;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace blockaudit

template <>
struct std::hash<blockaudit::Hash256> {
  std::size_t operator()(const blockaudit::Hash256& h) const noexcept {
    std::size_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | h.bytes[i];
    return v;
  }
};
