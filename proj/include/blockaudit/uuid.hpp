#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>

namespace blockaudit {

// 128-bit identifier rendered as lowercase hyphenated hex
// ("9ceb8c2c-154a-49d5-9441-a92600db997b").
struct Uuid {
  std::array<std::uint8_t, 16> bytes{};

  std::string str() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(36);
    for (std::size_t i = 0; i < 16; ++i) {
      if (i == 4 || i == 6 || i == 8 || i == 10) out.push_back('-');
      out.push_back(digits[bytes[i] >> 4]);
      out.push_back(digits[bytes[i] & 0x0f]);
    }
    return out;
  }

  // Accepts the 8-4-4-4-12 form, either case. Any version nibble is
  // accepted since Listing-style ids come from foreign generators.
  static std::optional<Uuid> parse(std::string_view text) {
    if (text.size() != 36) return std::nullopt;
    auto nibble = [](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      if (c >= 'A' && c <= 'F') return c - 'A' + 10;
      return -1;
    };
    Uuid u;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < 16; ++i) {
      if (i == 4 || i == 6 || i == 8 || i == 10) {
        if (text[pos] != '-') return std::nullopt;
        ++pos;
      }
      int hi = nibble(text[pos]);
      int lo = nibble(text[pos + 1]);
      if (hi < 0 || lo < 0) return std::nullopt;
      u.bytes[i] = static_cast<std::uint8_t>((hi << 4) | lo);
      pos += 2;
    }
    return u;
  }

  friend auto operator<=>(const Uuid&, const Uuid&) = default;
};

// Deterministic source of version-4 UUIDs. Production callers seed it from
// std::random_device; tests pin the seed.
class UuidSource {
 public:
  explicit UuidSource(std::uint64_t seed) : rng_(seed) {}

  static UuidSource from_entropy() {
    std::random_device rd;
    return UuidSource((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
  }

  Uuid next() {
    Uuid u;
    std::uint64_t hi = rng_();
    std::uint64_t lo = rng_();
    for (int i = 0; i < 8; ++i) {
      u.bytes[i] = static_cast<std::uint8_t>(hi >> (56 - 8 * i));
      u.bytes[8 + i] = static_cast<std::uint8_t>(lo >> (56 - 8 * i));
    }
    u.bytes[6] = static_cast<std::uint8_t>((u.bytes[6] & 0x0f) | 0x40);
    u.bytes[8] = static_cast<std::uint8_t>((u.bytes[8] & 0x3f) | 0x80);
    return u;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace blockaudit

template <>
struct std::hash<blockaudit::Uuid> {
  std::size_t operator()(const blockaudit::Uuid& u) const noexcept {
    std::size_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | u.bytes[8 + i];
    return v;
  }
};
