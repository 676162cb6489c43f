// Copyright (c) 2026 the evidr authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evidr {

/// Failure classes map onto distinct process exit codes in the CLI.
enum class ErrorClass : int {
  Generic = 1,
  File = 2,
  Config = 3,
  Checkpoint = 4,
  Parse = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what)
      : std::runtime_error(what), cls_(cls) {}
  ErrorClass cls() const { return cls_; }
  int exit_code() const { return static_cast<int>(cls_); }

 private:
  ErrorClass cls_;
};

inline Error file_error(const std::string& what) { return Error(ErrorClass::File, what); }
inline Error config_error(const std::string& what) { return Error(ErrorClass::Config, what); }
inline Error checkpoint_error(const std::string& what) { return Error(ErrorClass::Checkpoint, what); }
inline Error parse_error(const std::string& what) { return Error(ErrorClass::Parse, what); }
inline Error model_error(const std::string& what) { return Error(ErrorClass::Generic, what); }

// ---------------------------------------------------------------------------
// Deterministic randomness. std::mt19937_64 output is pinned by the standard;
// the distribution helpers below avoid std::uniform_* whose mapping is not.
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kSeedMix = 0x9E3779B97F4A7C15ull;

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

/// Uniform integer in [0, n). Modulo bias is below 2^-50 for any n used here.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  return n == 0 ? 0 : rng() % n;
}

template <typename T>
void shuffle_deterministic(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

// ---------------------------------------------------------------------------
// CRC32 (IEEE reflected, poly 0xEDB88320), table generated at compile time.
// ---------------------------------------------------------------------------

namespace detail {
constexpr std::array<std::uint32_t, 256> make_crc32_table() {
  std::array<std::uint32_t, 256> t{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1u) ? (0xEDB88320u ^ (c >> 1)) : (c >> 1);
    t[i] = c;
  }
  return t;
}
inline constexpr auto kCrc32Table = make_crc32_table();
}  // namespace detail

inline std::uint32_t crc32_update(std::uint32_t crc, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  crc ^= 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; ++i)
    crc = detail::kCrc32Table[(crc ^ p[i]) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

inline std::uint32_t crc32(const void* data, std::size_t n) { return crc32_update(0, data, n); }

// ---------------------------------------------------------------------------
// String helpers.
// ---------------------------------------------------------------------------

inline bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_ascii_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
inline bool is_ascii_upper(char c) { return c >= 'A' && c <= 'Z'; }

inline char lower_ascii(char c) { return is_ascii_upper(c) ? static_cast<char>(c - 'A' + 'a') : c; }

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = lower_ascii(c);
  return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Number token parsing and canonical rendering.
// ---------------------------------------------------------------------------

/// Parses a numeric token: plain digits, optional comma grouping in threes,
/// optional decimal part. Returns nullopt for anything else.
inline std::optional<double> parse_number_token(std::string_view tok) {
  if (tok.empty()) return std::nullopt;
  std::string digits;
  std::size_t i = 0;
  // Integer part, either ungrouped or comma-grouped.
  std::size_t run = 0;
  while (i < tok.size() && is_ascii_digit(tok[i])) {
    digits += tok[i];
    ++i;
    ++run;
  }
  if (run == 0) return std::nullopt;
  if (i < tok.size() && tok[i] == ',') {
    if (run > 3) return std::nullopt;
    while (i < tok.size() && tok[i] == ',') {
      ++i;
      for (int k = 0; k < 3; ++k) {
        if (i >= tok.size() || !is_ascii_digit(tok[i])) return std::nullopt;
        digits += tok[i];
        ++i;
      }
    }
  }
  if (i < tok.size() && tok[i] == '.') {
    ++i;
    if (i >= tok.size()) return std::nullopt;
    digits += '.';
    while (i < tok.size() && is_ascii_digit(tok[i])) {
      digits += tok[i];
      ++i;
    }
  }
  if (i != tok.size()) return std::nullopt;
  return std::stod(digits);
}

/// Canonical answer rendering: integers without a decimal part, fractions
/// with up to five places and trailing zeros trimmed. Keeps 93.9 - 0.8
/// printing as "93.1" despite binary rounding.
inline std::string render_number(double v) {
  if (std::abs(v) < 1e-10) v = 0.0;  // avoid "-0"
  double r = std::round(v);
  if (std::abs(v - r) < 1e-9 && std::abs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.0f", r);
    return buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.5f", v);
  std::string s = buf;
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

}  // namespace evidr
