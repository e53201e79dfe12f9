#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace labseq {

/// Error carrying a short machine-readable code (e.g. "parse_error",
/// "stale_input") next to the human-readable message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Calendar date with day granularity, stored as days since 1970-01-01.
struct Date {
  std::int32_t days = 0;

  auto operator<=>(const Date&) const = default;

  static Date from_ymd(int year, unsigned month, unsigned day);
  static Date parse(std::string_view iso);  // YYYY-MM-DD, throws Error

  std::string iso() const;
  int year() const;

  Date operator+(int n) const { return Date{days + n}; }
  Date operator-(int n) const { return Date{days - n}; }
  int operator-(Date other) const { return days - other.days; }
};

inline constexpr double kDaysPerYear = 365.25;

using Rng = std::mt19937_64;

/// Deterministic 64-bit mixing (splitmix64 finalizer).
std::uint64_t mix64(std::uint64_t x);

/// Seed derived from a parent seed and a key; stable across runs.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view key);
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

double logistic(double x);

/// Hex SHA-256 of a byte string / file contents.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

/// Writes via a temporary sibling file and rename, so readers never observe
/// a half-written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace labseq
