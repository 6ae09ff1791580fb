#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

namespace deskflow {

/// Flat `key = value` configuration. Values are looked up with take(), which
/// records the value actually used (explicit or default) so that a resolved
/// snapshot can be written next to every run. Keys that were supplied but
/// never taken are reported by require_all_taken().
class KeyValues {
 public:
  KeyValues() = default;

  static KeyValues parse(std::string_view text);
  static KeyValues load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  /// Applies a `key=value` command-line override.
  void apply_override(std::string_view assignment);
  bool contains(const std::string& key) const;

  std::string take_string(const std::string& key, const std::string& fallback);
  double take_double(const std::string& key, double fallback);
  std::int64_t take_int(const std::string& key, std::int64_t fallback);
  std::uint64_t take_u64(const std::string& key, std::uint64_t fallback);
  bool take_bool(const std::string& key, bool fallback);

  /// Throws ConfigError listing every supplied key nobody asked for.
  void require_all_taken() const;

  /// Every taken key with the value that was used, sorted by key.
  const std::map<std::string, std::string>& resolved() const { return resolved_; }
  const std::map<std::string, std::string>& entries() const { return entries_; }

  /// Serialized resolved snapshot (`key = value` lines, sorted).
  std::string resolved_text() const;
  static std::string serialize(const std::map<std::string, std::string>& entries);

 private:
  const std::string* lookup(const std::string& key);

  std::map<std::string, std::string> entries_;
  std::map<std::string, std::string> resolved_;
  std::set<std::string> taken_;
};

/// FNV-1a 64-bit hash, used for config and manifest fingerprints.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

/// Formats a double so that parsing it back yields the identical value.
std::string format_double(double value);

}  // namespace deskflow
