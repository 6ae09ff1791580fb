#include "deskflow/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "deskflow/errors.hpp"

namespace deskflow {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::pair<std::string, std::string> split_assignment(std::string_view line) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(line) + "'");
  std::string key(trim(line.substr(0, eq)));
  std::string value(trim(line.substr(eq + 1)));
  if (key.empty()) throw ConfigError("empty key in '" + std::string(line) + "'");
  return {key, value};
}

}  // namespace

KeyValues KeyValues::parse(std::string_view text) {
  KeyValues kv;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      auto [key, value] = split_assignment(line);
      kv.entries_[key] = value;
    }
    pos = end + 1;
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void KeyValues::set(const std::string& key, const std::string& value) { entries_[key] = value; }

void KeyValues::apply_override(std::string_view assignment) {
  auto [key, value] = split_assignment(trim(assignment));
  entries_[key] = value;
}

bool KeyValues::contains(const std::string& key) const { return entries_.count(key) != 0; }

const std::string* KeyValues::lookup(const std::string& key) {
  taken_.insert(key);
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::string KeyValues::take_string(const std::string& key, const std::string& fallback) {
  const std::string* v = lookup(key);
  std::string out = v ? *v : fallback;
  resolved_[key] = out;
  return out;
}

double KeyValues::take_double(const std::string& key, double fallback) {
  const std::string* v = lookup(key);
  double out = fallback;
  if (v) {
    try {
      std::size_t used = 0;
      out = std::stod(*v, &used);
      if (used != v->size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "': not a number: '" + *v + "'");
    }
  }
  resolved_[key] = format_double(out);
  return out;
}

std::int64_t KeyValues::take_int(const std::string& key, std::int64_t fallback) {
  const std::string* v = lookup(key);
  std::int64_t out = fallback;
  if (v) {
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size())
      throw ConfigError("key '" + key + "': not an integer: '" + *v + "'");
  }
  resolved_[key] = std::to_string(out);
  return out;
}

std::uint64_t KeyValues::take_u64(const std::string& key, std::uint64_t fallback) {
  const std::string* v = lookup(key);
  std::uint64_t out = fallback;
  if (v) {
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size())
      throw ConfigError("key '" + key + "': not an unsigned integer: '" + *v + "'");
  }
  resolved_[key] = std::to_string(out);
  return out;
}

bool KeyValues::take_bool(const std::string& key, bool fallback) {
  const std::string* v = lookup(key);
  bool out = fallback;
  if (v) {
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") {
      out = true;
    } else if (*v == "false" || *v == "0" || *v == "no" || *v == "off") {
      out = false;
    } else {
      throw ConfigError("key '" + key + "': not a boolean: '" + *v + "'");
    }
  }
  resolved_[key] = out ? "true" : "false";
  return out;
}

void KeyValues::require_all_taken() const {
  std::string unknown;
  for (const auto& [key, value] : entries_) {
    if (taken_.count(key) == 0) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty()) throw ConfigError("unknown config keys: " + unknown);
}

std::string KeyValues::serialize(const std::map<std::string, std::string>& entries) {
  std::string out;
  for (const auto& [key, value] : entries) out += key + " = " + value + "\n";
  return out;
}

std::string KeyValues::resolved_text() const { return serialize(resolved_); }

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string format_double(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

}  // namespace deskflow
