#include <charconv>
#include <sstream>

#include "treebench/config.hpp"
#include "treebench/serialize.hpp"

namespace treebench {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && text.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw UsageError("config: " + key + " has invalid value '" + text + "'");
  return v;
}

}  // namespace

Config Config::parse(const std::string& text, std::filesystem::path base_dir) {
  Config c;
  c.base_dir_ = std::move(base_dir);
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw UsageError("config line " + std::to_string(lineno) + ": empty key");
    if (c.values_.count(key)) throw UsageError("config line " + std::to_string(lineno) + ": duplicate key " + key);
    c.values_[key] = trim(line.substr(eq + 1));
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw UsageError("config file not found: " + path.string());
  return parse(read_text_file(path), path.parent_path());
}

std::string Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("config: missing key " + key);
  return it->second;
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

int Config::get_int(const std::string& key, int fallback) const {
  return has(key) ? parse_number<int>(key, get(key)) : fallback;
}

std::int64_t Config::get_int64(const std::string& key, std::int64_t fallback) const {
  return has(key) ? parse_number<std::int64_t>(key, get(key)) : fallback;
}

std::uint64_t Config::get_u64(const std::string& key) const { return parse_number<std::uint64_t>(key, get(key)); }

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? parse_number<double>(key, get(key)) : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get(key);
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw UsageError("config: " + key + " must be true or false");
}

std::vector<std::string> Config::get_list(const std::string& key) const {
  std::string v = get(key);
  for (char& ch : v) {
    if (ch == ',') ch = ' ';
  }
  std::istringstream in(v);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

std::vector<double> Config::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& tok : get_list(key)) out.push_back(parse_number<double>(key, tok));
  return out;
}

std::filesystem::path Config::path(const std::string& key) const {
  std::filesystem::path p = get(key);
  return (p.is_absolute() || base_dir_.empty() ? p : base_dir_ / p).lexically_normal();
}

std::optional<std::filesystem::path> Config::optional_path(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return path(key);
}

std::map<std::string, std::string> Config::section(const std::string& prefix) const {
  std::map<std::string, std::string> out;
  for (auto it = values_.lower_bound(prefix); it != values_.end() && it->first.rfind(prefix, 0) == 0; ++it) {
    out[it->first.substr(prefix.size())] = it->second;
  }
  return out;
}

}  // namespace treebench
