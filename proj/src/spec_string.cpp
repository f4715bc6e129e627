#include "spec_string.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>

#include "vcflock/error.hpp"

namespace vcflock::detail {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

double parse_double(std::string_view text, std::string_view context) {
  const std::string buf(trim(text));
  char* end = nullptr;
  errno = 0;
  const double value = std::strtod(buf.c_str(), &end);
  if (buf.empty() || end != buf.c_str() + buf.size() || errno == ERANGE) {
    throw ConfigError("invalid number '" + buf + "' in '" + std::string(context) + "'");
  }
  return value;
}

}  // namespace

double SpecString::require(const std::string& key) const {
  const auto it = args.find(key);
  if (it == args.end()) {
    throw ConfigError("spec '" + name + "' requires parameter '" + key + "'");
  }
  return it->second;
}

void SpecString::reject_unknown(std::initializer_list<std::string_view> allowed) const {
  for (const auto& [key, value] : args) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("spec '" + name + "' has unknown parameter '" + key + "'");
    }
  }
}

SpecString parse_spec_string(std::string_view text) {
  text = trim(text);
  SpecString out;
  const auto colon = text.find(':');
  out.name = std::string(trim(text.substr(0, colon)));
  if (out.name.empty()) throw ConfigError("empty spec string");
  if (colon == std::string_view::npos) return out;

  std::string_view rest = text.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = trim(rest.substr(0, comma));
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("expected key=value in '" + std::string(text) + "'");
    }
    const std::string key(trim(item.substr(0, eq)));
    if (key.empty() || out.args.count(key) != 0) {
      throw ConfigError("empty or repeated key in '" + std::string(text) + "'");
    }
    out.args[key] = parse_double(item.substr(eq + 1), text);
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return out;
}

std::string format_spec(const SpecString& spec) {
  std::string out = spec.name;
  char sep = ':';
  for (const auto& [key, value] : spec.args) {
    out += sep;
    out += key + "=" + format_number(value);
    sep = ',';
  }
  return out;
}

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

}  // namespace vcflock::detail
