#pragma once

#include <map>
#include <string>
#include <string_view>

namespace vcflock::detail {

// `name[:key=value[,key=value...]]`, e.g. `power:alpha=0.5`.
struct SpecString {
  std::string name;
  std::map<std::string, double> args;

  double require(const std::string& key) const;
  void reject_unknown(std::initializer_list<std::string_view> allowed) const;
};

SpecString parse_spec_string(std::string_view text);

// Canonical text form, keys in sorted order.
std::string format_spec(const SpecString& spec);

std::string format_number(double value);

}  // namespace vcflock::detail
