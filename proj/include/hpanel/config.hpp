#pragma once

// Flat `key = value` run configuration. Keys match the long CLI flag names
// without the leading dashes; '#' starts a comment.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

namespace hpanel {

using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config(std::istream& in);
ConfigMap load_config(const std::string& path);

// Values in `over` replace those in `base`.
ConfigMap merge_config(ConfigMap base, const ConfigMap& over);

// Canonical text: sorted `key=value` lines.
std::string canonical_config(const ConfigMap& config);

// 64-bit FNV-1a of the bytes, as 16 lower-case hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace hpanel
