#include "hpanel/config.hpp"

#include <cstdio>
#include <fstream>
#include <istream>

#include "hpanel/errors.hpp"

namespace hpanel {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

ConfigMap parse_config(std::istream& in) {
  ConfigMap out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(body.substr(0, eq));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    if (key.empty()) throw ValidationError("config line " + std::to_string(line_no) + ": empty key");
    if (out.count(key)) {
      throw ValidationError("config line " + std::to_string(line_no) + ": duplicate key " + key);
    }
    out[key] = trim(body.substr(eq + 1));
  }
  return out;
}

ConfigMap load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  return parse_config(in);
}

ConfigMap merge_config(ConfigMap base, const ConfigMap& over) {
  for (const auto& [k, v] : over) base[k] = v;
  return base;
}

std::string canonical_config(const ConfigMap& config) {
  std::string out;
  for (const auto& [k, v] : config) out += k + "=" + v + "\n";
  return out;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace hpanel
