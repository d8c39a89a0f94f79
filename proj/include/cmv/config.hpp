#pragma once

// Flat `key = value` configuration files (one pair per line, `#` comments).
// The accepted keys are exactly: model, b0, c0, d0, x0, T, delta, N_list,
// trials, seed, alpha, beta, renormalize, out_prefix, workers. Unknown keys
// are hard errors; later occurrences of a key override earlier ones.

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmv/experiment.hpp"

namespace cmv {

/// Configuration problems are usage errors for the CLI (exit code 1).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::string value_error(int line_no, const std::string& key, const std::string& value) {
  return "line " + std::to_string(line_no) + ": invalid value '" + value + "' for key '" + key +
         "'";
}

inline double parse_double_value(int line_no, const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0') throw ConfigError(value_error(line_no, key, value));
  return v;
}

inline long long parse_int_value(int line_no, const std::string& key, const std::string& value) {
  char* end = nullptr;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0') throw ConfigError(value_error(line_no, key, value));
  return v;
}

inline rng::u64 parse_u64_value(int line_no, const std::string& key, const std::string& value) {
  if (!value.empty() && value[0] == '-') throw ConfigError(value_error(line_no, key, value));
  char* end = nullptr;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0') throw ConfigError(value_error(line_no, key, value));
  return static_cast<rng::u64>(v);
}

inline std::vector<int> parse_n_list_value(int line_no, const std::string& value) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= value.size()) {
    const std::size_t comma = value.find(',', pos);
    const std::string tok =
        trim(value.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    if (tok.empty()) throw ConfigError(value_error(line_no, "N_list", value));
    out.push_back(static_cast<int>(parse_int_value(line_no, "N_list", tok)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace detail

inline ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = detail::trim(raw);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": missing key before '='");
    if (value.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": empty value for key '" + key +
                        "'");

    if (key == "model") {
      cfg.model = value;
    } else if (key == "b0") {
      cfg.params.b0 = detail::parse_double_value(line_no, key, value);
    } else if (key == "c0") {
      cfg.params.c0 = detail::parse_double_value(line_no, key, value);
    } else if (key == "d0") {
      cfg.params.d0 = detail::parse_double_value(line_no, key, value);
    } else if (key == "x0") {
      cfg.params.x0 = detail::parse_double_value(line_no, key, value);
    } else if (key == "T") {
      cfg.T = detail::parse_double_value(line_no, key, value);
    } else if (key == "delta") {
      cfg.delta = detail::parse_double_value(line_no, key, value);
    } else if (key == "N_list") {
      cfg.N_list = detail::parse_n_list_value(line_no, value);
    } else if (key == "trials") {
      cfg.trials = static_cast<int>(detail::parse_int_value(line_no, key, value));
    } else if (key == "seed") {
      cfg.seed = detail::parse_u64_value(line_no, key, value);
    } else if (key == "alpha") {
      cfg.alpha = detail::parse_double_value(line_no, key, value);
    } else if (key == "beta") {
      cfg.beta = detail::parse_double_value(line_no, key, value);
    } else if (key == "renormalize") {
      if (value == "on")
        cfg.renormalize = true;
      else if (value == "off")
        cfg.renormalize = false;
      else
        throw ConfigError("line " + std::to_string(line_no) +
                          ": renormalize must be 'on' or 'off', got '" + value + "'");
    } else if (key == "out_prefix") {
      cfg.out_prefix = value;
    } else if (key == "workers") {
      cfg.workers = static_cast<int>(detail::parse_int_value(line_no, key, value));
    } else {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config file not found: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

/// Emits every key; parse_config_text(serialize_config(cfg)) == cfg.
inline std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  out += "model = " + cfg.model + "\n";
  out += "b0 = " + detail::format_double(cfg.params.b0) + "\n";
  out += "c0 = " + detail::format_double(cfg.params.c0) + "\n";
  out += "d0 = " + detail::format_double(cfg.params.d0) + "\n";
  out += "x0 = " + detail::format_double(cfg.params.x0) + "\n";
  out += "T = " + detail::format_double(cfg.T) + "\n";
  out += "delta = " + detail::format_double(cfg.delta) + "\n";
  std::string ns;
  for (std::size_t i = 0; i < cfg.N_list.size(); ++i) {
    if (i > 0) ns += ",";
    ns += std::to_string(cfg.N_list[i]);
  }
  out += "N_list = " + ns + "\n";
  out += "trials = " + std::to_string(cfg.trials) + "\n";
  out += "seed = " + std::to_string(cfg.seed) + "\n";
  out += "alpha = " + detail::format_double(cfg.alpha) + "\n";
  out += "beta = " + detail::format_double(cfg.beta) + "\n";
  out += std::string("renormalize = ") + (cfg.renormalize ? "on" : "off") + "\n";
  out += "out_prefix = " + cfg.out_prefix + "\n";
  out += "workers = " + std::to_string(cfg.workers) + "\n";
  return out;
}

}  // namespace cmv
