#pragma once
// Strict JSON config handling shared by the CLI and the benchmark harness:
// unknown keys are rejected, file errors carry the offending path, and
// config errors are distinguishable from model failures for exit codes.

#include <json.hpp>

#include <fstream>
#include <initializer_list>
#include <set>
#include <stdexcept>
#include <string>

#include "sloppyopt/core.hpp"

namespace sloppyopt {

using json = nlohmann::json;

/// Bad or missing configuration (CLI exit code 2).
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw config_error("invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

/// Strict-schema guard: every key of obj must appear in allowed.
inline void require_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& context) {
  if (!obj.is_object()) throw config_error(context + ": expected a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items())
    if (ok.find(key) == ok.end())
      throw config_error(context + ": unknown key \"" + key + "\"");
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw config_error(std::string("bad value for \"") + key + "\": " + e.what());
  }
}

template <typename T>
T get_required(const json& obj, const char* key, const std::string& context) {
  if (!obj.contains(key)) throw config_error(context + ": missing key \"" + key + "\"");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw config_error(context + ": bad value for \"" + key + "\": " + e.what());
  }
}

inline json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline Vec vec_from_json(const json& arr, const std::string& context) {
  if (!arr.is_array()) throw config_error(context + ": expected an array");
  Vec v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw config_error(context + ": expected numbers");
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return v;
}

}  // namespace sloppyopt
