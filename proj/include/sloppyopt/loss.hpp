#pragma once
// Relative-error objective and dataset handling. Residuals are
// r[j] = (E[j] - M[j]) / E[j] stacked over all conditions and observables;
// the objective is half their squared norm.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sloppyopt/core.hpp"

namespace sloppyopt {

/// Experimental table: one row per condition, each with its input vector
/// (e.g. pressure, temperature) and observed values. Observed values appear
/// in denominators, so zeros are rejected at construction.
struct Dataset {
  std::vector<Vec> inputs;
  std::vector<Vec> observed;
  std::vector<std::string> input_names;
  std::vector<std::string> observable_names;

  int conditions() const { return static_cast<int>(inputs.size()); }

  int observables_per_condition() const {
    return observed.empty() ? 0 : static_cast<int>(observed.front().size());
  }

  int residual_length() const { return conditions() * observables_per_condition(); }

  void validate() const {
    if (inputs.size() != observed.size())
      throw std::invalid_argument("Dataset: inputs/observed size mismatch");
    if (inputs.empty()) throw std::invalid_argument("Dataset: empty");
    const auto m = observed.front().size();
    const auto c = inputs.front().size();
    for (std::size_t i = 0; i < observed.size(); ++i) {
      if (observed[i].size() != m || inputs[i].size() != c)
        throw std::invalid_argument("Dataset: ragged rows");
      for (int j = 0; j < observed[i].size(); ++j)
        if (observed[i][j] == 0.0)
          throw std::invalid_argument("Dataset: observed value is exactly zero at condition " +
                                      std::to_string(i) + ", observable " + std::to_string(j));
    }
  }
};

/// Relative residuals (E - M) / E for one condition.
inline Vec residuals(const Vec& observed, const Vec& predicted) {
  if (observed.size() != predicted.size())
    throw std::invalid_argument("residuals: length mismatch");
  return (observed - predicted).array() / observed.array();
}

/// Phi = 1/2 sum r^2.
inline double objective(const Vec& residual_vector) {
  return 0.5 * residual_vector.squaredNorm();
}

/// Weighted variant; weights default to 1 everywhere in the plain overload.
inline double objective(const Vec& residual_vector, const Vec& weights) {
  if (weights.size() != residual_vector.size())
    throw std::invalid_argument("objective: weight length mismatch");
  return 0.5 * (weights.array() * residual_vector.array().square()).sum();
}

/// Objective with the non-finite sentinel applied; the evaluation layer and
/// all solvers consume this form.
inline double guarded_objective(const Vec& residual_vector) {
  if (!residual_vector.allFinite()) return kSentinelLoss;
  return objective(residual_vector);
}

namespace detail {

/// Shortest round-trippable decimal form; output is byte-stable across runs.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

/// CSV layout: header row naming every column; observable columns are
/// prefixed "obs_", all other columns are condition inputs.
inline void save_dataset_csv(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open dataset file for writing: " + path);
  for (std::size_t i = 0; i < ds.input_names.size(); ++i)
    out << ds.input_names[i] << ',';
  for (std::size_t j = 0; j < ds.observable_names.size(); ++j)
    out << "obs_" << ds.observable_names[j] << (j + 1 < ds.observable_names.size() ? "," : "");
  out << '\n';
  for (int i = 0; i < ds.conditions(); ++i) {
    for (int c = 0; c < ds.inputs[i].size(); ++c)
      out << detail::format_double(ds.inputs[i][c]) << ',';
    for (int j = 0; j < ds.observed[i].size(); ++j)
      out << detail::format_double(ds.observed[i][j])
          << (j + 1 < ds.observed[i].size() ? "," : "");
    out << '\n';
  }
}

inline Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset file is empty: " + path);
  const auto header = detail::split_csv_line(line);
  Dataset ds;
  std::vector<int> obs_cols, in_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].rfind("obs_", 0) == 0) {
      obs_cols.push_back(static_cast<int>(c));
      ds.observable_names.push_back(header[c].substr(4));
    } else {
      in_cols.push_back(static_cast<int>(c));
      ds.input_names.push_back(header[c]);
    }
  }
  if (obs_cols.empty())
    throw std::runtime_error("dataset has no observable (obs_*) columns: " + path);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size())
      throw std::runtime_error("dataset row has wrong column count: " + path);
    Vec cond(in_cols.size()), obs(obs_cols.size());
    for (std::size_t c = 0; c < in_cols.size(); ++c) cond[c] = std::stod(fields[in_cols[c]]);
    for (std::size_t c = 0; c < obs_cols.size(); ++c) obs[c] = std::stod(fields[obs_cols[c]]);
    ds.inputs.push_back(std::move(cond));
    ds.observed.push_back(std::move(obs));
  }
  ds.validate();
  return ds;
}

}  // namespace sloppyopt
