#pragma once

// CSV surfaces shared by the CLI: weighted point clouds
// (`weight,x_0..x_{n-1}`), simulated trajectories
// (`step,time,particle,weight,x_0..x_{n-1}`), and experiment summaries
// (`N,mean_eN,stderr_eN,trials`).

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmv/experiment.hpp"
#include "cmv/measure.hpp"
#include "cmv/sde.hpp"

namespace cmv {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

inline double parse_csv_double(const std::string& path, int line_no, const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0')
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": invalid number '" + tok +
                             "'");
  return v;
}

inline std::string cloud_header(std::size_t dim) {
  std::string h = "weight";
  for (std::size_t c = 0; c < dim; ++c) h += ",x_" + std::to_string(c);
  return h;
}

}  // namespace detail

inline void write_cloud_csv(const std::string& path, const WeightedEmpiricalMeasure& mu) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("write_cloud_csv: cannot open " + path);
  f << detail::cloud_header(mu.dim()) << '\n';
  for (std::size_t i = 0; i < mu.size(); ++i) {
    f << detail::format_double(mu.weight(i));
    const auto x = mu.position(i);
    for (std::size_t c = 0; c < mu.dim(); ++c) f << ',' << detail::format_double(x[c]);
    f << '\n';
  }
  if (!f) throw std::runtime_error("write_cloud_csv: failed writing " + path);
}

inline WeightedEmpiricalMeasure read_cloud_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_cloud_csv: cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("read_cloud_csv: " + path + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto head = detail::split_csv_line(line);
  if (head.size() < 2 || head[0] != "weight")
    throw std::runtime_error("read_cloud_csv: " + path + ": expected header weight,x_0,...");
  const std::size_t dim = head.size() - 1;
  for (std::size_t c = 0; c < dim; ++c)
    if (head[c + 1] != "x_" + std::to_string(c))
      throw std::runtime_error("read_cloud_csv: " + path + ": bad column name '" + head[c + 1] +
                               "'");
  std::vector<double> weights, positions;
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto toks = detail::split_csv_line(line);
    if (toks.size() != dim + 1)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(dim + 1) + " columns");
    weights.push_back(detail::parse_csv_double(path, line_no, toks[0]));
    for (std::size_t c = 0; c < dim; ++c)
      positions.push_back(detail::parse_csv_double(path, line_no, toks[c + 1]));
  }
  return WeightedEmpiricalMeasure(dim, std::move(positions), std::move(weights));
}

/// One row per (step, particle); the weight column is the normalized weight
/// at that snapshot.
inline void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  if (traj.empty()) throw std::invalid_argument("write_trajectory_csv: empty trajectory");
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("write_trajectory_csv: cannot open " + path);
  const std::size_t n = traj.front().n;
  std::string header = "step,time,particle,weight";
  for (std::size_t c = 0; c < n; ++c) header += ",x_" + std::to_string(c);
  f << header << '\n';
  for (const auto& snap : traj) {
    const auto w = normalize_log_weights(std::span<const double>(snap.z));
    for (std::size_t i = 0; i < snap.N; ++i) {
      f << snap.step << ',' << detail::format_double(snap.t) << ',' << i << ','
        << detail::format_double(w[i]);
      for (std::size_t c = 0; c < n; ++c)
        f << ',' << detail::format_double(snap.X[i * n + c]);
      f << '\n';
    }
  }
  if (!f) throw std::runtime_error("write_trajectory_csv: failed writing " + path);
}

inline std::vector<SummaryRow> read_summary_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_summary_csv: cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("read_summary_csv: " + path + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "N,mean_eN,stderr_eN,trials")
    throw std::runtime_error("read_summary_csv: " + path + ": unexpected header '" + line + "'");
  std::vector<SummaryRow> rows;
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto toks = detail::split_csv_line(line);
    if (toks.size() != 4)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 4 columns");
    SummaryRow row;
    row.N = static_cast<int>(detail::parse_csv_double(path, line_no, toks[0]));
    row.mean_eN = detail::parse_csv_double(path, line_no, toks[1]);
    row.stderr_eN = detail::parse_csv_double(path, line_no, toks[2]);
    row.trials = static_cast<int>(detail::parse_csv_double(path, line_no, toks[3]));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace cmv
