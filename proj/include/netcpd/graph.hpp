#pragma once

#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace netcpd {

// Time series of binary adjacency matrices y^1..y^T over a fixed node set.
// Entries are stored as doubles restricted to {0,1}; the diagonal is zero and
// undirected snapshots are symmetric. Immutable after construction/load.
struct GraphSequence {
  std::vector<Eigen::MatrixXd> snapshots;
  bool directed = true;

  int length() const { return static_cast<int>(snapshots.size()); }
  int nodes() const { return snapshots.empty() ? 0 : static_cast<int>(snapshots.front().rows()); }

  // 1-based time index, matching the rest of the API.
  const Eigen::MatrixXd& at(int t) const {
    if (t < 1 || t > length())
      throw std::out_of_range("time index " + std::to_string(t) + " outside [1," +
                              std::to_string(length()) + "]");
    return snapshots[static_cast<std::size_t>(t - 1)];
  }
};

// Contiguous intervals [first,last] (1-based, inclusive) covering {1..T}.
struct Partition {
  std::vector<std::pair<int, int>> intervals;
};

// Sorted change points; each point is the first time index of a new segment.
struct ChangePointSet {
  std::vector<int> points;

  int count() const { return static_cast<int>(points.size()); }
};

inline void validate_graph_sequence(const GraphSequence& g) {
  const int T = g.length();
  if (T < 1) throw std::runtime_error("graph sequence is empty");
  const int n = g.nodes();
  if (n < 1) throw std::runtime_error("graph has no nodes");
  for (int t = 1; t <= T; ++t) {
    const Eigen::MatrixXd& y = g.snapshots[static_cast<std::size_t>(t - 1)];
    if (y.rows() != n || y.cols() != n) {
      std::ostringstream msg;
      msg << "shape mismatch at t=" << t << ": expected " << n << "x" << n
          << ", got " << y.rows() << "x" << y.cols();
      throw std::runtime_error(msg.str());
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double v = y(i, j);
        if (v != 0.0 && v != 1.0) {
          std::ostringstream msg;
          msg << "non-binary entry " << v << " at t=" << t << ", dyad (" << i << "," << j << ")";
          throw std::runtime_error(msg.str());
        }
        if (i == j && v != 0.0) {
          std::ostringstream msg;
          msg << "self-loop at t=" << t << ", node " << i;
          throw std::runtime_error(msg.str());
        }
        if (!g.directed && y(i, j) != y(j, i)) {
          std::ostringstream msg;
          msg << "asymmetric entry in undirected sequence at t=" << t
              << ", dyad (" << i << "," << j << ")";
          throw std::runtime_error(msg.str());
        }
      }
    }
  }
}

inline nlohmann::json graph_sequence_to_json(const GraphSequence& g) {
  nlohmann::json out;
  out["directed"] = g.directed;
  out["n"] = g.nodes();
  out["T"] = g.length();
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& y : g.snapshots) {
    nlohmann::json mat = nlohmann::json::array();
    for (int i = 0; i < y.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int j = 0; j < y.cols(); ++j) row.push_back(static_cast<int>(y(i, j)));
      mat.push_back(std::move(row));
    }
    tensors.push_back(std::move(mat));
  }
  out["y"] = std::move(tensors);
  return out;
}

inline GraphSequence graph_sequence_from_json(const nlohmann::json& in) {
  if (!in.is_object() || !in.contains("directed") || !in.contains("n") ||
      !in.contains("T") || !in.contains("y"))
    throw std::runtime_error("graph file missing one of: directed, n, T, y");
  GraphSequence g;
  g.directed = in.at("directed").get<bool>();
  const int n = in.at("n").get<int>();
  const int T = in.at("T").get<int>();
  const auto& tensors = in.at("y");
  if (!tensors.is_array() || static_cast<int>(tensors.size()) != T)
    throw std::runtime_error("field y must hold T=" + std::to_string(T) + " matrices");
  g.snapshots.reserve(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const auto& mat = tensors[static_cast<std::size_t>(t)];
    if (!mat.is_array() || static_cast<int>(mat.size()) != n)
      throw std::runtime_error("shape mismatch at t=" + std::to_string(t + 1) +
                               ": expected " + std::to_string(n) + " rows");
    Eigen::MatrixXd y(n, n);
    for (int i = 0; i < n; ++i) {
      const auto& row = mat[static_cast<std::size_t>(i)];
      if (!row.is_array() || static_cast<int>(row.size()) != n)
        throw std::runtime_error("shape mismatch at t=" + std::to_string(t + 1) +
                                 ", row " + std::to_string(i));
      for (int j = 0; j < n; ++j) {
        const auto& cell = row[static_cast<std::size_t>(j)];
        if (!cell.is_number())
          throw std::runtime_error("non-numeric entry at t=" + std::to_string(t + 1) +
                                   ", dyad (" + std::to_string(i) + "," + std::to_string(j) + ")");
        y(i, j) = cell.get<double>();
      }
    }
    g.snapshots.push_back(std::move(y));
  }
  validate_graph_sequence(g);
  return g;
}

inline GraphSequence load_graph_sequence(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open graph file: " + path);
  nlohmann::json parsed;
  try {
    in >> parsed;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("parse failure in " + path + ": " + e.what());
  }
  return graph_sequence_from_json(parsed);
}

inline void save_graph_sequence(const GraphSequence& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write graph file: " + path);
  out << graph_sequence_to_json(g).dump() << "\n";
}

struct NetworkStatistics {
  long edges = 0;
  long mutual = 0;
  long triangles = 0;
};

// Edge count, mutual-dyad count, and triangle count (on the undirected
// support) of snapshot t.
inline NetworkStatistics network_statistics(const GraphSequence& g, int t) {
  const Eigen::MatrixXd& y = g.at(t);
  const int n = g.nodes();
  NetworkStatistics stats;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (g.directed) {
        stats.edges += (y(i, j) != 0.0) + (y(j, i) != 0.0);
      } else {
        stats.edges += (y(i, j) != 0.0);
      }
      if (y(i, j) != 0.0 && y(j, i) != 0.0) ++stats.mutual;
    }
  }
  // Triangles on the undirected support y v y^T.
  const auto linked = [&](int i, int j) { return y(i, j) != 0.0 || y(j, i) != 0.0; };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (!linked(i, j)) continue;
      for (int l = j + 1; l < n; ++l)
        if (linked(i, l) && linked(j, l)) ++stats.triangles;
    }
  return stats;
}

struct DegreeHistogram {
  std::vector<long> degrees;     // total degree (undirected) or out-degree (directed)
  std::vector<long> in_degrees;  // directed only; empty otherwise
};

inline DegreeHistogram degree_distribution(const GraphSequence& g, int t) {
  const Eigen::MatrixXd& y = g.at(t);
  const int n = g.nodes();
  DegreeHistogram hist;
  hist.degrees.assign(static_cast<std::size_t>(n), 0);
  if (g.directed) hist.in_degrees.assign(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    int out = 0, in = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      if (y(i, j) != 0.0) ++out;
      if (y(j, i) != 0.0) ++in;
    }
    ++hist.degrees[static_cast<std::size_t>(out)];
    if (g.directed) ++hist.in_degrees[static_cast<std::size_t>(in)];
  }
  return hist;
}

// Edge-wise shared partner histogram: for every edge of the undirected
// support, the number of common neighbours of its endpoints. Index k holds
// the number of edges with exactly k shared partners.
inline std::vector<long> esp_distribution(const GraphSequence& g, int t) {
  const Eigen::MatrixXd& y = g.at(t);
  const int n = g.nodes();
  std::vector<long> hist(static_cast<std::size_t>(std::max(n - 1, 1)), 0);
  const auto linked = [&](int i, int j) { return y(i, j) != 0.0 || y(j, i) != 0.0; };
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (!linked(i, j)) continue;
      int shared = 0;
      for (int l = 0; l < n; ++l) {
        if (l == i || l == j) continue;
        if (linked(i, l) && linked(j, l)) ++shared;
      }
      ++hist[static_cast<std::size_t>(shared)];
    }
  }
  return hist;
}

// One row per time point: t, edges, mutual, triangles.
inline void write_network_statistics_csv(std::ostream& os, const GraphSequence& g) {
  os << "t,edges,mutual,triangles\n";
  for (int t = 1; t <= g.length(); ++t) {
    const NetworkStatistics s = network_statistics(g, t);
    os << t << "," << s.edges << "," << s.mutual << "," << s.triangles << "\n";
  }
}

// Segments {1..T} at the given points; each point starts a new interval.
inline Partition partition_from_change_points(int T, const std::vector<int>& points) {
  if (T < 1) throw std::invalid_argument("T must be positive");
  int prev = 1;
  Partition part;
  for (int c : points) {
    if (c <= prev || c > T)
      throw std::invalid_argument("change point " + std::to_string(c) +
                                  " not strictly inside (1," + std::to_string(T) + "] in order");
    part.intervals.emplace_back(prev, c - 1);
    prev = c;
  }
  part.intervals.emplace_back(prev, T);
  return part;
}

inline void save_change_points(const ChangePointSet& cps, const std::string& path) {
  nlohmann::json out;
  out["change_points"] = cps.points;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write change point file: " + path);
  os << out.dump() << "\n";
}

inline ChangePointSet load_change_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open change point file: " + path);
  nlohmann::json parsed;
  try {
    in >> parsed;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("parse failure in " + path + ": " + e.what());
  }
  if (!parsed.contains("change_points"))
    throw std::runtime_error("missing change_points field in " + path);
  ChangePointSet cps;
  cps.points = parsed.at("change_points").get<std::vector<int>>();
  return cps;
}

}  // namespace netcpd
