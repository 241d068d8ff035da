#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "netcpd/graph.hpp"
#include "netcpd/random.hpp"

using namespace netcpd;

namespace {

GraphSequence sequence_from(std::initializer_list<Eigen::MatrixXd> mats, bool directed) {
  GraphSequence g;
  g.directed = directed;
  g.snapshots.assign(mats.begin(), mats.end());
  return g;
}

Eigen::MatrixXd directed_cycle3() {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(3, 3);
  y(0, 1) = 1;
  y(1, 2) = 1;
  y(2, 0) = 1;
  return y;
}

Eigen::MatrixXd complete_undirected(int n) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Ones(n, n);
  y.diagonal().setZero();
  return y;
}

GraphSequence random_sequence(int n, int T, bool directed, std::uint64_t seed, double density) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  GraphSequence g;
  g.directed = directed;
  for (int t = 0; t < T; ++t) {
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = directed ? 0 : i + 1; j < n; ++j) {
        if (i == j) continue;
        const double edge = unif(rng) < density ? 1.0 : 0.0;
        y(i, j) = edge;
        if (!directed) y(j, i) = edge;
      }
    g.snapshots.push_back(std::move(y));
  }
  return g;
}

std::string temp_path(const char* name) {
  return std::string("netcpd_test_") + name + ".json";
}

}  // namespace

TEST_CASE("well-formed file round-trips", "[graph]") {
  GraphSequence g = random_sequence(3, 2, true, 7, 0.5);
  const std::string path = temp_path("roundtrip");
  save_graph_sequence(g, path);
  const GraphSequence loaded = load_graph_sequence(path);
  REQUIRE(loaded.length() == 2);
  REQUIRE(loaded.nodes() == 3);
  REQUIRE(loaded.directed == g.directed);
  for (int t = 1; t <= 2; ++t) REQUIRE(loaded.at(t) == g.at(t));

  // byte-identical re-serialisation
  std::ostringstream first, second;
  first << graph_sequence_to_json(g).dump();
  second << graph_sequence_to_json(loaded).dump();
  REQUIRE(first.str() == second.str());
  std::remove(path.c_str());
}

TEST_CASE("loader rejects contract violations", "[graph]") {
  const std::string path = temp_path("invalid");

  SECTION("non-binary entry") {
    std::ofstream(path) << R"({"directed":true,"n":2,"T":1,"y":[[[0,2],[0,0]]]})";
    REQUIRE_THROWS_WITH(load_graph_sequence(path), Catch::Matchers::ContainsSubstring("non-binary"));
  }
  SECTION("asymmetric undirected") {
    std::ofstream(path) << R"({"directed":false,"n":2,"T":1,"y":[[[0,1],[0,0]]]})";
    REQUIRE_THROWS_WITH(load_graph_sequence(path), Catch::Matchers::ContainsSubstring("asymmetric"));
  }
  SECTION("shape mismatch") {
    std::ofstream(path) << R"({"directed":true,"n":3,"T":1,"y":[[[0,1],[0,0]]]})";
    REQUIRE_THROWS_WITH(load_graph_sequence(path), Catch::Matchers::ContainsSubstring("shape"));
  }
  SECTION("parse failure") {
    std::ofstream(path) << "{not json";
    REQUIRE_THROWS_WITH(load_graph_sequence(path), Catch::Matchers::ContainsSubstring("parse"));
  }
  SECTION("self-loop") {
    std::ofstream(path) << R"({"directed":true,"n":2,"T":1,"y":[[[1,0],[0,0]]]})";
    REQUIRE_THROWS_WITH(load_graph_sequence(path), Catch::Matchers::ContainsSubstring("self-loop"));
  }
  std::remove(path.c_str());
}

TEST_CASE("network statistics on hand-enumerable graphs", "[graph]") {
  SECTION("directed 3-cycle") {
    GraphSequence g = sequence_from({directed_cycle3()}, true);
    const NetworkStatistics s = network_statistics(g, 1);
    REQUIRE(s.edges == 3);
    REQUIRE(s.mutual == 0);
    REQUIRE(s.triangles == 1);
  }
  SECTION("empty graph") {
    GraphSequence g = sequence_from({Eigen::MatrixXd::Zero(4, 4)}, true);
    const NetworkStatistics s = network_statistics(g, 1);
    REQUIRE(s.edges == 0);
    REQUIRE(s.mutual == 0);
    REQUIRE(s.triangles == 0);
  }
  SECTION("complete undirected K4") {
    GraphSequence g = sequence_from({complete_undirected(4)}, false);
    const NetworkStatistics s = network_statistics(g, 1);
    REQUIRE(s.edges == 6);
    REQUIRE(s.mutual == 6);
    REQUIRE(s.triangles == 4);
  }
  SECTION("index out of range") {
    GraphSequence g = sequence_from({directed_cycle3()}, true);
    REQUIRE_THROWS_AS(network_statistics(g, 2), std::out_of_range);
    REQUIRE_THROWS_AS(network_statistics(g, 0), std::out_of_range);
  }
}

TEST_CASE("degree distributions", "[graph]") {
  SECTION("empty graph n=4") {
    GraphSequence g = sequence_from({Eigen::MatrixXd::Zero(4, 4)}, false);
    const DegreeHistogram h = degree_distribution(g, 1);
    REQUIRE(h.degrees[0] == 4);
    REQUIRE(h.in_degrees.empty());
  }
  SECTION("undirected K3") {
    GraphSequence g = sequence_from({complete_undirected(3)}, false);
    const DegreeHistogram h = degree_distribution(g, 1);
    REQUIRE(h.degrees[2] == 3);
  }
  SECTION("star on 4 nodes") {
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(4, 4);
    for (int j = 1; j < 4; ++j) y(0, j) = y(j, 0) = 1;
    GraphSequence g = sequence_from({y}, false);
    const DegreeHistogram h = degree_distribution(g, 1);
    REQUIRE(h.degrees[1] == 3);
    REQUIRE(h.degrees[3] == 1);
  }
  SECTION("directed keeps separate in-degree histogram") {
    GraphSequence g = sequence_from({directed_cycle3()}, true);
    const DegreeHistogram h = degree_distribution(g, 1);
    REQUIRE(h.degrees[1] == 3);
    REQUIRE(h.in_degrees[1] == 3);
  }
}

TEST_CASE("shared partner distributions", "[graph]") {
  SECTION("undirected K3") {
    GraphSequence g = sequence_from({complete_undirected(3)}, false);
    const auto hist = esp_distribution(g, 1);
    REQUIRE(hist[1] == 3);
  }
  SECTION("4-cycle has no shared partners") {
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(4, 4);
    const int cycle[4] = {0, 1, 2, 3};
    for (int e = 0; e < 4; ++e) {
      y(cycle[e], cycle[(e + 1) % 4]) = 1;
      y(cycle[(e + 1) % 4], cycle[e]) = 1;
    }
    GraphSequence g = sequence_from({y}, false);
    const auto hist = esp_distribution(g, 1);
    REQUIRE(hist[0] == 4);
  }
  SECTION("K4") {
    GraphSequence g = sequence_from({complete_undirected(4)}, false);
    const auto hist = esp_distribution(g, 1);
    REQUIRE(hist[2] == 6);
  }
}

TEST_CASE("histogram mass identities on random graphs", "[graph]") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    GraphSequence g = random_sequence(8, 3, false, seed, 0.4);
    for (int t = 1; t <= g.length(); ++t) {
      const NetworkStatistics stats = network_statistics(g, t);
      REQUIRE(stats.mutual == stats.edges);  // undirected

      const DegreeHistogram deg = degree_distribution(g, t);
      long mass = 0;
      for (long c : deg.degrees) mass += c;
      REQUIRE(mass == g.nodes());

      const auto esp = esp_distribution(g, t);
      long esp_mass = 0;
      for (long c : esp) esp_mass += c;
      REQUIRE(esp_mass == stats.edges);
    }
  }
}

TEST_CASE("statistics table emission", "[graph]") {
  GraphSequence g = sequence_from({directed_cycle3(), Eigen::MatrixXd::Zero(3, 3)}, true);
  std::ostringstream os;
  write_network_statistics_csv(os, g);
  REQUIRE(os.str() == "t,edges,mutual,triangles\n1,3,0,1\n2,0,0,0\n");
}

TEST_CASE("partition construction", "[graph]") {
  SECTION("paper schedule") {
    const Partition p = partition_from_change_points(100, {26, 51, 76});
    REQUIRE(p.intervals == std::vector<std::pair<int, int>>{{1, 25}, {26, 50}, {51, 75}, {76, 100}});
  }
  SECTION("no points") {
    const Partition p = partition_from_change_points(10, {});
    REQUIRE(p.intervals == std::vector<std::pair<int, int>>{{1, 10}});
  }
  SECTION("single point") {
    const Partition p = partition_from_change_points(10, {5});
    REQUIRE(p.intervals == std::vector<std::pair<int, int>>{{1, 4}, {5, 10}});
  }
  SECTION("invalid points") {
    REQUIRE_THROWS_AS(partition_from_change_points(10, {1}), std::invalid_argument);
    REQUIRE_THROWS_AS(partition_from_change_points(10, {11}), std::invalid_argument);
    REQUIRE_THROWS_AS(partition_from_change_points(10, {5, 5}), std::invalid_argument);
  }
}

TEST_CASE("change point sidecar round trip", "[graph]") {
  const std::string path = temp_path("truth");
  save_change_points(ChangePointSet{{26, 51, 76}}, path);
  const ChangePointSet loaded = load_change_points(path);
  REQUIRE(loaded.points == std::vector<int>{26, 51, 76});
  std::remove(path.c_str());
}
