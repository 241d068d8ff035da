#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>

#include "netcpd/localization.hpp"
#include "netcpd/random.hpp"

using namespace netcpd;

namespace {

Eigen::MatrixXd rows_with_jump(int T, int d, int jump_at, double jump_norm) {
  Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(T, d);
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(d);
  shift[0] = jump_norm;
  for (int t = jump_at - 1; t < T; ++t) mu.row(t) = shift.transpose();
  return mu;
}

}  // namespace

TEST_CASE("gamma null quantile", "[localization]") {
  SECTION("null law has mean d") {
    for (const auto [d, m] : {std::pair{5, 1000}, {10, 500}, {3, 7}}) {
      const boost::math::gamma_distribution<double> law(0.5 * m * d, 2.0 / m);
      REQUIRE(boost::math::mean(law) == Catch::Approx(static_cast<double>(d)));
    }
  }
  SECTION("m = 1 reduces to a chi-square") {
    const boost::math::chi_squared_distribution<double> chi(5.0);
    REQUIRE(gamma_null_quantile(5, 1, 0.01, 100) ==
            Catch::Approx(boost::math::quantile(chi, 1.0 - 0.01 / 99.0)).epsilon(1e-12));
  }
  SECTION("matches a Monte Carlo quantile within 1 percent") {
    // mean of m chi2_d draws is distributed as chi2_{m d} / m
    const int d = 5, m = 1000, T = 100;
    const double alpha = 0.01;
    Rng rng(3);
    std::chi_squared_distribution<double> chi(static_cast<double>(m * d));
    std::vector<double> draws(1000000);
    for (auto& v : draws) v = chi(rng) / static_cast<double>(m);
    const double level = 1.0 - alpha / (T - 1);
    const std::size_t index = static_cast<std::size_t>(level * (draws.size() - 1));
    std::nth_element(draws.begin(), draws.begin() + static_cast<long>(index), draws.end());
    const double empirical = draws[index];
    REQUIRE(gamma_null_quantile(d, m, alpha, T) == Catch::Approx(empirical).epsilon(0.01));
  }
  SECTION("contract") {
    REQUIRE_THROWS_AS(gamma_null_quantile(0, 1, 0.01, 10), std::invalid_argument);
    REQUIRE_THROWS_AS(gamma_null_quantile(5, 1, 1.5, 10), std::invalid_argument);
    REQUIRE_THROWS_AS(gamma_null_quantile(5, 1, 0.01, 1), std::invalid_argument);
  }
}

TEST_CASE("gamma rule null behaviour", "[localization]") {
  LocalizationConfig cfg;
  cfg.method = LocalizationMethod::kGamma;
  cfg.num_draws = 500;
  const Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(30, 5, 0.8);

  int clean_runs = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    cfg.seed = seed;
    const auto [points, mags] = detect_gamma(flat, cfg);
    const bool any_raw_flag =
        std::any_of(mags.flagged.begin(), mags.flagged.end(), [](char f) { return f != 0; });
    if (!any_raw_flag) ++clean_runs;
  }
  REQUIRE(clean_runs >= 190);
}

TEST_CASE("gamma rule flags a strong jump every time", "[localization]") {
  LocalizationConfig cfg;
  cfg.method = LocalizationMethod::kGamma;
  cfg.num_draws = 500;
  const Eigen::MatrixXd mu = rows_with_jump(20, 5, 10, 10.0);
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    cfg.seed = seed;
    const auto [points, mags] = detect_gamma(mu, cfg);
    REQUIRE(points.points == std::vector<int>{10});
  }
}

TEST_CASE("gamma rule on a two-point series", "[localization]") {
  LocalizationConfig cfg;
  cfg.method = LocalizationMethod::kGamma;
  cfg.num_draws = 200;
  const Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(2, 3, 1.0);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    cfg.seed = seed;
    const auto [points, mags] = detect_gamma(flat, cfg);
    REQUIRE(points.points.empty());
  }
}

TEST_CASE("data-driven rule on the worked example", "[localization]") {
  // consecutive difference norms (1, 1, 1, 9)
  Eigen::MatrixXd mu(5, 1);
  mu << 0, 1, 2, 3, 12;
  LocalizationConfig cfg;
  cfg.endpoint_trim = 0;
  const auto [points, mags] = detect_data_driven(mu, cfg);

  REQUIRE(mags.delta_mu.size() == 4);
  // standardised scores are (0,0,0,2); threshold = 0.5 + z_0.9
  REQUIRE(mags.score[0] == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(mags.score[3] == Catch::Approx(2.0));
  REQUIRE(mags.threshold == Catch::Approx(0.5 + 1.2815515655446004));
  REQUIRE(points.points == std::vector<int>{5});
}

TEST_CASE("data-driven rule degenerate and invariance cases", "[localization]") {
  LocalizationConfig cfg;
  SECTION("constant series yields nothing") {
    const Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(12, 4, 2.5);
    const auto [points, mags] = detect_data_driven(flat, cfg);
    REQUIRE(points.points.empty());
    REQUIRE(mags.threshold == 0.0);
  }
  SECTION("needs at least three time points") {
    REQUIRE_THROWS_AS(detect_data_driven(Eigen::MatrixXd::Zero(2, 3), cfg),
                      std::invalid_argument);
  }
  SECTION("coordinate permutation leaves the detection unchanged") {
    Rng rng(5);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd mu = rows_with_jump(20, 3, 11, 6.0);
    for (int t = 0; t < 20; ++t)
      for (int j = 0; j < 3; ++j) mu(t, j) += 0.1 * normal(rng);
    Eigen::MatrixXd permuted(20, 3);
    permuted.col(0) = mu.col(2);
    permuted.col(1) = mu.col(0);
    permuted.col(2) = mu.col(1);
    const auto [a, ma] = detect_data_driven(mu, cfg);
    const auto [b, mb] = detect_data_driven(permuted, cfg);
    REQUIRE(a.points == b.points);
  }
  SECTION("orthogonal row transform leaves the detection unchanged") {
    Rng rng(7);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd mu = rows_with_jump(18, 3, 9, 5.0);
    for (int t = 0; t < 18; ++t)
      for (int j = 0; j < 3; ++j) mu(t, j) += 0.05 * normal(rng);
    Eigen::MatrixXd raw(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) raw(i, j) = normal(rng);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ();
    const auto [a, ma] = detect_data_driven(mu, cfg);
    const auto [b, mb] = detect_data_driven(Eigen::MatrixXd(mu * q), cfg);
    REQUIRE(a.points == b.points);
  }
}

TEST_CASE("post-processing", "[localization]") {
  ChangeMagnitudes mags;
  mags.delta_mu = Eigen::VectorXd::Zero(99);
  mags.score = Eigen::VectorXd::Zero(99);

  SECTION("close pair keeps the larger score") {
    mags.score[10 - 2] = 3.0;
    mags.score[12 - 2] = 5.0;
    const ChangePointSet out = post_process(ChangePointSet{{10, 12}}, mags, 5, 0, 100);
    REQUIRE(out.points == std::vector<int>{12});
  }
  SECTION("endpoint trim") {
    const ChangePointSet out = post_process(ChangePointSet{{3, 50}}, mags, 5, 5, 100);
    REQUIRE(out.points == std::vector<int>{50});
  }
  SECTION("empty input") {
    REQUIRE(post_process(ChangePointSet{}, mags, 5, 5, 100).points.empty());
  }
  SECTION("chains resolve left to right") {
    mags.score[10 - 2] = 1.0;
    mags.score[12 - 2] = 5.0;
    mags.score[14 - 2] = 3.0;
    const ChangePointSet out = post_process(ChangePointSet{{10, 12, 14}}, mags, 5, 0, 100);
    REQUIRE(out.points == std::vector<int>{12});
  }
  SECTION("idempotent with valid gaps and range") {
    Rng rng(11);
    std::uniform_real_distribution<double> unif(0.0, 10.0);
    for (int i = 0; i < 99; ++i) mags.score[i] = unif(rng);
    std::uniform_int_distribution<int> point(2, 99);
    for (int trial = 0; trial < 30; ++trial) {
      std::set<int> raw;
      for (int k = 0; k < 12; ++k) raw.insert(point(rng));
      const ChangePointSet input{{raw.begin(), raw.end()}};
      const ChangePointSet once = post_process(input, mags, 5, 5, 100);
      const ChangePointSet twice = post_process(once, mags, 5, 5, 100);
      REQUIRE(once.points == twice.points);
      for (std::size_t i = 0; i < once.points.size(); ++i) {
        REQUIRE(once.points[i] >= 5);
        REQUIRE(once.points[i] <= 95);
        if (i > 0) REQUIRE(once.points[i] - once.points[i - 1] >= 5);
      }
    }
  }
}

TEST_CASE("dispatch and magnitudes csv", "[localization]") {
  const Eigen::MatrixXd mu = rows_with_jump(20, 3, 10, 8.0);
  LocalizationConfig cfg;
  cfg.method = LocalizationMethod::kDataDriven;
  const auto [points, mags] = detect_change_points(mu, cfg);
  REQUIRE(points.points == std::vector<int>{10});

  std::ostringstream os;
  write_magnitudes_csv(os, mags);
  const std::string csv = os.str();
  REQUIRE(csv.rfind("t,delta_mu,score,threshold,flagged\n", 0) == 0);
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 20);  // header + 19 steps
}
