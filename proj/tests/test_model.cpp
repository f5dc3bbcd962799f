#include "doctest.h"
#include "helpers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace mmfnoma;
using testing::channels_from_rows;
using testing::row;

namespace {

// Two-sided Kolmogorov-Smirnov statistic against a closed-form CDF.
template <class Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const double f = cdf(xs[j]);
    d = std::max({d, std::abs(f - j / n), std::abs((j + 1) / n - f)});
  }
  return d;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("config validation") {
  CHECK_NOTHROW(SystemConfig::make(4, 4, 2, 10.0, 0.2).validate());
  CHECK_THROWS_AS(SystemConfig::make(2, 3, 2, 10.0).validate(), std::invalid_argument);
  auto cfg = SystemConfig::make(2, 2, 2, 10.0);
  cfg.r_th(1, 0) = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SystemConfig::make(2, 2, 2, 10.0);
  cfg.E_tx = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SystemConfig::make(2, 2, 2, 10.0);
  cfg.sigma2 = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("snr and thresholds") {
  const auto cfg = SystemConfig::make(4, 4, 2, 20.0, 1.0, 2.0);
  CHECK(cfg.E_tx == doctest::Approx(200.0));
  CHECK(cfg.snr_db() == doctest::Approx(20.0));
  CHECK(cfg.r_th(3, 1) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("unit distance leaves the raw draw untouched") {
  const auto cfg = SystemConfig::make(1, 1, 1, 0.0);
  for (std::uint64_t seed : {0u, 7u, 12345u}) {
    const auto ch = generate_channels(cfg, seed, FixedDistance{1.0});
    CHECK(ch.h(0, 0) == ch.raw(0, 0));
    CHECK(ch.gain2(0, 0) == doctest::Approx(ch.raw(0, 0).squaredNorm()).epsilon(1e-15));
  }
}

TEST_CASE("path loss is applied to the raw draw") {
  const auto cfg = SystemConfig::make(3, 2, 2, 10.0);
  const auto ch = generate_channels(cfg, 5, UniformDisk{});
  for (int k = 0; k < 2; ++k) {
    for (int l = 0; l < 2; ++l) {
      const double d = ch.distance(k, l);
      CHECK(d >= kMinDistance);
      CHECK(d <= kCellRadius);
      const CRowVector expect = ch.raw(k, l) / std::sqrt(std::pow(d, 4.0));
      CHECK((ch.h(k, l) - expect).norm() <= 1e-12 * expect.norm());
    }
  }
}

TEST_CASE("generation is deterministic per seed") {
  const auto cfg = SystemConfig::make(4, 4, 2, 10.0);
  const auto a = generate_channels(cfg, 42, UniformDisk{});
  const auto b = generate_channels(cfg, 42, UniformDisk{});
  const auto c = generate_channels(cfg, 43, UniformDisk{});
  CHECK(a == b);
  CHECK(a.digest() == b.digest());
  CHECK(a.digest() != c.digest());
}

TEST_CASE("clusters are ordered weakest first") {
  for (int L : {1, 2, 3}) {
    const auto cfg = SystemConfig::make(3, 3, L, 10.0);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto ch = generate_channels(cfg, seed, UniformDisk{});
      for (int k = 0; k < 3; ++k) {
        for (int l = 0; l + 1 < L; ++l) CHECK(ch.gain2(k, l) <= ch.gain2(k, l + 1));
      }
    }
  }
}

TEST_CASE("annulus split distances follow the area-uniform law") {
  const double d = 0.2;
  const auto cfg = SystemConfig::make(1, 1, 2, 10.0);
  std::vector<double> near, far;
  for (std::uint64_t seed = 0; seed < 5000; ++seed) {
    const auto ch = generate_channels(cfg, seed, AnnulusSplit{d});
    for (int l = 0; l < 2; ++l) {
      const double r = ch.distance(0, l);
      (r <= d ? near : far).push_back(r);
    }
  }
  REQUIRE(near.size() == 5000);
  REQUIRE(far.size() == 5000);
  const double a = std::min(kMinDistance, d / 2.0);
  const double dn = ks_statistic(near, [&](double r) { return (r * r - a * a) / (d * d - a * a); });
  const double df = ks_statistic(far, [&](double r) { return (r * r - d * d) / (1.0 - d * d); });
  const double critical = 1.358 / std::sqrt(5000.0);
  CHECK(dn < critical);
  CHECK(df < critical);
}

TEST_CASE("annulus split rejects d_inner outside (0, 1)") {
  const auto cfg = SystemConfig::make(2, 2, 2, 10.0);
  for (double bad : {0.0, 1.0, -0.3, 1.5}) {
    CHECK_THROWS_AS(generate_channels(cfg, 1, AnnulusSplit{bad}), std::invalid_argument);
  }
}

TEST_CASE("cluster_users pairs best with worst for L = 2") {
  // g1 > g2 > g3 > g4 stored at indices 0..3.
  const std::vector<double> gains{4.0, 3.0, 2.0, 1.0};
  const auto c = cluster_users(gains, 2, 2);
  REQUIRE(c.size() == 2);
  CHECK(c[0] == std::vector<std::size_t>{3, 0});
  CHECK(c[1] == std::vector<std::size_t>{2, 1});

  const std::vector<double> two{5.0, 0.5};
  CHECK(cluster_users(two, 1, 2)[0] == std::vector<std::size_t>{1, 0});
}

TEST_CASE("cluster_users takes rank i from each tercile for L = 3") {
  // g1 > ... > g9 stored at indices 0..8.
  std::vector<double> gains(9);
  std::iota(gains.rbegin(), gains.rend(), 1.0);
  const auto c = cluster_users(gains, 3, 3);
  for (int i = 0; i < 3; ++i) {
    // Weakest first: i-th worst of the bottom group, i-th of the middle, i-th of the top.
    const std::vector<std::size_t> expect{static_cast<std::size_t>(8 - i),
                                          static_cast<std::size_t>(3 + i),
                                          static_cast<std::size_t>(i)};
    CHECK(c[i] == expect);
  }
  // Every user lands in exactly one cluster.
  std::vector<std::size_t> all;
  for (const auto& v : c) all.insert(all.end(), v.begin(), v.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expect(9);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(all == expect);
}

TEST_CASE("cluster_users breaks gain ties by index") {
  const std::vector<double> gains{1.0, 1.0, 1.0, 1.0};
  const auto c = cluster_users(gains, 2, 2);
  CHECK(c[0] == std::vector<std::size_t>{3, 0});
  CHECK(c[1] == std::vector<std::size_t>{2, 1});
}

TEST_CASE("cluster_users rejects bad shapes") {
  const std::vector<double> four{4, 3, 2, 1};
  CHECK_THROWS_AS(cluster_users(four, 1, 4), std::invalid_argument);
  CHECK_THROWS_AS(cluster_users(four, 4, 1), std::invalid_argument);
  CHECK_THROWS_AS(cluster_users(four, 3, 2), std::invalid_argument);
}

TEST_CASE("allocate_power examples") {
  SUBCASE("gains (0.25, 1)") {
    const auto ch = channels_from_rows({{row({0.5}), row({1.0})}});
    const auto alpha = allocate_power(ch);
    CHECK(alpha(0, 0) == doctest::Approx(0.8).epsilon(1e-14));
    CHECK(alpha(0, 1) == doctest::Approx(0.2).epsilon(1e-14));
  }
  SUBCASE("single user") {
    const auto ch = channels_from_rows({{row({cd(0.3, -0.7)})}});
    CHECK(allocate_power(ch)(0, 0) == 1.0);
  }
  SUBCASE("equal gains") {
    const auto ch = channels_from_rows({{row({1.0}), row({cd(0, 1)}), row({-1.0})}});
    const auto alpha = allocate_power(ch);
    for (int l = 0; l < 3; ++l) CHECK(alpha(0, l) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("zero gain") {
    const auto ch = channels_from_rows({{row({0.0}), row({1.0})}});
    CHECK_THROWS_AS(allocate_power(ch), std::invalid_argument);
  }
}

TEST_CASE("allocation sums to one and follows the users") {
  const auto cfg = SystemConfig::make(4, 4, 3, 10.0);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto ch = generate_channels(cfg, seed, UniformDisk{});
    const auto alpha = allocate_power(ch);
    for (int k = 0; k < 4; ++k) {
      double s = 0.0;
      for (int l = 0; l < 3; ++l) {
        s += alpha(k, l);
        CHECK(alpha(k, l) * ch.gain2(k, l) ==
              doctest::Approx(alpha(k, 0) * ch.gain2(k, 0)).epsilon(1e-12));
      }
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
    // Reversing the users inside each cluster before construction gives the same
    // sorted set, hence the same allocation per user.
    std::vector<std::vector<UserDraw>> rev(4);
    for (int k = 0; k < 4; ++k) {
      for (int l = 2; l >= 0; --l) rev[k].push_back({ch.raw(k, l), ch.distance(k, l)});
    }
    const auto ch2 = ChannelSet::from_clusters(4, 4.0, rev);
    CHECK(allocate_power(ch2) == alpha);
  }
}

}  // TEST_SUITE
