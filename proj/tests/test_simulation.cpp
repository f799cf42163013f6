#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "sstqr/simulation.hpp"
#include "test_support.hpp"

using namespace sstqr;
using Catch::Approx;

TEST_CASE("true_xi boundary identities and pinned values") {
  Rng rng(401);
  for (int rep = 0; rep < 20; ++rep) {
    const auto z = testutil::random_site(rng, 2);
    for (auto fam : {CurveFamily::first, CurveFamily::second}) {
      CHECK(true_xi(fam, 0.0, z) == Approx(0.0).margin(1e-15));
      CHECK(true_xi(fam, 1.0, z) == Approx(1.0).margin(1e-12));
    }
  }
  const std::vector<double> origin{0.0, 0.0};
  CHECK(true_xi(CurveFamily::first, 0.5, origin) == Approx(0.25).margin(1e-15));
  CHECK(true_xi(CurveFamily::second, 0.5, origin) ==
        Approx(std::sin(std::atan(1.0))).margin(1e-12));  // sin(pi/4)
  const std::vector<double> z21{0.3, 1.0};
  CHECK(true_xi(CurveFamily::second, 0.5, z21) ==
        Approx((std::sqrt(std::exp(1.0)) - 1.0) / (std::exp(1.0) - 1.0)).margin(1e-12));

  CHECK_THROWS_AS(true_xi(CurveFamily::first, 1.5, origin), validation_error);
  CHECK_THROWS_AS(true_xi(CurveFamily::first, 0.5, std::vector<double>{0.5}),
                  validation_error);
}

TEST_CASE("true_xi is strictly increasing in tau") {
  Rng rng(409);
  for (int rep = 0; rep < 300; ++rep) {
    const auto z = testutil::random_site(rng, 2);
    double t1 = rng.uniform(), t2 = rng.uniform();
    if (t1 == t2) continue;
    if (t1 > t2) std::swap(t1, t2);
    REQUIRE(true_xi(CurveFamily::first, t1, z) < true_xi(CurveFamily::first, t2, z));
    REQUIRE(true_xi(CurveFamily::second, t1, z) < true_xi(CurveFamily::second, t2, z));
  }
}

TEST_CASE("generate_dataset: grid, ranges, determinism") {
  SimConfig cfg;
  cfg.sites = 7;
  cfg.points_per_site = 2;
  cfg.seed = 5;
  Rng r1(cfg.seed);
  auto [d2, t2] = generate_dataset(cfg, r1);
  for (const auto& s : d2.sites) {
    REQUIRE(s.obs.size() == 2);
    CHECK(s.obs[0].first == 0.0);
    CHECK(s.obs[1].first == 1.0);
  }

  cfg.points_per_site = 9;
  Rng r2(77), r3(77);
  auto [da, ta] = generate_dataset(cfg, r2);
  auto [db, tb] = generate_dataset(cfg, r3);
  for (std::size_t l = 0; l < da.sites.size(); ++l) {
    CHECK(da.sites[l].z == db.sites[l].z);
    CHECK(da.sites[l].obs == db.sites[l].obs);
    for (const auto& [x, y] : da.sites[l].obs) {
      CHECK((y >= 0.0 && y <= 1.0));
      CHECK((x >= 0.0 && x <= 1.0));
    }
  }

  cfg.points_per_site = 1;
  Rng r4(1);
  CHECK_THROWS_AS(generate_dataset(cfg, r4), validation_error);
}

TEST_CASE("generated responses follow the true conditional quantiles") {
  Rng rng(419);
  const double x = 0.35;
  const std::vector<double> z{0.25, 0.7};
  const int n = 100000;
  std::vector<double> ys(n);
  for (auto& y : ys) y = true_quantile(rng.uniform(), x, z);
  std::sort(ys.begin(), ys.end());
  const double h = 1e-5;
  for (double tau : {0.1, 0.5, 0.9}) {
    const double want = true_quantile(tau, x, z);
    const double got = ys[static_cast<std::size_t>(tau * n)];
    const double slope = (true_quantile(tau + h, x, z) - true_quantile(tau - h, x, z)) / (2 * h);
    const double se = std::sqrt(tau * (1.0 - tau) / n) * slope;
    REQUIRE(std::abs(got - want) < 3.0 * se);
  }
}

TEST_CASE("mse_metrics: truth gives zero, constant offset gives its square") {
  SimConfig cfg;
  cfg.sites = 6;
  cfg.points_per_site = 3;
  Rng rng(431);
  auto [data, truth] = generate_dataset(cfg, rng);

  QuantileEstimator exact{
      [&](double tau, double x, std::span<const double> z) {
        return truth.quantile(tau, x, z);
      },
      [&](double tau, std::span<const double> z) { return truth.slope_intercept(tau, z); }};
  const Metrics zero = mse_metrics(exact, truth);
  CHECK(zero.t1 == Approx(0.0).margin(1e-28));
  CHECK(zero.t2 == Approx(0.0).margin(1e-28));
  for (double v : zero.tx) CHECK(v == Approx(0.0).margin(1e-28));

  QuantileEstimator offset{
      [&](double tau, double x, std::span<const double> z) {
        return truth.quantile(tau, x, z) + 0.1;
      },
      [&](double tau, std::span<const double> z) {
        auto [b0, b1] = truth.slope_intercept(tau, z);
        return std::make_pair(b0 + 0.1, b1);  // the decomposition of Q + 0.1
      }};
  const Metrics shifted = mse_metrics(offset, truth);
  CHECK(shifted.t1 == Approx(0.01).margin(1e-12));
  CHECK(shifted.t2 == Approx(0.0).margin(1e-24));
  for (double v : shifted.tx) CHECK(v == Approx(0.01).margin(1e-12));

  // site permutation invariance
  SimTruth permuted = truth;
  std::reverse(permuted.sites.begin(), permuted.sites.end());
  const Metrics again = mse_metrics(offset, permuted);
  CHECK(again.t1 == Approx(shifted.t1).margin(1e-15));
  CHECK(again.tx[1] == Approx(shifted.tx[1]).margin(1e-15));
}

TEST_CASE("run_benchmark bookkeeping, oracle row, failure marking") {
  SimConfig cfg;
  cfg.sites = 4;
  cfg.points_per_site = 5;
  cfg.replications = 3;
  cfg.seed = 99;

  BenchmarkMethod oracle{"oracle", [](FitContext& ctx) {
                           const SimTruth* truth = &ctx.truth;
                           return QuantileEstimator{
                               [truth](double tau, double x, std::span<const double> z) {
                                 return truth->quantile(tau, x, z);
                               },
                               [truth](double tau, std::span<const double> z) {
                                 return truth->slope_intercept(tau, z);
                               }};
                         }};
  BenchmarkMethod broken{"broken", [](FitContext&) -> QuantileEstimator {
                           throw evaluation_error("always fails");
                         }};

  BenchmarkOptions opts;
  const SimResult res = run_benchmark({oracle, broken}, {5}, cfg, opts);
  REQUIRE(res.cells.size() == 2);

  const auto* ocell = res.find("oracle", 5);
  REQUIRE(ocell != nullptr);
  CHECK(ocell->replications_used == 3);
  CHECK_FALSE(ocell->unreliable);
  CHECK(ocell->metrics.t1 == Approx(0.0).margin(1e-28));
  CHECK(ocell->metrics.tx[1] == Approx(0.0).margin(1e-28));

  const auto* bcell = res.find("broken", 5);
  REQUIRE(bcell != nullptr);
  CHECK(bcell->replications_used == 0);
  CHECK(bcell->unreliable);
  CHECK(bcell->errors.size() == 3);

  std::ostringstream csv;
  res.to_csv(csv);
  CHECK(csv.str().find("method,n,metric,value,replications_used,flags") == 0);
  CHECK(csv.str().find("broken,5,T1,") != std::string::npos);
  CHECK(csv.str().find("unreliable") != std::string::npos);
}

TEST_CASE("run_benchmark is thread-count independent") {
  SimConfig cfg;
  cfg.sites = 3;
  cfg.points_per_site = 4;
  cfg.replications = 4;
  cfg.seed = 123;
  OptimConfig fast;
  fast.max_runs = 2;
  fast.max_iter = 200;
  BenchmarkOptions a;
  a.p1 = 2;
  a.p2 = 2;
  a.optim = fast;
  BenchmarkOptions b = a;
  b.threads = 3;
  const SimResult r1 = run_benchmark({method_ml()}, {4}, cfg, a);
  const SimResult r2 = run_benchmark({method_ml()}, {4}, cfg, b);
  REQUIRE(r1.cells.size() == r2.cells.size());
  CHECK(r1.cells[0].metrics.t1 == r2.cells[0].metrics.t1);
  CHECK(r1.cells[0].metrics.tx[2] == r2.cells[0].metrics.tx[2]);
}
