#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sstqr/data.hpp"
#include "sstqr/model.hpp"
#include "sstqr/numeric.hpp"
#include "sstqr/optimizer.hpp"
#include "sstqr/sampler.hpp"

namespace sstqr {

struct SimConfig {
  int sites = 50;            // L
  int points_per_site = 10;  // n, equidistant time grid with endpoints 0 and 1
  int replications = 50;     // S
  std::uint64_t seed = 0;

  void validate() const {
    if (sites < 1) throw validation_error("site count must be >= 1");
    if (points_per_site < 2)
      throw validation_error("points per site must be >= 2 (endpoint grid)");
    if (replications < 1) throw validation_error("replication count must be >= 1");
  }
};

/// Ground-truth quantile curves of the synthetic benchmark, defined on
/// z in [0,1]^2. Both are strictly increasing bijections of [0,1] in tau.
inline double true_xi(CurveFamily which, double tau, std::span<const double> z) {
  if (!(tau >= 0.0 && tau <= 1.0))
    throw validation_error("tau outside [0,1]: " + std::to_string(tau));
  if (z.size() != 2) throw validation_error("truth surfaces are defined on [0,1]^2");
  for (double zi : z)
    if (!(zi >= 0.0 && zi <= 1.0))
      throw validation_error("z outside [0,1]^2: " + std::to_string(zi));
  constexpr double pi = 3.14159265358979323846;
  const double z1 = z[0], z2 = z[1];
  if (which == CurveFamily::first)
    return (1.0 - 0.5 * (z1 + z2)) * tau * tau +
           z1 * std::log1p(tau) / (2.0 * std::log(2.0)) + 0.5 * z2 * tau * tau * tau;
  return (1.0 - z2 * z2) * std::sin(0.5 * pi * tau) +
         z2 * z2 * (std::exp(tau) - 1.0) / (std::exp(1.0) - 1.0);
}

inline double true_quantile(double tau, double x, std::span<const double> z) {
  return x * true_xi(CurveFamily::first, tau, z) +
         (1.0 - x) * true_xi(CurveFamily::second, tau, z);
}

/// Truth handle for a generated dataset: the site layout plus the analytic
/// surfaces.
struct SimTruth {
  std::vector<std::array<double, 2>> sites;

  double quantile(double tau, double x, std::span<const double> z) const {
    return true_quantile(tau, x, z);
  }
  std::pair<double, double> slope_intercept(double tau, std::span<const double> z) const {
    const double xi1 = true_xi(CurveFamily::first, tau, z);
    const double xi2 = true_xi(CurveFamily::second, tau, z);
    return {xi2, xi1 - xi2};
  }
};

/// Synthetic dataset: L sites uniform on the unit square, a shared equidistant
/// time grid, and responses drawn by pushing U(0,1) through the true quantile
/// function. RNG order: all site coordinates first, then U site by site.
inline std::pair<Dataset, SimTruth> generate_dataset(const SimConfig& cfg, Rng& rng) {
  cfg.validate();
  Dataset data;
  data.dim = 2;
  data.transforms = TransformSpec::identity(2);
  SimTruth truth;
  truth.sites.resize(static_cast<std::size_t>(cfg.sites));
  data.sites.resize(static_cast<std::size_t>(cfg.sites));
  for (int l = 0; l < cfg.sites; ++l) {
    truth.sites[static_cast<std::size_t>(l)] = {rng.uniform(), rng.uniform()};
    auto& site = data.sites[static_cast<std::size_t>(l)];
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%03d", l + 1);
    site.id = buf;
    site.z = {truth.sites[static_cast<std::size_t>(l)][0],
              truth.sites[static_cast<std::size_t>(l)][1]};
  }
  const int n = cfg.points_per_site;
  for (int l = 0; l < cfg.sites; ++l) {
    auto& site = data.sites[static_cast<std::size_t>(l)];
    site.obs.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const double x = static_cast<double>(i) / (n - 1);
      const double u = rng.uniform();
      site.obs.emplace_back(x, true_quantile(u, x, site.z));
    }
  }
  return {std::move(data), std::move(truth)};
}

/// An estimated quantile surface: value and slope/intercept accessors.
struct QuantileEstimator {
  std::function<double(double tau, double x, std::span<const double> z)> q;
  std::function<std::pair<double, double>(double tau, std::span<const double> z)> ab;
};

inline QuantileEstimator estimator_from_model(QuantileModel m) {
  auto shared = std::make_shared<QuantileModel>(std::move(m));
  return {
      [shared](double tau, double x, std::span<const double> z) {
        return quantile(*shared, tau, x, z);
      },
      [shared](double tau, std::span<const double> z) {
        return slope_intercept(*shared, tau, z);
      }};
}

/// The averaged squared-error metrics: intercept, slope, and quantile value
/// at the three reference time points.
struct Metrics {
  double t1 = 0.0;                    // intercept MSE
  double t2 = 0.0;                    // slope MSE
  std::array<double, 3> tx{};         // quantile-value MSE at x = 0.2, 0.5, 0.8
  static constexpr std::array<double, 3> x_points{0.2, 0.5, 0.8};
};

/// Averages over the 19-level quantile grid tau = 0.05, ..., 0.95 and all
/// sites of the truth handle. Order-independent by compensated accumulation.
inline Metrics mse_metrics(const QuantileEstimator& est, const SimTruth& truth) {
  KahanSum s1, s2;
  std::array<KahanSum, 3> sx;
  long count = 0;
  for (const auto& zs : truth.sites) {
    const std::span<const double> z(zs.data(), 2);
    for (int t = 1; t <= 19; ++t) {
      const double tau = 0.05 * t;
      const auto [b0_true, b1_true] = truth.slope_intercept(tau, z);
      const auto [b0_hat, b1_hat] = est.ab(tau, z);
      s1.add((b0_true - b0_hat) * (b0_true - b0_hat));
      s2.add((b1_true - b1_hat) * (b1_true - b1_hat));
      for (std::size_t xi = 0; xi < Metrics::x_points.size(); ++xi) {
        const double x = Metrics::x_points[xi];
        const double d = truth.quantile(tau, x, z) - est.q(tau, x, z);
        sx[xi].add(d * d);
      }
      ++count;
    }
  }
  Metrics m;
  m.t1 = s1.value() / count;
  m.t2 = s2.value() / count;
  for (std::size_t xi = 0; xi < 3; ++xi) m.tx[xi] = sx[xi].value() / count;
  return m;
}

/// Per-replication fitting context handed to benchmark methods. The ML fit is
/// computed lazily and shared, so a Bayes method starts its chain from the
/// same estimate without refitting.
struct FitContext {
  const Dataset& data;
  const SimTruth& truth;
  int p1 = 3;
  int p2 = 3;
  OptimConfig optim;
  McmcConfig mcmc;  // seed already split per replication

  FitContext(const Dataset& d, const SimTruth& t) : data(d), truth(t) {}

  const QuantileModel& ml() {
    if (!ml_) ml_ = fit_mle(data, p1, p2, optim);
    return *ml_;
  }

 private:
  std::optional<QuantileModel> ml_;
};

struct BenchmarkMethod {
  std::string name;
  std::function<QuantileEstimator(FitContext&)> fit;
};

inline BenchmarkMethod method_ml() {
  return {"ml", [](FitContext& ctx) { return estimator_from_model(ctx.ml()); }};
}

/// ML-initialized posterior chain; the estimator evaluates the posterior-mean
/// field (exact for means, since the surfaces are linear in the spacings).
inline BenchmarkMethod method_bayes() {
  return {"bayes", [](FitContext& ctx) {
            const QuantileModel& start = ctx.ml();
            PosteriorSamples samples =
                run_chain(ctx.data, start.coeffs, start, ctx.mcmc);
            QuantileModel mean = start;
            mean.coeffs = samples.mean_field();
            return estimator_from_model(std::move(mean));
          }};
}

struct BenchmarkOptions {
  int p1 = 3;
  int p2 = 3;
  OptimConfig optim;
  McmcConfig mcmc;
  int threads = 1;
  std::function<void(const std::string&)> log;  // optional progress sink
};

struct SimResult {
  struct Cell {
    std::string method;
    int n = 0;
    Metrics metrics;
    int replications_used = 0;
    int replications_total = 0;
    bool unreliable = false;  // more than 20% of replications failed
    std::vector<std::string> errors;
  };
  std::vector<Cell> cells;

  const Cell* find(const std::string& method, int n) const {
    for (const auto& c : cells)
      if (c.method == method && c.n == n) return &c;
    return nullptr;
  }

  void to_csv(std::ostream& os) const {
    os << "method,n,metric,value,replications_used,flags\n";
    for (const auto& c : cells) {
      const std::array<std::pair<const char*, double>, 5> rows{
          {{"T1", c.metrics.t1},
           {"T2", c.metrics.t2},
           {"T0.2", c.metrics.tx[0]},
           {"T0.5", c.metrics.tx[1]},
           {"T0.8", c.metrics.tx[2]}}};
      for (const auto& [name, value] : rows)
        os << c.method << ',' << c.n << ',' << name << ',' << value << ','
           << c.replications_used << ',' << (c.unreliable ? "unreliable" : "") << '\n';
    }
  }
};

/// Full cross of methods x n values x replications. Replications use split
/// sub-seeds of the root seed; each replication's dataset and ML fit are
/// shared across methods. Failures are recorded per replication and excluded;
/// replications may run on several threads with thread-count-independent
/// output.
inline SimResult run_benchmark(const std::vector<BenchmarkMethod>& methods,
                               const std::vector<int>& n_values, const SimConfig& cfg,
                               const BenchmarkOptions& opts) {
  if (methods.empty()) throw validation_error("benchmark needs at least one method");
  if (n_values.empty()) throw validation_error("benchmark needs at least one n value");
  cfg.validate();
  opts.optim.validate();
  opts.mcmc.validate();

  struct RepOutcome {
    std::vector<std::optional<Metrics>> per_method;
    std::vector<std::string> errors;
  };
  const int s = cfg.replications;
  std::vector<std::vector<RepOutcome>> grid(
      n_values.size(), std::vector<RepOutcome>(static_cast<std::size_t>(s)));

  const auto run_cell = [&](std::size_t n_idx, int rep) {
    const std::uint64_t cell_seed =
        substream_seed(cfg.seed, n_idx * static_cast<std::size_t>(s) +
                                     static_cast<std::size_t>(rep));
    SimConfig rep_cfg = cfg;
    rep_cfg.points_per_site = n_values[n_idx];
    Rng rng(substream_seed(cell_seed, 0));
    auto [data, truth] = generate_dataset(rep_cfg, rng);

    FitContext ctx{data, truth};
    ctx.p1 = opts.p1;
    ctx.p2 = opts.p2;
    ctx.optim = opts.optim;
    ctx.mcmc = opts.mcmc;
    ctx.mcmc.seed = substream_seed(cell_seed, 1);

    RepOutcome out;
    out.per_method.resize(methods.size());
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      try {
        QuantileEstimator est = methods[mi].fit(ctx);
        out.per_method[mi] = mse_metrics(est, truth);
      } catch (const std::exception& e) {
        out.errors.push_back(methods[mi].name + " rep " + std::to_string(rep) + ": " +
                             e.what());
      }
      if (opts.log)
        opts.log("benchmark " + methods[mi].name + " n=" +
                 std::to_string(n_values[n_idx]) + " rep " + std::to_string(rep + 1) +
                 "/" + std::to_string(s));
    }
    grid[n_idx][static_cast<std::size_t>(rep)] = std::move(out);
  };

  const long total_items = static_cast<long>(n_values.size()) * s;
  if (opts.threads <= 1) {
    for (long item = 0; item < total_items; ++item)
      run_cell(static_cast<std::size_t>(item) / s, static_cast<int>(item % s));
  } else {
    std::atomic<long> next{0};
    std::vector<std::thread> pool;
    const int nthreads = std::min<long>(opts.threads, total_items);
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t)
      pool.emplace_back([&] {
        for (long item = next.fetch_add(1); item < total_items; item = next.fetch_add(1))
          run_cell(static_cast<std::size_t>(item) / s, static_cast<int>(item % s));
      });
    for (auto& th : pool) th.join();
  }

  SimResult result;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    for (std::size_t n_idx = 0; n_idx < n_values.size(); ++n_idx) {
      SimResult::Cell cell;
      cell.method = methods[mi].name;
      cell.n = n_values[n_idx];
      cell.replications_total = s;
      KahanSum t1, t2;
      std::array<KahanSum, 3> tx;
      for (int rep = 0; rep < s; ++rep) {
        const auto& out = grid[n_idx][static_cast<std::size_t>(rep)];
        if (out.per_method[mi]) {
          const Metrics& m = *out.per_method[mi];
          t1.add(m.t1);
          t2.add(m.t2);
          for (std::size_t xi = 0; xi < 3; ++xi) tx[xi].add(m.tx[xi]);
          ++cell.replications_used;
        }
        for (const auto& e : out.errors)
          if (e.rfind(cell.method, 0) == 0) cell.errors.push_back(e);
      }
      if (cell.replications_used > 0) {
        cell.metrics.t1 = t1.value() / cell.replications_used;
        cell.metrics.t2 = t2.value() / cell.replications_used;
        for (std::size_t xi = 0; xi < 3; ++xi)
          cell.metrics.tx[xi] = tx[xi].value() / cell.replications_used;
      }
      cell.unreliable = (s - cell.replications_used) * 5 > s;  // >20% failed
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

}  // namespace sstqr
