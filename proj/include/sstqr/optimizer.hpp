#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sstqr/likelihood.hpp"
#include "sstqr/model.hpp"
#include "sstqr/numeric.hpp"

namespace sstqr {

/// Tuning for greedy coordinate descent of varying step sizes on the simplex
/// blocks. Defaults are the standard published tuning for this regime.
struct OptimConfig {
  double s_initial = 1.0;
  double rho1 = 2.0;       // step decay in the first run
  double rho2 = 1.5;       // step decay in later runs
  double phi = 1e-1;       // step size threshold ending a run
  double lambda = 1e-2;    // sparsity threshold flooring -s moves
  double tol_fun_1 = 1e-1; // in-run improvement threshold triggering decay
  double tol_fun_2 = 1e-1; // across-run improvement threshold ending the search
  long max_iter = 5000;    // iterations per run
  long max_runs = 200;
  std::uint64_t seed = 0;
  std::ostream* trace = nullptr;  // optional CSV trace sink

  void validate() const {
    if (!(s_initial > 0.0)) throw validation_error("s_initial must be > 0");
    if (!(rho1 > 1.0) || !(rho2 > 1.0))
      throw validation_error("step decay rates must be > 1");
    if (!(phi > 0.0) || !(lambda > 0.0))
      throw validation_error("phi and lambda must be > 0");
    if (!(tol_fun_1 > 0.0) || !(tol_fun_2 > 0.0))
      throw validation_error("tolerances must be > 0");
    if (max_iter < 1 || max_runs < 1)
      throw validation_error("max_iter and max_runs must be >= 1");
  }
};

/// Objective over a coefficient field supporting cheap single-block probes.
class SimplexObjective {
 public:
  virtual ~SimplexObjective() = default;
  virtual const CoefficientField& state() const = 0;
  virtual double current() const = 0;
  /// Value if one block were replaced; -inf marks an invalid/failed point.
  virtual double probe(CurveFamily family, int flat, std::span<const double> spacings) = 0;
  virtual void commit(CurveFamily family, int flat, std::span<const double> spacings) = 0;
};

namespace detail {

class FunctionObjective final : public SimplexObjective {
 public:
  FunctionObjective(std::function<double(const CoefficientField&)> fn,
                    CoefficientField init)
      : fn_(std::move(fn)), state_(std::move(init)), value_(fn_(state_)) {}

  const CoefficientField& state() const override { return state_; }
  double current() const override { return value_; }

  double probe(CurveFamily family, int flat, std::span<const double> spacings) override {
    auto& blk = state_.block(family, flat).spacings;
    scratch_.assign(blk.begin(), blk.end());
    blk.assign(spacings.begin(), spacings.end());
    const double v = fn_(state_);
    blk.assign(scratch_.begin(), scratch_.end());
    return v;
  }

  void commit(CurveFamily family, int flat, std::span<const double> spacings) override {
    auto& blk = state_.block(family, flat).spacings;
    blk.assign(spacings.begin(), spacings.end());
    value_ = fn_(state_);
  }

 private:
  std::function<double(const CoefficientField&)> fn_;
  CoefficientField state_;
  double value_;
  std::vector<double> scratch_;
};

/// Log-likelihood objective backed by the caching evaluator.
class LikelihoodObjective final : public SimplexObjective {
 public:
  LikelihoodObjective(const QuantileModel& shell, const CoefficientField& init,
                      const Dataset& data)
      : eval_(shell, init, data) {}

  const CoefficientField& state() const override { return eval_.state(); }
  double current() const override { return eval_.total(); }

  double probe(CurveFamily family, int flat, std::span<const double> spacings) override {
    auto p = eval_.probe(family, flat, spacings);
    return p.ok ? p.total : -std::numeric_limits<double>::infinity();
  }

  void commit(CurveFamily family, int flat, std::span<const double> spacings) override {
    auto p = eval_.probe(family, flat, spacings);
    if (!p.ok) throw evaluation_error("cannot commit a failing candidate");
    eval_.commit();
  }

 private:
  LikelihoodEvaluator eval_;
};

struct Candidate {
  CurveFamily family = CurveFamily::first;
  int flat = 0;
  std::vector<double> spacings;
  double value = -std::numeric_limits<double>::infinity();
  bool found = false;
};

inline void plus_move(std::span<const double> cur, int j, double s,
                      std::vector<double>& out) {
  out.assign(cur.begin(), cur.end());
  out[static_cast<std::size_t>(j)] += s;
  double sum = 0.0;
  for (double v : out) sum += v;
  for (double& v : out) v /= sum;
}

/// -s move floored at lambda; reports false when the coordinate cannot move
/// down (already at or below the floor).
inline bool minus_move(std::span<const double> cur, int j, double s, double lambda,
                       std::vector<double>& out) {
  const double nj = std::max(cur[static_cast<std::size_t>(j)] - s, lambda);
  if (!(nj < cur[static_cast<std::size_t>(j)])) return false;
  out.assign(cur.begin(), cur.end());
  out[static_cast<std::size_t>(j)] = nj;
  double sum = 0.0;
  for (double v : out) sum += v;
  for (double& v : out) v /= sum;
  return true;
}

}  // namespace detail

/// Greedy coordinate descent of varying step sizes over all simplex blocks.
///
/// Per iteration every block and coordinate contributes a +s and a floored -s
/// candidate; the single best strictly-improving move is applied, and the
/// step decays whenever the best improvement does not exceed tol_fun_1. A run
/// ends once s < phi (or max_iter); runs restart from the incumbent with the
/// step reset, and the search stops after a run gains less than tol_fun_2.
inline double gcdvsms_core(SimplexObjective& obj, const OptimConfig& cfg) {
  cfg.validate();
  const int nb = obj.state().blocks_per_family();
  const int k = obj.state().spacing_count;
  if (cfg.trace) {
    *cfg.trace << "# spacing_dims=" << 2 * nb * k << " free_dims=" << 2 * nb * (k - 1)
               << "\niteration,run,step_size,objective\n";
  }

  double f_inc = obj.current();
  std::vector<double> move;
  detail::Candidate best;
  for (long run = 0; run < cfg.max_runs; ++run) {
    const double f_run_start = f_inc;
    const double rho = run == 0 ? cfg.rho1 : cfg.rho2;
    double s = cfg.s_initial;
    long iter = 0;
    while (s >= cfg.phi && iter < cfg.max_iter) {
      ++iter;
      best = detail::Candidate{};
      best.value = f_inc;
      for (CurveFamily fam : {CurveFamily::first, CurveFamily::second}) {
        for (int flat = 0; flat < nb; ++flat) {
          const auto& cur = obj.state().block(fam, flat).spacings;
          for (int j = 0; j < k; ++j) {
            detail::plus_move(cur, j, s, move);
            double v = obj.probe(fam, flat, move);
            if (v > best.value) best = {fam, flat, move, v, true};
            if (detail::minus_move(cur, j, s, cfg.lambda, move)) {
              v = obj.probe(fam, flat, move);
              if (v > best.value) best = {fam, flat, move, v, true};
            }
          }
        }
      }
      const double gain = best.found ? best.value - f_inc : 0.0;
      if (best.found) {
        obj.commit(best.family, best.flat, best.spacings);
        f_inc = obj.current();
      }
      if (cfg.trace)
        *cfg.trace << iter << ',' << run << ',' << s << ',' << f_inc << '\n';
      if (gain <= cfg.tol_fun_1) s /= rho;
    }
    if (f_inc - f_run_start < cfg.tol_fun_2) break;
  }
  return f_inc;
}

/// Maximize an arbitrary objective of the coefficient field.
inline std::pair<CoefficientField, double> gcdvsms_maximize(
    const std::function<double(const CoefficientField&)>& objective,
    const CoefficientField& init, const OptimConfig& cfg) {
  init.validate();
  detail::FunctionObjective obj(objective, init);
  const double best = gcdvsms_core(obj, cfg);
  return {obj.state(), best};
}

/// Maximum-likelihood fit: quadratic time basis over p1 intervals, cubic
/// spatial basis over p2 intervals, every block initialized at the uniform
/// simplex point.
inline QuantileModel fit_mle(const Dataset& data, int p1, int p2,
                             const OptimConfig& cfg) {
  cfg.validate();
  if (data.sites.empty() || data.observation_count() == 0)
    throw validation_error("cannot fit an empty dataset");
  if (p1 < 1 || p2 < 1) throw validation_error("interval counts must be >= 1");

  QuantileModel shell;
  shell.time_basis = build_spec(2, p1);
  shell.space_basis = build_spec(3, p2);
  shell.dim = data.dim;
  shell.transforms = data.transforms;
  shell.coeffs =
      CoefficientField::uniform(data.dim, shell.space_size(), shell.time_size() - 1);
  shell.validate();

  detail::LikelihoodObjective obj(shell, shell.coeffs, data);
  gcdvsms_core(obj, cfg);
  shell.coeffs = obj.state();
  return shell;
}

struct AicCell {
  int p1 = 0;
  int p2 = 0;
  double aic = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
  std::string error;
};

struct AicScanResult {
  QuantileModel best;
  std::vector<AicCell> table;
};

/// Fit every (p1, p2) pair and keep the minimum-AIC model. Failed cells are
/// recorded and skipped; ties break toward smaller p1+p2, then smaller p1.
inline AicScanResult aic_scan(const Dataset& data,
                              const std::vector<std::pair<int, int>>& grid,
                              const OptimConfig& cfg) {
  if (grid.empty()) throw validation_error("aic scan needs a nonempty grid");
  AicScanResult out;
  int best_idx = -1;
  for (const auto& [p1, p2] : grid) {
    AicCell cell;
    cell.p1 = p1;
    cell.p2 = p2;
    try {
      QuantileModel m = fit_mle(data, p1, p2, cfg);
      cell.aic = aic(m, data);
      cell.ok = true;
      const bool better =
          best_idx < 0 || cell.aic < out.table[static_cast<std::size_t>(best_idx)].aic ||
          (cell.aic == out.table[static_cast<std::size_t>(best_idx)].aic &&
           (p1 + p2 < out.table[static_cast<std::size_t>(best_idx)].p1 +
                          out.table[static_cast<std::size_t>(best_idx)].p2 ||
            (p1 + p2 == out.table[static_cast<std::size_t>(best_idx)].p1 +
                            out.table[static_cast<std::size_t>(best_idx)].p2 &&
             p1 < out.table[static_cast<std::size_t>(best_idx)].p1)));
      if (better) {
        best_idx = static_cast<int>(out.table.size());
        out.best = std::move(m);
      }
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
    out.table.push_back(std::move(cell));
  }
  if (best_idx < 0) throw evaluation_error("every aic scan cell failed");
  return out;
}

}  // namespace sstqr
