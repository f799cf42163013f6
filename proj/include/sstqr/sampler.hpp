#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "sstqr/likelihood.hpp"
#include "sstqr/model.hpp"
#include "sstqr/numeric.hpp"

namespace sstqr {

struct McmcConfig {
  long iterations = 10000;
  long burn_in = 1000;
  long thin = 1;
  double r = 1.3;           // multiplier spread, U(1/r, r)
  std::uint64_t seed = 0;
  double floor = 1e-8;      // spacing floor applied to proposals
  bool random_scan = false; // default is the fixed lexicographic block order

  void validate() const {
    if (iterations < 1) throw validation_error("iterations must be >= 1");
    if (burn_in < 0 || burn_in >= iterations)
      throw validation_error("burn-in must satisfy 0 <= burn_in < iterations");
    if (thin < 1) throw validation_error("thin must be >= 1");
    if (!(r > 1.0)) throw validation_error("proposal spread r must be > 1");
    if (!(floor >= 0.0)) throw validation_error("spacing floor must be >= 0");
  }
};

/// Multiplicative simplex proposal: independent multipliers U_j ~ U(1/r, r)
/// applied to the spacings, renormalized, floored at `floor`, renormalized.
inline SimplexBlock propose_block(const SimplexBlock& block, double r, Rng& rng,
                                  double floor = 1e-8) {
  if (!(r > 1.0)) throw validation_error("proposal spread r must be > 1");
  const std::size_t k = block.spacings.size();
  std::vector<double> v(k);
  double sum = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    v[j] = block.spacings[j] * rng.uniform(1.0 / r, r);
    sum += v[j];
  }
  double floored = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    v[j] = std::max(v[j] / sum, floor);
    floored += v[j];
  }
  for (std::size_t j = 0; j < k; ++j) v[j] /= floored;
  return SimplexBlock{std::move(v)};
}

/// Log density of `to` given `from` under the multiplicative proposal, with
/// respect to Lebesgue measure on the first K-1 spacings. Unreachable pairs
/// (ratio spread beyond r^2) have density zero.
inline double proposal_log_density(const SimplexBlock& from, const SimplexBlock& to,
                                   double r) {
  if (!(r > 1.0)) throw validation_error("proposal spread r must be > 1");
  const std::size_t k = from.spacings.size();
  if (to.spacings.size() != k)
    throw validation_error("proposal density requires blocks of equal size");
  double log_ratio_min = std::numeric_limits<double>::infinity();
  double log_ratio_max = -std::numeric_limits<double>::infinity();
  double log_prod_from = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    if (!(from.spacings[j] > 0.0))
      throw domain_error("proposal density undefined: zero spacing in source block");
    const double lr = std::log(from.spacings[j]) - std::log(to.spacings[j]);
    log_ratio_min = std::min(log_ratio_min, lr);
    log_ratio_max = std::max(log_ratio_max, lr);
    log_prod_from += std::log(from.spacings[j]);
  }
  const double kk = static_cast<double>(k);
  const double log_d1 = kk * (std::log(r) + log_ratio_min);
  const double log_d2 = kk * (log_ratio_max - std::log(r));
  if (log_d1 <= log_d2) return -std::numeric_limits<double>::infinity();
  return kk * std::log(r / (r * r - 1.0)) - log_prod_from + log_d1 +
         std::log1p(-std::exp(log_d2 - log_d1)) - std::log(kk);
}

/// Per-block outcome of one sweep.
enum class BlockOutcome : std::uint8_t { rejected = 0, accepted = 1, failed = 2 };

namespace detail {

/// One full sweep over all 2 * J2^d blocks (first-curve blocks in flat order,
/// then second-curve blocks). Per block: K multiplier uniforms and exactly one
/// acceptance uniform are consumed, whatever the outcome, so streams stay
/// aligned across runs. The uniform Dirichlet prior cancels in the ratio.
inline void mh_sweep_impl(LikelihoodEvaluator& eval, const McmcConfig& cfg, Rng& rng,
                          std::vector<BlockOutcome>& outcomes) {
  const int nb = eval.state().blocks_per_family();
  const int total = 2 * nb;
  outcomes.assign(static_cast<std::size_t>(total), BlockOutcome::rejected);

  std::vector<int> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  if (cfg.random_scan) {
    for (int i = total - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.uniform() * (i + 1));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(std::min(j, i))]);
    }
  }

  for (int slot : order) {
    const CurveFamily fam = slot < nb ? CurveFamily::first : CurveFamily::second;
    const int flat = slot < nb ? slot : slot - nb;
    const SimplexBlock current = eval.state().block(fam, flat);
    const SimplexBlock proposal = propose_block(current, cfg.r, rng, cfg.floor);
    const double u = rng.uniform();

    const double ll_current = eval.total();
    auto probe = eval.probe(fam, flat, proposal.spacings);
    if (!probe.ok) {
      outcomes[static_cast<std::size_t>(slot)] = BlockOutcome::failed;
      continue;
    }
    double log_accept;
    try {
      log_accept = (probe.total - ll_current) +
                   proposal_log_density(proposal, current, cfg.r) -
                   proposal_log_density(current, proposal, cfg.r);
    } catch (const std::exception&) {
      outcomes[static_cast<std::size_t>(slot)] = BlockOutcome::failed;
      continue;
    }
    if (log_accept >= 0.0 || std::log(u) < log_accept) {
      eval.commit();
      outcomes[static_cast<std::size_t>(slot)] = BlockOutcome::accepted;
    }
  }
}

inline CoefficientField floored_field(CoefficientField f, double floor) {
  if (floor <= 0.0) return f;
  for (auto* fam : {&f.gamma, &f.delta})
    for (auto& blk : *fam) {
      double sum = 0.0;
      for (double& g : blk.spacings) {
        g = std::max(g, floor);
        sum += g;
      }
      for (double& g : blk.spacings) g /= sum;
    }
  return f;
}

}  // namespace detail

/// One block Metropolis-Hastings sweep from `state`. Returns the new state and
/// the per-block outcomes. Proposals whose likelihood evaluation fails are
/// rejected and flagged, never fatal.
inline std::pair<CoefficientField, std::vector<BlockOutcome>> mh_sweep(
    const CoefficientField& state, const Dataset& data, const QuantileModel& shell,
    const McmcConfig& cfg, Rng& rng) {
  cfg.validate();
  LikelihoodEvaluator eval(shell, state, data);
  std::vector<BlockOutcome> outcomes;
  detail::mh_sweep_impl(eval, cfg, rng, outcomes);
  return {eval.state(), std::move(outcomes)};
}

/// Ordered posterior draws with their trace and bookkeeping.
struct PosteriorSamples {
  std::vector<CoefficientField> draws;   // post-burn-in, thinned
  std::vector<double> loglik_trace;      // one entry per sweep, full length
  McmcConfig config;
  std::vector<double> acceptance_rates;  // per block, in [0,1]
  QuantileModel shell;                   // bases, dimension, transforms

  QuantileModel model_for_draw(std::size_t i) const {
    QuantileModel m = shell;
    m.coeffs = draws[i];
    return m;
  }

  /// Field of per-block posterior-mean spacings. Every model quantity is
  /// linear in the spacings, so evaluating this field gives posterior means.
  CoefficientField mean_field() const {
    if (draws.empty()) throw validation_error("no draws to average");
    CoefficientField mean = draws.front();
    const int nb = mean.blocks_per_family();
    for (auto fam : {CurveFamily::first, CurveFamily::second})
      for (int k = 0; k < nb; ++k) {
        auto& sp = mean.block(fam, k).spacings;
        for (std::size_t j = 0; j < sp.size(); ++j) {
          KahanSum s;
          for (const auto& d : draws) s.add(d.block(fam, k).spacings[j]);
          sp[j] = s.value() / static_cast<double>(draws.size());
        }
      }
    return mean;
  }
};

/// Run a chain of `iterations` sweeps from `init`. Identical (seed, inputs)
/// give bit-identical output. Spacings of the initial state are floored like
/// proposals so the proposal density is defined from the first sweep.
inline PosteriorSamples run_chain(const Dataset& data, const CoefficientField& init,
                                  const QuantileModel& shell, const McmcConfig& cfg) {
  cfg.validate();
  init.validate();
  PosteriorSamples out;
  out.config = cfg;
  out.shell = shell;
  out.shell.coeffs = detail::floored_field(init, cfg.floor);

  LikelihoodEvaluator eval(shell, out.shell.coeffs, data);
  Rng rng(cfg.seed);
  const int total_blocks = eval.block_count();
  std::vector<long> accepts(static_cast<std::size_t>(total_blocks), 0);
  std::vector<BlockOutcome> outcomes;
  out.loglik_trace.reserve(static_cast<std::size_t>(cfg.iterations));
  out.draws.reserve(static_cast<std::size_t>((cfg.iterations - cfg.burn_in) / cfg.thin));

  for (long sweep = 1; sweep <= cfg.iterations; ++sweep) {
    detail::mh_sweep_impl(eval, cfg, rng, outcomes);
    for (int b = 0; b < total_blocks; ++b)
      if (outcomes[static_cast<std::size_t>(b)] == BlockOutcome::accepted)
        ++accepts[static_cast<std::size_t>(b)];
    out.loglik_trace.push_back(eval.total());
    if (sweep > cfg.burn_in && (sweep - cfg.burn_in) % cfg.thin == 0)
      out.draws.push_back(eval.state());
  }

  out.acceptance_rates.resize(static_cast<std::size_t>(total_blocks));
  for (int b = 0; b < total_blocks; ++b)
    out.acceptance_rates[static_cast<std::size_t>(b)] =
        static_cast<double>(accepts[static_cast<std::size_t>(b)]) /
        static_cast<double>(cfg.iterations);
  return out;
}

/// Posterior mean and equal-tailed interval of Q(tau | x, z) across draws.
inline std::tuple<double, double, double> summarize(const PosteriorSamples& samples,
                                                    double tau, double x,
                                                    std::span<const double> z,
                                                    double interval_mass) {
  if (samples.draws.empty()) throw validation_error("posterior sample set is empty");
  if (!(interval_mass > 0.0 && interval_mass <= 1.0))
    throw validation_error("interval mass must lie in (0, 1]");
  std::vector<double> vals(samples.draws.size());
  QuantileModel m = samples.shell;
  KahanSum mean;
  for (std::size_t i = 0; i < samples.draws.size(); ++i) {
    m.coeffs = samples.draws[i];
    vals[i] = quantile(m, tau, x, z);
    mean.add(vals[i]);
  }
  std::sort(vals.begin(), vals.end());
  const auto at = [&](double q) {
    const double pos = q * static_cast<double>(vals.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, vals.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return vals[lo] + frac * (vals[hi] - vals[lo]);
  };
  const double tail = 0.5 * (1.0 - interval_mass);
  return {mean.value() / static_cast<double>(vals.size()), at(tail), at(1.0 - tail)};
}

}  // namespace sstqr
