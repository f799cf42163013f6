#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sstqr/bspline.hpp"
#include "sstqr/data.hpp"
#include "sstqr/errors.hpp"
#include "sstqr/numeric.hpp"

namespace sstqr {

/// Spacings of one coefficient family at one spatial multi-index: nonnegative,
/// summing to one (a point of the closed unit simplex).
struct SimplexBlock {
  std::vector<double> spacings;

  void validate() const {
    KahanSum s;
    for (double g : spacings) {
      if (!(g >= 0.0)) throw validation_error("simplex spacing is negative or NaN");
      s.add(g);
    }
    if (std::abs(s.value() - 1.0) > 1e-12)
      throw validation_error("simplex spacings sum to " + std::to_string(s.value()) +
                             ", expected 1");
  }
};

enum class CurveFamily { first, second };  // slope curve vs intercept curve

/// The full parameter set: two simplex-block tensors indexed by the spatial
/// multi-index (row-major lexicographic flattening, first axis slowest).
/// Cumulative sums of a block, prefixed with 0, give one site-coefficient
/// vector rising from 0 to 1.
struct CoefficientField {
  int dim = 0;         // spatial dimension d
  int axis_size = 0;   // J2, blocks per axis
  int spacing_count = 0;  // J1 - 1 entries per block
  std::vector<SimplexBlock> gamma;  // first-curve blocks, axis_size^dim of them
  std::vector<SimplexBlock> delta;  // second-curve blocks, same shape

  int blocks_per_family() const {
    int n = 1;
    for (int i = 0; i < dim; ++i) n *= axis_size;
    return n;
  }

  const SimplexBlock& block(CurveFamily f, int flat) const {
    return f == CurveFamily::first ? gamma[static_cast<std::size_t>(flat)]
                                   : delta[static_cast<std::size_t>(flat)];
  }
  SimplexBlock& block(CurveFamily f, int flat) {
    return f == CurveFamily::first ? gamma[static_cast<std::size_t>(flat)]
                                   : delta[static_cast<std::size_t>(flat)];
  }

  /// All blocks at the uniform simplex point.
  static CoefficientField uniform(int dim, int axis_size, int spacing_count) {
    if (dim < 1 || axis_size < 1 || spacing_count < 1)
      throw validation_error("coefficient field shape must be positive");
    CoefficientField f;
    f.dim = dim;
    f.axis_size = axis_size;
    f.spacing_count = spacing_count;
    SimplexBlock b{std::vector<double>(static_cast<std::size_t>(spacing_count),
                                       1.0 / spacing_count)};
    f.gamma.assign(static_cast<std::size_t>(f.blocks_per_family()), b);
    f.delta.assign(static_cast<std::size_t>(f.blocks_per_family()), b);
    return f;
  }

  void validate() const {
    const auto n = static_cast<std::size_t>(blocks_per_family());
    if (gamma.size() != n || delta.size() != n)
      throw validation_error("coefficient field holds " + std::to_string(gamma.size()) +
                             "+" + std::to_string(delta.size()) + " blocks, expected 2x" +
                             std::to_string(n));
    for (const auto* fam : {&gamma, &delta})
      for (const auto& b : *fam) {
        if (static_cast<int>(b.spacings.size()) != spacing_count)
          throw validation_error("simplex block has wrong spacing count");
        b.validate();
      }
  }
};

/// The spatio-temporal quantile model. Q(tau | x, z) is the x-convex
/// combination of two monotone [0,1]-bijections in tau whose basis
/// coefficients vary smoothly over z through a tensor-product expansion.
struct QuantileModel {
  BasisSpec time_basis;   // degree m1 over p1 intervals; fitted runs use m1 = 2
  BasisSpec space_basis;  // degree m2 over p2 intervals; fitted runs use m2 = 3
  int dim = 0;
  CoefficientField coeffs;
  TransformSpec transforms;

  int time_size() const { return time_basis.size(); }   // J1
  int space_size() const { return space_basis.size(); }  // J2

  void validate() const {
    if (dim < 1) throw validation_error("model dimension must be >= 1");
    if (coeffs.dim != dim || coeffs.axis_size != space_size() ||
        coeffs.spacing_count != time_size() - 1)
      throw validation_error("coefficient field shape does not match basis specs");
    if (time_size() < 2) throw validation_error("time basis must have size >= 2");
    coeffs.validate();
    if (transforms.dim() != dim)
      throw validation_error("transform spec dimension does not match model");
    transforms.validate();
  }
};

namespace detail {

inline void check_site_coords(const QuantileModel& m, std::span<const double> z) {
  if (static_cast<int>(z.size()) != m.dim)
    throw validation_error("site coordinate count " + std::to_string(z.size()) +
                           " does not match model dimension " + std::to_string(m.dim));
  for (double zi : z)
    if (!(zi >= 0.0 && zi <= 1.0))
      throw validation_error("site coordinate outside [0,1]: " + std::to_string(zi));
}

/// Contracts one block family against the tensor-product spatial weights at z,
/// yielding the site's spacing vector (length J1-1).
inline std::vector<double> contract_spacings(const QuantileModel& m,
                                             std::span<const double> z,
                                             CurveFamily family) {
  const int d = m.dim;
  const int j2 = m.space_size();
  std::vector<std::vector<double>> axis(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i)
    axis[static_cast<std::size_t>(i)] = eval_basis(m.space_basis, z[static_cast<std::size_t>(i)]);

  const int k = m.coeffs.spacing_count;
  std::vector<double> g(static_cast<std::size_t>(k), 0.0);
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  const int nb = m.coeffs.blocks_per_family();
  for (int flat = 0; flat < nb; ++flat) {
    double w = 1.0;
    for (int i = 0; i < d; ++i)
      w *= axis[static_cast<std::size_t>(i)][static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    if (w != 0.0) {
      const auto& sp = m.coeffs.block(family, flat).spacings;
      for (int j = 0; j < k; ++j) g[static_cast<std::size_t>(j)] += w * sp[static_cast<std::size_t>(j)];
    }
    // odometer over (k1, ..., kd), last axis fastest
    for (int i = d - 1; i >= 0; --i) {
      if (++idx[static_cast<std::size_t>(i)] < j2) break;
      idx[static_cast<std::size_t>(i)] = 0;
    }
  }
  return g;
}

inline std::vector<double> cumulative_from_spacings(std::span<const double> g) {
  std::vector<double> c(g.size() + 1);
  c[0] = 0.0;
  KahanSum s;
  for (std::size_t j = 0; j < g.size(); ++j) {
    s.add(g[j]);
    c[j + 1] = s.value();
  }
  return c;
}

}  // namespace detail

/// Site coefficient vector of one curve at z: the tensor contraction of the
/// block family, cumulated from 0 up to 1 (length J1, nondecreasing).
inline std::vector<double> theta_at(const QuantileModel& m, std::span<const double> z,
                                    CurveFamily family) {
  detail::check_site_coords(m, z);
  return detail::cumulative_from_spacings(detail::contract_spacings(m, z, family));
}

namespace detail {

inline void check_unit_scalar(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0))
    throw validation_error(std::string(what) + " outside [0,1]: " + std::to_string(v));
}

/// Combined coefficient vector c = x * theta + (1-x) * phi; Q(.|x,z) is the
/// curve of c over the time basis.
inline std::vector<double> combined_coeffs(const QuantileModel& m, double x,
                                           std::span<const double> z) {
  std::vector<double> th = theta_at(m, z, CurveFamily::first);
  std::vector<double> ph = theta_at(m, z, CurveFamily::second);
  std::vector<double> c(th.size());
  for (std::size_t j = 0; j < c.size(); ++j) c[j] = x * th[j] + (1.0 - x) * ph[j];
  return c;
}

}  // namespace detail

/// Q(tau | x, z) on the unit scale.
inline double quantile(const QuantileModel& m, double tau, double x,
                       std::span<const double> z) {
  detail::check_unit_scalar(tau, "tau");
  detail::check_unit_scalar(x, "x");
  std::vector<double> c = detail::combined_coeffs(m, x, z);
  return eval_curve(m.time_basis, c, tau);
}

/// (intercept, slope) of Q(tau | ., z): intercept is the second curve's value,
/// slope is the first curve minus the second.
inline std::pair<double, double> slope_intercept(const QuantileModel& m, double tau,
                                                 std::span<const double> z) {
  detail::check_unit_scalar(tau, "tau");
  std::vector<double> th = theta_at(m, z, CurveFamily::first);
  std::vector<double> ph = theta_at(m, z, CurveFamily::second);
  const double xi1 = eval_curve(m.time_basis, th, tau);
  const double xi2 = eval_curve(m.time_basis, ph, tau);
  return {xi2, xi1 - xi2};
}

namespace detail {

struct IntervalSolve {
  double tau;
  int interval;  // breakpoint interval index solved on
};

/// Root of the monotone segment polynomial on breakpoint interval i, given the
/// combined coefficients. Closed form for degrees <= 2, safeguarded Newton for
/// higher degrees.
inline IntervalSolve solve_on_interval(const BasisSpec& basis, std::span<const double> c,
                                       std::span<const double> qk, int i, double y) {
  const double t_lo = static_cast<double>(i) / basis.intervals;
  const double t_hi = static_cast<double>(i + 1) / basis.intervals;
  const double h = t_hi - t_lo;
  const double q_lo = qk[static_cast<std::size_t>(i)];
  const double q_hi = qk[static_cast<std::size_t>(i + 1)];
  if (q_hi - q_lo <= 1e-15)
    throw degenerate_error("quantile curve is flat on [" + std::to_string(t_lo) + ", " +
                           std::to_string(t_hi) + "]; target has no unique preimage");

  if (basis.degree == 0)
    throw unsupported_error("inverse of a degree-0 (step) quantile curve");

  if (basis.degree == 1) {
    const double u = (y - q_lo) / (q_hi - q_lo) * h;
    return {std::min(std::max(t_lo + u, t_lo), t_hi), i};
  }

  if (basis.degree == 2) {
    // Segment polynomial q_lo + B u + A u^2 on u in [0, h]; B is the exact
    // derivative expansion evaluated at the left breakpoint.
    auto [dspec, dcoef] = derivative_expansion(basis, c);
    const double b = eval_curve(dspec, dcoef, t_lo);
    const double a = (q_hi - q_lo - b * h) / (h * h);
    const double g = y - q_lo;
    double u;
    if (std::abs(a) < 1e-14) {
      if (b <= 0.0)
        throw degenerate_error("quantile curve is locally flat at t=" + std::to_string(t_lo));
      u = g / b;
    } else {
      double disc = b * b + 4.0 * a * g;
      if (disc < 0.0) disc = 0.0;
      const double root = std::sqrt(disc);
      const double q = -0.5 * (b + (b >= 0.0 ? root : -root));
      const double r1 = q / a;
      const double r2 = (q != 0.0) ? -g / q : std::numeric_limits<double>::infinity();
      const double tol = 1e-12 + 1e-9 * h;
      const bool in1 = r1 >= -tol && r1 <= h + tol;
      const bool in2 = r2 >= -tol && r2 <= h + tol;
      if (in1 && in2 && r1 != r2) {
        // tangency within tolerance: keep the root with the smaller residual
        const double res1 = std::abs(a * r1 * r1 + b * r1 - g);
        const double res2 = std::abs(a * r2 * r2 + b * r2 - g);
        u = res1 <= res2 ? r1 : r2;
      } else if (in1) {
        u = r1;
      } else if (in2) {
        u = r2;
      } else {
        u = std::min(std::max(r1, 0.0), h);  // FP spill just outside the bracket
      }
    }
    u = std::min(std::max(u, 0.0), h);
    return {t_lo + u, i};
  }

  // Generic monotone segment: Newton from the midpoint with a bisection
  // safeguard, down to residual 1e-12.
  auto [dspec, dcoef] = derivative_expansion(basis, c);
  double lo = t_lo, hi = t_hi;
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double f = eval_curve(basis, c, t) - y;
    if (std::abs(f) < 1e-12) break;
    if (f > 0.0)
      hi = t;
    else
      lo = t;
    const double df = eval_curve(dspec, dcoef, t);
    double next = df > 0.0 ? t - f / df : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    t = next;
  }
  return {t, i};
}

inline IntervalSolve inverse_quantile_impl(const BasisSpec& basis, double y,
                                           std::span<const double> c) {
  // Q at the p1+1 breakpoints; Q(0) = 0 exactly by the boundary constraints.
  const int p = basis.intervals;
  std::vector<double> qk(static_cast<std::size_t>(p + 1));
  for (int i = 0; i <= p; ++i)
    qk[static_cast<std::size_t>(i)] = eval_curve(basis, c, static_cast<double>(i) / p);
  // a breakpoint interval that is flat at the target level has no unique
  // preimage (zero spacings only)
  for (int i = 0; i < p; ++i)
    if (qk[static_cast<std::size_t>(i + 1)] - qk[static_cast<std::size_t>(i)] <= 1e-15 &&
        std::abs(y - qk[static_cast<std::size_t>(i)]) <= 1e-12)
      throw degenerate_error("quantile curve is flat at the target level on [" +
                             std::to_string(static_cast<double>(i) / p) + ", " +
                             std::to_string(static_cast<double>(i + 1) / p) + "]");
  int i = 0;
  while (i < p - 1 && y > qk[static_cast<std::size_t>(i + 1)]) ++i;
  return solve_on_interval(basis, c, qk, i, y);
}

}  // namespace detail

/// The unique tau with Q(tau | x, z) = y. Locates the breakpoint interval by a
/// monotone scan of Q at the knot values, then solves the segment polynomial.
inline double inverse_quantile(const QuantileModel& m, double y, double x,
                               std::span<const double> z) {
  detail::check_unit_scalar(x, "x");
  detail::check_site_coords(m, z);
  if (!(y >= 0.0 && y <= 1.0))
    throw domain_error("target value outside [Q(0), Q(1)] = [0,1]: " + std::to_string(y));
  if (y == 0.0) return 0.0;
  if (y == 1.0) return 1.0;
  std::vector<double> c = detail::combined_coeffs(m, x, z);
  return detail::inverse_quantile_impl(m.time_basis, y, c).tau;
}

/// Log density of y at (x, z): -log Q'(tau_hat) with tau_hat the inverse
/// quantile and the slope taken from the exact derivative expansion.
inline double log_density(const QuantileModel& m, double x, double y,
                          std::span<const double> z) {
  detail::check_unit_scalar(x, "x");
  detail::check_site_coords(m, z);
  if (!(y >= 0.0 && y <= 1.0))
    throw domain_error("observation outside [0,1]: " + std::to_string(y));
  std::vector<double> c = detail::combined_coeffs(m, x, z);
  double tau;
  if (y == 0.0)
    tau = 0.0;
  else if (y == 1.0)
    tau = 1.0;
  else
    tau = detail::inverse_quantile_impl(m.time_basis, y, c).tau;
  auto [dspec, dcoef] = derivative_expansion(m.time_basis, c);
  const double slope = eval_curve(dspec, dcoef, tau);
  if (!(slope > 0.0))
    throw evaluation_error("nonpositive quantile slope " + std::to_string(slope) +
                           " at tau=" + std::to_string(tau));
  return -std::log(slope);
}

/// Sum of per-observation log densities over all sites; 0 for an empty
/// dataset. Per-site sizes may be ragged. Compensated summation keeps the
/// result stable (1e-12) under observation reordering.
inline double log_likelihood(const QuantileModel& m, const Dataset& data) {
  if (data.dim != m.dim)
    throw validation_error("dataset dimension does not match model");
  KahanSum total;
  for (std::size_t l = 0; l < data.sites.size(); ++l) {
    const auto& site = data.sites[l];
    std::vector<double> th = theta_at(m, site.z, CurveFamily::first);
    std::vector<double> ph = theta_at(m, site.z, CurveFamily::second);
    std::vector<double> c(th.size());
    for (std::size_t i = 0; i < site.obs.size(); ++i) {
      const auto [x, y] = site.obs[i];
      try {
        detail::check_unit_scalar(x, "x");
        if (!(y >= 0.0 && y <= 1.0)) throw domain_error("observation outside [0,1]");
        for (std::size_t j = 0; j < c.size(); ++j) c[j] = x * th[j] + (1.0 - x) * ph[j];
        double tau;
        if (y == 0.0)
          tau = 0.0;
        else if (y == 1.0)
          tau = 1.0;
        else
          tau = detail::inverse_quantile_impl(m.time_basis, y, c).tau;
        auto [dspec, dcoef] = derivative_expansion(m.time_basis, c);
        const double slope = eval_curve(dspec, dcoef, tau);
        if (!(slope > 0.0)) throw evaluation_error("nonpositive quantile slope");
        total.add(-std::log(slope));
      } catch (const std::exception& e) {
        throw evaluation_error("site " + site.id + " observation " + std::to_string(i) +
                               ": " + e.what());
      }
    }
  }
  return total.value();
}

/// Free parameter count: two families, one block per spatial multi-index, and
/// J1-2 free dimensions per simplex block.
inline long param_count(const QuantileModel& m) {
  const long free_per_block = std::max(0, m.time_size() - 2);
  return 2L * m.coeffs.blocks_per_family() * free_per_block;
}

inline double aic(const QuantileModel& m, const Dataset& data) {
  return 2.0 * static_cast<double>(param_count(m)) - 2.0 * log_likelihood(m, data);
}

}  // namespace sstqr
