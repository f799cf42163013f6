#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sstqr/errors.hpp"

namespace sstqr {

/// Clamped B-spline basis on [0,1] with equidistant interior knots.
///
/// The knot vector repeats 0 and 1 (degree+1) times at the ends, so a curve
/// interpolates its first and last coefficients; interior knots sit at i/p.
/// Basis size is intervals + degree.
struct BasisSpec {
  int degree = 0;
  int intervals = 1;
  std::vector<double> knots;  // full clamped vector, size J + degree + 1

  int size() const { return degree + intervals; }

  bool operator==(const BasisSpec& o) const {
    return degree == o.degree && intervals == o.intervals;
  }
};

namespace detail {
// Stack-buffer cap for the de Boor triangle; build_spec enforces it.
inline constexpr int kMaxDegree = 31;
}  // namespace detail

inline BasisSpec build_spec(int degree, int intervals) {
  if (degree < 0) throw validation_error("basis degree must be >= 0");
  if (intervals < 1) throw validation_error("basis intervals must be >= 1");
  if (degree > detail::kMaxDegree)
    throw validation_error("basis degree exceeds supported maximum (" +
                           std::to_string(detail::kMaxDegree) + ")");
  BasisSpec spec;
  spec.degree = degree;
  spec.intervals = intervals;
  spec.knots.reserve(static_cast<std::size_t>(degree + intervals + degree + 1));
  for (int i = 0; i <= degree; ++i) spec.knots.push_back(0.0);
  for (int i = 1; i < intervals; ++i)
    spec.knots.push_back(static_cast<double>(i) / intervals);
  for (int i = 0; i <= degree; ++i) spec.knots.push_back(1.0);
  return spec;
}

namespace detail {

/// Knot span index k with knots[k] <= t < knots[k+1] (t = 1 maps to the last
/// nondegenerate span). k ranges over [degree, J-1].
inline int find_span(const BasisSpec& spec, double t) {
  const int last = spec.size() - 1;
  if (t >= 1.0) return last;
  auto begin = spec.knots.begin() + spec.degree;
  auto end = spec.knots.begin() + spec.size() + 1;
  auto it = std::upper_bound(begin, end, t);
  return static_cast<int>(it - spec.knots.begin()) - 1;
}

/// Nonzero basis values B_{span-degree .. span} at t, written to out[0..degree].
/// Standard triangular Cox-de Boor evaluation over one span.
inline void basis_at_span(const BasisSpec& spec, int span, double t, double* out) {
  const int m = spec.degree;
  const std::vector<double>& u = spec.knots;
  double left[kMaxDegree + 1];
  double right[kMaxDegree + 1];
  out[0] = 1.0;
  for (int j = 1; j <= m; ++j) {
    left[j] = t - u[span + 1 - j];
    right[j] = u[span + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      double tmp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    out[j] = saved;
  }
}

inline void check_unit_arg(double t, const char* what) {
  if (!(t >= 0.0 && t <= 1.0))
    throw domain_error(std::string(what) + " outside [0,1]: " + std::to_string(t));
}

}  // namespace detail

/// All J basis values at t. Entries are nonnegative, sum to one, and at most
/// degree+1 are nonzero. Interior knots use the right-continuous convention.
inline std::vector<double> eval_basis(const BasisSpec& spec, double t) {
  detail::check_unit_arg(t, "basis argument");
  std::vector<double> out(static_cast<std::size_t>(spec.size()), 0.0);
  const int span = detail::find_span(spec, t);
  double vals[detail::kMaxDegree + 1];
  detail::basis_at_span(spec, span, t, vals);
  for (int j = 0; j <= spec.degree; ++j) out[span - spec.degree + j] = vals[j];
  return out;
}

/// Curve value sum_j coeffs[j] * B_j(t).
inline double eval_curve(const BasisSpec& spec, std::span<const double> coeffs,
                         double t) {
  if (static_cast<int>(coeffs.size()) != spec.size())
    throw validation_error("coefficient count " + std::to_string(coeffs.size()) +
                           " does not match basis size " + std::to_string(spec.size()));
  detail::check_unit_arg(t, "curve argument");
  const int span = detail::find_span(spec, t);
  double vals[detail::kMaxDegree + 1];
  detail::basis_at_span(spec, span, t, vals);
  double acc = 0.0;
  for (int j = 0; j <= spec.degree; ++j)
    acc += coeffs[static_cast<std::size_t>(span - spec.degree + j)] * vals[j];
  return acc;
}

/// Exact derivative of a curve as a (degree-1, same intervals) expansion.
///
/// Coefficients follow the knot-exact rule m*(c_{j+1}-c_j)/(t_{j+m+1}-t_{j+1})
/// over the clamped knot vector; the divided difference shrinks near the ends,
/// so the factor is p in the interior and larger at the boundaries.
inline std::pair<BasisSpec, std::vector<double>> derivative_expansion(
    const BasisSpec& spec, std::span<const double> coeffs) {
  if (spec.degree < 1)
    throw unsupported_error("derivative of a degree-0 basis expansion");
  if (static_cast<int>(coeffs.size()) != spec.size())
    throw validation_error("coefficient count does not match basis size");
  const int m = spec.degree;
  BasisSpec dspec = build_spec(m - 1, spec.intervals);
  std::vector<double> dcoef(static_cast<std::size_t>(spec.size() - 1));
  for (int j = 0; j + 1 < spec.size(); ++j) {
    const double den = spec.knots[static_cast<std::size_t>(j + m + 1)] -
                       spec.knots[static_cast<std::size_t>(j + 1)];
    dcoef[static_cast<std::size_t>(j)] =
        m * (coeffs[static_cast<std::size_t>(j + 1)] - coeffs[static_cast<std::size_t>(j)]) / den;
  }
  return {std::move(dspec), std::move(dcoef)};
}

/// Knot averages; used as coefficients they reproduce the identity curve.
/// First entry is 0, last is 1. For degree 0 returns interval midpoints.
inline std::vector<double> greville_abscissae(const BasisSpec& spec) {
  const int m = spec.degree;
  std::vector<double> out(static_cast<std::size_t>(spec.size()));
  if (m == 0) {
    for (int j = 0; j < spec.size(); ++j)
      out[static_cast<std::size_t>(j)] =
          0.5 * (spec.knots[static_cast<std::size_t>(j)] + spec.knots[static_cast<std::size_t>(j + 1)]);
    return out;
  }
  for (int j = 0; j < spec.size(); ++j) {
    double acc = 0.0;
    for (int i = 1; i <= m; ++i) acc += spec.knots[static_cast<std::size_t>(j + i)];
    out[static_cast<std::size_t>(j)] = acc / m;
  }
  return out;
}

/// The intervals+1 breakpoints 0, 1/p, ..., 1 (distinct knot values).
inline std::vector<double> breakpoints(const BasisSpec& spec) {
  std::vector<double> b(static_cast<std::size_t>(spec.intervals + 1));
  for (int i = 0; i <= spec.intervals; ++i)
    b[static_cast<std::size_t>(i)] = spec.knots[static_cast<std::size_t>(spec.degree + i)];
  return b;
}

}  // namespace sstqr
