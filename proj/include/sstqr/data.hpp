#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "sstqr/errors.hpp"

namespace sstqr {

/// One raw record in original units (e.g. lon/lat, calendar year, ppb).
struct Observation {
  std::string site_id;
  std::vector<double> coords;
  double time = 0.0;
  double value = 0.0;
};

/// Per-variable affine maps onto [0,1], fitted as min-max over training data.
/// Inputs outside the fitted range clamp and report a flag rather than
/// extrapolating.
struct TransformSpec {
  struct Range {
    double min = 0.0;
    double max = 1.0;

    double apply(double v, bool* clamped = nullptr) const {
      double u = (v - min) / (max - min);
      if (u < 0.0 || u > 1.0) {
        if (clamped) *clamped = true;
        u = u < 0.0 ? 0.0 : 1.0;
      }
      return u;
    }
    double invert(double u) const { return min + u * (max - min); }
    double width() const { return max - min; }
  };

  std::vector<Range> coords;  // one per spatial dimension
  Range time;
  Range value;

  /// Identity transforms for data already on unit scale.
  static TransformSpec identity(int dim) {
    TransformSpec t;
    t.coords.assign(static_cast<std::size_t>(dim), Range{0.0, 1.0});
    return t;
  }

  int dim() const { return static_cast<int>(coords.size()); }

  void validate() const {
    for (std::size_t i = 0; i < coords.size(); ++i)
      if (!(coords[i].max > coords[i].min))
        throw validation_error("transform for z" + std::to_string(i + 1) +
                               " has empty range");
    if (!(time.max > time.min)) throw validation_error("time transform has empty range");
    if (!(value.max > value.min)) throw validation_error("value transform has empty range");
  }
};

/// Unit-scale dataset: sites with coordinates in [0,1]^d and per-site (x, y)
/// pairs in [0,1]^2. Per-site counts may differ and duplicate x values within
/// a site are legal.
struct Dataset {
  struct Site {
    std::string id;
    std::vector<double> z;                        // unit coordinates, length d
    std::vector<std::pair<double, double>> obs;   // (x, y) pairs
  };

  int dim = 0;
  std::vector<Site> sites;
  TransformSpec transforms;

  std::size_t observation_count() const {
    std::size_t n = 0;
    for (const auto& s : sites) n += s.obs.size();
    return n;
  }

  void validate() const {
    for (const auto& s : sites) {
      if (static_cast<int>(s.z.size()) != dim)
        throw validation_error("site " + s.id + " has wrong coordinate count");
      for (double zi : s.z)
        if (!(zi >= 0.0 && zi <= 1.0))
          throw validation_error("site " + s.id + " has coordinate outside [0,1]");
      for (const auto& [x, y] : s.obs)
        if (!(x >= 0.0 && x <= 1.0) || !(y >= 0.0 && y <= 1.0))
          throw validation_error("site " + s.id + " has observation outside the unit square");
    }
  }
};

}  // namespace sstqr
