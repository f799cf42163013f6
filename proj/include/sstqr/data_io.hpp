#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <span>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sstqr/data.hpp"
#include "sstqr/model.hpp"
#include "sstqr/sampler.hpp"

namespace sstqr::io {

namespace detail {

/// One CSV record with RFC-4180 quoting (quoted fields may contain commas,
/// doubled quotes, and line breaks). Returns nothing at end of stream.
inline std::optional<std::vector<std::string>> read_record(std::istream& in,
                                                           std::size_t& line_no) {
  if (in.peek() == std::char_traits<char>::eof()) return std::nullopt;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  ++line_no;
  for (int ci = in.get(); ; ci = in.get()) {
    if (ci == std::char_traits<char>::eof()) {
      fields.push_back(std::move(field));
      return fields;
    }
    const char c = static_cast<char>(ci);
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line_no;
        field.push_back(c);
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      fields.push_back(std::move(field));
      return fields;
    } else {
      field.push_back(c);
    }
  }
}

inline std::optional<double> parse_double(const std::string& s) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

struct ReadResult {
  std::vector<Observation> observations;
  struct Rejected {
    std::size_t line;
    std::string reason;
  };
  std::vector<Rejected> rejected;  // rows skipped for unparseable numerics
  int dim = 0;
};

/// Parse observations from a CSV stream. The header must name site_id,
/// z1..zd, time, value (any order); d is inferred from the z columns. Rows
/// whose numeric fields do not parse are rejected with their line numbers.
/// An empty stream yields an empty result.
inline ReadResult read_observations(std::istream& in) {
  ReadResult out;
  std::size_t line_no = 0;
  auto header = detail::read_record(in, line_no);
  if (!header) return out;

  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header->size(); ++i) col[(*header)[i]] = i;
  const auto need = [&](const std::string& name) {
    auto it = col.find(name);
    if (it == col.end()) throw format_error("missing required column: " + name);
    return it->second;
  };
  const std::size_t c_site = need("site_id");
  const std::size_t c_time = need("time");
  const std::size_t c_value = need("value");
  int d = 0;
  std::vector<std::size_t> c_z;
  while (col.count("z" + std::to_string(d + 1))) c_z.push_back(col["z" + std::to_string(++d)]);
  if (d == 0) throw format_error("missing required column: z1");
  out.dim = d;

  while (auto rec = detail::read_record(in, line_no)) {
    if (rec->size() == 1 && (*rec)[0].empty()) continue;  // blank trailing line
    if (rec->size() != header->size()) {
      out.rejected.push_back({line_no, "field count " + std::to_string(rec->size()) +
                                           " does not match header"});
      continue;
    }
    Observation ob;
    ob.site_id = (*rec)[c_site];
    bool ok = true;
    const auto num = [&](std::size_t idx, const char* what) {
      auto v = detail::parse_double((*rec)[idx]);
      if (!v) {
        out.rejected.push_back({line_no, std::string("unparseable ") + what + ": '" +
                                             (*rec)[idx] + "'"});
        ok = false;
        return 0.0;
      }
      return *v;
    };
    for (int i = 0; i < d && ok; ++i)
      ob.coords.push_back(num(c_z[static_cast<std::size_t>(i)],
                              ("z" + std::to_string(i + 1)).c_str()));
    if (ok) ob.time = num(c_time, "time");
    if (ok) ob.value = num(c_value, "value");
    if (ok) out.observations.push_back(std::move(ob));
  }
  return out;
}

inline ReadResult read_observations_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open observations file: " + path);
  return read_observations(in);
}

/// Fit min-max transforms over all observations and map everything onto the
/// unit scale, grouping by site in first-appearance order. Zero-range time or
/// value is a degenerate-transform error; a zero-range spatial coordinate maps
/// to 0.5 through a unit-width window centered on it (a constant coordinate is
/// harmless to the model).
inline Dataset build_dataset(const std::vector<Observation>& obs) {
  if (obs.empty()) throw validation_error("cannot build a dataset from zero observations");
  const int d = static_cast<int>(obs.front().coords.size());
  for (const auto& ob : obs)
    if (static_cast<int>(ob.coords.size()) != d)
      throw format_error("inconsistent coordinate count in observations");

  TransformSpec tf;
  tf.coords.assign(static_cast<std::size_t>(d),
                   {std::numeric_limits<double>::infinity(),
                    -std::numeric_limits<double>::infinity()});
  tf.time = {std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity()};
  tf.value = tf.time;
  for (const auto& ob : obs) {
    for (int i = 0; i < d; ++i) {
      auto& r = tf.coords[static_cast<std::size_t>(i)];
      r.min = std::min(r.min, ob.coords[static_cast<std::size_t>(i)]);
      r.max = std::max(r.max, ob.coords[static_cast<std::size_t>(i)]);
    }
    tf.time.min = std::min(tf.time.min, ob.time);
    tf.time.max = std::max(tf.time.max, ob.time);
    tf.value.min = std::min(tf.value.min, ob.value);
    tf.value.max = std::max(tf.value.max, ob.value);
  }
  if (!(tf.time.max > tf.time.min))
    throw degenerate_error("degenerate transform: variable 'time' has zero range");
  if (!(tf.value.max > tf.value.min))
    throw degenerate_error("degenerate transform: variable 'value' has zero range");
  for (int i = 0; i < d; ++i) {
    auto& r = tf.coords[static_cast<std::size_t>(i)];
    if (!(r.max > r.min)) r = {r.min - 0.5, r.min + 0.5};
  }

  Dataset data;
  data.dim = d;
  data.transforms = tf;
  std::map<std::string, std::size_t> site_index;
  for (const auto& ob : obs) {
    auto [it, inserted] = site_index.try_emplace(ob.site_id, data.sites.size());
    if (inserted) {
      Dataset::Site site;
      site.id = ob.site_id;
      for (int i = 0; i < d; ++i)
        site.z.push_back(
            tf.coords[static_cast<std::size_t>(i)].apply(ob.coords[static_cast<std::size_t>(i)]));
      data.sites.push_back(std::move(site));
    } else {
      const auto& site = data.sites[it->second];
      for (int i = 0; i < d; ++i) {
        const double zi =
            tf.coords[static_cast<std::size_t>(i)].apply(ob.coords[static_cast<std::size_t>(i)]);
        if (std::abs(zi - site.z[static_cast<std::size_t>(i)]) > 1e-9)
          throw format_error("site " + ob.site_id + " appears with conflicting coordinates");
      }
    }
    data.sites[it->second].obs.emplace_back(tf.time.apply(ob.time),
                                            tf.value.apply(ob.value));
  }
  data.validate();
  return data;
}

inline void write_observations_csv(const Dataset& data, std::ostream& os) {
  os << "site_id";
  for (int i = 1; i <= data.dim; ++i) os << ",z" << i;
  os << ",time,value\n";
  for (const auto& site : data.sites)
    for (const auto& [x, y] : site.obs) {
      os << detail::csv_escape(site.id);
      for (int i = 0; i < data.dim; ++i)
        os << ',' << detail::format_double(
                          data.transforms.coords[static_cast<std::size_t>(i)].invert(
                              site.z[static_cast<std::size_t>(i)]));
      os << ',' << detail::format_double(data.transforms.time.invert(x)) << ','
         << detail::format_double(data.transforms.value.invert(y)) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Prediction grids

enum class GridMode { quantile, slope_intercept, threshold_quantile };

/// A prediction lattice in original units.
struct GridRequest {
  struct Axis {
    double min = 0.0;
    double max = 1.0;
    int count = 1;
  };
  std::vector<double> tau_list;  // in (0,1); unused in threshold mode
  std::vector<double> x_list;    // original-unit times; unused in slope mode
  std::vector<Axis> z_grid;      // one axis per spatial dimension
  GridMode mode = GridMode::quantile;
  std::optional<double> threshold;  // original units, threshold mode only
  double interval_mass = 0.95;      // posterior summaries

  void validate(int dim) const {
    if (static_cast<int>(z_grid.size()) != dim)
      throw validation_error("grid axes do not match model dimension");
    for (const auto& a : z_grid) {
      if (a.count < 1) throw validation_error("grid axis count must be >= 1");
      if (a.count > 1 && !(a.max > a.min))
        throw validation_error("grid axis range must be increasing");
    }
    if (mode != GridMode::threshold_quantile) {
      if (tau_list.empty()) throw validation_error("tau list must be nonempty");
      for (double t : tau_list)
        if (!(t > 0.0 && t < 1.0))
          throw validation_error("tau must lie in (0,1): " + std::to_string(t));
    }
    if (mode != GridMode::slope_intercept && x_list.empty())
      throw validation_error("x list must be nonempty");
    if ((mode == GridMode::threshold_quantile) != threshold.has_value())
      throw validation_error("threshold is required exactly in threshold mode");
    if (!(interval_mass > 0.0 && interval_mass <= 1.0))
      throw validation_error("interval mass must lie in (0, 1]");
  }
};

namespace detail {

inline double axis_point(const GridRequest::Axis& a, int i) {
  if (a.count == 1) return a.min;
  return a.min + (a.max - a.min) * static_cast<double>(i) / (a.count - 1);
}

struct Flags {
  bool x_clamped = false;
  bool z_clamped = false;
  bool threshold_clamped = false;
  bool degenerate = false;

  std::string str() const {
    std::string s;
    const auto put = [&s](const char* f) {
      if (!s.empty()) s += ';';
      s += f;
    };
    if (x_clamped) put("x_clamped");
    if (z_clamped) put("z_clamped");
    if (threshold_clamped) put("threshold_clamped");
    if (degenerate) put("degenerate");
    return s;
  }
};

/// Evaluates one grid cell for every model handed to it (one for a point
/// model, every draw for posterior input).
struct CellEval {
  std::vector<double> values;      // primary (q / tau-at-threshold), per model
  std::vector<double> values2;     // slope mode second column, per model
  Flags flags;
};

template <typename ModelRange>
CellEval eval_cell(const ModelRange& models, const TransformSpec& tf,
                   const GridRequest& req, double tau, double x_orig,
                   std::span<const double> z_orig) {
  CellEval out;
  std::vector<double> z_unit(z_orig.size());
  for (std::size_t i = 0; i < z_orig.size(); ++i)
    z_unit[i] = tf.coords[i].apply(z_orig[i], &out.flags.z_clamped);

  double x_unit = 0.0;
  if (req.mode != GridMode::slope_intercept)
    x_unit = tf.time.apply(x_orig, &out.flags.x_clamped);

  double y_unit = 0.0;
  if (req.mode == GridMode::threshold_quantile)
    y_unit = tf.value.apply(*req.threshold, &out.flags.threshold_clamped);

  for (const QuantileModel& m : models) {
    switch (req.mode) {
      case GridMode::quantile:
        out.values.push_back(tf.value.invert(quantile(m, tau, x_unit, z_unit)));
        break;
      case GridMode::slope_intercept: {
        const auto [b0, b1] = slope_intercept(m, tau, z_unit);
        out.values.push_back(tf.value.invert(b0));
        out.values2.push_back(b1 * tf.value.width() / tf.time.width());
        break;
      }
      case GridMode::threshold_quantile:
        try {
          out.values.push_back(inverse_quantile(m, y_unit, x_unit, z_unit));
        } catch (const degenerate_error&) {
          out.flags.degenerate = true;
          out.values.push_back(std::numeric_limits<double>::quiet_NaN());
        }
        break;
    }
  }
  return out;
}

struct Summary {
  double mean, lower, upper;
};

inline Summary summarize_values(std::vector<double> vals, double mass) {
  KahanSum mean;
  for (double v : vals) mean.add(v);
  std::sort(vals.begin(), vals.end());
  const auto at = [&](double q) {
    const double pos = q * static_cast<double>(vals.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, vals.size() - 1);
    return vals[lo] + (pos - static_cast<double>(lo)) * (vals[hi] - vals[lo]);
  };
  const double tail = 0.5 * (1.0 - mass);
  return {mean.value() / static_cast<double>(vals.size()), at(tail), at(1.0 - tail)};
}

template <typename ModelRange>
void export_grid_impl(const ModelRange& models, bool posterior, const TransformSpec& tf,
                      int dim, const GridRequest& req, std::ostream& os) {
  req.validate(dim);

  std::vector<const char*> value_cols;
  switch (req.mode) {
    case GridMode::quantile: value_cols = {"q"}; break;
    case GridMode::slope_intercept: value_cols = {"beta0", "beta1"}; break;
    case GridMode::threshold_quantile: value_cols = {"tau_at_threshold"}; break;
  }
  os << "tau,x";
  for (int i = 1; i <= dim; ++i) os << ",z" << i;
  os << ",flags";
  for (const char* c : value_cols) {
    if (posterior)
      os << ',' << c << "_mean," << c << "_lower," << c << "_upper";
    else
      os << ',' << c;
  }
  os << '\n';

  // Threshold mode has no tau input; slope mode has no x input. Blank columns
  // keep the header uniform across modes.
  const bool has_tau = req.mode != GridMode::threshold_quantile;
  const bool has_x = req.mode != GridMode::slope_intercept;
  const std::vector<double> taus = has_tau ? req.tau_list : std::vector<double>{0.0};
  const std::vector<double> xs = has_x ? req.x_list : std::vector<double>{0.0};

  long cells = 1;
  for (const auto& a : req.z_grid) cells *= a.count;

  std::vector<double> z(static_cast<std::size_t>(dim));
  for (double tau : taus) {
    for (double x : xs) {
      for (long cell = 0; cell < cells; ++cell) {
        long rem = cell;
        for (int i = dim - 1; i >= 0; --i) {
          const auto& a = req.z_grid[static_cast<std::size_t>(i)];
          z[static_cast<std::size_t>(i)] = axis_point(a, static_cast<int>(rem % a.count));
          rem /= a.count;
        }
        CellEval ev = eval_cell(models, tf, req, tau, x, z);

        if (has_tau) os << format_double(tau);
        os << ',';
        if (has_x) os << format_double(x);
        for (double zi : z) os << ',' << format_double(zi);
        os << ',' << ev.flags.str();

        const auto emit = [&](const std::vector<double>& vals) {
          if (ev.flags.degenerate) {
            os << (posterior ? ",,," : ",");
            return;
          }
          if (posterior) {
            const Summary s = summarize_values(vals, req.interval_mass);
            os << ',' << format_double(s.mean) << ',' << format_double(s.lower) << ','
               << format_double(s.upper);
          } else {
            os << ',' << format_double(vals.front());
          }
        };
        emit(ev.values);
        if (req.mode == GridMode::slope_intercept) emit(ev.values2);
        os << '\n';
      }
    }
  }
}

struct SingleModelRange {
  const QuantileModel* m;
  const QuantileModel* begin() const { return m; }
  const QuantileModel* end() const { return m + 1; }
};

struct DrawRange {
  const PosteriorSamples* s;
  mutable QuantileModel scratch;

  struct Iter {
    const DrawRange* r;
    std::size_t i;
    const QuantileModel& operator*() const {
      r->scratch.coeffs = r->s->draws[i];
      return r->scratch;
    }
    Iter& operator++() { ++i; return *this; }
    bool operator!=(const Iter& o) const { return i != o.i; }
  };
  Iter begin() const { return {this, 0}; }
  Iter end() const { return {this, s->draws.size()}; }
};

}  // namespace detail

/// Write the requested lattice for a point model. Output is a pure function
/// of (model, request): repeated calls are byte-identical.
inline void export_grid(const QuantileModel& m, const GridRequest& req, std::ostream& os) {
  detail::export_grid_impl(detail::SingleModelRange{&m}, false, m.transforms, m.dim, req, os);
}

/// Write the requested lattice for posterior samples; every cell carries the
/// posterior mean and the equal-tailed interval across draws.
inline void export_grid(const PosteriorSamples& samples, const GridRequest& req,
                        std::ostream& os) {
  if (samples.draws.empty()) throw validation_error("posterior sample set is empty");
  detail::DrawRange range{&samples, samples.shell};
  detail::export_grid_impl(range, true, samples.shell.transforms, samples.shell.dim, req, os);
}

// ---------------------------------------------------------------------------
// Persistence (versioned JSON schemas)

inline constexpr const char* kModelSchema = "sstqr-model/1";
inline constexpr const char* kSamplesSchema = "sstqr-samples/1";

namespace detail {

using nlohmann::json;

inline json basis_to_json(const BasisSpec& b) {
  return json{{"degree", b.degree}, {"intervals", b.intervals}};
}

inline BasisSpec basis_from_json(const json& j) {
  return build_spec(j.at("degree").get<int>(), j.at("intervals").get<int>());
}

inline json transforms_to_json(const TransformSpec& t) {
  json coords = json::array();
  for (const auto& r : t.coords) coords.push_back(json::array({r.min, r.max}));
  return json{{"coords", coords},
              {"time", json::array({t.time.min, t.time.max})},
              {"value", json::array({t.value.min, t.value.max})}};
}

inline TransformSpec transforms_from_json(const json& j) {
  TransformSpec t;
  for (const auto& r : j.at("coords"))
    t.coords.push_back({r.at(0).get<double>(), r.at(1).get<double>()});
  t.time = {j.at("time").at(0).get<double>(), j.at("time").at(1).get<double>()};
  t.value = {j.at("value").at(0).get<double>(), j.at("value").at(1).get<double>()};
  return t;
}

inline json field_to_json(const CoefficientField& f) {
  const auto family = [](const std::vector<SimplexBlock>& blocks) {
    json arr = json::array();
    for (const auto& b : blocks) arr.push_back(b.spacings);
    return arr;
  };
  return json{{"gamma", family(f.gamma)}, {"delta", family(f.delta)}};
}

inline void field_from_json(const json& j, CoefficientField& f) {
  const auto family = [&](const char* key, std::vector<SimplexBlock>& blocks) {
    blocks.clear();
    for (const auto& arr : j.at(key))
      blocks.push_back(SimplexBlock{arr.get<std::vector<double>>()});
  };
  family("gamma", f.gamma);
  family("delta", f.delta);
}

inline json shell_to_json(const QuantileModel& m) {
  return json{{"time_basis", basis_to_json(m.time_basis)},
              {"space_basis", basis_to_json(m.space_basis)},
              {"dim", m.dim},
              {"transforms", transforms_to_json(m.transforms)}};
}

inline QuantileModel shell_from_json(const json& j) {
  QuantileModel m;
  m.time_basis = basis_from_json(j.at("time_basis"));
  m.space_basis = basis_from_json(j.at("space_basis"));
  m.dim = j.at("dim").get<int>();
  m.transforms = transforms_from_json(j.at("transforms"));
  m.coeffs.dim = m.dim;
  m.coeffs.axis_size = m.space_size();
  m.coeffs.spacing_count = m.time_size() - 1;
  return m;
}

inline json parse_document(std::istream& in, const std::string& what) {
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw integrity_error(what + " is not a well-formed document: " + e.what());
  }
}

inline void check_schema(const json& doc, const char* expected, const std::string& what) {
  const std::string schema = doc.value("schema", "");
  if (schema != expected)
    throw incompatibility_error(what + " has schema '" + schema + "', expected '" +
                                expected + "'");
}

}  // namespace detail

inline void save_model(const QuantileModel& m, std::ostream& os) {
  m.validate();
  detail::json doc = detail::shell_to_json(m);
  doc["schema"] = kModelSchema;
  doc.update(detail::field_to_json(m.coeffs));
  os << doc.dump(1, '\t') << '\n';
}

inline QuantileModel load_model(std::istream& in) {
  const detail::json doc = detail::parse_document(in, "model file");
  detail::check_schema(doc, kModelSchema, "model file");
  try {
    QuantileModel m = detail::shell_from_json(doc);
    detail::field_from_json(doc, m.coeffs);
    m.validate();
    return m;
  } catch (const detail::json::exception& e) {
    throw integrity_error(std::string("model file is missing fields: ") + e.what());
  } catch (const validation_error& e) {
    throw integrity_error(std::string("model file violates invariants: ") + e.what());
  }
}

inline void save_samples(const PosteriorSamples& s, std::ostream& os) {
  detail::json doc;
  doc["schema"] = kSamplesSchema;
  doc["shell"] = detail::shell_to_json(s.shell);
  doc["config"] = detail::json{{"iterations", s.config.iterations},
                               {"burn_in", s.config.burn_in},
                               {"thin", s.config.thin},
                               {"r", s.config.r},
                               {"seed", s.config.seed},
                               {"floor", s.config.floor},
                               {"random_scan", s.config.random_scan}};
  doc["acceptance_rates"] = s.acceptance_rates;
  doc["loglik_trace"] = s.loglik_trace;
  detail::json draws = detail::json::array();
  for (const auto& d : s.draws) draws.push_back(detail::field_to_json(d));
  doc["draws"] = std::move(draws);
  os << doc.dump(1, '\t') << '\n';
}

inline PosteriorSamples load_samples(std::istream& in) {
  const detail::json doc = detail::parse_document(in, "samples file");
  detail::check_schema(doc, kSamplesSchema, "samples file");
  try {
    PosteriorSamples s;
    s.shell = detail::shell_from_json(doc.at("shell"));
    const auto& c = doc.at("config");
    s.config.iterations = c.at("iterations").get<long>();
    s.config.burn_in = c.at("burn_in").get<long>();
    s.config.thin = c.at("thin").get<long>();
    s.config.r = c.at("r").get<double>();
    s.config.seed = c.at("seed").get<std::uint64_t>();
    s.config.floor = c.at("floor").get<double>();
    s.config.random_scan = c.at("random_scan").get<bool>();
    s.acceptance_rates = doc.at("acceptance_rates").get<std::vector<double>>();
    s.loglik_trace = doc.at("loglik_trace").get<std::vector<double>>();
    for (const auto& d : doc.at("draws")) {
      CoefficientField f;
      f.dim = s.shell.dim;
      f.axis_size = s.shell.space_size();
      f.spacing_count = s.shell.time_size() - 1;
      detail::field_from_json(d, f);
      f.validate();
      s.draws.push_back(std::move(f));
    }
    s.shell.coeffs = s.draws.empty()
                         ? CoefficientField::uniform(s.shell.dim, s.shell.space_size(),
                                                     s.shell.time_size() - 1)
                         : s.draws.front();
    s.shell.validate();
    return s;
  } catch (const detail::json::exception& e) {
    throw integrity_error(std::string("samples file is missing fields: ") + e.what());
  } catch (const validation_error& e) {
    throw integrity_error(std::string("samples file violates invariants: ") + e.what());
  }
}

inline void save_model_file(const QuantileModel& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw format_error("cannot open output file: " + path);
  save_model(m, os);
}

inline QuantileModel load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open model file: " + path);
  return load_model(in);
}

inline void save_samples_file(const PosteriorSamples& s, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw format_error("cannot open output file: " + path);
  save_samples(s, os);
}

inline PosteriorSamples load_samples_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open samples file: " + path);
  return load_samples(in);
}

/// Schema string of a persisted document ("" when unreadable).
inline std::string peek_schema(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "";
  try {
    return detail::parse_document(in, "file").value("schema", "");
  } catch (const integrity_error&) {
    return "";
  }
}

}  // namespace sstqr::io
