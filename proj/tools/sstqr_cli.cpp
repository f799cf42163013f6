// Command-line surface for the spatio-temporal quantile regression library:
// simulate | fit | predict | aic-scan | benchmark.
//
// Exit codes: 0 success, 1 validation error, 2 data error, 3 numerical error.

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sstqr/sstqr.hpp"

namespace {

using nlohmann::json;
using namespace sstqr;

std::vector<double> parse_double_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw validation_error(std::string("cannot parse ") + what + " entry: '" + tok + "'");
    }
  }
  if (out.empty()) throw validation_error(std::string(what) + " list is empty");
  return out;
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  for (double v : parse_double_list(text, what)) out.push_back(static_cast<int>(v));
  return out;
}

struct OptimFlags {
  OptimConfig cfg;
  std::string trace_path;

  void attach(CLI::App* cmd) {
    cmd->add_option("--s-initial", cfg.s_initial, "Initial global step size")
        ->capture_default_str();
    cmd->add_option("--rho1", cfg.rho1, "Step decay rate in the first run")
        ->capture_default_str();
    cmd->add_option("--rho2", cfg.rho2, "Step decay rate in later runs")
        ->capture_default_str();
    cmd->add_option("--phi", cfg.phi, "Step size threshold ending a run")
        ->capture_default_str();
    cmd->add_option("--lambda", cfg.lambda, "Sparsity threshold for downward moves")
        ->capture_default_str();
    cmd->add_option("--tol-fun-1", cfg.tol_fun_1,
                    "In-run improvement threshold triggering step decay")
        ->capture_default_str();
    cmd->add_option("--tol-fun-2", cfg.tol_fun_2,
                    "Across-run improvement threshold ending the search")
        ->capture_default_str();
    cmd->add_option("--max-iter", cfg.max_iter, "Maximum iterations per run")
        ->capture_default_str();
    cmd->add_option("--max-runs", cfg.max_runs, "Maximum number of runs")
        ->capture_default_str();
    cmd->add_option("--trace-file", trace_path,
                    "Write the optimization trace (iteration,run,step,objective) as CSV");
  }
};

struct McmcFlags {
  McmcConfig cfg;

  void attach(CLI::App* cmd) {
    cmd->add_option("--iterations", cfg.iterations, "MCMC sweeps to run")
        ->capture_default_str();
    cmd->add_option("--burn-in", cfg.burn_in, "Leading sweeps to disregard")
        ->capture_default_str();
    cmd->add_option("--thin", cfg.thin, "Keep every k-th post-burn-in draw")
        ->capture_default_str();
    cmd->add_option("--r", cfg.r, "Proposal multiplier spread, U(1/r, r)")
        ->capture_default_str();
    cmd->add_option("--floor", cfg.floor, "Spacing floor applied to proposals")
        ->capture_default_str();
    cmd->add_flag("--random-scan", cfg.random_scan,
                  "Visit blocks in random order instead of the fixed order");
  }
};

Dataset load_dataset(const std::string& path) {
  const io::ReadResult r = io::read_observations_file(path);
  for (const auto& rej : r.rejected)
    std::cerr << "warning: " << path << ":" << rej.line << ": " << rej.reason
              << " (row skipped)\n";
  return io::build_dataset(r.observations);
}

int run_simulate(int sites, int n, std::uint64_t seed, const std::string& out,
                 std::string truth_out) {
  SimConfig cfg;
  cfg.sites = sites;
  cfg.points_per_site = n;
  cfg.replications = 1;
  cfg.seed = seed;
  cfg.validate();
  Rng rng(seed);
  auto [data, truth] = generate_dataset(cfg, rng);

  std::ofstream os(out, std::ios::binary);
  if (!os) throw format_error("cannot open output file: " + out);
  io::write_observations_csv(data, os);
  std::cout << "simulate: wrote " << data.observation_count() << " observations at "
            << sites << " sites to " << out << "\n";

  if (truth_out.empty()) truth_out = out + ".truth.json";
  {
    json doc;
    doc["schema"] = "sstqr-truth/1";
    doc["seed"] = seed;
    doc["sites"] = json::array();
    for (const auto& z : truth.sites) doc["sites"].push_back(json::array({z[0], z[1]}));
    std::ofstream ts(truth_out, std::ios::binary);
    if (!ts) throw format_error("cannot open output file: " + truth_out);
    ts << doc.dump(1, '\t') << '\n';
    std::cout << "simulate: wrote truth handle to " << truth_out << "\n";
  }
  return 0;
}

int run_fit(const std::string& data_path, const std::string& mode, int p1, int p2,
            OptimFlags& optim, McmcFlags& mcmc, std::uint64_t seed,
            const std::string& init_path, const std::string& out,
            std::string report_path) {
  if (mode != "ml" && mode != "bayes")
    throw validation_error("unknown fit mode: " + mode);
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset data = load_dataset(data_path);
  std::cout << "fit: " << data.sites.size() << " sites, " << data.observation_count()
            << " observations\n";

  std::ofstream trace;
  if (!optim.trace_path.empty()) {
    trace.open(optim.trace_path, std::ios::binary);
    if (!trace) throw format_error("cannot open trace file: " + optim.trace_path);
    optim.cfg.trace = &trace;
  }
  optim.cfg.seed = seed;
  mcmc.cfg.seed = seed;

  json report;
  report["mode"] = mode;
  QuantileModel model;

  if (mode == "ml" || init_path.empty()) {
    model = fit_mle(data, p1, p2, optim.cfg);
    const double ll = log_likelihood(model, data);
    const double a = aic(model, data);
    std::cout << "fit: ml log-likelihood " << ll << ", aic " << a << "\n";
    report["ml_loglik"] = ll;
    report["aic"] = a;
  } else {
    model = io::load_model_file(init_path);
    std::cout << "fit: initialized from " << init_path << "\n";
    report["init_file"] = init_path;
  }

  if (mode == "bayes") {
    const PosteriorSamples samples = run_chain(data, model.coeffs, model, mcmc.cfg);
    double acc_mean = 0.0, acc_min = 1.0, acc_max = 0.0;
    for (double a : samples.acceptance_rates) {
      acc_mean += a;
      acc_min = std::min(acc_min, a);
      acc_max = std::max(acc_max, a);
    }
    acc_mean /= static_cast<double>(samples.acceptance_rates.size());
    std::cout << "fit: " << samples.draws.size() << " posterior draws, mean acceptance "
              << acc_mean << "\n";
    report["draws"] = samples.draws.size();
    report["mean_acceptance"] = acc_mean;
    report["min_acceptance"] = acc_min;
    report["max_acceptance"] = acc_max;
    report["final_loglik"] = samples.loglik_trace.back();
    io::save_samples_file(samples, out);
  } else {
    io::save_model_file(model, out);
  }
  std::cout << "fit: wrote " << out << "\n";

  const auto t1 = std::chrono::steady_clock::now();
  report["wall_time_seconds"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count() / 1000.0;
  if (report_path.empty()) report_path = out + ".report.json";
  std::ofstream rs(report_path, std::ios::binary);
  if (!rs) throw format_error("cannot open report file: " + report_path);
  rs << report.dump(1, '\t') << '\n';
  return 0;
}

io::GridRequest make_grid_request(const TransformSpec& tf, const std::string& mode_name,
                                  const std::string& tau_text, const std::string& x_text,
                                  const std::string& zgrid_text,
                                  const std::string& grid_text,
                                  std::optional<double> threshold, double interval_mass) {
  io::GridRequest req;
  if (mode_name == "quantile")
    req.mode = io::GridMode::quantile;
  else if (mode_name == "slope")
    req.mode = io::GridMode::slope_intercept;
  else if (mode_name == "threshold")
    req.mode = io::GridMode::threshold_quantile;
  else
    throw validation_error("unknown predict mode: " + mode_name);

  if (req.mode != io::GridMode::threshold_quantile)
    req.tau_list = parse_double_list(tau_text, "tau");
  if (req.mode != io::GridMode::slope_intercept)
    req.x_list = parse_double_list(x_text, "x");
  req.threshold = threshold;
  req.interval_mass = interval_mass;

  if (!zgrid_text.empty()) {
    // per-dimension "min:max:count" triples
    std::stringstream ss(zgrid_text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      io::GridRequest::Axis axis;
      if (std::sscanf(tok.c_str(), "%lf:%lf:%d", &axis.min, &axis.max, &axis.count) != 3)
        throw validation_error("cannot parse z-grid axis '" + tok +
                               "', expected min:max:count");
      req.z_grid.push_back(axis);
    }
  } else if (!grid_text.empty()) {
    // counts only; ranges come from the model's fitted coordinate transforms
    std::vector<int> counts;
    std::stringstream ss(grid_text);
    std::string tok;
    while (std::getline(ss, tok, 'x')) counts.push_back(std::stoi(tok));
    if (counts.size() != tf.coords.size())
      throw validation_error("--grid has " + std::to_string(counts.size()) +
                             " axes, model has " + std::to_string(tf.coords.size()));
    for (std::size_t i = 0; i < counts.size(); ++i)
      req.z_grid.push_back({tf.coords[i].min, tf.coords[i].max, counts[i]});
  } else {
    throw validation_error("one of --z-grid or --grid is required");
  }
  return req;
}

int run_predict(const std::string& model_path, const std::string& mode_name,
                const std::string& tau_text, const std::string& x_text,
                const std::string& zgrid_text, const std::string& grid_text,
                std::optional<double> threshold, double interval_mass,
                const std::string& out) {
  const std::string schema = io::peek_schema(model_path);
  std::ostringstream body;
  if (schema == io::kSamplesSchema) {
    const PosteriorSamples samples = io::load_samples_file(model_path);
    const io::GridRequest req =
        make_grid_request(samples.shell.transforms, mode_name, tau_text, x_text,
                          zgrid_text, grid_text, threshold, interval_mass);
    io::export_grid(samples, req, body);
    std::cout << "predict: posterior grid over " << samples.draws.size() << " draws\n";
  } else {
    const QuantileModel model = io::load_model_file(model_path);
    const io::GridRequest req =
        make_grid_request(model.transforms, mode_name, tau_text, x_text, zgrid_text,
                          grid_text, threshold, interval_mass);
    io::export_grid(model, req, body);
  }
  std::ofstream os(out, std::ios::binary);
  if (!os) throw format_error("cannot open output file: " + out);
  const std::string text = body.str();
  os << text;

  long rows = -1;  // exclude the header
  for (char c : text)
    if (c == '\n') ++rows;
  std::cout << "predict: wrote " << rows << " grid rows to " << out << "\n";
  return 0;
}

int run_aic_scan(const std::string& data_path, const std::string& grid_text,
                 OptimFlags& optim, std::uint64_t seed, const std::string& out,
                 const std::string& table_path) {
  const Dataset data = load_dataset(data_path);
  std::vector<std::pair<int, int>> grid;
  std::stringstream ss(grid_text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    int p1 = 0, p2 = 0;
    if (std::sscanf(tok.c_str(), "%dx%d", &p1, &p2) == 2)
      grid.emplace_back(p1, p2);
    else
      grid.emplace_back(std::stoi(tok), std::stoi(tok));
  }
  optim.cfg.seed = seed;
  std::ofstream trace;
  if (!optim.trace_path.empty()) {
    trace.open(optim.trace_path, std::ios::binary);
    optim.cfg.trace = &trace;
  }

  const AicScanResult res = aic_scan(data, grid, optim.cfg);
  std::ostringstream table;
  table << "p1,p2,aic,status\n";
  for (const auto& cell : res.table) {
    table << cell.p1 << ',' << cell.p2 << ',';
    if (cell.ok)
      table << cell.aic << ",ok\n";
    else
      table << ",failed\n";
    std::cout << "aic-scan: p1=" << cell.p1 << " p2=" << cell.p2 << " -> "
              << (cell.ok ? std::to_string(cell.aic) : "failed: " + cell.error) << "\n";
  }
  if (!table_path.empty()) {
    std::ofstream ts(table_path, std::ios::binary);
    if (!ts) throw format_error("cannot open table file: " + table_path);
    ts << table.str();
  }
  io::save_model_file(res.best, out);
  std::cout << "aic-scan: winner p1=" << res.best.time_basis.intervals
            << " p2=" << res.best.space_basis.intervals << " written to " << out << "\n";
  return 0;
}

int run_benchmark_cmd(const std::string& methods_text, const std::string& n_text,
                      int reps, int sites, int p1, int p2, OptimFlags& optim,
                      McmcFlags& mcmc, std::uint64_t seed, int threads,
                      const std::string& out) {
  std::vector<BenchmarkMethod> methods;
  {
    std::stringstream ss(methods_text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok == "ml")
        methods.push_back(method_ml());
      else if (tok == "bayes")
        methods.push_back(method_bayes());
      else
        throw validation_error("unknown benchmark method: " + tok);
    }
  }
  SimConfig cfg;
  cfg.sites = sites;
  cfg.replications = reps;
  cfg.seed = seed;

  BenchmarkOptions opts;
  opts.p1 = p1;
  opts.p2 = p2;
  opts.optim = optim.cfg;
  opts.mcmc = mcmc.cfg;
  opts.threads = threads;
  opts.log = [](const std::string& line) { std::cout << line << "\n"; };

  const SimResult res = run_benchmark(methods, parse_int_list(n_text, "n"), cfg, opts);
  std::ofstream os(out, std::ios::binary);
  if (!os) throw format_error("cannot open output file: " + out);
  res.to_csv(os);
  res.to_csv(std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal simultaneous quantile regression"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read flags from a config file (flags win on conflict)");

  std::uint64_t seed = 1;
  int threads = 1;
  app.add_option("--seed", seed, "Root random seed")->capture_default_str();
  app.add_option("--threads", threads, "Worker threads for replication-level parallelism")
      ->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic benchmark dataset");
  int sim_sites = 50, sim_n = 10;
  std::string sim_out = "dataset.csv", sim_truth;
  sim->add_option("--sites", sim_sites, "Number of spatial sites")->capture_default_str();
  sim->add_option("--n", sim_n, "Observations per site (equidistant time grid)")
      ->capture_default_str();
  sim->add_option("--out", sim_out, "Dataset CSV path")->capture_default_str();
  sim->add_option("--truth-out", sim_truth,
                  "Truth-handle JSON path (default: <out>.truth.json)");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit the model by ML or ML-initialized MCMC");
  std::string fit_data, fit_mode = "ml", fit_init, fit_out = "model.json", fit_report;
  int fit_p1 = 3, fit_p2 = 3;
  OptimFlags fit_optim;
  McmcFlags fit_mcmc;
  fit->add_option("--data", fit_data, "Observations CSV")->required();
  fit->add_option("--mode", fit_mode, "ml | bayes")->capture_default_str();
  fit->add_option("--p1", fit_p1, "Quantile-curve basis intervals")->capture_default_str();
  fit->add_option("--p2", fit_p2, "Spatial basis intervals per axis")->capture_default_str();
  fit->add_option("--init", fit_init, "Model file to start the chain from (skips ML)");
  fit->add_option("--out", fit_out, "Output model/samples file")->capture_default_str();
  fit->add_option("--report", fit_report, "Run report path (default: <out>.report.json)");
  fit_optim.attach(fit);
  fit_mcmc.attach(fit);

  // predict
  auto* pred = app.add_subcommand("predict", "Export quantile/slope/threshold surfaces");
  std::string pred_model, pred_mode = "quantile", pred_tau = "0.5", pred_x,
              pred_zgrid, pred_grid, pred_out = "grid.csv";
  double pred_mass = 0.95;
  double pred_threshold_value = 0.0;
  pred->add_option("--model", pred_model, "Model or samples file")->required();
  pred->add_option("--mode", pred_mode, "quantile | slope | threshold")
      ->capture_default_str();
  pred->add_option("--tau", pred_tau, "Comma list of quantile levels in (0,1)")
      ->capture_default_str();
  pred->add_option("--x", pred_x, "Comma list of times in original units");
  pred->add_option("--z-grid", pred_zgrid,
                   "Per-dimension lattice min:max:count, comma separated");
  pred->add_option("--grid", pred_grid,
                   "Lattice counts like 50x50 over the fitted coordinate ranges");
  auto* thr_opt = pred->add_option("--threshold", pred_threshold_value,
                                   "Threshold in original units (threshold mode)");
  pred->add_option("--interval-mass", pred_mass,
                   "Equal-tailed interval mass for posterior input")
      ->capture_default_str();
  pred->add_option("--out", pred_out, "Grid CSV path")->capture_default_str();

  // aic-scan
  auto* scan = app.add_subcommand("aic-scan", "Fit a grid of basis sizes, keep best AIC");
  std::string scan_data, scan_grid = "3,4,5,6", scan_out = "model.json", scan_table;
  OptimFlags scan_optim;
  scan->add_option("--data", scan_data, "Observations CSV")->required();
  scan->add_option("--grid", scan_grid, "Interval counts, e.g. 3,4,5,6 or 3x4,4x5")
      ->capture_default_str();
  scan->add_option("--out", scan_out, "Winning model path")->capture_default_str();
  scan->add_option("--table", scan_table, "Optional table CSV path");
  scan_optim.attach(scan);

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "Synthetic accuracy benchmark table");
  std::string bench_methods = "ml,bayes", bench_n = "5,10,20",
              bench_out = "benchmark.csv";
  int bench_reps = 50, bench_sites = 50, bench_p1 = 3, bench_p2 = 3;
  OptimFlags bench_optim;
  McmcFlags bench_mcmc;
  bench->add_option("--methods", bench_methods, "Comma list from: ml, bayes")
      ->capture_default_str();
  bench->add_option("--n", bench_n, "Comma list of per-site sample sizes")
      ->capture_default_str();
  bench->add_option("--reps", bench_reps, "Replications per cell")->capture_default_str();
  bench->add_option("--sites", bench_sites, "Number of spatial sites")
      ->capture_default_str();
  bench->add_option("--p1", bench_p1, "Quantile-curve basis intervals")
      ->capture_default_str();
  bench->add_option("--p2", bench_p2, "Spatial basis intervals per axis")
      ->capture_default_str();
  bench->add_option("--out", bench_out, "Benchmark table CSV path")->capture_default_str();
  bench_optim.attach(bench);
  bench_mcmc.attach(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    std::optional<double> pred_threshold;
    if (thr_opt->count() > 0) pred_threshold = pred_threshold_value;
    if (sim->parsed()) return run_simulate(sim_sites, sim_n, seed, sim_out, sim_truth);
    if (fit->parsed())
      return run_fit(fit_data, fit_mode, fit_p1, fit_p2, fit_optim, fit_mcmc, seed,
                     fit_init, fit_out, fit_report);
    if (pred->parsed())
      return run_predict(pred_model, pred_mode, pred_tau, pred_x, pred_zgrid, pred_grid,
                         pred_threshold, pred_mass, pred_out);
    if (scan->parsed())
      return run_aic_scan(scan_data, scan_grid, scan_optim, seed, scan_out, scan_table);
    if (bench->parsed())
      return run_benchmark_cmd(bench_methods, bench_n, bench_reps, bench_sites, bench_p1,
                               bench_p2, bench_optim, bench_mcmc, seed, threads,
                               bench_out);
  } catch (const validation_error& e) {
    std::cerr << "error (validation): " << e.what() << "\n";
    return 1;
  } catch (const format_error& e) {
    std::cerr << "error (data): " << e.what() << "\n";
    return 2;
  } catch (const degenerate_error& e) {
    std::cerr << "error (data): " << e.what() << "\n";
    return 2;
  } catch (const integrity_error& e) {
    std::cerr << "error (data): " << e.what() << "\n";
    return 2;
  } catch (const incompatibility_error& e) {
    std::cerr << "error (data): " << e.what() << "\n";
    return 2;
  } catch (const evaluation_error& e) {
    std::cerr << "error (numerical): " << e.what() << "\n";
    return 3;
  } catch (const domain_error& e) {
    std::cerr << "error (numerical): " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
