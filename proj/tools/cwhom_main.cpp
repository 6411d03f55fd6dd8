// cwhom — command-line front end: coherence sweeps, correlation traces,
// visibility maps, Monte Carlo runs and model fits, all emitted as
// plot-ready CSV. Every command is deterministic given (config, inputs,
// seed). Exit codes: 0 success, 2 usage or parse error, 3 fit did not
// converge.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cwhom/config.hpp"
#include "cwhom/constants.hpp"
#include "cwhom/csv.hpp"
#include "cwhom/dephasing.hpp"
#include "cwhom/errors.hpp"
#include "cwhom/estimation.hpp"
#include "cwhom/montecarlo.hpp"
#include "cwhom/response.hpp"

namespace fs = std::filesystem;
using namespace cwhom;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

RunConfig make_config(const GlobalArgs& g) {
  RunConfig cfg = load_config(g.config_path, g.sets);
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out_dir.empty()) cfg.output.dir = g.out_dir;
  fs::create_directories(cfg.output.dir);
  return cfg;
}

ResponseKernel make_kernel(const RunConfig& cfg, double step_ps) {
  if (!cfg.detector.response_csv.empty()) {
    const CsvTable t = read_csv(cfg.detector.response_csv);
    if (t.header.size() < 2)
      throw usage_error("tabulated response needs (time_ps, weight) columns");
    std::vector<std::pair<double, double>> samples;
    for (const auto& row : t.rows) samples.emplace_back(row[0], row[1]);
    return load_tabulated_response(samples, step_ps);
  }
  return gaussian_kernel(cfg.detector.fwhm_ps, step_ps, cfg.detector.truncation_sigmas);
}

void warn_separation(const RunConfig& cfg) {
  if (!cfg.interferometer.separates_coherence(cfg.source.tau_c_ps))
    std::cerr << "warning: delta_tau2 < 10*tau_c, post-selected events are not cleanly"
                 " separated from the interference window\n";
}

int cmd_coherence_sweep(const RunConfig& cfg) {
  if (cfg.currents_ua.empty())
    throw usage_error("coherence-sweep: no currents configured (currents.values_ua or range)");
  const auto points = coherence_sweep(cfg.trap, cfg.currents_ua);
  std::vector<std::vector<double>> rows;
  rows.reserve(points.size());
  for (const auto& p : points)
    rows.push_back({p.current_ua, p.tau_up_ps, p.tau_down_ps, p.tau_f_ps, p.sigma_uev, p.tau_c_ps,
                    p.narrowing_ratio});
  write_csv(fs::path(cfg.output.dir) / "coherence_sweep.csv",
            {"current_uA", "tau_up_ps", "tau_down_ps", "tau_f_ps", "sigma_ueV", "tau_c_ps",
             "narrowing_ratio"},
            rows);
  return 0;
}

int cmd_correlate(const RunConfig& cfg) {
  warn_separation(cfg);
  const auto kernel = make_kernel(cfg, cfg.grid.step_ps);
  const auto src = sample_symmetric([&](double t) { return g2_source(t, cfg.source); },
                                    cfg.grid.step_ps, cfg.grid.half_range_ps);
  const auto perp =
      sample_symmetric([&](double t) { return g2_perp(t, cfg.source, cfg.interferometer); },
                       cfg.grid.step_ps, cfg.grid.half_range_ps);
  const auto par =
      sample_symmetric([&](double t) { return g2_parallel(t, cfg.source, cfg.interferometer); },
                       cfg.grid.step_ps, cfg.grid.half_range_ps);
  const auto perp_conv = convolve(perp, kernel);
  const auto par_conv = convolve(par, kernel);
  std::vector<std::vector<double>> rows;
  rows.reserve(src.values.size());
  for (std::size_t i = 0; i < src.values.size(); ++i) {
    double vhom;
    try {
      vhom = v_hom_ideal(src.time_at(i), cfg.source, cfg.interferometer);
    } catch (const domain_error&) {
      vhom = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back({src.time_at(i), src.values[i], perp.values[i], par.values[i],
                    perp_conv.values[i], par_conv.values[i], vhom});
  }
  write_csv(fs::path(cfg.output.dir) / "correlate.csv",
            {"tau_ps", "g2_source", "g2_perp", "g2_parallel", "g2_perp_conv", "g2_parallel_conv",
             "v_hom"},
            rows);
  return 0;
}

int cmd_visibility_map(const RunConfig& cfg) {
  if (cfg.map.fwhm_ps.empty() || cfg.map.tau_c_ps.empty())
    throw usage_error("visibility-map: map.fwhm_ps and map.tau_c_ps must be non-empty");
  const auto map = visibility_map(cfg.map.fwhm_ps, cfg.map.tau_c_ps, cfg.source,
                                  cfg.interferometer, cfg.grid.step_ps);
  std::vector<std::string> header{"fwhm_ps"};
  for (double tc : cfg.map.tau_c_ps) header.push_back("tau_c_" + format_double(tc));
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < map.size(); ++i) {
    std::vector<double> row{cfg.map.fwhm_ps[i]};
    row.insert(row.end(), map[i].begin(), map[i].end());
    rows.push_back(std::move(row));
  }
  write_csv(fs::path(cfg.output.dir) / "visibility_map.csv", header, rows);
  return 0;
}

int cmd_simulate(const RunConfig& cfg) {
  StreamParams params;
  params.pump_rate_per_ps = cfg.stream.pump_rate_per_ps;
  params.tau_r_ps = cfg.source.tau_r_ps;
  params.tau_c_ps = cfg.source.tau_c_ps;
  params.duration_ps = cfg.stream.duration_ps;
  params.seed = cfg.seed;

  RoutingMode mode = RoutingMode::hbt;
  Polarization pol = Polarization::orthogonal;
  if (cfg.stream.mode == "mzi-parallel") {
    mode = RoutingMode::mzi;
    pol = Polarization::parallel;
  } else if (cfg.stream.mode == "mzi-orthogonal") {
    mode = RoutingMode::mzi;
    pol = Polarization::orthogonal;
  }
  if (mode == RoutingMode::mzi) warn_separation(cfg);

  const double sigma_pair = cfg.detector.fwhm_ps / fwhm_per_sigma;
  const double jitter = sigma_pair / std::sqrt(2.0);

  const auto result = simulate_run(params, cfg.interferometer, mode, pol, jitter,
                                   cfg.stream.bin_width_ps, cfg.stream.range_ps);

  // Analytic expectation on the bin grid, convolved with the pair response.
  const auto pair_kernel =
      gaussian_kernel(cfg.detector.fwhm_ps, cfg.stream.bin_width_ps, cfg.detector.truncation_sigmas);
  const double model_half = cfg.stream.range_ps + pair_kernel.half_support_ps() +
                            cfg.stream.bin_width_ps;
  auto ideal = [&](double t) {
    if (mode == RoutingMode::hbt) return g2_source(t, cfg.source);
    return pol == Polarization::parallel ? g2_parallel(t, cfg.source, cfg.interferometer)
                                         : g2_perp(t, cfg.source, cfg.interferometer);
  };
  const auto model =
      convolve(sample_symmetric(ideal, cfg.stream.bin_width_ps, model_half), pair_kernel);
  const auto report = mc_vs_analytic(result.histogram, model);

  const fs::path dir(cfg.output.dir);
  {
    std::vector<std::vector<double>> rows;
    const auto norm = result.histogram.normalized();
    for (std::size_t i = 0; i < norm.size(); ++i)
      rows.push_back({result.histogram.tau_at(i),
                      static_cast<double>(result.histogram.counts[i]), norm[i]});
    write_csv(dir / "histogram.csv", {"tau_ps", "counts", "normalized_g2"}, rows);
  }
  {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < report.n_bins; ++i)
      rows.push_back({report.tau_ps[i], report.mc_normalized[i], report.model[i], report.z[i]});
    write_csv(dir / "comparison.csv", {"tau_ps", "mc_normalized", "model", "z"}, rows);
  }
  if (cfg.output.events) {
    std::ofstream out(dir / "events.csv", std::ios::binary);
    if (!out) throw usage_error("cannot write events.csv");
    out << "detector,time_ps\n";
    for (const auto& e : result.events)
      out << (e.detector == Detector::d1 ? "D1" : "D2") << "," << format_double(e.time_ps) << "\n";
  }
  {
    std::ofstream out(dir / "report.txt", std::ios::binary);
    if (!out) throw usage_error("cannot write report.txt");
    out << "mode: " << cfg.stream.mode << "\n"
        << "seed: " << cfg.seed << "\n"
        << "emitted_photons: " << result.n_emitted << "\n"
        << "detected_D1: " << result.singles[0] << "\n"
        << "detected_D2: " << result.singles[1] << "\n"
        << "duration_ps: " << format_double(params.duration_ps) << "\n"
        << "bin_width_ps: " << format_double(cfg.stream.bin_width_ps) << "\n"
        << "pair_response_fwhm_ps: " << format_double(cfg.detector.fwhm_ps) << "\n"
        << "accidental_per_bin: " << format_double(result.histogram.normalization) << "\n"
        << "max_abs_z: " << format_double(report.max_abs_z) << "\n"
        << "mean_z2: " << format_double(report.mean_z2) << "\n"
        << "n_bins: " << report.n_bins << "\n";
    if (mode == RoutingMode::mzi && !cfg.interferometer.balanced_final())
      out << "note: the analytic comparison normalization assumes a balanced final coupler\n";
  }
  return 0;
}

MeasuredSeries series_from_table(const CsvTable& t, const std::string& path) {
  if (t.header.size() < 2 || t.header.size() > 3)
    throw usage_error(path + ": expected columns (x, y[, sigma])");
  MeasuredSeries s;
  for (const auto& row : t.rows) {
    s.x.push_back(row[0]);
    s.y.push_back(row[1]);
    if (t.header.size() == 3) s.sigma.push_back(row[2]);
  }
  return s;
}

int cmd_fit(const RunConfig& cfg, const std::string& data_path) {
  if (cfg.fit.kind.empty())
    throw usage_error("fit: set fit.kind to coherence, visibility-decay or hbt-lifetime");
  const CsvTable table = read_csv(data_path);

  FitResult result;
  std::vector<std::vector<double>> residual_rows;
  std::vector<std::string> residual_header;

  if (cfg.fit.kind == "coherence") {
    const MeasuredSeries data = series_from_table(table, data_path);
    result = fit_coherence_curve(data, cfg.fit.spec);
    TrapModelParams p = cfg.trap;
    for (const auto& [name, v] : result.values) {
      if (name == "tau3") p.tau3_ps = v;
      if (name == "i0") p.i0_ua = v;
      if (name == "sigma_s") p.sigma_s_uev = v;
      if (name == "tau1") p.tau1_ps = v;
      if (name == "tau2") p.tau2_ps = v;
      if (name == "e1") p.e1_mev = v;
      if (name == "e2") p.e2_mev = v;
      if (name == "beta") p.beta = v;
      if (name == "temperature") p.temperature_k = v;
    }
    residual_header = {"current_uA", "tau_c_ps", "model_ps", "residual_ps"};
    for (std::size_t i = 0; i < data.x.size(); ++i) {
      const double m = coherence_time(p, data.x[i]).tau_c_ps;
      residual_rows.push_back({data.x[i], data.y[i], m, data.y[i] - m});
    }
  } else if (cfg.fit.kind == "visibility-decay") {
    const MeasuredSeries data = series_from_table(table, data_path);
    result = fit_visibility_decay(data);
    const double tau_c = result.values.at("tau_c");
    residual_header = {"delay_ps", "visibility", "model", "residual"};
    for (std::size_t i = 0; i < data.x.size(); ++i) {
      const double m = michelson_visibility(data.x[i], tau_c);
      residual_rows.push_back({data.x[i], data.y[i], m, data.y[i] - m});
    }
  } else {
    // hbt-lifetime expects the simulate histogram schema.
    const int c_tau = table.column("tau_ps");
    const int c_counts = table.column("counts");
    const int c_norm = table.column("normalized_g2");
    if (c_tau < 0 || c_counts < 0 || c_norm < 0)
      throw usage_error(data_path + ": hbt-lifetime needs columns tau_ps, counts, normalized_g2");
    if (table.rows.size() < 8) throw usage_error(data_path + ": too few histogram bins");
    CoincidenceHistogram hist;
    const double step = table.rows[1][c_tau] - table.rows[0][c_tau];
    if (!(step > 0.0)) throw usage_error(data_path + ": tau_ps must increase");
    hist.bin_width_ps = step;
    hist.range_ps = std::abs(table.rows.front()[c_tau]);
    double count_sum = 0.0, norm_sum = 0.0;
    for (const auto& row : table.rows) {
      hist.counts.push_back(static_cast<std::int64_t>(std::llround(row[c_counts])));
      count_sum += row[c_counts];
      norm_sum += row[c_norm];
    }
    if (!(norm_sum > 0.0)) throw usage_error(data_path + ": normalized_g2 column is all zero");
    hist.normalization = count_sum / norm_sum;
    const auto kernel = make_kernel(cfg, hist.bin_width_ps);
    result = fit_hbt_lifetime(hist, kernel, cfg.fit.spec);

    SourceSpec s{result.values.at("tau_r"), 1.0, result.values.at("g2_zero")};
    const double model_half = hist.range_ps + kernel.half_support_ps() + hist.bin_width_ps;
    const auto model = convolve(
        sample_symmetric([&](double t) { return g2_source(t, s); }, hist.bin_width_ps, model_half),
        kernel);
    residual_header = {"tau_ps", "normalized_g2", "model", "residual"};
    const auto norm = hist.normalized();
    for (std::size_t i = 0; i < norm.size(); ++i) {
      const double m = model.values[model.index_of(hist.tau_at(i))];
      residual_rows.push_back({hist.tau_at(i), norm[i], m, norm[i] - m});
    }
  }

  const fs::path dir(cfg.output.dir);
  {
    std::ofstream out(dir / "fit_report.txt", std::ios::binary);
    if (!out) throw usage_error("cannot write fit_report.txt");
    out << "kind: " << cfg.fit.kind << "\n"
        << "data: " << data_path << "\n"
        << "converged: " << (result.converged ? "yes" : "no") << "\n"
        << "chi2: " << format_double(result.chi2) << "\n"
        << "dof: " << result.dof << "\n"
        << "chi2_per_dof: "
        << format_double(result.dof > 0 ? result.chi2 / result.dof : 0.0) << "\n"
        << "n_evaluations: " << result.n_evaluations << "\n";
    for (const auto& [name, v] : result.values)
      out << name << ": " << format_double(v) << " +- "
          << format_double(result.std_error.at(name)) << "\n";
    for (const auto& w : result.warnings) out << "warning: " << w << "\n";
  }
  write_csv(dir / "fit_residuals.csv", residual_header, residual_rows);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  if (!result.converged) {
    std::cerr << "fit did not converge within the evaluation budget\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continuous-wave single-photon source: dephasing, two-photon interference "
               "and Monte Carlo toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs g;
  app.add_option("--config", g.config_path, "JSON configuration file");
  app.add_option("--set", g.sets, "override a config value, dotted.key=value (repeatable)");
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "random seed (overrides config)");
  app.add_option("--out", g.out_dir, "output directory (overrides config)");

  auto* sweep = app.add_subcommand("coherence-sweep", "coherence time vs injection current");
  auto* correlate = app.add_subcommand("correlate", "ideal and convolved correlation traces");
  auto* vmap = app.add_subcommand("visibility-map", "V_HOM over (detector fwhm, tau_c)");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo photon stream run");
  auto* fit = app.add_subcommand("fit", "fit a model to a measured CSV series");
  std::string data_path;
  fit->add_option("data", data_path, "input CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (seed_opt->count() > 0) g.seed = seed_value;
    const RunConfig cfg = make_config(g);
    if (sweep->parsed()) return cmd_coherence_sweep(cfg);
    if (correlate->parsed()) return cmd_correlate(cfg);
    if (vmap->parsed()) return cmd_visibility_map(cfg);
    if (simulate->parsed()) return cmd_simulate(cfg);
    if (fit->parsed()) return cmd_fit(cfg, data_path);
    return 2;
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
