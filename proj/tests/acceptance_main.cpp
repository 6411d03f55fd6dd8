// Acceptance suite: one line per criterion, PASS or FAIL, with the measured
// quantities. The process exit code is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "cwhom/correlations.hpp"
#include "cwhom/dephasing.hpp"
#include "cwhom/estimation.hpp"
#include "cwhom/montecarlo.hpp"
#include "cwhom/response.hpp"

using namespace cwhom;

namespace {

int g_failures = 0;

void report(int index, bool pass, const std::string& text, double seconds) {
  if (!pass) ++g_failures;
  std::printf("%s  %d  %s (%.2f s)\n", pass ? "PASS" : "FAIL", index, text.c_str(), seconds);
  std::fflush(stdout);
}

double run_timed(const std::function<bool(std::string&)>& body, int index) {
  std::string text;
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = false;
  try {
    pass = body(text);
  } catch (const std::exception& e) {
    text += std::string(" [exception: ") + e.what() + "]";
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(index, pass, text, dt);
  return dt;
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

const SourceSpec kSource{800.0, 325.0, 0.0};
const InterferometerSpec kBalanced{};

SampledCurve convolved_model(const std::function<double(double)>& ideal, double bin_ps,
                             double range_ps, double fwhm_ps) {
  const auto kernel = gaussian_kernel(fwhm_ps, bin_ps);
  const double half = range_ps + kernel.half_support_ps() + bin_ps;
  return convolve(sample_symmetric(ideal, bin_ps, half), kernel);
}

}  // namespace

int main() {
  // 1. coherence anchor at 30 uA with line-A parameters
  run_timed(
      [](std::string& text) {
        const auto t0 = std::chrono::steady_clock::now();
        const double tau_c = coherence_time(line_a_params(), 30.0).tau_c_ps;
        const double dt =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        text = fmt("coherence anchor: tau_c(30 uA) = %.2f ps, needs [380, 420] ps", tau_c);
        return tau_c >= 380.0 && tau_c <= 420.0 && dt < 1.0;
      },
      1);

  // 2. curve shape: non-increasing for both presets, line B below line A
  run_timed(
      [](std::string& text) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<double> currents;
        for (int i = 0; i <= 1000; ++i) currents.push_back(0.5 * i);
        const auto a = coherence_sweep(line_a_params(), currents);
        const auto b = coherence_sweep(line_b_params(), currents);
        bool monotone = true, ordered = true;
        for (std::size_t i = 1; i < currents.size(); ++i) {
          if (a[i].tau_c_ps > a[i - 1].tau_c_ps || b[i].tau_c_ps > b[i - 1].tau_c_ps)
            monotone = false;
          if (currents[i] >= 50.0 && !(b[i].tau_c_ps < a[i].tau_c_ps)) ordered = false;
        }
        const double dt =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        text = fmt("curve shape over 0-500 uA: monotone %s, line-B below line-A %s",
                   monotone ? "yes" : "no", ordered ? "yes" : "no");
        return monotone && ordered && dt < 1.0;
      },
      2);

  // 3. linewidth relation
  run_timed(
      [](std::string& text) {
        const double lw = linewidth_from_coherence(325.0);
        text = fmt("linewidth(325 ps) = %.4f ueV, needs 4.05 +- 0.05", lw);
        return std::abs(lw - 4.05) <= 0.05;
      },
      3);

  // 4. ideal correlation structure
  run_timed(
      [](std::string& text) {
        const double p0 = g2_perp(0.0, kSource, kBalanced);
        const double q0 = g2_parallel(0.0, kSource, kBalanced);
        const double qp = g2_parallel(10000.0, kSource, kBalanced);
        const double qm = g2_parallel(-10000.0, kSource, kBalanced);
        const double far = g2_parallel(25000.0, kSource, kBalanced);
        text = fmt("ideal structure: g_perp(0) = %.4f, g_par(0) = %.2e, g_par(+-10 ns) = "
                   "%.4f/%.4f, plateau = %.4f",
                   p0, q0, qp, qm, far);
        return std::abs(p0 - 0.5) <= 1e-3 && q0 <= 1e-4 && std::abs(qp - 0.75) <= 5e-3 &&
               std::abs(qm - 0.75) <= 5e-3 && std::abs(far - 1.0) <= 1e-3;
      },
      4);

  // 5. convolved visibility anchors and the 20x20 map
  run_timed(
      [](std::string& text) {
        SourceSpec s400 = kSource;
        s400.tau_c_ps = 400.0;
        const double v45 = v_hom_measured(s400, kBalanced, gaussian_kernel(428.0, 5.0));
        const double v70 = v_hom_measured(kSource, kBalanced, gaussian_kernel(100.0, 5.0));
        const double v_model = v_hom_measured(kSource, kBalanced, gaussian_kernel(428.0, 5.0));

        const auto t0 = std::chrono::steady_clock::now();
        std::vector<double> fwhm, tau_c;
        for (int i = 0; i < 20; ++i) {
          fwhm.push_back(100.0 + 700.0 * i / 19.0);
          tau_c.push_back(100.0 + 700.0 * i / 19.0);
        }
        const auto map = visibility_map(fwhm, tau_c, kSource, kBalanced);
        const double map_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool monotone = true;
        for (std::size_t i = 0; i < map.size(); ++i)
          for (std::size_t j = 1; j < map[i].size(); ++j)
            if (map[i][j] < map[i][j - 1]) monotone = false;
        for (std::size_t j = 0; j < tau_c.size(); ++j)
          for (std::size_t i = 1; i < fwhm.size(); ++i)
            if (map[i][j] > map[i - 1][j]) monotone = false;

        text = fmt("visibility anchors: V(428, 400) = %.3f (needs 0.45 +- 0.05), V(100, 325) = "
                   "%.3f (needs >= 0.70), 20x20 map monotone %s in %.2f s; Gaussian-model "
                   "V(428, 325) = %.3f reported alongside the measured 0.33 +- 0.06 "
                   "(response-shape caveat, not enforced)",
                   v45, v70, monotone ? "yes" : "no", map_seconds, v_model);
        return std::abs(v45 - 0.45) <= 0.05 && v70 >= 0.70 && monotone && map_seconds < 10.0;
      },
      5);

  // 6. oracle equivalence of the monte carlo engine, 1e6 photons per mode
  run_timed(
      [](std::string& text) {
        const auto t0 = std::chrono::steady_clock::now();
        StreamParams params;
        params.pump_rate_per_ps = 5e-5;
        params.tau_r_ps = kSource.tau_r_ps;
        params.tau_c_ps = kSource.tau_c_ps;
        params.duration_ps = 1e6 * (1.0 / params.pump_rate_per_ps + params.tau_r_ps);
        const double fwhm = 428.0;
        const double jitter = (fwhm / fwhm_per_sigma) / std::sqrt(2.0);
        const double bin = 100.0, range = 25000.0;

        struct ModeRun {
          const char* name;
          RoutingMode mode;
          Polarization pol;
          std::function<double(double)> ideal;
          std::uint64_t seed;
        };
        const std::vector<ModeRun> runs = {
            {"hbt", RoutingMode::hbt, Polarization::orthogonal,
             [](double t) { return g2_source(t, kSource); }, 101},
            {"mzi-orthogonal", RoutingMode::mzi, Polarization::orthogonal,
             [](double t) { return g2_perp(t, kSource, kBalanced); }, 102},
            {"mzi-parallel", RoutingMode::mzi, Polarization::parallel,
             [](double t) { return g2_parallel(t, kSource, kBalanced); }, 103},
        };

        bool pass = true;
        text = "oracle equivalence:";
        for (const auto& r : runs) {
          StreamParams p = params;
          p.seed = r.seed;
          const auto run = simulate_run(p, kBalanced, r.mode, r.pol, jitter, bin, range);
          const auto model = convolved_model(r.ideal, bin, range, fwhm);
          const auto rep = mc_vs_analytic(run.histogram, model);
          const bool ok = rep.max_abs_z < 4.0 && rep.mean_z2 >= 0.8 && rep.mean_z2 <= 1.3;
          pass = pass && ok;
          text += fmt(" %s max|z| = %.2f mean z2 = %.3f;", r.name, rep.max_abs_z, rep.mean_z2);
        }

        StreamParams p = params;
        p.seed = 101;
        const auto again = simulate_run(p, kBalanced, RoutingMode::hbt, Polarization::orthogonal,
                                        jitter, bin, range);
        StreamParams p2 = params;
        p2.seed = 101;
        const auto again2 = simulate_run(p2, kBalanced, RoutingMode::hbt, Polarization::orthogonal,
                                         jitter, bin, range);
        const bool identical = again.histogram.counts == again2.histogram.counts;
        pass = pass && identical;
        text += fmt(" bit-identical rerun %s", identical ? "yes" : "no");
        return pass;
      },
      6);

  // 7. fit round trips
  run_timed(
      [](std::string& text) {
        const std::vector<double> currents = {10,  30,  50,  75,  100, 150,
                                              200, 250, 300, 350, 425, 500};
        const auto truth = line_a_params();
        MeasuredSeries clean;
        for (double i : currents) {
          clean.x.push_back(i);
          clean.y.push_back(coherence_time(truth, i).tau_c_ps);
        }
        const auto trap_fit = fit_coherence_curve(clean, FitSpec{});
        const double r3 = std::abs(trap_fit.values.at("tau3") - 750.0) / 750.0;
        const double r0 = std::abs(trap_fit.values.at("i0") - 300.0) / 300.0;
        const double rs = std::abs(trap_fit.values.at("sigma_s") - 188.0) / 188.0;

        MeasuredSeries vis;
        for (int k = 0; k < 10; ++k) {
          const double d = 800.0 * k / 9.0;
          vis.x.push_back(d);
          vis.y.push_back(std::exp(-d / 400.0));
        }
        const double rtc =
            std::abs(fit_visibility_decay(vis).values.at("tau_c") - 400.0) / 400.0;

        const double bin = 50.0, range = 25000.0;
        const auto kernel = gaussian_kernel(428.0, bin);
        const SourceSpec gen{800.0, 1.0, 0.2};
        const auto model = convolved_model([&](double t) { return g2_source(t, gen); }, bin,
                                           range, 428.0);
        CoincidenceHistogram hist;
        hist.bin_width_ps = bin;
        hist.range_ps = range;
        hist.normalization = 1e9;
        for (long k = -500; k <= 500; ++k)
          hist.counts.push_back(std::llround(model.values[model.index_of(k * bin)] * 1e9));
        const auto hbt_fit = fit_hbt_lifetime(hist, kernel, FitSpec{});
        const double rtr = std::abs(hbt_fit.values.at("tau_r") - 800.0) / 800.0;
        const double rg0 = std::abs(hbt_fit.values.at("g2_zero") - 0.2) / 0.2;

        const bool noiseless_ok =
            r3 < 1e-3 && r0 < 1e-3 && rs < 1e-3 && rtc < 1e-3 && rtr < 1e-3 && rg0 < 1e-3;

        std::vector<double> e3, e0, es;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
          Rng rng(seed);
          MeasuredSeries noisy = clean;
          for (double& y : noisy.y) y *= 1.0 + 0.02 * rng.normal(1.0);
          const auto f = fit_coherence_curve(noisy, FitSpec{});
          e3.push_back(std::abs(f.values.at("tau3") - 750.0) / 750.0);
          e0.push_back(std::abs(f.values.at("i0") - 300.0) / 300.0);
          es.push_back(std::abs(f.values.at("sigma_s") - 188.0) / 188.0);
        }
        auto med = [](std::vector<double> v) {
          std::sort(v.begin(), v.end());
          return v[v.size() / 2];
        };
        const double m3 = med(e3), m0 = med(e0), ms = med(es);
        const bool noisy_ok = m3 < 0.10 && m0 < 0.10 && ms < 0.05;

        text = fmt("fit round trips: noiseless rel err tau3/i0/sigma_s/tau_c/tau_r/g2_zero = "
                   "%.1e/%.1e/%.1e/%.1e/%.1e/%.1e (need < 1e-3); 2%%-noise medians = "
                   "%.3f/%.3f/%.3f (need < 0.10/0.10/0.05)",
                   r3, r0, rs, rtc, rtr, rg0, m3, m0, ms);
        return noiseless_ok && noisy_ok;
      },
      7);

  // 8. figure-of-merit property: V at (dt, tc) vs (2 dt, 2 tc), fixed tau_r
  run_timed(
      [](std::string& text) {
        double max_dev = 0.0;
        for (double fwhm : {100.0, 275.0, 450.0, 625.0, 800.0}) {
          for (double tc : {100.0, 275.0, 450.0, 625.0, 800.0}) {
            SourceSpec s = kSource;
            s.tau_c_ps = tc;
            const double v1 = v_hom_measured(s, kBalanced, gaussian_kernel(fwhm, 5.0));
            s.tau_c_ps = 2.0 * tc;
            const double v2 = v_hom_measured(s, kBalanced, gaussian_kernel(2.0 * fwhm, 5.0));
            max_dev = std::max(max_dev, std::abs(v1 - v2));
          }
        }
        text = fmt("figure-of-merit 2*dt/tau_c scaling: max |V(dt,tc) - V(2dt,2tc)| = %.4f over "
                   "the 5x5 grid, needs <= 0.03; the radiative-lifetime term breaks exact "
                   "scaling by this much at tau_r = 800 ps (see decisions ledger)",
                   max_dev);
        return max_dev <= 0.03;
      },
      8);

  std::printf("%d of 8 criteria passed\n", 8 - g_failures);
  return g_failures;
}
