#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "cwhom/dephasing.hpp"
#include "cwhom/errors.hpp"
#include "cwhom/montecarlo.hpp"
#include "cwhom/response.hpp"
#include "cwhom/rng.hpp"

namespace cwhom {

// Measured (x, y) series with optional per-point standard errors.
struct MeasuredSeries {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> sigma;  // empty means unit weights

  void validate(std::size_t min_points) const {
    if (x.size() != y.size()) throw usage_error("MeasuredSeries: x/y length mismatch");
    if (!sigma.empty() && sigma.size() != x.size())
      throw usage_error("MeasuredSeries: sigma length mismatch");
    if (x.size() < min_points) throw usage_error("MeasuredSeries: too few points");
    for (double s : sigma)
      if (!(s > 0.0)) throw usage_error("MeasuredSeries: sigma values must be positive");
  }

  double weight_sigma(std::size_t i) const { return sigma.empty() ? 1.0 : sigma[i]; }
};

struct ParamSpec {
  double init = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

// Free parameters with bounds and starting points, plus fixed overrides.
struct FitSpec {
  std::map<std::string, ParamSpec> free;
  std::map<std::string, double> fixed;

  void validate() const {
    for (const auto& [name, p] : free) {
      if (!(p.lo < p.hi)) throw usage_error("FitSpec: bounds out of order for " + name);
      if (!(p.init >= p.lo && p.init <= p.hi))
        throw usage_error("FitSpec: initial guess outside bounds for " + name);
      if (fixed.count(name)) throw usage_error("FitSpec: " + name + " is both free and fixed");
    }
  }
};

struct FitResult {
  std::map<std::string, double> values;
  std::map<std::string, double> std_error;  // approximate, from local curvature
  double chi2 = 0.0;
  int dof = 0;
  bool converged = false;
  long n_evaluations = 0;
  std::vector<double> restart_best_chi2;  // best objective after each restart
  std::vector<std::string> warnings;
};

namespace detail {

struct NmResult {
  std::vector<double> x;
  double fmin = 0.0;
  long evals = 0;
  bool converged = false;
};

// Nelder-Mead simplex descent constrained to a box by clamping trial
// points. Converged means the simplex has collapsed to a relative size
// well below 1e-8, so the last accepted step moved the parameters less
// than that.
inline NmResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                            std::vector<double> x0, const std::vector<double>& lo,
                            const std::vector<double>& hi, long max_evals = 20000) {
  const std::size_t n = x0.size();
  auto clamp_point = [&](std::vector<double>& p) {
    for (std::size_t k = 0; k < n; ++k) p[k] = std::clamp(p[k], lo[k], hi[k]);
  };
  clamp_point(x0);

  std::vector<std::vector<double>> simplex(n + 1, x0);
  for (std::size_t k = 0; k < n; ++k) {
    double step = 0.05 * (hi[k] - lo[k]);
    if (simplex[k + 1][k] + step > hi[k]) step = -step;
    simplex[k + 1][k] += step;
  }
  long evals = 0;
  std::vector<double> fv(n + 1);
  for (std::size_t v = 0; v <= n; ++v) {
    fv[v] = f(simplex[v]);
    ++evals;
  }

  auto order = [&]() {
    std::vector<std::size_t> idx(n + 1);
    std::iota(idx.begin(), idx.end(), 0u);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    std::vector<std::vector<double>> s2(n + 1);
    std::vector<double> f2(n + 1);
    for (std::size_t v = 0; v <= n; ++v) {
      s2[v] = simplex[idx[v]];
      f2[v] = fv[idx[v]];
    }
    simplex.swap(s2);
    fv.swap(f2);
  };

  bool converged = false;
  while (evals < max_evals) {
    order();
    double size = 0.0;
    for (std::size_t v = 1; v <= n; ++v)
      for (std::size_t k = 0; k < n; ++k)
        size = std::max(size, std::abs(simplex[v][k] - simplex[0][k]) /
                                  std::max(1.0, std::abs(simplex[0][k])));
    const double fspread = std::abs(fv[n] - fv[0]);
    if (size < 1e-10 && fspread <= 1e-12 * (std::abs(fv[0]) + 1e-300)) {
      converged = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[v][k] / static_cast<double>(n);

    auto along = [&](double coeff) {
      std::vector<double> p(n);
      for (std::size_t k = 0; k < n; ++k) p[k] = centroid[k] + coeff * (simplex[n][k] - centroid[k]);
      clamp_point(p);
      return p;
    };

    const auto reflected = along(-1.0);
    const double fr = f(reflected);
    ++evals;
    if (fr < fv[0]) {
      const auto expanded = along(-2.0);
      const double fe = f(expanded);
      ++evals;
      if (fe < fr) {
        simplex[n] = expanded;
        fv[n] = fe;
      } else {
        simplex[n] = reflected;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      simplex[n] = reflected;
      fv[n] = fr;
    } else {
      const auto contracted = along(fr < fv[n] ? -0.5 : 0.5);
      const double fc = f(contracted);
      ++evals;
      if (fc < std::min(fr, fv[n])) {
        simplex[n] = contracted;
        fv[n] = fc;
      } else {
        for (std::size_t v = 1; v <= n; ++v) {
          for (std::size_t k = 0; k < n; ++k)
            simplex[v][k] = simplex[0][k] + 0.5 * (simplex[v][k] - simplex[0][k]);
          fv[v] = f(simplex[v]);
          ++evals;
        }
      }
    }
  }
  order();
  return {simplex[0], fv[0], evals, converged};
}

// Best-of-restarts driver: restart 0 uses the stated initial guesses, the
// rest start from deterministically jittered points. Keeps the running
// best, which makes the recorded per-restart history non-increasing.
inline NmResult restarted_nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                      const std::vector<double>& init,
                                      const std::vector<double>& lo, const std::vector<double>& hi,
                                      int n_restarts, std::vector<double>& best_history,
                                      long max_evals_per_restart = 20000) {
  Rng rng(0x5eedf17u);
  NmResult best;
  best.fmin = std::numeric_limits<double>::infinity();
  best_history.clear();
  long total_evals = 0;
  for (int r = 0; r < n_restarts; ++r) {
    std::vector<double> x0 = init;
    if (r > 0)
      for (std::size_t k = 0; k < x0.size(); ++k)
        x0[k] = std::clamp(x0[k] + (2.0 * rng.uniform() - 1.0) * 0.15 * (hi[k] - lo[k]), lo[k],
                           hi[k]);
    NmResult res = nelder_mead(f, x0, lo, hi, max_evals_per_restart);
    total_evals += res.evals;
    if (res.fmin < best.fmin) {
      const long keep = total_evals;
      best = res;
      best.evals = keep;
    }
    best_history.push_back(best.fmin);
  }
  best.evals = total_evals;
  return best;
}

// 1-sigma parameter error from the finite-difference curvature of chi2 at
// the optimum. Unweighted fits are rescaled by chi2/dof.
inline double curvature_std_error(const std::function<double(double)>& chi2_of, double x_opt,
                                  double scale, double chi2_min, int dof, bool weighted) {
  const double h = std::max(1e-4 * std::abs(x_opt), 1e-6 * scale);
  const double fp = chi2_of(x_opt + h);
  const double fm = chi2_of(x_opt - h);
  const double second = (fp - 2.0 * chi2_min + fm) / (h * h);
  if (!(second > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double variance_scale = (!weighted && dof > 0) ? chi2_min / dof : 1.0;
  return std::sqrt(2.0 * variance_scale / second);
}

}  // namespace detail

// Weighted sum of squared residuals between a gridded model and a series.
// Each data abscissa must sit within half a grid step of a curve sample.
inline double chi_square(const SampledCurve& model_curve, const MeasuredSeries& data) {
  model_curve.validate();
  data.validate(1);
  double chi2 = 0.0;
  for (std::size_t i = 0; i < data.x.size(); ++i) {
    const std::size_t ci = model_curve.index_of(data.x[i]);
    if (std::abs(model_curve.time_at(ci) - data.x[i]) > 0.5 * model_curve.step_ps + 1e-9)
      throw usage_error("chi_square: data point off the model grid");
    const double r = (data.y[i] - model_curve.values[ci]) / data.weight_sigma(i);
    chi2 += r * r;
  }
  return chi2;
}

inline FitSpec default_coherence_fitspec() {
  FitSpec spec;
  spec.free["tau3"] = {500.0, 50.0, 5000.0};
  spec.free["i0"] = {150.0, 10.0, 2000.0};
  spec.free["sigma_s"] = {100.0, 10.0, 2000.0};
  return spec;
}

inline FitSpec default_hbt_fitspec() {
  FitSpec spec;
  spec.free["tau_r"] = {500.0, 10.0, 10000.0};
  spec.free["g2_zero"] = {0.1, 0.0, 0.99};
  return spec;
}

// Trap-model fit to a tau_c(I) series. Free parameters default to
// {tau3, i0, sigma_s}; anything not free comes from spec.fixed or the
// shared line defaults (tau1 = 200 ps, tau2 = 5 ps, E1 = 1 meV,
// E2 = 30 meV, beta = 2, T = 4 K).
inline FitResult fit_coherence_curve(const MeasuredSeries& data, const FitSpec& spec_in,
                                     int n_restarts = 8) {
  FitSpec spec = spec_in;
  if (spec.free.empty()) spec = default_coherence_fitspec();
  spec.validate();
  if (data.x.size() < 3) throw usage_error("fit_coherence_curve: need at least 3 points");
  data.validate(spec.free.size() + 1);
  for (double i : data.x)
    if (i < 0.0) throw domain_error("fit_coherence_curve: negative current");

  std::vector<std::string> names;
  std::vector<double> init, lo, hi;
  for (const auto& [name, p] : spec.free) {
    names.push_back(name);
    init.push_back(p.init);
    lo.push_back(p.lo);
    hi.push_back(p.hi);
  }

  auto assemble = [&](const std::vector<double>& theta) {
    TrapModelParams p = line_a_params();
    auto set = [&](const std::string& name, double v) {
      if (name == "tau1") p.tau1_ps = v;
      else if (name == "tau2") p.tau2_ps = v;
      else if (name == "tau3") p.tau3_ps = v;
      else if (name == "e1") p.e1_mev = v;
      else if (name == "e2") p.e2_mev = v;
      else if (name == "beta") p.beta = v;
      else if (name == "i0") p.i0_ua = v;
      else if (name == "sigma_s") p.sigma_s_uev = v;
      else if (name == "temperature") p.temperature_k = v;
      else throw usage_error("fit_coherence_curve: unknown parameter " + name);
    };
    for (const auto& [name, v] : spec.fixed) set(name, v);
    for (std::size_t k = 0; k < names.size(); ++k) set(names[k], theta[k]);
    return p;
  };

  auto objective = [&](const std::vector<double>& theta) {
    const TrapModelParams p = assemble(theta);
    double chi2 = 0.0;
    for (std::size_t i = 0; i < data.x.size(); ++i) {
      const double r = (data.y[i] - coherence_time(p, data.x[i]).tau_c_ps) / data.weight_sigma(i);
      chi2 += r * r;
    }
    return chi2;
  };

  FitResult result;
  auto nm = detail::restarted_nelder_mead(objective, init, lo, hi, n_restarts,
                                          result.restart_best_chi2);
  result.chi2 = nm.fmin;
  result.dof = static_cast<int>(data.x.size()) - static_cast<int>(names.size());
  result.converged = nm.converged;
  result.n_evaluations = nm.evals;
  for (std::size_t k = 0; k < names.size(); ++k) {
    result.values[names[k]] = nm.x[k];
    auto one_dim = [&](double v) {
      std::vector<double> theta = nm.x;
      theta[k] = v;
      return objective(theta);
    };
    result.std_error[names[k]] = detail::curvature_std_error(
        one_dim, nm.x[k], hi[k] - lo[k], nm.fmin, result.dof, !data.sigma.empty());
  }
  return result;
}

// Single-parameter fit of exp(-|delay|/tau_c) to a visibility decay,
// bounded 1-D golden-section search on log tau_c. Non-positive
// visibilities are dropped with a warning.
inline FitResult fit_visibility_decay(const MeasuredSeries& data_in) {
  data_in.validate(1);
  MeasuredSeries data;
  FitResult result;
  for (std::size_t i = 0; i < data_in.x.size(); ++i) {
    if (data_in.y[i] > 0.0) {
      data.x.push_back(std::abs(data_in.x[i]));
      data.y.push_back(data_in.y[i]);
      if (!data_in.sigma.empty()) data.sigma.push_back(data_in.sigma[i]);
    }
  }
  if (data.x.size() < data_in.x.size())
    result.warnings.push_back("rejected " + std::to_string(data_in.x.size() - data.x.size()) +
                              " non-positive visibility points");
  if (data.x.size() < 2)
    throw usage_error("fit_visibility_decay: need at least 2 usable points");

  long evals = 0;
  auto chi2_of = [&](double tau_c) {
    ++evals;
    double chi2 = 0.0;
    for (std::size_t i = 0; i < data.x.size(); ++i) {
      const double r = (data.y[i] - std::exp(-data.x[i] / tau_c)) / data.weight_sigma(i);
      chi2 += r * r;
    }
    return chi2;
  };

  // Log-linear initial guess, then golden-section on ln(tau_c).
  double sxx = 0.0, sxy = 0.0, dmax = 0.0;
  for (std::size_t i = 0; i < data.x.size(); ++i) {
    dmax = std::max(dmax, data.x[i]);
    if (data.x[i] > 0.0 && data.y[i] < 1.0) {
      sxx += data.x[i] * data.x[i];
      sxy += data.x[i] * std::log(data.y[i]);
    }
  }
  if (!(dmax > 0.0)) throw usage_error("fit_visibility_decay: all delays are zero");
  double tau0 = (sxy < 0.0) ? -sxx / sxy : dmax;

  double a = std::log(tau0 / 100.0), b = std::log(tau0 * 100.0);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = chi2_of(std::exp(c)), fd = chi2_of(std::exp(d));
  while (b - a > 1e-12) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = chi2_of(std::exp(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = chi2_of(std::exp(d));
    }
  }
  const double tau_c = std::exp(0.5 * (a + b));
  result.values["tau_c"] = tau_c;
  result.chi2 = chi2_of(tau_c);
  result.dof = static_cast<int>(data.x.size()) - 1;
  result.converged = true;
  result.n_evaluations = evals;
  result.restart_best_chi2 = {result.chi2};
  result.std_error["tau_c"] = detail::curvature_std_error(chi2_of, tau_c, tau_c, result.chi2,
                                                          result.dof, !data.sigma.empty());
  return result;
}

// Radiative lifetime and residual g2(0) from a normalized HBT histogram,
// fitting the convolved source correlation to the bins. Bin errors come
// from Poisson counts.
inline FitResult fit_hbt_lifetime(const CoincidenceHistogram& hist, const ResponseKernel& kernel,
                                  const FitSpec& spec_in, int n_restarts = 8) {
  kernel.validate();
  if (std::abs(kernel.grid_step_ps - hist.bin_width_ps) > 1e-9 * hist.bin_width_ps)
    throw grid_error("fit_hbt_lifetime: kernel grid must match the histogram bins");
  if (!(hist.normalization > 0.0)) throw usage_error("fit_hbt_lifetime: histogram not normalized");
  FitSpec spec = spec_in;
  if (spec.free.empty()) spec = default_hbt_fitspec();
  spec.validate();
  if (!spec.free.count("tau_r") || !spec.free.count("g2_zero"))
    throw usage_error("fit_hbt_lifetime: free parameters must be tau_r and g2_zero");

  const std::size_t n_bins = hist.counts.size();
  const auto normalized = hist.normalized();
  std::vector<double> sig(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i)
    sig[i] = std::sqrt(std::max<double>(static_cast<double>(hist.counts[i]), 1.0)) /
             hist.normalization;

  // The model grid extends past the bins by the kernel support so the
  // convolution sees real samples everywhere.
  const double half_range = hist.range_ps + kernel.half_support_ps() + hist.bin_width_ps;
  auto model_at_bins = [&](double tau_r, double g2_zero) {
    SourceSpec s{tau_r, 1.0, g2_zero};
    auto curve = sample_symmetric([&](double t) { return g2_source(t, s); }, hist.bin_width_ps,
                                  half_range);
    const long offset = static_cast<long>(curve.values.size() / 2) -
                        static_cast<long>(hist.center_index());
    std::vector<double> m(n_bins);
    for (std::size_t i = 0; i < n_bins; ++i)
      m[i] = convolve_at(curve, kernel, static_cast<std::size_t>(offset + static_cast<long>(i)));
    return m;
  };

  std::vector<std::string> names = {"g2_zero", "tau_r"};
  std::vector<double> init, lo, hi;
  for (const auto& name : names) {
    const auto& p = spec.free.at(name);
    init.push_back(p.init);
    lo.push_back(p.lo);
    hi.push_back(p.hi);
  }
  auto objective = [&](const std::vector<double>& theta) {
    const auto m = model_at_bins(theta[1], theta[0]);
    double chi2 = 0.0;
    for (std::size_t i = 0; i < n_bins; ++i) {
      const double r = (normalized[i] - m[i]) / sig[i];
      chi2 += r * r;
    }
    return chi2;
  };

  FitResult result;
  auto nm = detail::restarted_nelder_mead(objective, init, lo, hi, n_restarts,
                                          result.restart_best_chi2);
  result.chi2 = nm.fmin;
  result.dof = static_cast<int>(n_bins) - 2;
  result.converged = nm.converged;
  result.n_evaluations = nm.evals;
  for (std::size_t k = 0; k < names.size(); ++k) {
    result.values[names[k]] = nm.x[k];
    auto one_dim = [&](double v) {
      std::vector<double> theta = nm.x;
      theta[k] = v;
      return objective(theta);
    };
    result.std_error[names[k]] =
        detail::curvature_std_error(one_dim, nm.x[k], hi[k] - lo[k], nm.fmin, result.dof, true);
  }
  return result;
}

}  // namespace cwhom
