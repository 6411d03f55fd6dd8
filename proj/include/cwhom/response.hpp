#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "cwhom/constants.hpp"
#include "cwhom/correlations.hpp"
#include "cwhom/errors.hpp"

namespace cwhom {

// Uniformly gridded correlation trace. Sample i lives at
// t_start_ps + i*step_ps.
struct SampledCurve {
  double t_start_ps = 0.0;
  double step_ps = 0.0;
  std::vector<double> values;

  double time_at(std::size_t i) const { return t_start_ps + static_cast<double>(i) * step_ps; }

  // Nearest grid index; callers check the residual where alignment matters.
  std::size_t index_of(double t_ps) const {
    const double x = (t_ps - t_start_ps) / step_ps;
    const long i = std::lround(x);
    const long n = static_cast<long>(values.size());
    return static_cast<std::size_t>(std::clamp(i, 0L, n - 1));
  }

  void validate() const {
    if (!(step_ps > 0.0)) throw usage_error("SampledCurve: step must be positive");
    if (values.size() < 2) throw usage_error("SampledCurve: need at least two samples");
    for (double v : values)
      if (!std::isfinite(v)) throw usage_error("SampledCurve: non-finite sample");
  }
};

// Detection-system response on the same grid as the curves it convolves.
// weights[j] is the mass at time (start_index + j)*grid_step_ps and the
// weights sum to one. fwhm_ps is set when the kernel is an analytic
// Gaussian.
struct ResponseKernel {
  double grid_step_ps = 0.0;
  long start_index = 0;
  std::vector<double> weights;
  std::optional<double> fwhm_ps;

  double time_at(std::size_t j) const {
    return static_cast<double>(start_index + static_cast<long>(j)) * grid_step_ps;
  }

  double mean_ps() const {
    double m = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) m += weights[j] * time_at(j);
    return m;
  }

  // Largest distance from zero covered by the support.
  double half_support_ps() const {
    const double lo = std::abs(time_at(0));
    const double hi = std::abs(time_at(weights.size() - 1));
    return std::max(lo, hi);
  }

  void validate() const {
    if (!(grid_step_ps > 0.0)) throw usage_error("ResponseKernel: grid step must be positive");
    if (weights.empty()) throw usage_error("ResponseKernel: empty weights");
    double sum = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw usage_error("ResponseKernel: negative weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw usage_error("ResponseKernel: weights must sum to 1");
  }
};

// Zero-mean Gaussian response of the given FWHM, truncated at
// truncation_sigmas and renormalized to unit mass.
inline ResponseKernel gaussian_kernel(double fwhm_ps, double step_ps,
                                      double truncation_sigmas = 6.0) {
  if (!(fwhm_ps > 0.0)) throw domain_error("gaussian_kernel: fwhm must be positive");
  if (!(step_ps > 0.0)) throw domain_error("gaussian_kernel: step must be positive");
  if (!(truncation_sigmas >= 4.0))
    throw domain_error("gaussian_kernel: truncation must be at least 4 sigma");
  const double sigma = fwhm_ps / fwhm_per_sigma;
  if (step_ps > sigma)
    throw resolution_error("gaussian_kernel: grid step exceeds sigma, kernel undersampled");
  const long k = static_cast<long>(std::ceil(truncation_sigmas * sigma / step_ps));
  ResponseKernel kernel;
  kernel.grid_step_ps = step_ps;
  kernel.start_index = -k;
  kernel.weights.resize(static_cast<std::size_t>(2 * k + 1));
  double sum = 0.0;
  for (long j = -k; j <= k; ++j) {
    const double t = static_cast<double>(j) * step_ps;
    const double w = std::exp(-0.5 * (t / sigma) * (t / sigma));
    kernel.weights[static_cast<std::size_t>(j + k)] = w;
    sum += w;
  }
  for (double& w : kernel.weights) w /= sum;
  kernel.fwhm_ps = fwhm_ps;
  return kernel;
}

// Measured (possibly asymmetric) response given as (time, weight) samples.
// Linearly resampled onto the working grid and renormalized.
inline ResponseKernel load_tabulated_response(std::span<const std::pair<double, double>> samples,
                                              double step_ps) {
  if (samples.size() < 8) throw usage_error("load_tabulated_response: need at least 8 samples");
  if (!(step_ps > 0.0)) throw usage_error("load_tabulated_response: step must be positive");
  std::vector<std::pair<double, double>> pts(samples.begin(), samples.end());
  std::sort(pts.begin(), pts.end());
  double total = 0.0;
  for (auto& [t, w] : pts) {
    if (!(w >= 0.0)) throw usage_error("load_tabulated_response: negative weight");
    total += w;
  }
  if (!(total > 0.0)) throw usage_error("load_tabulated_response: all weights are zero");

  const long j_lo = static_cast<long>(std::ceil(pts.front().first / step_ps));
  const long j_hi = static_cast<long>(std::floor(pts.back().first / step_ps));
  if (j_hi - j_lo + 1 < 2)
    throw resolution_error("load_tabulated_response: grid step too coarse for the tabulated span");

  ResponseKernel kernel;
  kernel.grid_step_ps = step_ps;
  kernel.start_index = j_lo;
  kernel.weights.resize(static_cast<std::size_t>(j_hi - j_lo + 1));
  std::size_t seg = 0;
  double sum = 0.0;
  for (long j = j_lo; j <= j_hi; ++j) {
    const double t = static_cast<double>(j) * step_ps;
    while (seg + 2 < pts.size() && pts[seg + 1].first < t) ++seg;
    const auto& [t0, w0] = pts[seg];
    const auto& [t1, w1] = pts[seg + 1];
    const double f = (t1 > t0) ? std::clamp((t - t0) / (t1 - t0), 0.0, 1.0) : 0.0;
    const double w = w0 + f * (w1 - w0);
    kernel.weights[static_cast<std::size_t>(j - j_lo)] = w;
    sum += w;
  }
  if (!(sum > 0.0)) throw usage_error("load_tabulated_response: resampled kernel is zero");
  for (double& w : kernel.weights) w /= sum;
  return kernel;
}

// One output sample of curve (x) kernel. Out-of-range curve samples are
// clamped to the edges, which extends the asymptotic plateau.
inline double convolve_at(const SampledCurve& curve, const ResponseKernel& kernel,
                          std::size_t i) {
  const long n = static_cast<long>(curve.values.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < kernel.weights.size(); ++j) {
    const long src = static_cast<long>(i) - kernel.start_index - static_cast<long>(j);
    acc += kernel.weights[j] * curve.values[static_cast<std::size_t>(std::clamp(src, 0L, n - 1))];
  }
  return acc;
}

inline SampledCurve convolve(const SampledCurve& curve, const ResponseKernel& kernel) {
  curve.validate();
  kernel.validate();
  if (std::abs(curve.step_ps - kernel.grid_step_ps) > 1e-9 * kernel.grid_step_ps)
    throw grid_error("convolve: curve and kernel must share a grid step");
  SampledCurve out;
  out.t_start_ps = curve.t_start_ps;
  out.step_ps = curve.step_ps;
  out.values.resize(curve.values.size());
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = convolve_at(curve, kernel, i);
  return out;
}

// Materialize f(t) on a symmetric grid [-half_range, +half_range].
template <typename F>
SampledCurve sample_symmetric(F&& f, double step_ps, double half_range_ps) {
  if (!(step_ps > 0.0) || !(half_range_ps > step_ps))
    throw usage_error("sample_symmetric: bad grid");
  const long k = static_cast<long>(std::ceil(half_range_ps / step_ps));
  SampledCurve curve;
  curve.step_ps = step_ps;
  curve.t_start_ps = -static_cast<double>(k) * step_ps;
  curve.values.resize(static_cast<std::size_t>(2 * k + 1));
  for (long i = -k; i <= k; ++i)
    curve.values[static_cast<std::size_t>(i + k)] = f(static_cast<double>(i) * step_ps);
  return curve;
}

// Post-selected interference visibility as the detection system sees it:
// both correlation curves are convolved with the response and the ratio is
// taken at zero delay. The sampling window covers the arm delay plus five
// kernel supports so the convolution never touches a boundary.
inline double v_hom_measured(const SourceSpec& source, const InterferometerSpec& interf,
                             const ResponseKernel& kernel) {
  source.validate();
  interf.validate();
  kernel.validate();
  const double step = kernel.grid_step_ps;
  const double half_range = interf.delta_tau2_ps + 5.0 * std::max(kernel.half_support_ps(), step);
  const auto perp =
      sample_symmetric([&](double t) { return g2_perp(t, source, interf); }, step, half_range);
  const auto par =
      sample_symmetric([&](double t) { return g2_parallel(t, source, interf); }, step, half_range);
  const std::size_t i0 = perp.values.size() / 2;  // tau = 0
  const double denom = convolve_at(perp, kernel, i0);
  if (std::abs(denom) < 1e-9)
    throw domain_error("v_hom_measured: visibility undefined, convolved g2_perp vanishes at 0");
  const double num = denom - convolve_at(par, kernel, i0);
  return num / denom;
}

// V_HOM(fwhm, tau_c) surface. Row i follows fwhm_range[i], column j
// follows tau_c_range[j]; cells are independent of each other.
inline std::vector<std::vector<double>> visibility_map(const std::vector<double>& fwhm_range_ps,
                                                       const std::vector<double>& tau_c_range_ps,
                                                       const SourceSpec& source_template,
                                                       const InterferometerSpec& interf,
                                                       double step_ps = 5.0) {
  if (fwhm_range_ps.empty() || tau_c_range_ps.empty())
    throw usage_error("visibility_map: empty range");
  for (double f : fwhm_range_ps)
    if (!(f > 0.0)) throw domain_error("visibility_map: fwhm values must be positive");
  for (double tc : tau_c_range_ps)
    if (!(tc > 0.0)) throw domain_error("visibility_map: tau_c values must be positive");
  std::vector<std::vector<double>> map(fwhm_range_ps.size(),
                                       std::vector<double>(tau_c_range_ps.size()));
  for (std::size_t i = 0; i < fwhm_range_ps.size(); ++i) {
    const auto kernel = gaussian_kernel(fwhm_range_ps[i], step_ps);
    for (std::size_t j = 0; j < tau_c_range_ps.size(); ++j) {
      SourceSpec s = source_template;
      s.tau_c_ps = tau_c_range_ps[j];
      map[i][j] = v_hom_measured(s, interf, kernel);
    }
  }
  return map;
}

}  // namespace cwhom
