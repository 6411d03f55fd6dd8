#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cwhom/correlations.hpp"
#include "cwhom/errors.hpp"
#include "cwhom/response.hpp"
#include "cwhom/rng.hpp"

namespace cwhom {

enum class Detector : std::uint8_t { d1 = 0, d2 = 1 };
enum class RoutingMode { hbt, mzi };
enum class Polarization { parallel, orthogonal };

// Continuous emission stream: exponential re-excitation at pump_rate
// followed by exponential radiative decay. The product pump_rate*tau_r is
// capped to stay well below saturation, where the stream's pair
// correlation approaches 1 - exp(-|tau|/tau_r).
struct StreamParams {
  double pump_rate_per_ps = 5.0e-5;
  double tau_r_ps = 800.0;
  double tau_c_ps = 325.0;
  double duration_ps = 2.08e10;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(pump_rate_per_ps > 0.0)) throw usage_error("StreamParams: pump_rate must be positive");
    if (!(tau_r_ps > 0.0)) throw usage_error("StreamParams: tau_r must be positive");
    if (!(tau_c_ps > 0.0)) throw usage_error("StreamParams: tau_c must be positive");
    if (!(duration_ps > 0.0)) throw usage_error("StreamParams: duration must be positive");
    if (!(pump_rate_per_ps * tau_r_ps < 0.2))
      throw usage_error("StreamParams: pump_rate*tau_r must stay below 0.2 (saturation guard)");
  }
};

struct DetectionEvent {
  Detector detector;
  double time_ps;
};

// Photon arrival at the final coupler.
struct RoutedPhoton {
  double arrival_ps;
  std::uint8_t long_arm;  // 1 if the photon took the delayed arm
};

// Signed start-stop-free pair histogram between the two detectors, with
// bins centered at k*bin_width for |k| <= range/bin_width. normalization
// is the accidental (uncorrelated) level per bin.
struct CoincidenceHistogram {
  double bin_width_ps = 0.0;
  double range_ps = 0.0;
  std::vector<std::int64_t> counts;
  double normalization = 0.0;

  long center_index() const { return static_cast<long>(counts.size() / 2); }

  double tau_at(std::size_t i) const {
    return (static_cast<long>(i) - center_index()) * bin_width_ps;
  }

  std::vector<double> normalized() const {
    std::vector<double> out(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
      out[i] = static_cast<double>(counts[i]) / normalization;
    return out;
  }
};

inline std::vector<double> simulate_emission_stream(const StreamParams& p, Rng& rng) {
  p.validate();
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(
      1.1 * p.duration_ps / (1.0 / p.pump_rate_per_ps + p.tau_r_ps) + 16.0));
  double t = 0.0;
  for (;;) {
    t += rng.exponential(1.0 / p.pump_rate_per_ps) + rng.exponential(p.tau_r_ps);
    if (t > p.duration_ps) break;
    times.push_back(t);
  }
  return times;
}

inline std::vector<double> simulate_emission_stream(const StreamParams& p) {
  Rng rng(p.seed);
  return simulate_emission_stream(p, rng);
}

// Split the stream at the first coupler. In MZI mode each photon takes the
// short arm with probability t1 or the delayed arm with probability r1;
// HBT mode has no arms. Output is ordered by arrival at the final coupler.
inline std::vector<RoutedPhoton> route_photons(const std::vector<double>& emissions,
                                               const InterferometerSpec& interf, RoutingMode mode,
                                               Rng& rng) {
  interf.validate();
  std::vector<RoutedPhoton> routed;
  routed.reserve(emissions.size());
  if (mode == RoutingMode::hbt) {
    for (double t : emissions) routed.push_back({t, 0});
    return routed;
  }
  for (double t : emissions) {
    const bool long_arm = rng.bernoulli(interf.r1);
    routed.push_back({t + (long_arm ? interf.delta_tau2_ps : 0.0),
                      static_cast<std::uint8_t>(long_arm ? 1 : 0)});
  }
  std::stable_sort(routed.begin(), routed.end(),
                   [](const RoutedPhoton& a, const RoutedPhoton& b) {
                     return a.arrival_ps < b.arrival_ps;
                   });
  return routed;
}

namespace detail {

// Mutual-nearest pairing of opposite-arm photons within the cutoff. Every
// photon nominates its nearest opposite-arm neighbour in arrival time;
// only reciprocal nominations form a pair, everything else stays
// classical. partner[i] is the pair index or -1.
inline std::vector<long> mutual_nearest_pairs(const std::vector<RoutedPhoton>& records,
                                              double cutoff_ps) {
  const long n = static_cast<long>(records.size());
  std::vector<long> prev_op(n, -1), next_op(n, -1), nominee(n, -1), partner(n, -1);
  std::array<long, 2> last{-1, -1};
  for (long i = 0; i < n; ++i) {
    prev_op[i] = last[1 - records[static_cast<std::size_t>(i)].long_arm];
    last[records[static_cast<std::size_t>(i)].long_arm] = i;
  }
  last = {-1, -1};
  for (long i = n - 1; i >= 0; --i) {
    next_op[i] = last[1 - records[static_cast<std::size_t>(i)].long_arm];
    last[records[static_cast<std::size_t>(i)].long_arm] = i;
  }
  auto arrival = [&](long i) { return records[static_cast<std::size_t>(i)].arrival_ps; };
  for (long i = 0; i < n; ++i) {
    double best = cutoff_ps;
    long who = -1;
    if (prev_op[i] >= 0 && arrival(i) - arrival(prev_op[i]) < best) {
      best = arrival(i) - arrival(prev_op[i]);
      who = prev_op[i];
    }
    if (next_op[i] >= 0 && arrival(next_op[i]) - arrival(i) < best) {
      who = next_op[i];
    }
    nominee[i] = who;
  }
  for (long i = 0; i < n; ++i) {
    const long j = nominee[i];
    if (j > i && nominee[j] == i) {
      partner[i] = j;
      partner[j] = i;
    }
  }
  return partner;
}

}  // namespace detail

// Final-coupler output statistics and detection. Every photon lands on D1
// with marginal probability t2 and on D2 with r2. In parallel polarization,
// photon pairs that meet at the coupler from opposite arms within
// 10*tau_c of each other are drawn jointly: the cross-detector probability
// is 2*r2*t2*(1 - V*exp(-2|d|/tau_c)) with the same-detector outcomes
// absorbing the complement, so singles rates are untouched. Each detection
// then receives independent Gaussian timing jitter.
inline std::vector<DetectionEvent> interfere_and_detect(const std::vector<RoutedPhoton>& records,
                                                        const InterferometerSpec& interf,
                                                        Polarization polarization, double tau_c_ps,
                                                        double per_detector_jitter_ps, Rng& rng) {
  interf.validate();
  if (!(tau_c_ps > 0.0)) throw domain_error("interfere_and_detect: tau_c must be positive");
  if (per_detector_jitter_ps < 0.0)
    throw domain_error("interfere_and_detect: jitter must be non-negative");
  const long n = static_cast<long>(records.size());
  std::vector<long> partner(n, -1);
  if (polarization == Polarization::parallel)
    partner = detail::mutual_nearest_pairs(records, 10.0 * tau_c_ps);

  std::vector<std::uint8_t> det(static_cast<std::size_t>(n), 0);
  for (long i = 0; i < n; ++i) {
    const long j = partner[i];
    if (j < 0) {
      det[static_cast<std::size_t>(i)] = rng.bernoulli(interf.t2) ? 0 : 1;
    } else if (j > i) {
      const double delta =
          std::abs(records[static_cast<std::size_t>(j)].arrival_ps -
                   records[static_cast<std::size_t>(i)].arrival_ps);
      const double q = 2.0 * interf.r2 * interf.t2 *
                       (1.0 - interf.overlap_v * std::exp(-2.0 * delta / tau_c_ps));
      const double u = rng.uniform();
      std::uint8_t di, dj;
      if (u < 0.5 * q) {
        di = 0, dj = 1;
      } else if (u < q) {
        di = 1, dj = 0;
      } else if (u < q + (interf.t2 - 0.5 * q)) {
        di = 0, dj = 0;
      } else {
        di = 1, dj = 1;
      }
      det[static_cast<std::size_t>(i)] = di;
      det[static_cast<std::size_t>(j)] = dj;
    }
  }

  std::vector<DetectionEvent> events;
  events.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    double t = records[static_cast<std::size_t>(i)].arrival_ps;
    if (per_detector_jitter_ps > 0.0) t += rng.normal(per_detector_jitter_ps);
    events.push_back({det[static_cast<std::size_t>(i)] == 0 ? Detector::d1 : Detector::d2, t});
  }
  std::sort(events.begin(), events.end(), [](const DetectionEvent& a, const DetectionEvent& b) {
    return a.time_ps < b.time_ps || (a.time_ps == b.time_ps && a.detector < b.detector);
  });
  return events;
}

// All ordered D1-D2 pairs with |t2 - t1| inside the range, binned at
// bin_width. The accidental level comes from the measured singles rates.
inline CoincidenceHistogram histogram_coincidences(const std::vector<DetectionEvent>& events,
                                                   double bin_width_ps, double range_ps,
                                                   double duration_ps) {
  if (events.empty()) throw usage_error("histogram_coincidences: no events");
  if (!(bin_width_ps > 0.0) || !(range_ps >= bin_width_ps))
    throw usage_error("histogram_coincidences: bad binning");
  if (!(duration_ps > 0.0)) throw usage_error("histogram_coincidences: bad duration");
  std::vector<double> t1, t2;
  for (const auto& e : events) (e.detector == Detector::d1 ? t1 : t2).push_back(e.time_ps);
  if (t1.empty() || t2.empty())
    throw usage_error("histogram_coincidences: one detector saw no events");
  std::sort(t1.begin(), t1.end());
  std::sort(t2.begin(), t2.end());

  const long k_max = std::lround(range_ps / bin_width_ps);
  CoincidenceHistogram h;
  h.bin_width_ps = bin_width_ps;
  h.range_ps = range_ps;
  h.counts.assign(static_cast<std::size_t>(2 * k_max + 1), 0);
  h.normalization = static_cast<double>(t1.size()) * static_cast<double>(t2.size()) *
                    bin_width_ps / duration_ps;

  const double window = (static_cast<double>(k_max) + 0.5) * bin_width_ps;
  std::size_t lo = 0, hi = 0;
  for (const double a : t1) {
    while (lo < t2.size() && t2[lo] < a - window) ++lo;
    if (hi < lo) hi = lo;
    while (hi < t2.size() && t2[hi] < a + window) ++hi;
    for (std::size_t j = lo; j < hi; ++j) {
      const long k = static_cast<long>(std::floor((t2[j] - a) / bin_width_ps + 0.5));
      if (k >= -k_max && k <= k_max)
        ++h.counts[static_cast<std::size_t>(k + k_max)];
    }
  }
  return h;
}

// Per-bin z-scores of a histogram against an analytic curve sharing its
// grid, using Poisson errors on the expected counts.
struct McComparisonReport {
  double max_abs_z = 0.0;
  double mean_z2 = 0.0;
  std::size_t n_bins = 0;
  std::vector<double> tau_ps;
  std::vector<double> mc_normalized;
  std::vector<double> model;
  std::vector<double> z;
};

inline McComparisonReport mc_vs_analytic(const CoincidenceHistogram& hist,
                                         const SampledCurve& analytic_curve) {
  analytic_curve.validate();
  if (std::abs(analytic_curve.step_ps - hist.bin_width_ps) > 1e-9 * hist.bin_width_ps)
    throw grid_error("mc_vs_analytic: curve step must equal the histogram bin width");
  McComparisonReport r;
  r.n_bins = hist.counts.size();
  r.tau_ps.reserve(r.n_bins);
  double sum_z2 = 0.0;
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    const double tau = hist.tau_at(i);
    const std::size_t ci = analytic_curve.index_of(tau);
    if (std::abs(analytic_curve.time_at(ci) - tau) > 1e-6 * hist.bin_width_ps)
      throw grid_error("mc_vs_analytic: histogram bin center off the curve grid");
    const double model = analytic_curve.values[ci];
    const double mu = std::max(hist.normalization * model, 1e-12);
    const double z = (static_cast<double>(hist.counts[i]) - mu) / std::sqrt(mu);
    r.tau_ps.push_back(tau);
    r.mc_normalized.push_back(static_cast<double>(hist.counts[i]) / hist.normalization);
    r.model.push_back(model);
    r.z.push_back(z);
    r.max_abs_z = std::max(r.max_abs_z, std::abs(z));
    sum_z2 += z * z;
  }
  r.mean_z2 = sum_z2 / static_cast<double>(r.n_bins);
  return r;
}

// One full stream -> detections -> histogram run.
struct SimulationResult {
  std::vector<DetectionEvent> events;
  CoincidenceHistogram histogram;
  std::array<std::int64_t, 2> singles{0, 0};
  std::size_t n_emitted = 0;
};

inline SimulationResult simulate_run(const StreamParams& params, const InterferometerSpec& interf,
                                     RoutingMode mode, Polarization polarization,
                                     double per_detector_jitter_ps, double bin_width_ps,
                                     double range_ps) {
  params.validate();
  interf.validate();
  if (mode == RoutingMode::mzi && !(params.duration_ps >= 10.0 * interf.delta_tau2_ps))
    throw usage_error("simulate_run: duration must dominate the interferometer delay");
  Rng rng(params.seed);
  const auto emissions = simulate_emission_stream(params, rng);
  const auto routed = route_photons(emissions, interf, mode, rng);
  // HBT measurements use their own balanced coupler in front of the
  // detectors, independent of the interferometer.
  InterferometerSpec coupler = interf;
  if (mode == RoutingMode::hbt) coupler.r2 = coupler.t2 = 0.5;
  SimulationResult out;
  out.n_emitted = emissions.size();
  out.events = interfere_and_detect(routed, coupler, polarization, params.tau_c_ps,
                                    per_detector_jitter_ps, rng);
  out.histogram = histogram_coincidences(out.events, bin_width_ps, range_ps, params.duration_ps);
  for (const auto& e : out.events) ++out.singles[static_cast<std::size_t>(e.detector)];
  return out;
}

}  // namespace cwhom
