#pragma once

#include <cmath>

#include "cwhom/errors.hpp"

namespace cwhom {

// Emitter under weak continuous pumping: radiative lifetime, coherence
// time and a residual zero-delay correlation for imperfect suppression.
struct SourceSpec {
  double tau_r_ps = 800.0;
  double tau_c_ps = 325.0;
  double g2_zero = 0.0;

  void validate() const {
    if (!(tau_r_ps > 0.0)) throw domain_error("SourceSpec: tau_r must be positive");
    if (!(tau_c_ps > 0.0)) throw domain_error("SourceSpec: tau_c must be positive");
    if (!(g2_zero >= 0.0 && g2_zero < 1.0)) throw domain_error("SourceSpec: g2_zero must be in [0,1)");
  }
};

// Fibre Mach-Zehnder with a delay delta_tau2 in one arm. r/t are intensity
// coefficients of the two couplers (lossless, r + t = 1); overlap_v is the
// wavefunction overlap at the final coupler.
struct InterferometerSpec {
  double r1 = 0.5;
  double t1 = 0.5;
  double r2 = 0.5;
  double t2 = 0.5;
  double delta_tau2_ps = 10000.0;
  double overlap_v = 1.0;

  void validate() const {
    auto unit = [](double v, const char* what) {
      if (!(v >= 0.0 && v <= 1.0)) throw domain_error(std::string(what) + " must be in [0,1]");
    };
    unit(r1, "InterferometerSpec: r1");
    unit(t1, "InterferometerSpec: t1");
    unit(r2, "InterferometerSpec: r2");
    unit(t2, "InterferometerSpec: t2");
    unit(overlap_v, "InterferometerSpec: overlap_v");
    if (std::abs(r1 + t1 - 1.0) > 1e-9)
      throw domain_error("InterferometerSpec: first coupler must satisfy r1 + t1 = 1");
    if (std::abs(r2 + t2 - 1.0) > 1e-9)
      throw domain_error("InterferometerSpec: final coupler must satisfy r2 + t2 = 1");
    if (!(delta_tau2_ps > 0.0)) throw domain_error("InterferometerSpec: delta_tau2 must be positive");
  }

  bool balanced_final() const { return std::abs(r2 - t2) < 1e-9; }

  // Post-selection assumes the arm delay is long compared to the photon
  // coherence; callers should warn when this fails.
  bool separates_coherence(double tau_c_ps) const { return delta_tau2_ps >= 10.0 * tau_c_ps; }
};

// Source autocorrelation in the weak-pumping limit.
inline double g2_source(double tau_ps, const SourceSpec& s) {
  return 1.0 - (1.0 - s.g2_zero) * std::exp(-std::abs(tau_ps) / s.tau_r_ps);
}

// Cross-detector correlation for distinguishable (orthogonal) photons:
// a central term from same-arm pairs plus two delayed terms from
// opposite-arm pairs.
inline double g2_perp(double tau_ps, const SourceSpec& s, const InterferometerSpec& f) {
  const double central = 4.0 * (f.t1 * f.t1 + f.r1 * f.r1) * f.r2 * f.t2 * g2_source(tau_ps, s);
  const double delayed = 4.0 * f.r1 * f.t1 *
                         (f.t2 * f.t2 * g2_source(tau_ps - f.delta_tau2_ps, s) +
                          f.r2 * f.r2 * g2_source(tau_ps + f.delta_tau2_ps, s));
  return central + delayed;
}

// Same structure with two-photon interference suppressing the delayed
// (opposite-arm) term. The suppression factor multiplies only that term;
// the central term is already antibunched at zero delay.
inline double g2_parallel(double tau_ps, const SourceSpec& s, const InterferometerSpec& f) {
  const double central = 4.0 * (f.t1 * f.t1 + f.r1 * f.r1) * f.r2 * f.t2 * g2_source(tau_ps, s);
  const double delayed = 4.0 * f.r1 * f.t1 *
                         (f.t2 * f.t2 * g2_source(tau_ps - f.delta_tau2_ps, s) +
                          f.r2 * f.r2 * g2_source(tau_ps + f.delta_tau2_ps, s));
  const double suppression = 1.0 - f.overlap_v * std::exp(-2.0 * std::abs(tau_ps) / s.tau_c_ps);
  return central + delayed * suppression;
}

// Two-photon interference visibility (g_perp - g_par)/g_perp.
inline double v_hom_ideal(double tau_ps, const SourceSpec& s, const InterferometerSpec& f) {
  const double perp = g2_perp(tau_ps, s, f);
  if (std::abs(perp) < 1e-12)
    throw domain_error("v_hom_ideal: undefined where g2_perp vanishes");
  return (perp - g2_parallel(tau_ps, s, f)) / perp;
}

}  // namespace cwhom
