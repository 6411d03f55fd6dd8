#pragma once

#include <cmath>
#include <vector>

#include "cwhom/constants.hpp"
#include "cwhom/errors.hpp"

namespace cwhom {

// Charge-trap environment of the emitting state. Carrier capture is
// mediated by optical phonons (tau2, e2), escape by acoustic phonons
// (tau1, e1) and by an Auger channel (tau3) that saturates with injection
// current at i0. sigma_s is the saturation value of the spectral
// modulation amplitude.
struct TrapModelParams {
  double tau1_ps = 200.0;
  double tau2_ps = 5.0;
  double tau3_ps = 750.0;
  double e1_mev = 1.0;
  double e2_mev = 30.0;
  double beta = 2.0;
  double i0_ua = 300.0;
  double sigma_s_uev = 188.0;
  double temperature_k = 4.0;

  void validate() const {
    auto pos = [](double v, const char* what) {
      if (!(v > 0.0)) throw domain_error(std::string(what) + " must be positive");
    };
    pos(tau1_ps, "tau1_ps");
    pos(tau2_ps, "tau2_ps");
    pos(tau3_ps, "tau3_ps");
    pos(e1_mev, "e1_mev");
    pos(e2_mev, "e2_mev");
    pos(beta, "beta");
    pos(i0_ua, "i0_ua");
    pos(sigma_s_uev, "sigma_s_uev");
    pos(temperature_k, "temperature_k");
  }
};

inline TrapModelParams line_a_params() {
  return TrapModelParams{200.0, 5.0, 750.0, 1.0, 30.0, 2.0, 300.0, 188.0, 4.0};
}

inline TrapModelParams line_b_params() {
  return TrapModelParams{200.0, 5.0, 550.0, 1.0, 30.0, 2.0, 200.0, 285.0, 4.0};
}

// One evaluation of the trap model at a given injection current.
struct CoherencePoint {
  double current_ua = 0.0;
  double tau_down_ps = 0.0;      // trap capture time
  double tau_up_ps = 0.0;        // trap escape time
  double tau_f_ps = 0.0;         // fluctuation timescale, 1/tf = 1/tu + 1/td
  double sigma_uev = 0.0;        // modulation amplitude, <= sigma_s
  double tau_c_ps = 0.0;         // coherence time
  double narrowing_ratio = 0.0;  // sigma*tau_f/hbar; << 1 means fast modulation
};

// Mean thermal occupancy of a bosonic mode of energy e at temperature T.
inline double bose_occupation(double e_mev, double temperature_k) {
  if (!(e_mev > 0.0)) throw domain_error("bose_occupation: energy must be positive");
  if (!(temperature_k > 0.0)) throw domain_error("bose_occupation: temperature must be positive");
  return 1.0 / std::expm1(e_mev / (kb_mev_per_k * temperature_k));
}

// Trap capture rate 1/tau_down = (1 + n2)/tau2, in ps^-1.
inline double capture_rate(const TrapModelParams& p) {
  p.validate();
  return (1.0 + bose_occupation(p.e2_mev, p.temperature_k)) / p.tau2_ps;
}

// Trap escape rate 1/tau_up = n1/tau1 + (1/tau3) * I^b/(I^b + I0^b), in ps^-1.
// The Auger term is written as a dimensionless current ratio, so no unit
// conversion enters.
inline double escape_rate(const TrapModelParams& p, double current_ua) {
  p.validate();
  if (current_ua < 0.0) throw domain_error("escape_rate: current must be non-negative");
  const double n1 = bose_occupation(p.e1_mev, p.temperature_k);
  const double ib = std::pow(current_ua, p.beta);
  const double i0b = std::pow(p.i0_ua, p.beta);
  return n1 / p.tau1_ps + (1.0 / p.tau3_ps) * (ib / (ib + i0b));
}

// Harmonic combination of the capture and escape times.
inline double fluctuation_time(double tau_up_ps, double tau_down_ps) {
  if (!(tau_up_ps > 0.0) || !(tau_down_ps > 0.0))
    throw domain_error("fluctuation_time: timescales must be positive");
  return 1.0 / (1.0 / tau_up_ps + 1.0 / tau_down_ps);
}

// Effective spectral modulation amplitude. Equal capture and escape times
// give the saturation value sigma_s; any asymmetry reduces it.
inline double modulation_amplitude(double sigma_s_uev, double tau_up_ps, double tau_down_ps) {
  if (!(sigma_s_uev > 0.0)) throw domain_error("modulation_amplitude: sigma_s must be positive");
  if (!(tau_up_ps > 0.0) || !(tau_down_ps > 0.0))
    throw domain_error("modulation_amplitude: timescales must be positive");
  const double r = std::sqrt(tau_up_ps / tau_down_ps);
  return 2.0 * sigma_s_uev / (r + 1.0 / r);
}

// sigma*tau_f/hbar. Values well below one put the line in the
// fast-modulation (Lorentzian) regime.
inline double narrowing_ratio(double sigma_uev, double tau_f_ps) {
  return sigma_uev * tau_f_ps / hbar_uev_ps;
}

// Full trap-model evaluation: rates, fluctuation timescale, modulation
// amplitude and the resulting coherence time tau_c = hbar^2/(sigma^2 tau_f).
inline CoherencePoint coherence_time(const TrapModelParams& p, double current_ua) {
  const double down = capture_rate(p);
  const double up = escape_rate(p, current_ua);
  CoherencePoint c;
  c.current_ua = current_ua;
  c.tau_down_ps = 1.0 / down;
  c.tau_up_ps = 1.0 / up;
  c.tau_f_ps = fluctuation_time(c.tau_up_ps, c.tau_down_ps);
  c.sigma_uev = modulation_amplitude(p.sigma_s_uev, c.tau_up_ps, c.tau_down_ps);
  c.tau_c_ps = hbar_uev_ps * hbar_uev_ps / (c.sigma_uev * c.sigma_uev * c.tau_f_ps);
  c.narrowing_ratio = narrowing_ratio(c.sigma_uev, c.tau_f_ps);
  return c;
}

inline std::vector<CoherencePoint> coherence_sweep(const TrapModelParams& p,
                                                   const std::vector<double>& currents_ua) {
  if (currents_ua.empty()) throw usage_error("coherence_sweep: current list is empty");
  std::vector<CoherencePoint> out;
  out.reserve(currents_ua.size());
  for (double i : currents_ua) out.push_back(coherence_time(p, i));
  return out;
}

// Lorentzian FWHM corresponding to a coherence time, in ueV.
inline double linewidth_from_coherence(double tau_c_ps) {
  if (!(tau_c_ps > 0.0)) throw domain_error("linewidth_from_coherence: tau_c must be positive");
  return 2.0 * hbar_uev_ps / tau_c_ps;
}

// First-order (single-photon) interference visibility at a path delay.
inline double michelson_visibility(double delay_ps, double tau_c_ps) {
  if (!(tau_c_ps > 0.0)) throw domain_error("michelson_visibility: tau_c must be positive");
  return std::exp(-std::abs(delay_ps) / tau_c_ps);
}

}  // namespace cwhom
