#pragma once

// Unit conventions used throughout: times in ps, energies in ueV unless a
// name says meV, currents in uA. Rates are ps^-1.

namespace cwhom {

inline constexpr double hbar_uev_ps = 658.2120;    // reduced Planck constant
inline constexpr double kb_mev_per_k = 0.0861733;  // Boltzmann constant
inline constexpr double pi = 3.14159265358979323846;

// FWHM of a Gaussian = fwhm_per_sigma * sigma
inline constexpr double fwhm_per_sigma = 2.3548200450309493;  // 2*sqrt(2*ln 2)

}  // namespace cwhom
