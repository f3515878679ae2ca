#ifndef GASJITTER_UNITS_HPP
#define GASJITTER_UNITS_HPP

namespace gasjitter::units {

// Internal units are strictly SI: Pa, m, kg/s, s.
// Non-SI units are accepted at the ingestion boundary only.
inline constexpr double pascals_per_psi = 6894.757293168361;
inline constexpr double meters_per_mile = 1609.344;

inline constexpr double psi_to_pa(double psi) { return psi * pascals_per_psi; }
inline constexpr double pa_to_psi(double pa) { return pa / pascals_per_psi; }
inline constexpr double miles_to_m(double mi) { return mi * meters_per_mile; }
inline constexpr double m_to_miles(double m) { return m / meters_per_mile; }

}  // namespace gasjitter::units

namespace gasjitter::defaults {

inline constexpr double sound_speed = 370.0;   // m/s
inline constexpr double friction = 0.01;       // dimensionless Darcy-type factor
inline constexpr double reference_time = 1.0e3;      // s, "15 min" analysis window
inline constexpr double reference_pressure = 800.0 * units::pascals_per_psi;  // Pa
inline constexpr double compressor_exponent = 0.2857142857142857;  // (gamma-1)/gamma, gamma = 1.4
inline constexpr int profile_samples = 101;    // shared sampling grid per pipe

}  // namespace gasjitter::defaults

#endif
