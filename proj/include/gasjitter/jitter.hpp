#ifndef GASJITTER_JITTER_HPP
#define GASJITTER_JITTER_HPP

#include <vector>

#include "gasjitter/steady.hpp"

namespace gasjitter {

// Spatial shape of the asymptotically growing pressure-fluctuation component
// along one pipe, normalized so its length-average is exactly 1:
//   Z(x) = (p_in + p_out) / (2 p(x)).
struct ZeroModeProfile {
  int pipe = -1;
  double half_end_sum = 0.0;  // (p_in + p_out)/2, Pa
  double inlet_sq = 0.0;      // p_in^2
  double drop_rate = 0.0;     // (beta/d) * flux * |flux|, Pa^2 per m
  double length = 0.0;

  double value(double x) const;
  double at_from_end() const { return value(0.0); }
  double at_to_end() const { return value(length); }
};

ZeroModeProfile zero_mode_profile(const SteadyState& ss, int pipe);

// Per-pipe zero-mode weights, anchored to 1 on the first pipe out of the
// slack node, then propagated so the nodal fluctuation coefficient is
// single-valued at every junction (compressor ratios included).
struct EdgeConstants {
  std::vector<double> c;           // per pipe, > 0, global scale arbitrary
  std::vector<double> node_coeff;  // per node: delta-p coefficient kappa
};

EdgeConstants edge_constants(const Network& net, const SteadyState& ss);

// Global mean-square consumption fluctuation and the effective correlation
// time that converts it into the zero-frequency spectral density S*tau_eff.
struct FluctuationStrength {
  double strength = 0.0;  // S = sum sigma_n^2, (kg/s)^2
  double tau_eff = defaults::reference_time;  // s
};

FluctuationStrength fluctuation_strength(const Network& net);

// Diffusion rate of the pressure-fluctuation variance: Var(delta p) = D * t.
struct JitterProfile {
  const Network* net = nullptr;
  std::vector<ZeroModeProfile> zeta;  // per pipe
  EdgeConstants consts;
  FluctuationStrength strength;
  double weighted_const_sum = 0.0;  // sum over pipes of c * A * L, m^3

  // D_ij(x), Pa^2/s
  double diffusion_at(int pipe, double x) const;
  // Diffusion rate of the nodal fluctuation (continuous across compressors).
  double node_diffusion(int node) const;
  // Per-pipe global prefactor c_s^2 c_ij / (sum c V), 1/(m s^2).
  double pipe_prefactor(int pipe) const;
  // Growth factor a applied to Z given the time-integrated net consumption
  // fluctuation Xi = integral of sum_n xi_n dt, kg.
  double growth_factor(double xi_integral) const;
  // Zero-mode pressure deviation a * c * Z at (pipe, x).
  double delta_p(int pipe, double x, double xi_integral) const;
};

JitterProfile diffusion_profile(const Network& net, const SteadyState& ss,
                                const EdgeConstants& consts,
                                const FluctuationStrength& strength);
JitterProfile diffusion_profile(const Network& net, const SteadyState& ss);

// D normalized by D0 = (p0/3)^2 / t0.
double normalize_diffusion(double diffusion, double p0 = defaults::reference_pressure,
                           double t0 = defaults::reference_time);

// Gaussian density of the pressure fluctuation delta at elapsed time t.
double pressure_pdf(double diffusion, double t, double delta);

// P(|delta p(t)| >= margin), two-sided Gaussian tail.
double exceedance_probability(double diffusion, double t, double margin);

}  // namespace gasjitter

#endif
