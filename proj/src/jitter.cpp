#include "gasjitter/jitter.hpp"

#include <cmath>
#include <queue>

#include "gasjitter/errors.hpp"

namespace gasjitter {

double ZeroModeProfile::value(double x) const {
  double sq = inlet_sq - drop_rate * x;
  if (sq <= 0) throw InfeasibleError("zero-mode profile collapses");
  return half_end_sum / std::sqrt(sq);
}

ZeroModeProfile zero_mode_profile(const SteadyState& ss, int pipe) {
  const Pipe& p = ss.net->pipes[pipe];
  ZeroModeProfile z;
  z.pipe = pipe;
  z.length = p.length;
  z.half_end_sum = 0.5 * (ss.inlet_pressure[pipe] + ss.outlet_pressure[pipe]);
  z.inlet_sq = ss.inlet_pressure[pipe] * ss.inlet_pressure[pipe];
  double flux = ss.flows.flow[pipe] / p.area();
  z.drop_rate = (ss.net->pipe_beta(p) / p.diameter) * flux * std::abs(flux);
  return z;
}

EdgeConstants edge_constants(const Network& net, const SteadyState& ss) {
  ValidationReport rep = validate(net);
  if (!rep.connected || !rep.acyclic)
    throw DomainError("edge constants require a connected tree");
  if (net.pipes.empty()) throw DomainError("network has no pipes");

  auto end_ratio = [&](int pipe, int node) {
    int c = net.compressor_at(pipe, node);
    return c >= 0 ? ss.ratios[c] : 1.0;
  };
  auto z_at_end = [&](int pipe, int node) {
    ZeroModeProfile z = zero_mode_profile(ss, pipe);
    return net.pipes[pipe].from == node ? z.at_from_end() : z.at_to_end();
  };

  EdgeConstants out;
  out.c.assign(net.pipes.size(), -1.0);
  out.node_coeff.assign(net.nodes.size(), -1.0);

  Adjacency adj = build_adjacency(net);
  std::queue<int> frontier;
  frontier.push(net.slack);
  std::vector<char> queued(net.nodes.size(), 0);
  queued[net.slack] = 1;
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop();
    for (const auto& arc : adj.arcs[u]) {
      if (out.c[arc.pipe] < 0) {
        if (out.node_coeff[u] < 0) {
          // First pipe out of the slack node fixes the free global scale.
          out.c[arc.pipe] = 1.0;
          out.node_coeff[u] = z_at_end(arc.pipe, u) / end_ratio(arc.pipe, u);
        } else {
          out.c[arc.pipe] =
              out.node_coeff[u] * end_ratio(arc.pipe, u) / z_at_end(arc.pipe, u);
        }
      }
      if (out.node_coeff[arc.neighbor] < 0) {
        out.node_coeff[arc.neighbor] = out.c[arc.pipe] *
                                       z_at_end(arc.pipe, arc.neighbor) /
                                       end_ratio(arc.pipe, arc.neighbor);
      }
      if (!queued[arc.neighbor]) {
        queued[arc.neighbor] = 1;
        frontier.push(arc.neighbor);
      }
    }
  }
  return out;
}

FluctuationStrength fluctuation_strength(const Network& net) {
  FluctuationStrength fs;
  double weighted_tau = 0.0;
  for (const auto& nd : net.nodes) {
    double s2 = nd.noise_sigma * nd.noise_sigma;
    fs.strength += s2;
    weighted_tau += s2 * nd.noise_tau;
  }
  // Var of the integrated fluctuation grows as (2 sum sigma^2 tau) * t for
  // independent exponentially correlated sources; fold that into tau_eff so
  // S * tau_eff is exactly the zero-frequency spectral density.
  if (fs.strength > 0)
    fs.tau_eff = 2.0 * weighted_tau / fs.strength;
  else
    fs.tau_eff = defaults::reference_time;
  return fs;
}

double JitterProfile::pipe_prefactor(int pipe) const {
  double cs2 = net->gas.sound_speed * net->gas.sound_speed;
  return cs2 * consts.c[pipe] / weighted_const_sum;
}

double JitterProfile::diffusion_at(int pipe, double x) const {
  double amp = pipe_prefactor(pipe) * zeta[pipe].value(x);
  return amp * amp * strength.strength * strength.tau_eff;
}

double JitterProfile::node_diffusion(int node) const {
  double cs2 = net->gas.sound_speed * net->gas.sound_speed;
  double amp = cs2 * consts.node_coeff[node] / weighted_const_sum;
  return amp * amp * strength.strength * strength.tau_eff;
}

double JitterProfile::growth_factor(double xi_integral) const {
  double cs2 = net->gas.sound_speed * net->gas.sound_speed;
  return cs2 * xi_integral / weighted_const_sum;
}

double JitterProfile::delta_p(int pipe, double x, double xi_integral) const {
  return growth_factor(xi_integral) * consts.c[pipe] * zeta[pipe].value(x);
}

JitterProfile diffusion_profile(const Network& net, const SteadyState& ss,
                                const EdgeConstants& consts,
                                const FluctuationStrength& strength) {
  JitterProfile jp;
  jp.net = &net;
  jp.consts = consts;
  jp.strength = strength;
  jp.zeta.reserve(net.pipes.size());
  for (size_t e = 0; e < net.pipes.size(); ++e)
    jp.zeta.push_back(zero_mode_profile(ss, static_cast<int>(e)));
  // The growth factor divides by the c-weighted linepack volume; that keeps
  // the answer invariant under rescaling all c and makes Var = D*t hold in
  // physical units on mixed-diameter networks.
  jp.weighted_const_sum = 0.0;
  for (size_t e = 0; e < net.pipes.size(); ++e)
    jp.weighted_const_sum += consts.c[e] * net.pipes[e].volume();
  return jp;
}

JitterProfile diffusion_profile(const Network& net, const SteadyState& ss) {
  return diffusion_profile(net, ss, edge_constants(net, ss), fluctuation_strength(net));
}

double normalize_diffusion(double diffusion, double p0, double t0) {
  if (p0 <= 0 || t0 <= 0) throw DomainError("normalization scales must be positive");
  double d0 = (p0 / 3.0) * (p0 / 3.0) / t0;
  return diffusion / d0;
}

double pressure_pdf(double diffusion, double t, double delta) {
  if (diffusion <= 0 || t <= 0)
    throw DomainError("pressure_pdf needs positive diffusion and time");
  double var = diffusion * t;
  return std::exp(-delta * delta / (2.0 * var)) / std::sqrt(2.0 * M_PI * var);
}

double exceedance_probability(double diffusion, double t, double margin) {
  if (margin < 0) throw DomainError("margin must be non-negative");
  if (diffusion <= 0 || t <= 0)
    throw DomainError("exceedance needs positive diffusion and time");
  double z = margin / std::sqrt(diffusion * t);
  return std::erfc(z / std::sqrt(2.0));
}

}  // namespace gasjitter
