#include "gasjitter/transient.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <thread>

#include "gasjitter/errors.hpp"

namespace gasjitter {

double Grid::min_dx() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& p : pipes) m = std::min(m, p.dx);
  return m;
}

Grid discretize(const Network& net, double dx_target) {
  if (dx_target <= 0) throw DomainError("dx_target must be positive");
  Grid g;
  g.pipes.resize(net.pipes.size());
  for (size_t e = 0; e < net.pipes.size(); ++e) {
    int cells = static_cast<int>(std::ceil(net.pipes[e].length / dx_target));
    cells = std::max(cells, 4);
    g.pipes[e].cells = cells;
    g.pipes[e].dx = net.pipes[e].length / cells;
  }
  return g;
}

double ou_step(double xi, double sigma, double tau, double dt, std::mt19937_64& rng) {
  if (!(dt < tau)) throw DomainError("ou_step needs dt < tau");
  double decay = std::exp(-dt / tau);
  if (sigma == 0.0) return xi * decay;
  std::normal_distribution<double> unit(0.0, 1.0);
  return xi * decay + sigma * std::sqrt(1.0 - decay * decay) * unit(rng);
}

double SimState::linepack(const Network& net, const Grid& grid) const {
  double cs2 = net.gas.sound_speed * net.gas.sound_speed;
  double mass = 0.0;
  for (size_t e = 0; e < cell_p.size(); ++e) {
    double cell_vol = net.pipes[e].area() * grid.pipes[e].dx;
    double sum = 0.0;
    for (double p : cell_p[e]) sum += p;
    mass += sum * cell_vol / cs2;
  }
  return mass;
}

double SimState::pipe_mean_pressure(int pipe) const {
  double sum = 0.0;
  for (double p : cell_p[pipe]) sum += p;
  return sum / static_cast<double>(cell_p[pipe].size());
}

SimState initial_state(const Network& net, const Grid& grid, const SteadyState& ss,
                       std::uint64_t seed) {
  SimState st;
  st.time = 0.0;
  st.cell_p.resize(net.pipes.size());
  st.face_flux.resize(net.pipes.size());
  st.node_p = ss.node_pressure;
  st.ratios = ss.ratios;
  st.xi.assign(net.nodes.size(), 0.0);
  st.rng.seed(seed);
  st.boundary_in_integral.assign(net.pipes.size(), 0.0);
  st.boundary_out_integral.assign(net.pipes.size(), 0.0);
  for (size_t e = 0; e < net.pipes.size(); ++e) {
    int n = grid.pipes[e].cells;
    double dx = grid.pipes[e].dx;
    st.cell_p[e].resize(n);
    // Cell centers sampled off the exact stationary profile: the discrete
    // momentum balance with arithmetic-mean face pressures then has zero
    // residual and the scheme holds the state to rounding.
    for (int k = 0; k < n; ++k)
      st.cell_p[e][k] = ss.pressure_at(static_cast<int>(e), (k + 0.5) * dx);
    st.face_flux[e].assign(n + 1, ss.flows.flow[e] / net.pipes[e].area());
  }
  return st;
}

void step(SimState& st, const Grid& grid, const Network& net, double dt,
          double cfl_safety) {
  double dx_min = grid.min_dx();
  if (dt > cfl_safety * dx_min / net.gas.sound_speed * (1.0 + 1e-12))
    throw DomainError("time step violates the CFL bound " +
                      std::to_string(cfl_safety * dx_min / net.gas.sound_speed) + " s");

  const double cs2 = net.gas.sound_speed * net.gas.sound_speed;
  const size_t n_pipes = net.pipes.size();

  // OU noise advances first; the junction solves target the new values.
  double xi_sum = 0.0;
  for (size_t i = 0; i < net.nodes.size(); ++i) {
    const Node& nd = net.nodes[i];
    if (nd.noise_sigma > 0.0)
      st.xi[i] = ou_step(st.xi[i], nd.noise_sigma, nd.noise_tau, dt, st.rng);
    xi_sum += st.xi[i];
  }
  st.xi_integral += dt * xi_sum;

  auto end_ratio = [&](int pipe, int node) {
    int c = net.compressor_at(pipe, node);
    return c >= 0 ? st.ratios[c] : 1.0;
  };

  // Boundary faces respond affinely to the (unknown) new nodal pressure:
  // flux' = C + K * p_node into the pipe at the start face, C' - K' * p_node
  // out of it at the end face. Friction is semi-implicit: the implicit flux
  // is divided by 1 + dt * (beta/2d) |flux|/p_mean.
  std::vector<double> c0(n_pipes), k0(n_pipes), cn(n_pipes), kn(n_pipes);
  for (size_t e = 0; e < n_pipes; ++e) {
    const Pipe& p = net.pipes[e];
    double dx = grid.pipes[e].dx;
    int n = grid.pipes[e].cells;
    double fric = net.pipe_beta(p) / (2.0 * p.diameter);
    double g2 = 2.0 * dt / dx;

    double a_from = end_ratio(static_cast<int>(e), p.from);
    double ghost0 = a_from * st.node_p[p.from];
    double pm0 = 0.5 * (st.cell_p[e][0] + ghost0);
    double d0 = 1.0 + dt * fric * std::abs(st.face_flux[e][0]) / pm0;
    c0[e] = (st.face_flux[e][0] - g2 * st.cell_p[e][0]) / d0;
    k0[e] = g2 * a_from / d0;

    double a_to = end_ratio(static_cast<int>(e), p.to);
    double ghostn = a_to * st.node_p[p.to];
    double pmn = 0.5 * (st.cell_p[e][n - 1] + ghostn);
    double dn = 1.0 + dt * fric * std::abs(st.face_flux[e][n]) / pmn;
    cn[e] = (st.face_flux[e][n] + g2 * st.cell_p[e][n - 1]) / dn;
    kn[e] = g2 * a_to / dn;
  }

  // Zero-volume junction: pick the new nodal pressure so the updated end
  // fluxes balance q + xi exactly.
  for (size_t i = 0; i < net.nodes.size(); ++i) {
    double num = net.nodes[i].injection + st.xi[i];
    double den = 0.0;
    for (size_t e = 0; e < n_pipes; ++e) {
      const Pipe& p = net.pipes[e];
      double area = p.area();
      if (p.from == static_cast<int>(i)) {
        num -= area * c0[e];
        den += area * k0[e];
      }
      if (p.to == static_cast<int>(i)) {
        num += area * cn[e];
        den += area * kn[e];
      }
    }
    if (den <= 0.0) throw DomainError("node '" + net.nodes[i].id + "' has no pipe ends");
    st.node_p[i] = num / den;
    if (st.node_p[i] <= 0.0)
      throw DomainError("pressure blow-up (negative) at node '" + net.nodes[i].id +
                        "', t = " + std::to_string(st.time));
  }

  // Faces, then cells from the new fluxes.
  for (size_t e = 0; e < n_pipes; ++e) {
    const Pipe& p = net.pipes[e];
    auto& flux = st.face_flux[e];
    auto& cp = st.cell_p[e];
    int n = grid.pipes[e].cells;
    double dx = grid.pipes[e].dx;
    double fric = net.pipe_beta(p) / (2.0 * p.diameter);

    flux[0] = c0[e] + k0[e] * st.node_p[p.from];
    flux[n] = cn[e] - kn[e] * st.node_p[p.to];
    for (int j = 1; j < n; ++j) {
      double pm = 0.5 * (cp[j] + cp[j - 1]);
      double dfr = 1.0 + dt * fric * std::abs(flux[j]) / pm;
      flux[j] = (flux[j] - (dt / dx) * (cp[j] - cp[j - 1])) / dfr;
    }

    st.boundary_in_integral[e] += dt * p.area() * flux[0];
    st.boundary_out_integral[e] += dt * p.area() * flux[n];

    double scale = dt * cs2 / dx;
    for (int j = 0; j < n; ++j) {
      cp[j] -= scale * (flux[j + 1] - flux[j]);
      if (cp[j] <= 0.0)
        throw DomainError("pressure blow-up in pipe '" + p.id + "' cell " +
                          std::to_string(j) + ", t = " + std::to_string(st.time));
    }
  }
  st.time += dt;
}

Ensemble simulate(const Network& net, const std::vector<double>& ratios,
                  const SimulateOptions& opts) {
  if (opts.trajectories < 1) throw DomainError("need at least one trajectory");
  if (opts.probes.empty()) throw DomainError("simulate needs at least one probe");
  SteadyState ss = solve_steady(net, ratios);
  Grid grid = discretize(net, opts.dx_target);
  double cfl_dt = 0.5 * grid.min_dx() / net.gas.sound_speed;
  double dt = opts.dt > 0 ? opts.dt : cfl_dt;
  if (dt > cfl_dt) throw DomainError("requested dt violates the CFL bound");

  long total_steps = std::lround(std::ceil(opts.horizon / dt));
  int stride = std::max(1, opts.stride);
  long samples = total_steps / stride + 1;

  Ensemble ens;
  ens.dt = dt;
  ens.times.resize(samples);
  for (long s = 0; s < samples; ++s) ens.times[s] = static_cast<double>(s * stride) * dt;

  // Probe readers against a state.
  auto read_probe = [&](const Probe& pr, const SimState& st) {
    switch (pr.kind) {
      case Probe::Kind::cell: {
        int cell = std::clamp(static_cast<int>(pr.x / grid.pipes[pr.pipe].dx),
                              0, grid.pipes[pr.pipe].cells - 1);
        return st.cell_p[pr.pipe][cell];
      }
      case Probe::Kind::pipe_mean:
        return st.pipe_mean_pressure(pr.pipe);
      case Probe::Kind::node:
        return st.node_p[pr.node];
    }
    return 0.0;
  };

  SimState ref = initial_state(net, grid, ss, opts.seed);
  ens.reference.resize(opts.probes.size());
  for (size_t p = 0; p < opts.probes.size(); ++p)
    ens.reference[p] = read_probe(opts.probes[p], ref);

  ens.series.assign(opts.probes.size(),
                    std::vector<std::vector<double>>(
                        opts.trajectories, std::vector<double>(samples, 0.0)));
  ens.xi_integral.assign(opts.trajectories, std::vector<double>(samples, 0.0));

  auto run_range = [&](int lo, int hi) {
    for (int traj = lo; traj < hi; ++traj) {
      SimState st = initial_state(net, grid, ss, opts.seed + static_cast<std::uint64_t>(traj));
      long sample = 0;
      for (size_t p = 0; p < opts.probes.size(); ++p)
        ens.series[p][traj][0] = ens.reference[p];
      ++sample;
      for (long k = 1; k <= total_steps; ++k) {
        step(st, grid, net, dt);
        if (k % stride == 0 && sample < samples) {
          for (size_t p = 0; p < opts.probes.size(); ++p)
            ens.series[p][traj][sample] = read_probe(opts.probes[p], st);
          ens.xi_integral[traj][sample] = st.xi_integral;
          ++sample;
        }
      }
    }
  };

  int threads = opts.threads > 0 ? opts.threads
                                 : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, opts.trajectories);
  if (threads == 1) {
    run_range(0, opts.trajectories);
  } else {
    std::vector<std::future<void>> tasks;
    int chunk = (opts.trajectories + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      int lo = t * chunk;
      int hi = std::min(opts.trajectories, lo + chunk);
      if (lo >= hi) break;
      tasks.push_back(std::async(std::launch::async, run_range, lo, hi));
    }
    for (auto& f : tasks) f.get();
  }
  return ens;
}

VarianceFit variance_growth(const Ensemble& ens, int probe, double t_min, double t_max) {
  if (probe < 0 || probe >= static_cast<int>(ens.series.size()))
    throw DomainError("probe index out of range");
  if (t_min >= t_max || t_max > ens.times.back() + 1e-9)
    throw DomainError("fit window outside the simulated horizon");
  const auto& traj = ens.series[probe];
  const int n_traj = static_cast<int>(traj.size());
  if (n_traj < 2) throw DomainError("variance needs at least two trajectories");

  std::vector<double> ts, vars;
  for (size_t s = 0; s < ens.times.size(); ++s) {
    double t = ens.times[s];
    if (t < t_min || t > t_max) continue;
    double mean = 0.0;
    for (int k = 0; k < n_traj; ++k) mean += traj[k][s];
    mean /= n_traj;
    double var = 0.0;
    for (int k = 0; k < n_traj; ++k) {
      double d = traj[k][s] - mean;
      var += d * d;
    }
    var /= (n_traj - 1);
    ts.push_back(t);
    vars.push_back(var);
  }
  VarianceFit fit;
  fit.points = static_cast<int>(ts.size());
  if (fit.points < 3) throw DomainError("fit window holds fewer than 3 samples");

  double tm = 0.0, vm = 0.0;
  for (int i = 0; i < fit.points; ++i) {
    tm += ts[i];
    vm += vars[i];
  }
  tm /= fit.points;
  vm /= fit.points;
  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < fit.points; ++i) {
    sxx += (ts[i] - tm) * (ts[i] - tm);
    sxy += (ts[i] - tm) * (vars[i] - vm);
  }
  fit.slope = sxy / sxx;
  double ss_res = 0.0, ss_tot = 0.0;
  for (int i = 0; i < fit.points; ++i) {
    double pred = vm + fit.slope * (ts[i] - tm);
    ss_res += (vars[i] - pred) * (vars[i] - pred);
    ss_tot += (vars[i] - vm) * (vars[i] - vm);
  }
  fit.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  fit.stderr_ = std::sqrt(ss_res / std::max(1, fit.points - 2) / sxx);
  return fit;
}

}  // namespace gasjitter
