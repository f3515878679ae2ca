#ifndef GASJITTER_TRANSIENT_HPP
#define GASJITTER_TRANSIENT_HPP

#include <cstdint>
#include <random>
#include <vector>

#include "gasjitter/steady.hpp"

namespace gasjitter {

// Staggered discretization: pressures at cell centers, mass fluxes at faces.
struct Grid {
  struct PipeGrid {
    int cells = 0;
    double dx = 0.0;
  };
  std::vector<PipeGrid> pipes;

  double min_dx() const;
};

// cells = ceil(L / dx_target), at least 4 per pipe.
Grid discretize(const Network& net, double dx_target);

// Exact Ornstein-Uhlenbeck update over one step.
double ou_step(double xi, double sigma, double tau, double dt, std::mt19937_64& rng);

struct SimState {
  double time = 0.0;
  std::vector<std::vector<double>> cell_p;    // per pipe, Pa at cell centers
  std::vector<std::vector<double>> face_flux; // per pipe, kg/s/m^2 at faces (cells+1)
  std::vector<double> node_p;                 // per node, Pa
  std::vector<double> ratios;                 // per compressor, constant set points
  std::vector<double> xi;                     // per node, kg/s
  std::mt19937_64 rng;
  double xi_integral = 0.0;                   // integral of sum_n xi_n dt, kg
  std::vector<double> boundary_in_integral;   // per pipe: integral of inflow dt, kg
  std::vector<double> boundary_out_integral;  // per pipe: integral of outflow dt, kg

  // Total stored gas mass, sum p A dx / c_s^2.
  double linepack(const Network& net, const Grid& grid) const;
  // Length-average pressure of one pipe.
  double pipe_mean_pressure(int pipe) const;
};

// State at the stationary solution; the discrete scheme holds it fixed.
SimState initial_state(const Network& net, const Grid& grid, const SteadyState& ss,
                       std::uint64_t seed);

// One explicit step: OU noise, a scalar junction solve per node enforcing
// nodal mass balance, semi-implicit friction on faces, then the cell update.
void step(SimState& state, const Grid& grid, const Network& net, double dt,
          double cfl_safety = 0.5);

struct Probe {
  enum class Kind { cell, pipe_mean, node };
  Kind kind = Kind::cell;
  int pipe = -1;
  double x = 0.0;  // for Kind::cell
  int node = -1;   // for Kind::node
};

struct SimulateOptions {
  double horizon = 1e5;       // s
  double dt = 0.0;            // 0 = auto from CFL
  double dx_target = 2500.0;  // m
  int trajectories = 200;
  std::uint64_t seed = 1;
  int stride = 20;            // record every `stride` steps
  std::vector<Probe> probes;
  int threads = 0;            // 0 = hardware concurrency
};

struct Ensemble {
  std::vector<double> times;
  // series[probe][trajectory][sample]
  std::vector<std::vector<std::vector<double>>> series;
  std::vector<double> reference;  // steady value per probe
  // xi_integral[trajectory][sample]
  std::vector<std::vector<double>> xi_integral;
  double dt = 0.0;
};

// Independent OU-driven trajectories from the steady state; trajectory i uses
// seed + i, so the ensemble is reproducible and order-independent.
Ensemble simulate(const Network& net, const std::vector<double>& ratios,
                  const SimulateOptions& opts);

struct VarianceFit {
  double slope = 0.0;   // Pa^2/s
  double stderr_ = 0.0;
  double r_squared = 0.0;
  int points = 0;
};

// Least-squares slope of the across-trajectory variance of (probe - reference)
// against time over [t_min, t_max].
VarianceFit variance_growth(const Ensemble& ens, int probe, double t_min, double t_max);

}  // namespace gasjitter

#endif
