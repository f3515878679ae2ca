#ifndef GASJITTER_NETWORK_HPP
#define GASJITTER_NETWORK_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gasjitter/units.hpp"

namespace gasjitter {

struct GasProperties {
  double sound_speed = defaults::sound_speed;  // m/s, c_s = sqrt(Z R T)
  double friction = defaults::friction;        // dimensionless

  // beta = f * c_s^2, the lumped friction coefficient of the momentum balance.
  double beta() const { return friction * sound_speed * sound_speed; }
};

struct Node {
  std::string id;
  double injection = 0.0;  // kg/s, positive = injection, negative = consumption
  double p_min = 0.0;      // Pa
  double p_max = std::numeric_limits<double>::infinity();  // Pa
  double noise_sigma = 0.0;                    // kg/s, std dev of consumption fluctuation
  double noise_tau = defaults::reference_time; // s, correlation time
};

struct Pipe {
  std::string id;
  int from = -1;  // node index
  int to = -1;    // node index
  double length = 0.0;    // m
  double diameter = 0.0;  // m
  std::optional<double> friction;  // per-pipe override of GasProperties::friction

  double area() const { return M_PI * diameter * diameter / 4.0; }
  double volume() const { return area() * length; }
};

// A compressor sits at one end of a pipe ("node") and multiplies the nodal
// pressure by its ratio on the pipe side of that end.
struct Compressor {
  std::string id;
  int pipe = -1;  // pipe index
  int node = -1;  // node index; must be one of the pipe's endpoints
  double alpha_min = 1.0;
  double alpha_max = 1.0;
  double efficiency = 1.0;
  double cost_coeff = 1.0;  // c in the power model, W*s/kg per unit flow factor
  double exponent = defaults::compressor_exponent;  // (gamma-1)/gamma
};

struct Network {
  GasProperties gas;
  std::vector<Node> nodes;
  std::vector<Pipe> pipes;
  std::vector<Compressor> compressors;
  int slack = -1;               // node index anchoring absolute pressure
  double slack_pressure = 0.0;  // Pa
  int mainline_start = -1;      // optional mainline endpoints (milepost axis)
  int mainline_end = -1;

  int node_index(const std::string& id) const;   // -1 when absent
  int pipe_index(const std::string& id) const;   // -1 when absent
  // Compressor index at (pipe, node) end, or -1.
  int compressor_at(int pipe, int node) const;
  double pipe_friction(const Pipe& p) const { return p.friction.value_or(gas.friction); }
  // beta of a pipe honoring the per-pipe friction override.
  double pipe_beta(const Pipe& p) const {
    return pipe_friction(p) * gas.sound_speed * gas.sound_speed;
  }
  int other_end(int pipe, int node) const {
    return pipes[pipe].from == node ? pipes[pipe].to : pipes[pipe].from;
  }
};

// Adjacency of the undirected pipe graph, neighbor lists sorted by
// ascending neighbor node id for deterministic traversals.
struct Adjacency {
  struct Arc {
    int pipe;
    int neighbor;
  };
  std::vector<std::vector<Arc>> arcs;  // per node
};
Adjacency build_adjacency(const Network& net);

struct ValidationReport {
  double imbalance = 0.0;  // sum of injections, kg/s
  bool balanced = false;
  bool connected = false;
  bool acyclic = false;
  bool bounds_ok = false;
  std::vector<std::string> issues;    // hard failures
  std::vector<std::string> warnings;  // e.g. two compressors on one pipe

  bool ok() const { return balanced && connected && acyclic && bounds_ok; }
};

// Structural and balance checks. Never throws; downstream solvers refuse
// networks whose report is not ok().
ValidationReport validate(const Network& net);

// Multiplies every nodal injection by `factor` (> 0). Balance scales exactly.
Network scale_loads(const Network& net, double factor);

// Moves `fraction` of the total injection at `from_nodes` onto `to_nodes`,
// pro-rata on both sides. Global balance is unchanged.
Network shift_supply(const Network& net, const std::vector<int>& from_nodes,
                     const std::vector<int>& to_nodes, double fraction);

// Mirror of shift_supply for consumption: moves `fraction` of the total
// consumption at `from_nodes` onto `to_nodes`.
Network shift_load(const Network& net, const std::vector<int>& from_nodes,
                   const std::vector<int>& to_nodes, double fraction);

// Collapses every off-mainline subtree into the injection of its mainline
// attachment node. Requires mainline_start/mainline_end; result is a path.
// Noise collapses too: variances add, correlation times combine
// sigma^2-weighted so the global fluctuation strength is preserved.
Network aggregate_branches(const Network& net);

// Node indices of the mainline path, start to end.
std::vector<int> mainline_path(const Network& net);

// Cumulative distance (m) from mainline_start (or slack when no mainline is
// set) to every node, following tree paths.
std::vector<double> distance_from_mainline_start(const Network& net);

}  // namespace gasjitter

#endif
