#ifndef GASJITTER_STEADY_HPP
#define GASJITTER_STEADY_HPP

#include <vector>

#include "gasjitter/network.hpp"

namespace gasjitter {

// Per-pipe signed mass flow, kg/s, sign relative to the pipe's stored
// from->to orientation. Unique on a tree.
struct EdgeFlows {
  std::vector<double> flow;
};

// Unique tree flows from nodal balance: the flow on a pipe equals the summed
// injection of the component on its from-side after removing the pipe.
EdgeFlows compute_tree_flows(const Network& net);

// Pressure at distance x into a pipe fed at p_in with the given (signed, in
// the direction of x) total mass flow. Throws InfeasibleError when the
// squared pressure goes non-positive before x.
double pressure_after(double p_in, const Pipe& pipe, double flow, double x,
                      const GasProperties& gas);

struct SteadyState {
  EdgeFlows flows;
  std::vector<double> node_pressure;   // Pa, per node
  std::vector<double> inlet_pressure;  // Pa, per pipe: pipe-side pressure at the from end
  std::vector<double> outlet_pressure; // Pa, per pipe: pipe-side pressure at the to end
  std::vector<double> ratios;          // per compressor

  const Network* net = nullptr;

  // Profile sampler: pressure at x in [0, L] measured from the from end.
  double pressure_at(int pipe, double x) const;
};

// Propagates pressure from the slack node through the tree, applying
// compression ratios at pipe ends and the square-law drop along each pipe.
SteadyState solve_steady(const Network& net, const std::vector<double>& ratios);
SteadyState solve_steady(const Network& net);  // all ratios 1

struct BoundViolation {
  enum class Kind { node, profile };
  Kind kind;
  int node = -1;   // for Kind::node
  int pipe = -1;   // for Kind::profile
  double x = 0.0;  // position for profile violations
  double pressure = 0.0;
  double bound = 0.0;    // the violated bound
  double deficit = 0.0;  // |pressure - bound|
};

// Nodal pressures against their own [p_min, p_max]; sampled pipe profiles
// against the envelope of the two end nodes' bounds.
std::vector<BoundViolation> check_bounds(const SteadyState& ss, const Network& net,
                                         int samples = defaults::profile_samples);

}  // namespace gasjitter

#endif
