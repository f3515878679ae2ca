#ifndef GASJITTER_DISPATCH_HPP
#define GASJITTER_DISPATCH_HPP

#include <string>
#include <vector>

#include "gasjitter/convex.hpp"
#include "gasjitter/steady.hpp"

namespace gasjitter {

enum class DispatchMethod { greedy, gp, sp };

struct DispatchResult {
  std::vector<double> ratios;          // per compressor
  std::vector<double> node_pressure;   // Pa, from physical re-propagation
  double power = 0.0;                  // isentropic compression power, W-units
  double objective = 0.0;              // surrogate sum c*phi/eta * alpha^m
  DispatchMethod method = DispatchMethod::greedy;
  int iterations = 0;                  // solver iterations (SP: subproblem count)
  double residual = 0.0;               // max constraint value at the solution
  std::vector<double> objective_trace; // SP: surrogate objective per iteration
};

// Total power used in compression: sum c*phi/eta * (max{alpha^m, 1} - 1).
// Flow is measured through each compressor's boost direction; a boosting
// (alpha != 1) compressor with negative through-flow is an orientation error.
double compression_power(const Network& net, const EdgeFlows& flows,
                         const std::vector<double>& ratios);

// Operational heuristic: walk pipes outward from the slack node; a compressor
// stays idle if the segment up to the next compressor (or a leaf) holds
// p >= p_min unboosted, otherwise it runs at alpha_max.
DispatchResult greedy_dispatch(const Network& net, const EdgeFlows& flows);

// Log-domain transform of the minimum-power dispatch: variables are
// log(p^2) per node and log(alpha) per flow-aligned compressor.
struct GPProblem {
  const Network* net = nullptr;
  EdgeFlows flows;
  std::vector<double> delta1;        // per pipe: (beta L / d) (phi/A)^2, Pa^2
  std::vector<int> pressure_var;     // per node: variable index, -1 = pinned slack
  std::vector<int> ratio_var;        // per compressor: variable index, -1 = pinned at 1
  std::vector<char> aligned;         // per compressor: boost direction carries flow > 0
  int dim = 0;
  double slack_log_p2 = 0.0;
  LogSumExp objective;               // log sum d_c exp(m_c t_c); empty when no variables
  std::vector<LogSumExp> constraints;
  std::vector<std::string> constraint_names;

  int n_pressure_vars() const { return static_cast<int>(pressure_var.size()); }
  int n_ratio_vars() const {
    int k = 0;
    for (int v : ratio_var)
      if (v >= 0) ++k;
    return k;
  }
  int n_coupling_constraints() const;
};

// nonneg_ratios adds the no-decompression bound t >= 0 (used to seed the SP).
GPProblem build_gp(const Network& net, const EdgeFlows& flows, bool nonneg_ratios = false);

DispatchResult solve_gp(const GPProblem& problem);
DispatchResult solve_gp(const Network& net, const EdgeFlows& flows);

// Signomial-programming loop for the no-decompression dispatch: the pressure
// drop equalities are enforced through monomial condensation around the
// current physical iterate, each subproblem collapsing to a small convex
// program in the ratio variables only.
struct SPOptions {
  int max_iters = 50;
  double objective_tol = 1e-7;  // relative change between iterations
};

DispatchResult solve_sp(const Network& net, const EdgeFlows& flows,
                        const SPOptions& opts = {});

DispatchResult run_dispatch(const Network& net, DispatchMethod method);

// True when re-simulating the ratios through solve_steady keeps every node
// within its bounds, up to `rel` relative slack.
bool bounds_feasible(const SteadyState& ss, const Network& net, double rel = 1e-6);

}  // namespace gasjitter

#endif
