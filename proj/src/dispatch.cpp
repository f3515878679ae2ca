#include "gasjitter/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

#include "gasjitter/errors.hpp"

namespace gasjitter {

namespace {

// Signed flow through a compressor's boost direction.
double through_flow(const Network& net, const EdgeFlows& flows, const Compressor& c) {
  const Pipe& p = net.pipes[c.pipe];
  return c.node == p.from ? flows.flow[c.pipe] : -flows.flow[c.pipe];
}

// Pressure at the far node after traversing pipe e from node u (pressure p_u),
// honoring the ratios at both ends. Throws on collapse.
double propagate_over_pipe(const Network& net, const EdgeFlows& flows,
                           const std::vector<double>& ratios, int e, int u, double p_u) {
  const Pipe& p = net.pipes[e];
  int v = net.other_end(e, u);
  auto ratio_at = [&](int node) {
    int c = net.compressor_at(e, node);
    return c >= 0 ? ratios[c] : 1.0;
  };
  double beta = net.pipe_beta(p);
  double flux = flows.flow[e] / p.area();
  double drop = (beta * p.length / p.diameter) * flux * std::abs(flux);
  double boosted = p_u * ratio_at(u);
  double far_sq = p.from == u ? boosted * boosted - drop : boosted * boosted + drop;
  if (far_sq <= 0)
    throw InfeasibleError("pressure squared goes non-positive", "pipe '" + p.id + "'");
  return std::sqrt(far_sq) / ratio_at(v);
}

struct TreeWalk {
  std::vector<int> order;        // BFS node order from slack
  std::vector<int> parent;       // per node
  std::vector<int> parent_pipe;  // per node
  std::vector<std::vector<Adjacency::Arc>> children;  // arcs away from slack
};

TreeWalk walk_from_slack(const Network& net) {
  Adjacency adj = build_adjacency(net);
  TreeWalk w;
  const size_t n = net.nodes.size();
  w.parent.assign(n, -1);
  w.parent_pipe.assign(n, -1);
  w.children.resize(n);
  std::vector<char> seen(n, 0);
  std::queue<int> frontier;
  seen[net.slack] = 1;
  frontier.push(net.slack);
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop();
    w.order.push_back(u);
    for (const auto& arc : adj.arcs[u])
      if (!seen[arc.neighbor]) {
        seen[arc.neighbor] = 1;
        w.parent[arc.neighbor] = u;
        w.parent_pipe[arc.neighbor] = arc.pipe;
        w.children[u].push_back(arc);
        frontier.push(arc.neighbor);
      }
  }
  return w;
}

}  // namespace

double compression_power(const Network& net, const EdgeFlows& flows,
                         const std::vector<double>& ratios) {
  if (ratios.size() != net.compressors.size())
    throw DomainError("ratio vector size does not match compressor count");
  double total = 0.0;
  for (size_t c = 0; c < net.compressors.size(); ++c) {
    const Compressor& comp = net.compressors[c];
    double phi = through_flow(net, flows, comp);
    double alpha = ratios[c];
    if (std::abs(alpha - 1.0) < 1e-15) continue;  // idle station
    if (phi < 0)
      throw DomainError("compressor '" + comp.id +
                        "' boosts against the flow; reorient before dispatch");
    double lift = std::max(std::pow(alpha, comp.exponent), 1.0) - 1.0;
    total += comp.cost_coeff * phi / comp.efficiency * lift;
  }
  return total;
}

DispatchResult greedy_dispatch(const Network& net, const EdgeFlows& flows) {
  TreeWalk walk = walk_from_slack(net);
  std::vector<double> ratios(net.compressors.size(), 1.0);
  std::vector<double> pressure(net.nodes.size(), 0.0);
  pressure[net.slack] = net.slack_pressure;

  // Nodes of the segment defended by the station on pipe e out of node u:
  // everything reachable away from the slack until the next station end.
  auto collect_segment = [&](int e0, int u0) {
    std::vector<std::pair<int, int>> pipes;  // (pipe, near node)
    std::vector<std::pair<int, int>> stack{{e0, u0}};
    while (!stack.empty()) {
      auto [e, u] = stack.back();
      stack.pop_back();
      pipes.emplace_back(e, u);
      int v = net.other_end(e, u);
      if (net.compressor_at(e, v) >= 0) continue;  // far end carries a station
      for (const auto& arc : walk.children[v]) {
        if (net.compressor_at(arc.pipe, v) >= 0) continue;  // next station
        stack.emplace_back(arc.pipe, v);
      }
    }
    return pipes;
  };

  // Propagates the segment from p_start and returns the worst p - p_min margin.
  auto segment_margin = [&](const std::vector<std::pair<int, int>>& seg, double p_start,
                            std::vector<double>* out_pressures) {
    std::vector<double> local(net.nodes.size(), -1.0);
    local[seg.front().second] = p_start;
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& [e, u] : seg) {
      double p_v;
      try {
        p_v = propagate_over_pipe(net, flows, ratios, e, u, local[u]);
      } catch (const InfeasibleError&) {
        return -std::numeric_limits<double>::infinity();
      }
      int v = net.other_end(e, u);
      local[v] = p_v;
      worst = std::min(worst, p_v - net.nodes[v].p_min);
    }
    if (out_pressures) *out_pressures = local;
    return worst;
  };

  for (int u : walk.order) {
    for (const auto& arc : walk.children[u]) {
      int e = arc.pipe;
      int comp = net.compressor_at(e, u);
      bool decides = false;
      if (comp >= 0) {
        double phi = through_flow(net, flows, net.compressors[comp]);
        decides = phi > 0;  // stations opposing (or without) flow stay idle
      }
      if (decides) {
        const Compressor& c = net.compressors[comp];
        auto seg = collect_segment(e, u);
        ratios[comp] = 1.0;
        double idle_margin = segment_margin(seg, pressure[u], nullptr);
        if (idle_margin < 0) {
          ratios[comp] = c.alpha_max;
          double boosted = pressure[u] * c.alpha_max;
          if (boosted > net.nodes[u].p_max * (1.0 + 1e-12))
            throw DomainError("greedy boost at compressor '" + c.id + "' reaches " +
                              std::to_string(boosted) + " Pa, above p_max at node '" +
                              net.nodes[u].id + "'");
          double max_margin = segment_margin(seg, pressure[u], nullptr);
          if (max_margin < 0)
            throw InfeasibleError(
                "segment cannot hold p_min even at alpha_max of compressor '" + c.id + "'");
        }
      }
      pressure[arc.neighbor] =
          propagate_over_pipe(net, flows, ratios, e, u, pressure[u]);
    }
  }

  DispatchResult res;
  res.method = DispatchMethod::greedy;
  res.ratios = ratios;
  SteadyState ss = solve_steady(net, ratios);
  res.node_pressure = ss.node_pressure;
  res.power = compression_power(net, flows, ratios);
  res.objective = 0.0;
  for (size_t c = 0; c < net.compressors.size(); ++c) {
    const Compressor& comp = net.compressors[c];
    double phi = through_flow(net, flows, comp);
    if (phi > 0)
      res.objective += comp.cost_coeff * phi / comp.efficiency *
                       std::pow(ratios[c], comp.exponent);
  }
  res.iterations = 1;
  return res;
}

int GPProblem::n_coupling_constraints() const {
  int k = 0;
  for (const auto& name : constraint_names)
    if (name.rfind("coupling", 0) == 0) ++k;
  return k;
}

GPProblem build_gp(const Network& net, const EdgeFlows& flows, bool nonneg_ratios) {
  GPProblem gp;
  gp.net = &net;
  gp.flows = flows;
  gp.delta1.assign(net.pipes.size(), 0.0);
  for (size_t e = 0; e < net.pipes.size(); ++e) {
    const Pipe& p = net.pipes[e];
    double flux = flows.flow[e] / p.area();
    gp.delta1[e] = (net.pipe_beta(p) * p.length / p.diameter) * flux * flux;
  }

  gp.pressure_var.assign(net.nodes.size(), -1);
  int dim = 0;
  for (size_t i = 0; i < net.nodes.size(); ++i)
    if (static_cast<int>(i) != net.slack) gp.pressure_var[i] = dim++;
  gp.slack_log_p2 = 2.0 * std::log(net.slack_pressure);

  gp.ratio_var.assign(net.compressors.size(), -1);
  gp.aligned.assign(net.compressors.size(), 0);
  for (size_t c = 0; c < net.compressors.size(); ++c) {
    double phi = through_flow(net, flows, net.compressors[c]);
    if (phi > 0) {
      gp.aligned[c] = 1;
      gp.ratio_var[c] = dim++;
    }
  }
  gp.dim = dim;

  auto add_log_p2 = [&](AffineForm& f, int node, double coef) {
    if (gp.pressure_var[node] >= 0)
      f.add(gp.pressure_var[node], coef);
    else
      f.constant += coef * gp.slack_log_p2;
  };
  auto add_log_ratio = [&](AffineForm& f, int pipe, int node, double coef) {
    int c = net.compressor_at(pipe, node);
    if (c >= 0 && gp.ratio_var[c] >= 0) f.add(gp.ratio_var[c], coef);
    // pinned stations contribute log(1) = 0
  };

  // Objective: log sum over boosting stations of (c phi / eta) alpha^m.
  for (size_t c = 0; c < net.compressors.size(); ++c) {
    if (gp.ratio_var[c] < 0) continue;
    const Compressor& comp = net.compressors[c];
    double d = comp.cost_coeff * through_flow(net, flows, comp) / comp.efficiency;
    AffineForm term;
    term.constant = std::log(d);
    term.add(gp.ratio_var[c], comp.exponent);
    gp.objective.terms.push_back(term);
  }
  if (gp.objective.terms.empty()) {
    AffineForm zero;  // pure feasibility problem
    gp.objective.terms.push_back(zero);
  }

  // Coupling per pipe, oriented with the flow:
  //   exp(b_j + 2t_j - b_i - 2t_i) + delta1 exp(-b_i - 2t_i) <= 1.
  for (size_t e = 0; e < net.pipes.size(); ++e) {
    const Pipe& p = net.pipes[e];
    int send = flows.flow[e] >= 0 ? p.from : p.to;
    int recv = net.other_end(static_cast<int>(e), send);
    LogSumExp f;
    AffineForm t1;
    add_log_p2(t1, recv, +1.0);
    add_log_ratio(t1, static_cast<int>(e), recv, +2.0);
    add_log_p2(t1, send, -1.0);
    add_log_ratio(t1, static_cast<int>(e), send, -2.0);
    f.terms.push_back(t1);
    if (gp.delta1[e] > 0) {
      AffineForm t2;
      t2.constant = std::log(gp.delta1[e]);
      add_log_p2(t2, send, -1.0);
      add_log_ratio(t2, static_cast<int>(e), send, -2.0);
      f.terms.push_back(t2);
    }
    gp.constraints.push_back(f);
    gp.constraint_names.push_back("coupling on pipe '" + p.id + "'");
  }

  // Pressure boxes.
  for (size_t i = 0; i < net.nodes.size(); ++i) {
    const Node& nd = net.nodes[i];
    if (gp.pressure_var[i] < 0) continue;
    if (nd.p_min > 0) {
      LogSumExp f;
      AffineForm a;
      a.constant = 2.0 * std::log(nd.p_min);
      a.add(gp.pressure_var[i], -1.0);
      f.terms.push_back(a);
      gp.constraints.push_back(f);
      gp.constraint_names.push_back("p_min at node '" + nd.id + "'");
    }
    if (std::isfinite(nd.p_max)) {
      LogSumExp f;
      AffineForm a;
      a.constant = -2.0 * std::log(nd.p_max);
      a.add(gp.pressure_var[i], +1.0);
      f.terms.push_back(a);
      gp.constraints.push_back(f);
      gp.constraint_names.push_back("p_max at node '" + nd.id + "'");
    }
  }

  // Ratio boxes; the plain GP drops the lower bound entirely.
  for (size_t c = 0; c < net.compressors.size(); ++c) {
    if (gp.ratio_var[c] < 0) continue;
    const Compressor& comp = net.compressors[c];
    LogSumExp up;
    AffineForm a;
    a.constant = -std::log(comp.alpha_max);
    a.add(gp.ratio_var[c], +1.0);
    up.terms.push_back(a);
    gp.constraints.push_back(up);
    gp.constraint_names.push_back("alpha_max at compressor '" + comp.id + "'");
    if (nonneg_ratios) {
      LogSumExp lo;
      AffineForm b;
      b.add(gp.ratio_var[c], -1.0);
      lo.terms.push_back(b);
      gp.constraints.push_back(lo);
      gp.constraint_names.push_back("alpha >= 1 at compressor '" + comp.id + "'");
    }
  }
  return gp;
}

bool bounds_feasible(const SteadyState& ss, const Network& net, double rel) {
  for (size_t i = 0; i < net.nodes.size(); ++i) {
    const Node& nd = net.nodes[i];
    double p = ss.node_pressure[i];
    if (p < nd.p_min * (1.0 - rel) - 1e-9) return false;
    if (std::isfinite(nd.p_max) && p > nd.p_max * (1.0 + rel) + 1e-9) return false;
  }
  return true;
}

namespace {

DispatchResult finish_from_ratios(const Network& net, const EdgeFlows& flows,
                                  std::vector<double> ratios, DispatchMethod method) {
  DispatchResult res;
  res.method = method;
  res.ratios = std::move(ratios);
  SteadyState ss = solve_steady(net, res.ratios);
  if (!bounds_feasible(ss, net))
    throw InfeasibleError("dispatch ratios violate pressure bounds when re-simulated");
  res.node_pressure = ss.node_pressure;
  res.power = compression_power(net, flows, res.ratios);
  res.objective = 0.0;
  for (size_t c = 0; c < net.compressors.size(); ++c) {
    const Compressor& comp = net.compressors[c];
    double phi = through_flow(net, flows, comp);
    if (phi > 0)
      res.objective += comp.cost_coeff * phi / comp.efficiency *
                       std::pow(res.ratios[c], comp.exponent);
  }
  return res;
}

}  // namespace

DispatchResult solve_gp(const GPProblem& gp) {
  const Network& net = *gp.net;
  const Node& slack_node = net.nodes[net.slack];
  if (net.slack_pressure < slack_node.p_min || net.slack_pressure > slack_node.p_max)
    throw InfeasibleError("slack pressure violates the slack node's own bounds");

  std::vector<double> ratios(net.compressors.size(), 1.0);
  if (gp.dim == 0) return finish_from_ratios(net, gp.flows, ratios, DispatchMethod::gp);

  Vec start(gp.dim, 0.0);
  for (size_t i = 0; i < net.nodes.size(); ++i) {
    if (gp.pressure_var[i] < 0) continue;
    const Node& nd = net.nodes[i];
    double lo = nd.p_min > 0 ? 2.0 * std::log(nd.p_min) : gp.slack_log_p2 - 2.0;
    double hi = std::isfinite(nd.p_max) ? 2.0 * std::log(nd.p_max) : gp.slack_log_p2 + 2.0;
    start[gp.pressure_var[i]] = 0.5 * (lo + hi);
  }
  for (size_t c = 0; c < net.compressors.size(); ++c)
    if (gp.ratio_var[c] >= 0)
      start[gp.ratio_var[c]] = 0.5 * std::log(net.compressors[c].alpha_max);

  BarrierResult sol = minimize_with_barrier(gp.objective, gp.constraints, gp.dim, start);
  if (!sol.feasible)
    throw InfeasibleError("optimal dispatch infeasible; most violated: " +
                          (sol.worst_constraint >= 0
                               ? gp.constraint_names[sol.worst_constraint]
                               : std::string("unknown")) +
                          " by " + std::to_string(sol.max_constraint) + " (log-space)");

  for (size_t c = 0; c < net.compressors.size(); ++c)
    if (gp.ratio_var[c] >= 0) ratios[c] = std::exp(sol.y[gp.ratio_var[c]]);

  DispatchResult res = finish_from_ratios(net, gp.flows, ratios, DispatchMethod::gp);
  res.iterations = sol.newton_steps;
  res.residual = sol.max_constraint;
  return res;
}

DispatchResult solve_gp(const Network& net, const EdgeFlows& flows) {
  return solve_gp(build_gp(net, flows));
}

DispatchResult solve_sp(const Network& net, const EdgeFlows& flows, const SPOptions& opts) {
  GPProblem gp = build_gp(net, flows, /*nonneg_ratios=*/true);
  for (size_t c = 0; c < net.compressors.size(); ++c)
    if (gp.ratio_var[c] >= 0 && std::abs(net.compressors[c].alpha_min - 1.0) > 1e-12)
      throw DomainError("signomial dispatch requires alpha_min = 1 at compressor '" +
                        net.compressors[c].id + "'");

  // Compact t-variable indexing for the subproblems.
  std::vector<int> sub_var(net.compressors.size(), -1);
  std::vector<int> comps;  // subproblem var -> compressor index
  for (size_t c = 0; c < net.compressors.size(); ++c)
    if (gp.ratio_var[c] >= 0) {
      sub_var[c] = static_cast<int>(comps.size());
      comps.push_back(static_cast<int>(c));
    }
  const int dim = static_cast<int>(comps.size());

  std::vector<double> ratios(net.compressors.size(), 1.0);
  if (dim == 0) return finish_from_ratios(net, flows, ratios, DispatchMethod::sp);

  // Seed: clamped GP optimum if it re-simulates feasibly, else the greedy plan.
  bool seeded = false;
  try {
    DispatchResult seed = solve_gp(gp);
    ratios = seed.ratios;
    seeded = bounds_feasible(solve_steady(net, ratios), net);
  } catch (const InfeasibleError&) {
  }
  if (!seeded) ratios = greedy_dispatch(net, flows).ratios;

  LogSumExp objective;
  for (int k = 0; k < dim; ++k) {
    const Compressor& comp = net.compressors[comps[k]];
    double d = comp.cost_coeff * through_flow(net, flows, comp) / comp.efficiency;
    AffineForm term;
    term.constant = std::log(d);
    term.add(k, comp.exponent);
    objective.terms.push_back(term);
  }

  TreeWalk walk = walk_from_slack(net);
  DispatchResult res;
  res.method = DispatchMethod::sp;

  auto surrogate = [&](const std::vector<double>& r) {
    double obj = 0.0;
    for (int k = 0; k < dim; ++k) {
      const Compressor& comp = net.compressors[comps[k]];
      obj += comp.cost_coeff * through_flow(net, flows, comp) / comp.efficiency *
             std::pow(r[comps[k]], comp.exponent);
    }
    return obj;
  };

  double prev_obj = surrogate(ratios);  // the seed is iteration zero
  res.objective_trace.push_back(prev_obj);
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    SteadyState ss = solve_steady(net, ratios);

    // log p^2 at every node as an affine function of the t variables, built by
    // condensing each pipe's drop equality around the current physical state.
    std::vector<AffineForm> log_p2(net.nodes.size());
    log_p2[net.slack].constant = gp.slack_log_p2;
    for (int v : walk.order) {
      if (v == net.slack) continue;
      int e = walk.parent_pipe[v];
      int u = walk.parent[v];
      const Pipe& p = net.pipes[e];
      int send = flows.flow[e] >= 0 ? p.from : p.to;
      int recv = net.other_end(e, send);
      double p_send = send == p.from ? ss.inlet_pressure[e] : ss.outlet_pressure[e];
      double p_recv = recv == p.from ? ss.inlet_pressure[e] : ss.outlet_pressure[e];
      double w1 = (p_recv * p_recv) / (p_send * p_send);
      double w2 = gp.delta1[e] / (p_send * p_send);
      double k_const = (w1 > 0 ? w1 * std::log(w1) : 0.0) +
                       (w2 > 0 ? w2 * std::log(w2) - w2 * std::log(gp.delta1[e]) : 0.0);

      auto t_term = [&](AffineForm& f, int node, double coef) {
        int c = net.compressor_at(e, node);
        if (c >= 0 && sub_var[c] >= 0) f.add(sub_var[c], coef);
      };

      AffineForm f;
      if (v == recv) {
        // b_recv = [b_send + 2 t_send + k]/w1 - 2 t_recv
        f = log_p2[u];  // u == send
        t_term(f, send, +2.0);
        f.constant += k_const;
        for (auto& [i, coef] : f.coeffs) coef /= w1;
        f.constant /= w1;
        t_term(f, recv, -2.0);
      } else {
        // b_send = w1 (b_recv + 2 t_recv) + w2 log delta1 - k - 2 t_send... via k_const
        f = log_p2[u];  // u == recv
        t_term(f, recv, +2.0);
        for (auto& [i, coef] : f.coeffs) coef *= w1;
        f.constant *= w1;
        f.constant -= k_const;
        t_term(f, send, -2.0);
      }
      log_p2[v] = f;
    }

    std::vector<LogSumExp> constraints;
    for (int k = 0; k < dim; ++k) {
      const Compressor& comp = net.compressors[comps[k]];
      LogSumExp lo, hi;
      AffineForm a;
      a.add(k, -1.0);
      lo.terms.push_back(a);
      constraints.push_back(lo);
      AffineForm b;
      b.constant = -std::log(comp.alpha_max);
      b.add(k, +1.0);
      hi.terms.push_back(b);
      constraints.push_back(hi);
    }
    for (size_t i = 0; i < net.nodes.size(); ++i) {
      if (static_cast<int>(i) == net.slack) continue;
      const Node& nd = net.nodes[i];
      if (nd.p_min > 0) {
        LogSumExp f;
        AffineForm a = log_p2[i];
        for (auto& [idx, coef] : a.coeffs) coef = -coef;
        a.constant = 2.0 * std::log(nd.p_min) - a.constant;
        f.terms.push_back(a);
        constraints.push_back(f);
      }
      if (std::isfinite(nd.p_max)) {
        LogSumExp f;
        AffineForm a = log_p2[i];
        a.constant -= 2.0 * std::log(nd.p_max);
        f.terms.push_back(a);
        constraints.push_back(f);
      }
    }

    Vec start(dim);
    for (int k = 0; k < dim; ++k) start[k] = std::log(ratios[comps[k]]);
    BarrierResult sol = minimize_with_barrier(objective, constraints, dim, start);
    if (!sol.feasible) {
      if (sol.max_constraint < 1e-6 && iter > 0) break;  // pinched set, keep iterate
      throw InfeasibleError("signomial subproblem infeasible (violation " +
                            std::to_string(sol.max_constraint) + ")");
    }

    for (int k = 0; k < dim; ++k)
      ratios[comps[k]] = std::max(1.0, std::exp(sol.y[k]));

    double obj = surrogate(ratios);
    res.objective_trace.push_back(obj);
    res.iterations = iter + 1;
    res.residual = sol.max_constraint;
    if (std::abs(prev_obj - obj) <= opts.objective_tol * std::max(1.0, std::abs(obj)))
      break;
    prev_obj = obj;
    if (iter + 1 == opts.max_iters) {
      std::ostringstream trace;
      for (double o : res.objective_trace) trace << " " << o;
      throw ConvergenceError("signomial loop did not converge in " +
                             std::to_string(opts.max_iters) + " iterations; trace:" +
                             trace.str());
    }
  }

  DispatchResult fin = finish_from_ratios(net, flows, ratios, DispatchMethod::sp);
  fin.iterations = res.iterations;
  fin.residual = res.residual;
  fin.objective_trace = res.objective_trace;
  return fin;
}

DispatchResult run_dispatch(const Network& net, DispatchMethod method) {
  EdgeFlows flows = compute_tree_flows(net);
  switch (method) {
    case DispatchMethod::greedy:
      return greedy_dispatch(net, flows);
    case DispatchMethod::gp:
      return solve_gp(net, flows);
    case DispatchMethod::sp:
      return solve_sp(net, flows);
  }
  throw DomainError("unknown dispatch method");
}

}  // namespace gasjitter
