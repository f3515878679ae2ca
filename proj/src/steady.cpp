#include "gasjitter/steady.hpp"

#include <cmath>
#include <queue>

#include "gasjitter/errors.hpp"

namespace gasjitter {

EdgeFlows compute_tree_flows(const Network& net) {
  ValidationReport rep = validate(net);
  if (!rep.ok())
    throw DomainError("network not solvable: " +
                      (rep.issues.empty() ? std::string("invalid") : rep.issues.front()));

  const size_t n = net.nodes.size();
  Adjacency adj = build_adjacency(net);

  // Root the tree at the slack node; the flow on the pipe above node v (in
  // from->to orientation) is +/- the injection sum of v's subtree.
  std::vector<int> order;
  order.reserve(n);
  std::vector<int> parent(n, -1), parent_pipe(n, -1);
  std::vector<char> seen(n, 0);
  std::queue<int> frontier;
  seen[net.slack] = 1;
  frontier.push(net.slack);
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop();
    order.push_back(u);
    for (const auto& arc : adj.arcs[u])
      if (!seen[arc.neighbor]) {
        seen[arc.neighbor] = 1;
        parent[arc.neighbor] = u;
        parent_pipe[arc.neighbor] = arc.pipe;
        frontier.push(arc.neighbor);
      }
  }

  std::vector<double> subtree(n);
  for (size_t i = 0; i < n; ++i) subtree[i] = net.nodes[i].injection;
  EdgeFlows flows;
  flows.flow.assign(net.pipes.size(), 0.0);
  for (size_t i = order.size(); i-- > 1;) {  // reverse BFS = children first
    int v = order[i];
    int e = parent_pipe[v];
    // Subtree of v is the component on one side of e; the other side carries
    // the negated sum, so the from->to flow is -subtree when v sits at 'to'.
    flows.flow[e] = net.pipes[e].to == v ? -subtree[v] : subtree[v];
    subtree[parent[v]] += subtree[v];
  }
  return flows;
}

double pressure_after(double p_in, const Pipe& pipe, double flow, double x,
                      const GasProperties& gas) {
  if (p_in <= 0) throw DomainError("inlet pressure must be positive");
  if (x < 0 || x > pipe.length) throw DomainError("position outside pipe");
  double beta = pipe.friction.value_or(gas.friction) * gas.sound_speed * gas.sound_speed;
  double flux = flow / pipe.area();
  double sq = p_in * p_in - (beta * x / pipe.diameter) * flux * std::abs(flux);
  if (sq <= 0)
    throw InfeasibleError("pressure collapses before x = " + std::to_string(x) + " m",
                          "pipe '" + pipe.id + "'");
  return std::sqrt(sq);
}

double SteadyState::pressure_at(int pipe, double x) const {
  const Pipe& p = net->pipes[pipe];
  if (x < 0 || x > p.length) throw DomainError("position outside pipe");
  double beta = net->pipe_beta(p);
  double flux = flows.flow[pipe] / p.area();
  double p0 = inlet_pressure[pipe];
  double sq = p0 * p0 - (beta * x / p.diameter) * flux * std::abs(flux);
  if (sq <= 0)
    throw InfeasibleError("profile collapses", "pipe '" + p.id + "'");
  return std::sqrt(sq);
}

SteadyState solve_steady(const Network& net, const std::vector<double>& ratios) {
  if (ratios.size() != net.compressors.size())
    throw DomainError("ratio vector size does not match compressor count");
  for (size_t c = 0; c < ratios.size(); ++c)
    if (ratios[c] <= 0)
      throw DomainError("compression ratio must be positive for '" + net.compressors[c].id + "'");

  SteadyState ss;
  ss.net = &net;
  ss.flows = compute_tree_flows(net);
  ss.ratios = ratios;
  ss.node_pressure.assign(net.nodes.size(), 0.0);
  ss.inlet_pressure.assign(net.pipes.size(), 0.0);
  ss.outlet_pressure.assign(net.pipes.size(), 0.0);

  auto end_ratio = [&](int pipe, int node) {
    int c = net.compressor_at(pipe, node);
    return c >= 0 ? ratios[c] : 1.0;
  };

  Adjacency adj = build_adjacency(net);
  std::vector<char> done(net.nodes.size(), 0);
  std::queue<int> frontier;
  ss.node_pressure[net.slack] = net.slack_pressure;
  done[net.slack] = 1;
  frontier.push(net.slack);
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop();
    for (const auto& arc : adj.arcs[u]) {
      if (done[arc.neighbor]) continue;
      const Pipe& p = net.pipes[arc.pipe];
      int v = arc.neighbor;
      double beta = net.pipe_beta(p);
      double flux = ss.flows.flow[arc.pipe] / p.area();
      double drop = (beta * p.length / p.diameter) * flux * std::abs(flux);
      double a_u = end_ratio(arc.pipe, u);
      double a_v = end_ratio(arc.pipe, v);
      double boosted_u = ss.node_pressure[u] * a_u;
      double far_sq;
      if (p.from == u) {
        far_sq = boosted_u * boosted_u - drop;  // walk with the stored orientation
      } else {
        far_sq = boosted_u * boosted_u + drop;  // invert the profile
      }
      if (far_sq <= 0)
        throw InfeasibleError("pressure squared goes non-positive", "pipe '" + p.id + "'");
      double far = std::sqrt(far_sq);
      ss.node_pressure[v] = far / a_v;
      if (p.from == u) {
        ss.inlet_pressure[arc.pipe] = boosted_u;
        ss.outlet_pressure[arc.pipe] = far;
      } else {
        ss.inlet_pressure[arc.pipe] = far;
        ss.outlet_pressure[arc.pipe] = boosted_u;
      }
      done[v] = 1;
      frontier.push(v);
    }
  }
  return ss;
}

SteadyState solve_steady(const Network& net) {
  return solve_steady(net, std::vector<double>(net.compressors.size(), 1.0));
}

std::vector<BoundViolation> check_bounds(const SteadyState& ss, const Network& net,
                                         int samples) {
  std::vector<BoundViolation> out;
  for (size_t i = 0; i < net.nodes.size(); ++i) {
    const Node& nd = net.nodes[i];
    double p = ss.node_pressure[i];
    if (p < nd.p_min)
      out.push_back({BoundViolation::Kind::node, static_cast<int>(i), -1, 0.0, p, nd.p_min,
                     nd.p_min - p});
    if (p > nd.p_max)
      out.push_back({BoundViolation::Kind::node, static_cast<int>(i), -1, 0.0, p, nd.p_max,
                     p - nd.p_max});
  }
  // Interior profiles against the envelope of the end nodes' bounds. The
  // square-law profile is monotone, so hits land on pipe ends today; the
  // sampling guards non-monotone extensions.
  for (size_t e = 0; e < net.pipes.size(); ++e) {
    const Pipe& p = net.pipes[e];
    double lo = std::min(net.nodes[p.from].p_min, net.nodes[p.to].p_min);
    double hi = std::max(net.nodes[p.from].p_max, net.nodes[p.to].p_max);
    for (int k = 0; k < samples; ++k) {
      double x = p.length * k / (samples - 1);
      double pr = ss.pressure_at(static_cast<int>(e), x);
      if (pr < lo)
        out.push_back({BoundViolation::Kind::profile, -1, static_cast<int>(e), x, pr, lo,
                       lo - pr});
      if (pr > hi)
        out.push_back({BoundViolation::Kind::profile, -1, static_cast<int>(e), x, pr, hi,
                       pr - hi});
    }
  }
  return out;
}

}  // namespace gasjitter
