#include "gasjitter/network.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "gasjitter/errors.hpp"

namespace gasjitter {

int Network::node_index(const std::string& id) const {
  for (size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].id == id) return static_cast<int>(i);
  return -1;
}

int Network::pipe_index(const std::string& id) const {
  for (size_t i = 0; i < pipes.size(); ++i)
    if (pipes[i].id == id) return static_cast<int>(i);
  return -1;
}

int Network::compressor_at(int pipe, int node) const {
  for (size_t i = 0; i < compressors.size(); ++i)
    if (compressors[i].pipe == pipe && compressors[i].node == node)
      return static_cast<int>(i);
  return -1;
}

Adjacency build_adjacency(const Network& net) {
  Adjacency adj;
  adj.arcs.resize(net.nodes.size());
  for (size_t e = 0; e < net.pipes.size(); ++e) {
    adj.arcs[net.pipes[e].from].push_back({static_cast<int>(e), net.pipes[e].to});
    adj.arcs[net.pipes[e].to].push_back({static_cast<int>(e), net.pipes[e].from});
  }
  for (auto& list : adj.arcs)
    std::sort(list.begin(), list.end(), [&](const Adjacency::Arc& a, const Adjacency::Arc& b) {
      if (net.nodes[a.neighbor].id != net.nodes[b.neighbor].id)
        return net.nodes[a.neighbor].id < net.nodes[b.neighbor].id;
      return a.pipe < b.pipe;
    });
  return adj;
}

ValidationReport validate(const Network& net) {
  ValidationReport rep;
  const size_t n = net.nodes.size();
  const size_t m = net.pipes.size();

  double max_q = 0.0;
  for (const auto& nd : net.nodes) {
    rep.imbalance += nd.injection;
    max_q = std::max(max_q, std::abs(nd.injection));
  }
  rep.balanced = std::abs(rep.imbalance) <= 1e-9 * std::max(1.0, max_q);
  if (!rep.balanced)
    rep.issues.push_back("injections do not balance: sum = " + std::to_string(rep.imbalance) +
                         " kg/s");

  // Connectivity + acyclicity: BFS every component; a forest has exactly
  // n - #components edges.
  if (n > 0) {
    Adjacency adj = build_adjacency(net);
    std::vector<char> seen(n, 0);
    size_t components = 0;
    size_t first_component_size = 0;
    for (size_t s = 0; s < n; ++s) {
      if (seen[s]) continue;
      ++components;
      size_t size = 0;
      std::queue<int> frontier;
      seen[s] = 1;
      frontier.push(static_cast<int>(s));
      while (!frontier.empty()) {
        int u = frontier.front();
        frontier.pop();
        ++size;
        for (const auto& arc : adj.arcs[u])
          if (!seen[arc.neighbor]) {
            seen[arc.neighbor] = 1;
            frontier.push(arc.neighbor);
          }
      }
      if (components == 1) first_component_size = size;
    }
    rep.connected = components == 1 && first_component_size == n;
    rep.acyclic = m + components == n;
    if (!rep.connected) rep.issues.push_back("pipe graph is not connected");
    if (!rep.acyclic) rep.issues.push_back("pipe graph has a cycle (only trees are supported)");
  }

  rep.bounds_ok = true;
  for (const auto& nd : net.nodes) {
    if (nd.p_min < 0 || nd.p_min > nd.p_max) {
      rep.bounds_ok = false;
      rep.issues.push_back("node '" + nd.id + "' has inconsistent pressure bounds");
    }
    if (nd.noise_sigma < 0) {
      rep.bounds_ok = false;
      rep.issues.push_back("node '" + nd.id + "' has negative noise sigma");
    }
    if (nd.noise_sigma > 0 && nd.noise_tau <= 0) {
      rep.bounds_ok = false;
      rep.issues.push_back("node '" + nd.id + "' has noise but non-positive correlation time");
    }
  }
  if (net.slack < 0 || net.slack >= static_cast<int>(n)) {
    rep.bounds_ok = false;
    rep.issues.push_back("slack node is not set");
  } else if (net.slack_pressure <= 0) {
    rep.bounds_ok = false;
    rep.issues.push_back("slack pressure must be positive");
  }
  for (const auto& p : net.pipes) {
    if (p.length <= 0 || p.diameter <= 0) {
      rep.bounds_ok = false;
      rep.issues.push_back("pipe '" + p.id + "' has non-positive length or diameter");
    }
    if (p.from == p.to) {
      rep.bounds_ok = false;
      rep.issues.push_back("pipe '" + p.id + "' is a self-loop");
    }
  }
  for (size_t e = 0; e < net.pipes.size(); ++e) {
    int n_comp = 0;
    for (const auto& c : net.compressors)
      if (c.pipe == static_cast<int>(e)) ++n_comp;
    if (n_comp > 1)
      rep.warnings.push_back("pipe '" + net.pipes[e].id + "' carries " +
                             std::to_string(n_comp) + " compressors");
  }
  for (const auto& c : net.compressors) {
    if (c.alpha_min <= 0 || c.alpha_min > c.alpha_max) {
      rep.bounds_ok = false;
      rep.issues.push_back("compressor '" + c.id + "' has inconsistent ratio bounds");
    }
    if (c.efficiency <= 0 || c.efficiency > 1 || c.exponent <= 0 || c.exponent >= 1) {
      rep.bounds_ok = false;
      rep.issues.push_back("compressor '" + c.id + "' has bad efficiency or exponent");
    }
    if (c.pipe < 0 || c.node < 0 ||
        (net.pipes[c.pipe].from != c.node && net.pipes[c.pipe].to != c.node)) {
      rep.bounds_ok = false;
      rep.issues.push_back("compressor '" + c.id + "' is not attached to an end of its pipe");
    }
  }
  return rep;
}

Network scale_loads(const Network& net, double factor) {
  if (factor <= 0) throw DomainError("scale factor must be positive");
  Network out = net;
  for (auto& nd : out.nodes) nd.injection *= factor;
  return out;
}

namespace {

// Shared mover: shifts `amount` of signed injection mass from one node set to
// another, pro-rata on |q| restricted to the expected sign.
Network shift_mass(const Network& net, const std::vector<int>& from_nodes,
                   const std::vector<int>& to_nodes, double fraction, double sign) {
  if (fraction < 0) throw DomainError("shift fraction must be non-negative");
  if (from_nodes.empty() || to_nodes.empty())
    throw DomainError("shift requires non-empty node sets");
  Network out = net;
  double avail = 0.0;
  for (int i : from_nodes) avail += std::max(0.0, sign * net.nodes[i].injection);
  double moved = fraction * avail;
  if (moved > avail * (1.0 + 1e-12))
    throw DomainError("shift exceeds available injection at source nodes");
  if (avail == 0.0) return out;

  for (int i : from_nodes) {
    double share = std::max(0.0, sign * net.nodes[i].injection) / avail;
    out.nodes[i].injection -= sign * moved * share;
  }
  double to_weight = 0.0;
  for (int i : to_nodes) to_weight += std::max(0.0, sign * net.nodes[i].injection);
  for (int i : to_nodes) {
    double share = to_weight > 0 ? std::max(0.0, sign * net.nodes[i].injection) / to_weight
                                 : 1.0 / static_cast<double>(to_nodes.size());
    out.nodes[i].injection += sign * moved * share;
  }
  return out;
}

}  // namespace

Network shift_supply(const Network& net, const std::vector<int>& from_nodes,
                     const std::vector<int>& to_nodes, double fraction) {
  return shift_mass(net, from_nodes, to_nodes, fraction, +1.0);
}

Network shift_load(const Network& net, const std::vector<int>& from_nodes,
                   const std::vector<int>& to_nodes, double fraction) {
  return shift_mass(net, from_nodes, to_nodes, fraction, -1.0);
}

std::vector<int> mainline_path(const Network& net) {
  if (net.mainline_start < 0 || net.mainline_end < 0)
    throw DomainError("mainline endpoints are not set");
  Adjacency adj = build_adjacency(net);
  std::vector<int> parent(net.nodes.size(), -1);
  std::vector<char> seen(net.nodes.size(), 0);
  std::queue<int> frontier;
  seen[net.mainline_start] = 1;
  frontier.push(net.mainline_start);
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop();
    for (const auto& arc : adj.arcs[u])
      if (!seen[arc.neighbor]) {
        seen[arc.neighbor] = 1;
        parent[arc.neighbor] = u;
        frontier.push(arc.neighbor);
      }
  }
  if (!seen[net.mainline_end])
    throw DomainError("mainline endpoints are not connected");
  std::vector<int> path;
  for (int v = net.mainline_end; v != -1; v = parent[v]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

Network aggregate_branches(const Network& net) {
  std::vector<int> path = mainline_path(net);
  std::vector<char> on_path(net.nodes.size(), 0);
  for (int v : path) on_path[v] = 1;

  Adjacency adj = build_adjacency(net);

  // For every mainline node, fold each off-path subtree into it.
  Network out;
  out.gas = net.gas;
  std::vector<int> new_index(net.nodes.size(), -1);
  for (int v : path) {
    new_index[v] = static_cast<int>(out.nodes.size());
    out.nodes.push_back(net.nodes[v]);
  }

  for (int v : path) {
    Node& target = out.nodes[new_index[v]];
    // DFS into each off-path neighbor subtree.
    for (const auto& arc : adj.arcs[v]) {
      if (on_path[arc.neighbor]) continue;
      std::vector<int> stack{arc.neighbor};
      std::vector<char> seen(net.nodes.size(), 0);
      seen[v] = 1;
      seen[arc.neighbor] = 1;
      while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        const Node& src = net.nodes[u];
        target.injection += src.injection;
        if (src.noise_sigma > 0) {
          double s2 = target.noise_sigma * target.noise_sigma;
          double a2 = src.noise_sigma * src.noise_sigma;
          target.noise_tau = (s2 * target.noise_tau + a2 * src.noise_tau) / (s2 + a2);
          target.noise_sigma = std::sqrt(s2 + a2);
        }
        for (const auto& next : adj.arcs[u])
          if (!seen[next.neighbor]) {
            seen[next.neighbor] = 1;
            stack.push_back(next.neighbor);
          }
      }
    }
  }

  for (const auto& p : net.pipes) {
    if (new_index[p.from] < 0 || new_index[p.to] < 0) continue;
    Pipe q = p;
    q.from = new_index[p.from];
    q.to = new_index[p.to];
    out.pipes.push_back(q);
  }
  // Remap pipe indices for surviving compressors.
  for (const auto& c : net.compressors) {
    const Pipe& p = net.pipes[c.pipe];
    if (new_index[p.from] < 0 || new_index[p.to] < 0) continue;
    Compressor cc = c;
    cc.node = new_index[c.node];
    cc.pipe = -1;
    for (size_t e = 0; e < out.pipes.size(); ++e)
      if (out.pipes[e].id == p.id) cc.pipe = static_cast<int>(e);
    out.compressors.push_back(cc);
  }
  out.slack = new_index[net.slack];
  if (out.slack < 0)
    throw DomainError("slack node is not on the mainline; cannot aggregate");
  out.slack_pressure = net.slack_pressure;
  out.mainline_start = new_index[net.mainline_start];
  out.mainline_end = new_index[net.mainline_end];
  return out;
}

std::vector<double> distance_from_mainline_start(const Network& net) {
  int origin = net.mainline_start >= 0 ? net.mainline_start : net.slack;
  if (origin < 0) throw DomainError("no mainline start or slack node to anchor distances");
  Adjacency adj = build_adjacency(net);
  std::vector<double> dist(net.nodes.size(), -1.0);
  std::queue<int> frontier;
  dist[origin] = 0.0;
  frontier.push(origin);
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop();
    for (const auto& arc : adj.arcs[u])
      if (dist[arc.neighbor] < 0) {
        dist[arc.neighbor] = dist[u] + net.pipes[arc.pipe].length;
        frontier.push(arc.neighbor);
      }
  }
  return dist;
}

}  // namespace gasjitter
