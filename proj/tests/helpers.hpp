// Shared builders for test networks.
#ifndef GASJITTER_TESTS_HELPERS_HPP
#define GASJITTER_TESTS_HELPERS_HPP

#include <random>
#include <string>
#include <vector>

#include "gasjitter/network.hpp"

namespace helpers {

using gasjitter::Compressor;
using gasjitter::Network;
using gasjitter::Node;
using gasjitter::Pipe;

inline Node make_node(const std::string& id, double q, double pmin = 0.0,
                      double pmax = std::numeric_limits<double>::infinity()) {
  Node n;
  n.id = id;
  n.injection = q;
  n.p_min = pmin;
  n.p_max = pmax;
  return n;
}

inline Pipe make_pipe(const std::string& id, int from, int to, double length,
                      double diameter) {
  Pipe p;
  p.id = id;
  p.from = from;
  p.to = to;
  p.length = length;
  p.diameter = diameter;
  return p;
}

// Path A(+q) -- B(0) ... -- last(-q) with uniform pipes; slack at A.
inline Network make_path(int n_nodes, double q, double length, double diameter,
                         double p0, double c_s = 366.0, double f = 0.01) {
  Network net;
  net.gas.sound_speed = c_s;
  net.gas.friction = f;
  for (int i = 0; i < n_nodes; ++i) {
    double inj = i == 0 ? q : (i == n_nodes - 1 ? -q : 0.0);
    net.nodes.push_back(make_node("N" + std::to_string(i), inj));
  }
  for (int i = 0; i + 1 < n_nodes; ++i)
    net.pipes.push_back(make_pipe("P" + std::to_string(i), i, i + 1, length, diameter));
  net.slack = 0;
  net.slack_pressure = p0;
  return net;
}

// Random tree with safe parameters; flows stay modest so every instance is
// steady-feasible. Used for property-style invariants.
inline Network random_tree(std::mt19937& rng, int n_nodes) {
  std::uniform_real_distribution<double> len(2e4, 8e4);
  std::uniform_real_distribution<double> dia(0.6, 1.2);
  std::uniform_real_distribution<double> load(1.0, 12.0);
  std::uniform_int_distribution<int> pick_cs(330, 400);

  Network net;
  net.gas.sound_speed = pick_cs(rng);
  net.gas.friction = 0.01;
  double total = 0.0;
  for (int i = 0; i < n_nodes; ++i) {
    double q = i == 0 ? 0.0 : -load(rng);
    total += q;
    net.nodes.push_back(
        make_node(std::string("N") + (i < 10 ? "0" : "") + std::to_string(i), q));
  }
  net.nodes[0].injection = -total;  // balance at the root
  for (int i = 1; i < n_nodes; ++i) {
    std::uniform_int_distribution<int> parent(0, i - 1);
    int p = parent(rng);
    net.pipes.push_back(make_pipe("P" + std::to_string(i), p, i, len(rng), dia(rng)));
  }
  net.slack = 0;
  net.slack_pressure = 6.0e6;
  return net;
}

}  // namespace helpers

#endif
