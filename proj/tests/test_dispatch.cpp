#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "gasjitter/dispatch.hpp"
#include "gasjitter/errors.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace gasjitter;

namespace {

// Independent brute-force machinery for path networks whose compressors all
// sit at pipe inlets (in flow direction). Never touches the solvers.
struct PathOracle {
  double p0;
  std::vector<double> delta;      // per pipe, Pa^2 drop of p^2 at this flow
  std::vector<double> p_min;      // per node 1..n (node 0 is the anchored slack)
  std::vector<double> p_max;      // per node 1..n; empty = unbounded
  std::vector<int> comp_at_pipe;  // compressor slot per pipe, -1 = none
  std::vector<double> weight;     // objective coefficient per slot (c*phi/eta)
  std::vector<double> exponent;   // per slot

  // node pressures under the given per-slot ratios; empty when infeasible
  std::vector<double> propagate(const std::vector<double>& alphas) const {
    std::vector<double> p{p0};
    for (size_t e = 0; e < delta.size(); ++e) {
      double inlet = p.back();
      if (comp_at_pipe[e] >= 0) inlet *= alphas[comp_at_pipe[e]];
      double sq = inlet * inlet - delta[e];
      if (sq <= 0) return {};
      double pv = std::sqrt(sq);
      if (pv < p_min[e]) return {};
      if (!p_max.empty() && pv > p_max[e]) return {};
      p.push_back(pv);
    }
    return p;
  }

  double objective(const std::vector<double>& alphas) const {
    double obj = 0.0;
    for (size_t k = 0; k < weight.size(); ++k)
      obj += weight[k] * std::pow(alphas[k], exponent[k]);
    return obj;
  }

  // exhaustive grid search, step 1e-3 per ratio
  double grid_best(const std::vector<std::pair<double, double>>& range,
                   std::vector<double>* best_alphas = nullptr) const {
    size_t slots = weight.size();
    std::vector<double> alphas(slots, 1.0);
    double best = std::numeric_limits<double>::infinity();
    std::function<void(size_t)> scan = [&](size_t k) {
      if (k == slots) {
        if (!propagate(alphas).empty()) {
          double obj = objective(alphas);
          if (obj < best) {
            best = obj;
            if (best_alphas) *best_alphas = alphas;
          }
        }
        return;
      }
      long steps = std::lround((range[k].second - range[k].first) / 1e-3);
      for (long i = 0; i <= steps; ++i) {
        alphas[k] = range[k].first + 1e-3 * static_cast<double>(i);
        scan(k + 1);
      }
    };
    scan(0);
    return best;
  }
};

Network canonical_pipe(double p_min_b, double alpha_max, double p_max_a = 7e6) {
  Network net = helpers::make_path(2, 150.0, 1e5, 0.9144, 5.5e6, 366.0, 0.01);
  net.nodes[0].p_max = p_max_a;
  net.nodes[1].p_min = p_min_b;
  net.nodes[1].p_max = 7e6;
  Compressor c;
  c.id = "C1";
  c.pipe = 0;
  c.node = 0;
  c.alpha_max = alpha_max;
  net.compressors.push_back(c);
  return net;
}

double pipe_delta(const Network& net, int e, double flow) {
  const Pipe& p = net.pipes[e];
  double flux = flow / p.area();
  return (net.pipe_beta(p) * p.length / p.diameter) * flux * flux;
}

// Three cascaded 80 km pipes, one inlet compressor each.
Network cascade(double p_min, double alpha_max) {
  Network net = helpers::make_path(4, 150.0, 8e4, 0.9144, 5.5e6, 366.0, 0.01);
  for (size_t i = 1; i < net.nodes.size(); ++i) {
    net.nodes[i].p_min = p_min;
    net.nodes[i].p_max = 7.5e6;
  }
  net.nodes[0].p_max = 7.5e6;
  for (int e = 0; e < 3; ++e) {
    Compressor c;
    c.id = "C" + std::to_string(e);
    c.pipe = e;
    c.node = e;
    c.alpha_max = alpha_max;
    net.compressors.push_back(c);
  }
  return net;
}

void require_feasible(const Network& net, const DispatchResult& res) {
  SteadyState ss = solve_steady(net, res.ratios);
  for (const auto& v : check_bounds(ss, net))
    if (v.kind == BoundViolation::Kind::node)
      CHECK(v.deficit <= 1e-6 * std::max(1.0, v.bound));
}

}  // namespace

TEST_CASE("compression_power: idle and decompressing stations cost nothing") {
  Network net = canonical_pipe(0.0, 1.5);
  EdgeFlows f = compute_tree_flows(net);
  CHECK(compression_power(net, f, {1.0}) == 0.0);
  CHECK(compression_power(net, f, {0.9}) == 0.0);  // max{alpha^m, 1} floors at 1
}

TEST_CASE("compression_power: scalar arithmetic check") {
  Network net = helpers::make_path(2, 100.0, 5e4, 0.9144, 5.5e6);
  Compressor c;
  c.id = "C1";
  c.pipe = 0;
  c.node = 0;
  c.alpha_max = 2.0;
  c.cost_coeff = 1.0;
  c.efficiency = 1.0;
  c.exponent = 0.2857;
  net.compressors.push_back(c);
  EdgeFlows f = compute_tree_flows(net);
  double power = compression_power(net, f, {1.5});
  CHECK(power == doctest::Approx(100.0 * (std::pow(1.5, 0.2857) - 1.0)));
  CHECK(power == doctest::Approx(12.28).epsilon(1e-3));
}

TEST_CASE("compression_power: boosting against the flow is an orientation error") {
  Network net = helpers::make_path(2, 100.0, 5e4, 0.9144, 5.5e6);
  Compressor c;
  c.id = "C1";
  c.pipe = 0;
  c.node = 1;  // boosts toward node 0, against the flow
  c.alpha_max = 2.0;
  net.compressors.push_back(c);
  EdgeFlows f = compute_tree_flows(net);
  CHECK(compression_power(net, f, {1.0}) == 0.0);  // idle is fine
  CHECK_THROWS_AS(compression_power(net, f, {1.2}), DomainError);
}

TEST_CASE("greedy: high-pressure line needs no boost") {
  Network net = canonical_pipe(4.0e6, 1.2);
  DispatchResult res = greedy_dispatch(net, compute_tree_flows(net));
  CHECK(res.ratios[0] == 1.0);
  CHECK(res.power == 0.0);
  require_feasible(net, res);
}

TEST_CASE("greedy: activates at alpha_max when the segment sags") {
  Network net = canonical_pipe(4.8e6, 1.2);  // unboosted end sits near 4.755e6
  DispatchResult res = greedy_dispatch(net, compute_tree_flows(net));
  CHECK(res.ratios[0] == doctest::Approx(1.2));
  CHECK(res.power > 0.0);
  require_feasible(net, res);
  // oracle: both choices recomputed from the closed-form drop
  double delta = pipe_delta(net, 0, 150.0);
  double unboosted = std::sqrt(5.5e6 * 5.5e6 - delta);
  double boosted = std::sqrt(1.2 * 5.5e6 * 1.2 * 5.5e6 - delta);
  CHECK(unboosted < 4.8e6);
  CHECK(boosted >= 4.8e6);
  CHECK(res.node_pressure[1] == doctest::Approx(boosted));
}

TEST_CASE("greedy: overshooting p_max is a bound error") {
  Network net = canonical_pipe(4.8e6, 1.2, /*p_max_a=*/6.0e6);  // 1.2*5.5e6 > 6.0e6
  CHECK_THROWS_AS(greedy_dispatch(net, compute_tree_flows(net)), DomainError);
}

TEST_CASE("greedy: infeasible even at alpha_max") {
  Network net = canonical_pipe(5.8e6, 1.05);
  CHECK_THROWS_AS(greedy_dispatch(net, compute_tree_flows(net)), InfeasibleError);
}

TEST_CASE("greedy: cascade activates every second station") {
  Network net = cascade(4.5e6, 1.2);
  DispatchResult res = greedy_dispatch(net, compute_tree_flows(net));
  CHECK(res.ratios[0] == 1.0);
  CHECK(res.ratios[1] == doctest::Approx(1.2));
  CHECK(res.ratios[2] == 1.0);
  require_feasible(net, res);

  // exhaustive oracle over all 2^3 idle/max patterns: propagate each pattern
  // and re-derive every greedy decision from scratch
  double delta = pipe_delta(net, 0, 150.0);
  auto run_pattern = [&](int mask) {
    std::vector<double> p{5.5e6};
    for (int e = 0; e < 3; ++e) {
      double inlet = p.back() * ((mask >> e) & 1 ? 1.2 : 1.0);
      double sq = inlet * inlet - delta;
      p.push_back(sq > 0 ? std::sqrt(sq) : -1.0);
    }
    return p;
  };
  CHECK(run_pattern(0b000)[1] >= 4.5e6);  // station 0 may idle
  CHECK(run_pattern(0b000)[2] < 4.5e6);   // station 1 cannot idle after that
  CHECK(run_pattern(0b010)[2] >= 4.5e6);  // boosting station 1 restores it
  CHECK(run_pattern(0b010)[3] >= 4.5e6);  // and station 2 may idle again
}

TEST_CASE("build_gp: variable and constraint counting") {
  Network net = canonical_pipe(4.8e6, 1.3);
  GPProblem gp = build_gp(net, compute_tree_flows(net));
  CHECK(gp.n_pressure_vars() == 2);
  CHECK(gp.n_ratio_vars() == 1);
  CHECK(gp.n_coupling_constraints() == 1);
}

TEST_CASE("build_gp: the drop constant of the canonical pipe") {
  Network net = canonical_pipe(4.8e6, 1.3);
  GPProblem gp = build_gp(net, compute_tree_flows(net));
  CHECK(gp.delta1[0] == doctest::Approx(7.6447e12).epsilon(1e-3));
  // consistency with the profile drop
  SteadyState ss = solve_steady(net);
  double pin = ss.inlet_pressure[0], pout = ss.outlet_pressure[0];
  CHECK(gp.delta1[0] == doctest::Approx(pin * pin - pout * pout));
}

TEST_CASE("build_gp: zero-flow pipe degenerates to a single-term constraint") {
  Network net = helpers::make_path(2, 0.0, 5e4, 0.9144, 5.5e6);
  Compressor c;
  c.id = "C1";
  c.pipe = 0;
  c.node = 0;
  c.alpha_max = 1.5;
  net.compressors.push_back(c);
  GPProblem gp = build_gp(net, compute_tree_flows(net));
  CHECK(gp.delta1[0] == 0.0);
  CHECK(gp.constraints[0].terms.size() == 1);
  CHECK(gp.ratio_var[0] == -1);  // no flow, station pinned
}

TEST_CASE("solve_gp: zero-margin instance keeps every ratio at 1") {
  Network net = canonical_pipe(0.0, 1.3);
  double unboosted = solve_steady(net).node_pressure[1];
  net.nodes[1].p_min = unboosted;  // binding exactly at alpha = 1
  DispatchResult res = solve_gp(net, compute_tree_flows(net));
  CHECK(std::abs(res.ratios[0] - 1.0) <= 1e-5);
  CHECK(res.power <= 1e-4 * res.objective);
  // objective reduces to the constant sum of the station weights
  CHECK(res.objective == doctest::Approx(150.0).epsilon(1e-4));
}

TEST_CASE("solve_gp: binding compressor matches the bisection oracle") {
  Network net = canonical_pipe(5.0e6, 1.2);
  DispatchResult res = solve_gp(net, compute_tree_flows(net));

  // bisection on alpha against the closed drop law
  double delta = pipe_delta(net, 0, 150.0);
  double lo = 1.0, hi = 1.2;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double sq = mid * 5.5e6 * mid * 5.5e6 - delta;
    (std::sqrt(std::max(sq, 0.0)) >= 5.0e6 ? hi : lo) = mid;
  }
  CHECK(res.ratios[0] == doctest::Approx(hi).epsilon(1e-6));
  CHECK(res.node_pressure[1] == doctest::Approx(5.0e6).epsilon(1e-6));
  require_feasible(net, res);
}

TEST_CASE("solve_gp: symmetric twin legs get equal ratios") {
  Network net;
  net.gas.sound_speed = 366.0;
  net.gas.friction = 0.01;
  net.nodes.push_back(helpers::make_node("S", 300.0, 0.0, 7e6));
  net.nodes.push_back(helpers::make_node("A", -150.0, 5.0e6, 7e6));
  net.nodes.push_back(helpers::make_node("B", -150.0, 5.0e6, 7e6));
  net.pipes.push_back(helpers::make_pipe("PA", 0, 1, 1e5, 0.9144));
  net.pipes.push_back(helpers::make_pipe("PB", 0, 2, 1e5, 0.9144));
  for (int k = 0; k < 2; ++k) {
    Compressor c;
    c.id = k == 0 ? "CA" : "CB";
    c.pipe = k;
    c.node = 0;
    c.alpha_max = 1.2;
    net.compressors.push_back(c);
  }
  net.slack = 0;
  net.slack_pressure = 5.5e6;
  DispatchResult res = solve_gp(net, compute_tree_flows(net));
  CHECK(res.ratios[0] == doctest::Approx(res.ratios[1]).epsilon(1e-7));
  require_feasible(net, res);
}

namespace {

// Two pipes in series; a cheap station at the head, an expensive one at the
// middle with lots of upstream margin, so the relaxed problem decompresses.
Network decompression_instance() {
  Network net = helpers::make_path(3, 150.0, 6e4, 0.9144, 5.0e6, 366.0, 0.01);
  net.nodes[0].p_max = 7.5e6;
  net.nodes[1].p_min = 0.0;
  net.nodes[1].p_max = 6.5e6;
  net.nodes[2].p_min = 4.6e6;
  net.nodes[2].p_max = 7.5e6;
  Compressor head;
  head.id = "C1";
  head.pipe = 0;
  head.node = 0;
  head.alpha_max = 1.5;
  head.cost_coeff = 0.01;
  Compressor mid;
  mid.id = "C2";
  mid.pipe = 1;
  mid.node = 1;
  mid.alpha_max = 1.5;
  mid.cost_coeff = 10.0;
  net.compressors.push_back(head);
  net.compressors.push_back(mid);
  return net;
}

PathOracle decompression_oracle(const Network& net) {
  PathOracle po;
  po.p0 = 5.0e6;
  po.delta = {pipe_delta(net, 0, 150.0), pipe_delta(net, 1, 150.0)};
  po.p_min = {0.0, 4.6e6};
  po.p_max = {6.5e6, 7.5e6};
  po.comp_at_pipe = {0, 1};
  po.weight = {0.01 * 150.0, 10.0 * 150.0};
  po.exponent = {net.compressors[0].exponent, net.compressors[1].exponent};
  return po;
}

}  // namespace

TEST_CASE("solve_gp vs grid search: relaxed optimum decompresses the pricey station") {
  Network net = decompression_instance();
  DispatchResult gp = solve_gp(net, compute_tree_flows(net));
  CHECK(gp.ratios[1] < 1.0);

  PathOracle po = decompression_oracle(net);
  std::vector<double> best_alphas;
  double best = po.grid_best({{0.7, 1.5}, {0.7, 1.5}}, &best_alphas);
  CHECK(std::abs(std::log(gp.objective) - std::log(best)) <=
        1e-4 * std::abs(std::log(best)));
  CHECK(gp.ratios[0] == doctest::Approx(best_alphas[0]).epsilon(5e-3));
  CHECK(gp.ratios[1] == doctest::Approx(best_alphas[1]).epsilon(5e-3));
}

TEST_CASE("solve_sp: pins the decompressing station at 1 and never beats the GP") {
  Network net = decompression_instance();
  EdgeFlows flows = compute_tree_flows(net);
  DispatchResult gp = solve_gp(net, flows);
  DispatchResult sp = solve_sp(net, flows);
  CHECK(sp.ratios[1] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sp.objective >= gp.objective - 1e-6 * gp.objective);
  require_feasible(net, sp);

  // grid-search oracle restricted to alpha >= 1 agrees with the SP
  PathOracle po = decompression_oracle(net);
  double best = po.grid_best({{1.0, 1.5}, {1.0, 1.5}});
  CHECK(std::abs(std::log(sp.objective) - std::log(best)) <=
        1e-4 * std::abs(std::log(best)));
}

TEST_CASE("solve_sp: converges in one iteration when the GP already respects alpha >= 1") {
  Network net = canonical_pipe(5.0e6, 1.2);
  EdgeFlows flows = compute_tree_flows(net);
  DispatchResult gp = solve_gp(net, flows);
  REQUIRE(gp.ratios[0] >= 1.0);
  DispatchResult sp = solve_sp(net, flows);
  CHECK(sp.iterations == 1);
  CHECK(sp.ratios[0] == doctest::Approx(gp.ratios[0]).epsilon(1e-6));
}

TEST_CASE("solve_sp: objective trace is non-increasing") {
  for (Network net : {decompression_instance(), cascade(4.6e6, 1.15)}) {
    DispatchResult sp = solve_sp(net, compute_tree_flows(net));
    for (size_t k = 1; k < sp.objective_trace.size(); ++k)
      CHECK(sp.objective_trace[k] <=
            sp.objective_trace[k - 1] * (1.0 + 1e-9) + 1e-12);
  }
}

TEST_CASE("solve_sp: requires alpha_min = 1") {
  Network net = decompression_instance();
  net.compressors[0].alpha_min = 0.8;
  CHECK_THROWS_AS(solve_sp(net, compute_tree_flows(net)), DomainError);
}

TEST_CASE("three-compressor cascade: GP against the full grid") {
  Network net = cascade(4.6e6, 1.15);
  EdgeFlows flows = compute_tree_flows(net);
  DispatchResult gp = solve_gp(net, flows);
  require_feasible(net, gp);

  PathOracle po;
  po.p0 = 5.5e6;
  po.delta.assign(3, pipe_delta(net, 0, 150.0));
  po.p_min.assign(3, 4.6e6);
  po.p_max.assign(3, 7.5e6);
  po.comp_at_pipe = {0, 1, 2};
  po.weight.assign(3, 150.0);
  po.exponent.assign(3, net.compressors[0].exponent);
  std::vector<double> best_alphas;
  // the relaxed optimum decompresses the tail station, so the grid dips below 1
  double best = po.grid_best({{0.8, 1.15}, {0.8, 1.15}, {0.8, 1.15}}, &best_alphas);
  CHECK(std::abs(std::log(gp.objective) - std::log(best)) <=
        1e-4 * std::abs(std::log(best)));

  // and the restricted grid agrees with the no-decompression solver
  DispatchResult sp = solve_sp(net, flows);
  double best_sp = po.grid_best({{1.0, 1.15}, {1.0, 1.15}, {1.0, 1.15}});
  CHECK(std::abs(std::log(sp.objective) - std::log(best_sp)) <=
        1e-4 * std::abs(std::log(best_sp)));
}

TEST_CASE("optimality ordering: objective everywhere, power where no station decompresses") {
  for (Network net : {canonical_pipe(5.0e6, 1.2), cascade(4.6e6, 1.2)}) {
    EdgeFlows flows = compute_tree_flows(net);
    DispatchResult gp = solve_gp(net, flows);
    DispatchResult sp = solve_sp(net, flows);
    DispatchResult gr = greedy_dispatch(net, flows);
    CHECK(gp.objective <= sp.objective * (1.0 + 1e-6));
    CHECK(sp.objective <= gr.objective * (1.0 + 1e-6));
    CHECK(sp.power <= gr.power * (1.0 + 1e-6) + 1e-9);
    bool gp_decompresses = false;
    for (double a : gp.ratios)
      if (a < 1.0 - 1e-9) gp_decompresses = true;
    if (!gp_decompresses) CHECK(gp.power <= sp.power * (1.0 + 1e-6) + 1e-9);
  }
}

TEST_CASE("recovered ratios satisfy the squared-pressure drop identity") {
  for (Network net : {canonical_pipe(5.0e6, 1.2), cascade(4.6e6, 1.15),
                      decompression_instance()}) {
    EdgeFlows flows = compute_tree_flows(net);
    GPProblem gp = build_gp(net, flows);
    DispatchResult res = solve_gp(gp);
    SteadyState ss = solve_steady(net, res.ratios);
    for (size_t e = 0; e < net.pipes.size(); ++e) {
      int c = net.compressor_at(static_cast<int>(e), net.pipes[e].from);
      if (c < 0 || gp.ratio_var[c] < 0) continue;
      double alpha = res.ratios[c];
      double pi = ss.node_pressure[net.pipes[e].from];
      double pj = ss.node_pressure[net.pipes[e].to];
      double resid = alpha * alpha - (pj * pj + gp.delta1[e]) / (pi * pi);
      CHECK(std::abs(resid) <= 1e-8 * alpha * alpha);
    }
  }
}

TEST_CASE("solve_gp: infeasible bounds produce a certificate") {
  Network net = canonical_pipe(5.8e6, 1.05);  // cannot be held even at max boost
  try {
    solve_gp(net, compute_tree_flows(net));
    FAIL("expected InfeasibleError");
  } catch (const InfeasibleError& e) {
    CHECK(std::string(e.what()).find("violated") != std::string::npos);
  }
}
