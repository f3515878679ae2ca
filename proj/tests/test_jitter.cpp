#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "gasjitter/errors.hpp"
#include "gasjitter/jitter.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace gasjitter;

namespace {

Network canonical_pipe() {
  return helpers::make_path(2, 150.0, 1e5, 0.9144, 5.5e6, 366.0, 0.01);
}

}  // namespace

TEST_CASE("zero mode: flat pressure gives Z == 1") {
  Network net = helpers::make_path(3, 0.0, 5e4, 0.9, 5e6);
  SteadyState ss = solve_steady(net);
  for (int e = 0; e < 2; ++e) {
    ZeroModeProfile z = zero_mode_profile(ss, e);
    for (double x : {0.0, 1e4, 5e4}) CHECK(z.value(x) == doctest::Approx(1.0));
  }
}

TEST_CASE("zero mode: canonical pipe end values") {
  Network net = canonical_pipe();
  SteadyState ss = solve_steady(net);
  ZeroModeProfile z = zero_mode_profile(ss, 0);
  // direct arithmetic from the end pressures of the steady oracle
  double pin = ss.inlet_pressure[0], pout = ss.outlet_pressure[0];
  CHECK(z.at_from_end() == doctest::Approx((pin + pout) / (2 * pin)));
  CHECK(z.at_to_end() == doctest::Approx((pin + pout) / (2 * pout)));
  CHECK(z.at_from_end() == doctest::Approx(0.932).epsilon(1e-3));
  CHECK(z.at_to_end() == doctest::Approx(1.078).epsilon(1e-3));
}

TEST_CASE("zero mode: length-average is 1 by quadrature") {
  std::mt19937 rng(5);
  for (int it = 0; it < 8; ++it) {
    Network net = helpers::random_tree(rng, 10);
    SteadyState ss = solve_steady(net);
    for (size_t e = 0; e < net.pipes.size(); ++e) {
      ZeroModeProfile z = zero_mode_profile(ss, static_cast<int>(e));
      double mean = oracles::simpson([&](double x) { return z.value(x); }, 0.0,
                                     net.pipes[e].length, 4000) /
                    net.pipes[e].length;
      CHECK(std::abs(mean - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("zero mode: satisfies its defining ODE on the sample grid") {
  Network net = canonical_pipe();
  SteadyState ss = solve_steady(net);
  ZeroModeProfile z = zero_mode_profile(ss, 0);
  const Pipe& p = net.pipes[0];
  double beta = net.pipe_beta(p);
  double flux = ss.flows.flow[0] / p.area();
  double max_z = std::max(z.at_from_end(), z.at_to_end());
  double h = p.length / 1e6;
  for (int k = 1; k < defaults::profile_samples - 1; ++k) {
    double x = p.length * k / (defaults::profile_samples - 1);
    double dz = (z.value(x + h) - z.value(x - h)) / (2 * h);
    double px = ss.pressure_at(0, x);
    double rhs = (beta / (2 * p.diameter)) * flux * std::abs(flux) / (px * px) * z.value(x);
    CHECK(std::abs(dz - rhs) <= 1e-6 * max_z);
  }
}

TEST_CASE("zero mode: grows along the flow direction") {
  std::mt19937 rng(17);
  for (int it = 0; it < 8; ++it) {
    Network net = helpers::random_tree(rng, 10);
    SteadyState ss = solve_steady(net);
    for (size_t e = 0; e < net.pipes.size(); ++e) {
      ZeroModeProfile z = zero_mode_profile(ss, static_cast<int>(e));
      double L = net.pipes[e].length;
      double sign_flow = ss.flows.flow[e] > 0 ? 1.0 : (ss.flows.flow[e] < 0 ? -1.0 : 0.0);
      for (int k = 0; k < 6; ++k) {
        double x = L * (k + 0.5) / 6.0;
        double slope = z.value(x + L * 1e-6) - z.value(x - L * 1e-6);
        if (sign_flow == 0.0)
          CHECK(slope == doctest::Approx(0.0));
        else
          CHECK(slope * sign_flow > 0.0);
      }
    }
  }
}

TEST_CASE("edge constants: single pipe anchors at 1") {
  Network net = canonical_pipe();
  SteadyState ss = solve_steady(net);
  EdgeConstants c = edge_constants(net, ss);
  CHECK(c.c[0] == doctest::Approx(1.0));
}

TEST_CASE("edge constants: two identical series pipes match at the junction") {
  Network net = helpers::make_path(3, 100.0, 6e4, 0.9144, 5.5e6);
  SteadyState ss = solve_steady(net);
  EdgeConstants c = edge_constants(net, ss);
  ZeroModeProfile z0 = zero_mode_profile(ss, 0);
  ZeroModeProfile z1 = zero_mode_profile(ss, 1);
  // hand-solved matching: c1 Z1(L) = c2 Z2(0) with no compressors
  CHECK(c.c[1] == doctest::Approx(c.c[0] * z0.at_to_end() / z1.at_from_end()));
}

TEST_CASE("edge constants: junction matching holds on random trees") {
  std::mt19937 rng(29);
  for (int it = 0; it < 10; ++it) {
    Network net = helpers::random_tree(rng, 14);
    SteadyState ss = solve_steady(net);
    EdgeConstants c = edge_constants(net, ss);
    for (double v : c.c) CHECK(v > 0.0);
    for (size_t i = 0; i < net.nodes.size(); ++i) {
      double ref = -1.0;
      for (size_t e = 0; e < net.pipes.size(); ++e) {
        const Pipe& p = net.pipes[e];
        if (p.from != static_cast<int>(i) && p.to != static_cast<int>(i)) continue;
        ZeroModeProfile z = zero_mode_profile(ss, static_cast<int>(e));
        double zend = p.from == static_cast<int>(i) ? z.at_from_end() : z.at_to_end();
        double coeff = c.c[e] * zend;  // no compressors in random trees
        if (ref < 0)
          ref = coeff;
        else
          CHECK(std::abs(coeff - ref) <= 1e-9 * ref);
      }
    }
  }
}

TEST_CASE("fluctuation strength: zeros, the published estimate, quadratic scaling") {
  Network net = helpers::make_path(3, 10.0, 5e4, 0.9, 5e6);
  for (auto& nd : net.nodes) nd.noise_sigma = 0.0;
  CHECK(fluctuation_strength(net).strength == 0.0);

  // 70 consumption nodes at sigma = 20/3 kg/s
  Network est;
  est.nodes.push_back(helpers::make_node("S", 1400.0));
  for (int i = 0; i < 70; ++i) {
    Node nd = helpers::make_node("L" + std::to_string(i), -20.0);
    nd.noise_sigma = 20.0 / 3.0;
    est.nodes.push_back(nd);
  }
  double s = fluctuation_strength(est).strength;
  CHECK(s == doctest::Approx((20.0 / 3.0) * (20.0 / 3.0) * 70));
  CHECK(s == doctest::Approx(3111.1).epsilon(1e-3));

  for (auto& nd : est.nodes) nd.noise_sigma *= 2.0;
  CHECK(fluctuation_strength(est).strength == doctest::Approx(4.0 * s));
}

TEST_CASE("fluctuation strength: tau_eff reproduces the integrated-noise growth rate") {
  Network net = helpers::make_path(3, 10.0, 5e4, 0.9, 5e6);
  net.nodes[1].noise_sigma = 2.0;
  net.nodes[1].noise_tau = 500.0;
  net.nodes[2].noise_sigma = 4.0;
  net.nodes[2].noise_tau = 2000.0;
  FluctuationStrength fs = fluctuation_strength(net);
  double expected_rate = 2.0 * (2.0 * 2.0 * 500.0 + 4.0 * 4.0 * 2000.0);
  CHECK(fs.strength * fs.tau_eff == doctest::Approx(expected_rate));
}

TEST_CASE("diffusion: zero strength kills D") {
  Network net = canonical_pipe();
  for (auto& nd : net.nodes) nd.noise_sigma = 0.0;
  SteadyState ss = solve_steady(net);
  JitterProfile jp = diffusion_profile(net, ss);
  CHECK(jp.diffusion_at(0, 5e4) == 0.0);
}

TEST_CASE("diffusion: monotone along a uniform-flow path") {
  Network net = helpers::make_path(5, 120.0, 5e4, 0.9144, 5.8e6);
  net.nodes[4].noise_sigma = 5.0;
  SteadyState ss = solve_steady(net);
  JitterProfile jp = diffusion_profile(net, ss);
  double prev = 0.0;
  for (int e = 0; e < 4; ++e)
    for (int k = 0; k <= 10; ++k) {
      double d = jp.diffusion_at(e, net.pipes[e].length * k / 10.0);
      CHECK(d >= prev * (1.0 - 1e-12));
      prev = d;
    }
}

TEST_CASE("diffusion: two supplies with a central load peak at the flow reversal") {
  // supplies at both ends, single big load in the middle: flows converge there
  Network net = helpers::make_path(7, 0.0, 4e4, 0.9144, 5.8e6);
  net.nodes[0].injection = 60.0;
  net.nodes[6].injection = 40.0;
  net.nodes[3].injection = -100.0;
  net.nodes[3].noise_sigma = 10.0;
  SteadyState ss = solve_steady(net);
  JitterProfile jp = diffusion_profile(net, ss);

  // exhaustive scan over every sample point of every pipe
  double best = -1.0;
  int best_pipe = -1;
  double best_x = 0.0;
  for (size_t e = 0; e < net.pipes.size(); ++e)
    for (int k = 0; k <= 100; ++k) {
      double x = net.pipes[e].length * k / 100.0;
      double d = jp.diffusion_at(static_cast<int>(e), x);
      if (d > best) {
        best = d;
        best_pipe = static_cast<int>(e);
        best_x = x;
      }
    }
  // reversal node is N3: the max sits at the junction of pipes P2/P3
  bool at_reversal = (best_pipe == 2 && best_x == doctest::Approx(net.pipes[2].length)) ||
                     (best_pipe == 3 && best_x == doctest::Approx(0.0));
  CHECK(at_reversal);
  CHECK(jp.node_diffusion(3) == doctest::Approx(best).epsilon(1e-9));
}

TEST_CASE("diffusion: invariant under rescaling the edge constants") {
  Network net = helpers::make_path(4, 80.0, 5e4, 0.9144, 5.6e6);
  net.nodes[3].noise_sigma = 8.0;
  SteadyState ss = solve_steady(net);
  EdgeConstants c = edge_constants(net, ss);
  FluctuationStrength fs = fluctuation_strength(net);
  JitterProfile base = diffusion_profile(net, ss, c, fs);

  for (double lambda : {1e-3, 0.7, 42.0}) {
    EdgeConstants scaled = c;
    for (auto& v : scaled.c) v *= lambda;
    for (auto& v : scaled.node_coeff) v *= lambda;
    JitterProfile jp = diffusion_profile(net, ss, scaled, fs);
    for (int e = 0; e < 3; ++e)
      for (int k = 0; k <= 7; ++k) {
        double x = net.pipes[e].length * k / 7.0;
        CHECK(std::abs(jp.diffusion_at(e, x) - base.diffusion_at(e, x)) <=
              1e-12 * base.diffusion_at(e, x));
      }
  }
}

TEST_CASE("diffusion: compressor station jumps by alpha^2") {
  Network net = helpers::make_path(3, 100.0, 6e4, 0.9144, 5.6e6);
  Compressor c;
  c.id = "C1";
  c.pipe = 1;
  c.node = 1;  // boosts into pipe P1 at node N1
  c.alpha_max = 1.5;
  net.compressors.push_back(c);
  net.nodes[2].noise_sigma = 6.0;
  double alpha = 1.3;
  SteadyState ss = solve_steady(net, {alpha});
  JitterProfile jp = diffusion_profile(net, ss);

  double upstream = jp.diffusion_at(0, net.pipes[0].length);  // pipe side into node 1
  double nodal = jp.node_diffusion(1);
  double downstream = jp.diffusion_at(1, 0.0);
  CHECK(std::abs(upstream - nodal) <= 1e-9 * nodal);  // no station on P0's end
  CHECK(std::abs(downstream - alpha * alpha * nodal) <= 1e-9 * downstream);
}

TEST_CASE("normalize: reference arithmetic in psi") {
  double t0 = defaults::reference_time;
  double p0 = defaults::reference_pressure;
  // D/D0 = 1 at t0: fluctuation std = p0/3 = 266.67 psi
  double d0 = (p0 / 3) * (p0 / 3) / t0;
  CHECK(normalize_diffusion(d0, p0, t0) == doctest::Approx(1.0));
  double var = oracles::simpson(
      [&](double delta) { return delta * delta * pressure_pdf(d0, t0, delta); }, -8 * p0 / 3,
      8 * p0 / 3, 40000);
  double std_psi = units::pa_to_psi(std::sqrt(var));
  CHECK(std::abs(std_psi - 266.0) <= 1.0);

  double var01 = 0.1 * d0 * t0;
  CHECK(std::abs(units::pa_to_psi(std::sqrt(var01)) - 84.0) <= 1.0);
  CHECK(normalize_diffusion(0.0) == 0.0);
}

TEST_CASE("pressure pdf: peak, normalization, second moment") {
  double d = 3.2e6, t = 1.8e3;
  CHECK(pressure_pdf(d, t, 0.0) == doctest::Approx(1.0 / std::sqrt(2 * M_PI * t * d)));
  double sigma = std::sqrt(t * d);
  double mass = oracles::simpson([&](double x) { return pressure_pdf(d, t, x); },
                                 -10 * sigma, 10 * sigma, 20000);
  CHECK(std::abs(mass - 1.0) <= 1e-9);
  double var = oracles::simpson([&](double x) { return x * x * pressure_pdf(d, t, x); },
                                -12 * sigma, 12 * sigma, 40000);
  CHECK(std::abs(var - t * d) <= 1e-6 * t * d);
  CHECK_THROWS_AS(pressure_pdf(0.0, t, 0.0), DomainError);
  CHECK_THROWS_AS(pressure_pdf(d, -1.0, 0.0), DomainError);
}

TEST_CASE("exceedance: margins in sigma units") {
  double d = 5.0e5, t = 4.0e3;
  double sigma = std::sqrt(t * d);
  CHECK(exceedance_probability(d, t, 0.0) == doctest::Approx(1.0));
  CHECK(exceedance_probability(d, t, sigma) == doctest::Approx(0.3173).epsilon(1e-3));
  CHECK(exceedance_probability(d, t, 3 * sigma) == doctest::Approx(2.70e-3).epsilon(1e-2));
  CHECK_THROWS_AS(exceedance_probability(d, t, -1.0), DomainError);
}
