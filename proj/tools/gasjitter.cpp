// gasjitter: stationary flows, compressor dispatch, and pressure-fluctuation
// diffusion on tree gas networks.
#include <CLI11.hpp>
#include <filesystem>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "gasjitter/dispatch.hpp"
#include "gasjitter/errors.hpp"
#include "gasjitter/jitter.hpp"
#include "gasjitter/network_io.hpp"
#include "gasjitter/scenario.hpp"
#include "gasjitter/transient.hpp"

using namespace gasjitter;

namespace {

Network load_and_check(const std::string& path) {
  Network net = load_network(path);
  ValidationReport rep = validate(net);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
  if (!rep.ok()) {
    for (const auto& issue : rep.issues) std::cerr << "error: " << issue << "\n";
    throw DomainError("network validation failed");
  }
  return net;
}

std::vector<double> dispatch_ratios(const Network& net, const std::string& method,
                                    DispatchResult* out) {
  if (method.empty()) return std::vector<double>(net.compressors.size(), 1.0);
  DispatchResult res = run_dispatch(net, method_from_name(method));
  if (out) *out = res;
  return res.ratios;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gas network steady flows, dispatch and pressure-fluctuation diffusion"};
  app.require_subcommand(1);

  std::string network_path, out_dir = ".", method, format = "csv";
  std::string scenario_path;
  bool diagnostics = false;
  int samples = defaults::profile_samples;

  auto add_common = [&](CLI::App* sub, bool needs_network) {
    if (needs_network)
      sub->add_option("--network", network_path, "network document")->required();
    sub->add_option("--out-dir", out_dir, "output directory");
    sub->add_option("--format", format, "output format (csv)")
        ->check(CLI::IsMember({"csv"}));
  };

  CLI::App* cmd_steady = app.add_subcommand("steady", "stationary flow and pressures");
  add_common(cmd_steady, true);
  cmd_steady->add_option("--samples", samples, "profile samples per pipe");
  cmd_steady->add_option("--method", method, "dispatch ratios to apply (greedy|gp|sp)");

  CLI::App* cmd_dispatch = app.add_subcommand("dispatch", "choose compression ratios");
  add_common(cmd_dispatch, true);
  cmd_dispatch->add_option("--method", method, "greedy|gp|sp")->required();
  cmd_dispatch->add_flag("--diagnostics", diagnostics, "dump solver iteration traces");

  double p0 = defaults::reference_pressure, t0 = defaults::reference_time;
  double tau_eff_arg = 0.0;
  std::string exceedance_spec;
  CLI::App* cmd_jitter = app.add_subcommand("jitter", "diffusion coefficient profiles");
  add_common(cmd_jitter, true);
  cmd_jitter->add_option("--method", method, "dispatch ratios to apply (greedy|gp|sp)");
  cmd_jitter->add_option("--p0", p0, "normalization pressure, Pa");
  cmd_jitter->add_option("--t0", t0, "normalization time, s");
  cmd_jitter->add_option("--tau-eff", tau_eff_arg, "override effective correlation time, s");
  cmd_jitter->add_option("--exceedance", exceedance_spec,
                         "t=<s>[,margin=<Pa>]: per-node exceedance probabilities");
  cmd_jitter->add_option("--samples", samples, "profile samples per pipe");

  SimulateOptions sim;
  std::vector<std::string> probe_specs;
  double fit_t_min = -1.0;
  CLI::App* cmd_sim = app.add_subcommand("simulate", "stochastic transient ensembles");
  add_common(cmd_sim, true);
  cmd_sim->add_option("--method", method, "dispatch ratios to apply (greedy|gp|sp)");
  cmd_sim->add_option("--horizon", sim.horizon, "simulated horizon, s");
  cmd_sim->add_option("--dt", sim.dt, "time step, s (default from CFL)");
  cmd_sim->add_option("--dx", sim.dx_target, "target cell size, m");
  cmd_sim->add_option("--trajectories", sim.trajectories, "ensemble size");
  cmd_sim->add_option("--seed", sim.seed, "base RNG seed");
  cmd_sim->add_option("--stride", sim.stride, "record every N steps");
  cmd_sim->add_option("--threads", sim.threads, "worker threads (0 = auto)");
  cmd_sim->add_option("--probe", probe_specs, "probe location <pipe>:<fraction>");
  cmd_sim->add_option("--fit-from", fit_t_min, "variance fit window start, s");

  std::uint64_t scenario_seed = 0;
  CLI::App* cmd_scn = app.add_subcommand("scenario", "run a declarative scenario file");
  add_common(cmd_scn, false);
  cmd_scn->add_option("--scenario", scenario_path, "scenario document")->required();
  CLI::Option* seed_opt =
      cmd_scn->add_option("--seed", scenario_seed, "override the scenario seed");

  CLI11_PARSE(app, argc, argv);

  try {
    std::filesystem::create_directories(out_dir);
    if (cmd_steady->parsed()) {
      Network net = load_and_check(network_path);
      std::vector<double> ratios = dispatch_ratios(net, method, nullptr);
      SteadyState ss = solve_steady(net, ratios);
      write_steady_csv(net, ss, out_dir, samples);
      for (const auto& v : check_bounds(ss, net, samples))
        if (v.kind == BoundViolation::Kind::node)
          std::cerr << "bound violation at node '" << net.nodes[v.node].id
                    << "': p = " << v.pressure << " Pa (deficit " << v.deficit << ")\n";
      std::cout << "wrote " << out_dir << "/steady_nodes.csv and steady_profiles.csv\n";
    } else if (cmd_dispatch->parsed()) {
      Network net = load_and_check(network_path);
      DispatchResult res = run_dispatch(net, method_from_name(method));
      write_dispatch_csv(net, res, out_dir + "/dispatch_" + method + ".csv");
      if (diagnostics) {
        std::cout << "iterations: " << res.iterations << "\n";
        std::cout << "residual: " << res.residual << "\n";
        if (!res.objective_trace.empty()) {
          std::cout << "objective trace:";
          for (double o : res.objective_trace) std::cout << " " << o;
          std::cout << "\n";
        }
      }
      std::cout << "method " << method << ": power = " << res.power
                << " W, objective = " << res.objective << "\n";
      std::cout << "wrote " << out_dir << "/dispatch_" << method << ".csv\n";
    } else if (cmd_jitter->parsed()) {
      Network net = load_and_check(network_path);
      std::vector<double> ratios = dispatch_ratios(net, method, nullptr);
      SteadyState ss = solve_steady(net, ratios);
      EdgeConstants consts = edge_constants(net, ss);
      FluctuationStrength fs = fluctuation_strength(net);
      std::optional<double> tau_eff;
      if (tau_eff_arg > 0) {
        tau_eff = tau_eff_arg;
        fs.tau_eff = tau_eff_arg;
      }
      JitterProfile jp = diffusion_profile(net, ss, consts, fs);
      JitterSettings js{p0, t0, tau_eff};
      std::string tag = method.empty() ? "steady" : method;
      write_jitter_csv(net, ss, jp, js, out_dir + "/jitter_" + tag + ".csv", samples);
      std::cout << "wrote " << out_dir << "/jitter_" << tag << ".csv\n";
      if (!exceedance_spec.empty()) {
        double t = -1;
        std::optional<double> margin;
        std::stringstream spec(exceedance_spec);
        std::string item;
        while (std::getline(spec, item, ',')) {
          size_t eq = item.find('=');
          if (eq == std::string::npos)
            throw DomainError("exceedance spec must be t=<s>[,margin=<Pa>]");
          std::string key = item.substr(0, eq);
          double value = std::stod(item.substr(eq + 1));
          if (key == "t") t = value;
          else if (key == "margin") margin = value;
          else throw DomainError("unknown exceedance key '" + key + "'");
        }
        if (t <= 0) throw DomainError("exceedance needs t > 0");
        write_exceedance_csv(net, ss, jp, t, margin, out_dir + "/exceedance.csv");
        std::cout << "wrote " << out_dir << "/exceedance.csv\n";
      }
    } else if (cmd_sim->parsed()) {
      Network net = load_and_check(network_path);
      std::vector<double> ratios = dispatch_ratios(net, method, nullptr);
      std::vector<std::string> names;
      for (const auto& spec : probe_specs) {
        size_t colon = spec.find(':');
        if (colon == std::string::npos)
          throw DomainError("probe must be <pipe>:<fraction>");
        int e = net.pipe_index(spec.substr(0, colon));
        if (e < 0) throw ReferenceError("pipe", spec.substr(0, colon));
        double frac = std::stod(spec.substr(colon + 1));
        sim.probes.push_back({Probe::Kind::cell, e, frac * net.pipes[e].length, -1});
        names.push_back(spec);
      }
      if (sim.probes.empty()) {
        sim.probes.push_back({Probe::Kind::cell, 0, 0.5 * net.pipes[0].length, -1});
        names.push_back(net.pipes[0].id + ":0.5");
      }
      Ensemble ens = simulate(net, ratios, sim);
      double tau_max = 0.0;
      for (const auto& nd : net.nodes) tau_max = std::max(tau_max, nd.noise_tau);
      double t_min = fit_t_min > 0 ? fit_t_min : 5.0 * tau_max;
      write_variance_csv(ens, names, t_min, ens.times.back(), out_dir + "/variance.csv");
      std::ofstream f(out_dir + "/trajectories.csv");
      f << "# sampled probe pressures per trajectory\n";
      f << "probe,trajectory,t_s,p_Pa\n";
      char buf[40];
      for (size_t p = 0; p < ens.series.size(); ++p)
        for (size_t k = 0; k < ens.series[p].size(); ++k)
          for (size_t s = 0; s < ens.times.size(); ++s) {
            snprintf(buf, sizeof buf, "%.12g", ens.series[p][k][s]);
            f << names[p] << "," << k << "," << ens.times[s] << "," << buf << "\n";
          }
      std::cout << "wrote " << out_dir << "/variance.csv and trajectories.csv\n";
    } else if (cmd_scn->parsed()) {
      Scenario sc = load_scenario(scenario_path);
      if (seed_opt->count() > 0) sc.seed = scenario_seed;
      ScenarioReport rep = run_scenario(sc);
      write_scenario_outputs(sc, rep, out_dir);
      std::cout << "scenario '" << sc.name << "' complete; outputs in " << out_dir << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
