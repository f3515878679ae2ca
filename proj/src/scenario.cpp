#include "gasjitter/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gasjitter/errors.hpp"
#include "gasjitter/network_io.hpp"

namespace gasjitter {

namespace {

std::string strip(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double to_num(const std::string& s, int line) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    std::string unit = strip(s.substr(pos));
    if (unit == "psi") return units::psi_to_pa(v);
    if (unit == "min") return v * 60.0;
    if (unit.empty() || unit == "s" || unit == "Pa") return v;
    throw ParseError("unknown unit '" + unit + "'", line);
  } catch (const std::invalid_argument&) {
    throw ParseError("expected a number, got '" + s + "'", line);
  }
}

std::string fmt(double v) {
  char buf[40];
  snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

const char* method_name(DispatchMethod m) {
  switch (m) {
    case DispatchMethod::greedy: return "greedy";
    case DispatchMethod::gp: return "gp";
    case DispatchMethod::sp: return "sp";
  }
  return "?";
}

DispatchMethod method_from_name(const std::string& name) {
  if (name == "greedy") return DispatchMethod::greedy;
  if (name == "gp" || name == "ogf") return DispatchMethod::gp;
  if (name == "sp") return DispatchMethod::sp;
  throw DomainError("unknown dispatch method '" + name + "'");
}

Scenario parse_scenario(const std::string& text, const std::string& base_dir) {
  Scenario sc;
  std::istringstream in(text);
  std::string raw, section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", line_no);
      section = line.substr(1, line.size() - 2);
      continue;
    }

    if (section == "transforms") {
      std::istringstream ls(line);
      std::string kind;
      ls >> kind;
      std::string rest;
      std::getline(ls, rest);
      std::vector<std::pair<std::string, std::string>> kv;
      std::istringstream rs(rest);
      std::string tok;
      while (rs >> tok) {
        size_t eq = tok.find('=');
        if (eq == std::string::npos)
          throw ParseError("transform arguments must be key=value", line_no);
        kv.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
      }
      auto get = [&](const std::string& key) -> std::string {
        for (const auto& [k, v] : kv)
          if (k == key) return v;
        throw ParseError("transform '" + kind + "' needs " + key + "=", line_no);
      };
      if (kind == "scale") {
        sc.transforms.push_back(ScaleTransform{to_num(get("factor"), line_no)});
      } else if (kind == "shift_supply") {
        sc.transforms.push_back(SupplyShiftTransform{
            split_list(get("from")), split_list(get("to")), to_num(get("fraction"), line_no)});
      } else if (kind == "shift_load") {
        sc.transforms.push_back(LoadShiftTransform{
            split_list(get("from")), split_list(get("to")), to_num(get("fraction"), line_no)});
      } else if (kind == "aggregate") {
        sc.transforms.push_back(AggregateTransform{});
      } else {
        throw ParseError("unknown transform '" + kind + "'", line_no);
      }
      continue;
    }

    size_t eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
    std::string key = strip(line.substr(0, eq));
    std::string value = strip(line.substr(eq + 1));
    if (section == "scenario") {
      if (key == "name") sc.name = value;
      else if (key == "network") sc.network_path = value;
      else if (key == "seed") sc.seed = static_cast<std::uint64_t>(to_num(value, line_no));
      else if (key == "method") {
        sc.methods.clear();
        for (const auto& m : split_list(value)) sc.methods.push_back(method_from_name(m));
      } else throw ParseError("unknown [scenario] field '" + key + "'", line_no);
    } else if (section == "jitter") {
      if (key == "p0") sc.jitter.p0 = to_num(value, line_no);
      else if (key == "t0") sc.jitter.t0 = to_num(value, line_no);
      else if (key == "tau_eff") sc.jitter.tau_eff = to_num(value, line_no);
      else throw ParseError("unknown [jitter] field '" + key + "'", line_no);
    } else if (section == "simulate") {
      sc.simulation.enabled = true;
      if (key == "enabled") sc.simulation.enabled = value != "false";
      else if (key == "horizon") sc.simulation.horizon = to_num(value, line_no);
      else if (key == "dt") sc.simulation.dt = to_num(value, line_no);
      else if (key == "dx") sc.simulation.dx_target = to_num(value, line_no);
      else if (key == "trajectories")
        sc.simulation.trajectories = static_cast<int>(to_num(value, line_no));
      else if (key == "stride") sc.simulation.stride = static_cast<int>(to_num(value, line_no));
      else if (key == "probe") {
        size_t colon = value.find(':');
        if (colon == std::string::npos)
          throw ParseError("probe must be <pipe>:<fraction>", line_no);
        sc.simulation.probes.emplace_back(value.substr(0, colon),
                                          to_num(value.substr(colon + 1), line_no));
      } else throw ParseError("unknown [simulate] field '" + key + "'", line_no);
    } else {
      throw ParseError("unknown section '" + section + "'", line_no);
    }
  }
  if (sc.network_path.empty()) throw ParseError("[scenario] must set network=");
  if (!base_dir.empty() && !std::filesystem::path(sc.network_path).is_absolute())
    sc.network_path = (std::filesystem::path(base_dir) / sc.network_path).string();
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_scenario(ss.str(), std::filesystem::path(path).parent_path().string());
}

std::string serialize_scenario(const Scenario& sc) {
  std::ostringstream out;
  out << "[scenario]\n";
  out << "name = " << sc.name << "\n";
  out << "network = " << sc.network_path << "\n";
  out << "method = ";
  for (size_t i = 0; i < sc.methods.size(); ++i)
    out << (i ? "," : "") << method_name(sc.methods[i]);
  out << "\nseed = " << sc.seed << "\n";
  if (!sc.transforms.empty()) {
    out << "\n[transforms]\n";
    for (const auto& t : sc.transforms) {
      if (const auto* s = std::get_if<ScaleTransform>(&t)) {
        out << "scale factor=" << fmt(s->factor) << "\n";
      } else if (const auto* s2 = std::get_if<SupplyShiftTransform>(&t)) {
        out << "shift_supply from=";
        for (size_t i = 0; i < s2->from.size(); ++i) out << (i ? "," : "") << s2->from[i];
        out << " to=";
        for (size_t i = 0; i < s2->to.size(); ++i) out << (i ? "," : "") << s2->to[i];
        out << " fraction=" << fmt(s2->fraction) << "\n";
      } else if (const auto* s3 = std::get_if<LoadShiftTransform>(&t)) {
        out << "shift_load from=";
        for (size_t i = 0; i < s3->from.size(); ++i) out << (i ? "," : "") << s3->from[i];
        out << " to=";
        for (size_t i = 0; i < s3->to.size(); ++i) out << (i ? "," : "") << s3->to[i];
        out << " fraction=" << fmt(s3->fraction) << "\n";
      } else {
        out << "aggregate\n";
      }
    }
  }
  out << "\n[jitter]\n";
  out << "p0 = " << fmt(sc.jitter.p0) << "\n";
  out << "t0 = " << fmt(sc.jitter.t0) << "\n";
  if (sc.jitter.tau_eff) out << "tau_eff = " << fmt(*sc.jitter.tau_eff) << "\n";
  if (sc.simulation.enabled) {
    out << "\n[simulate]\n";
    out << "horizon = " << fmt(sc.simulation.horizon) << "\n";
    if (sc.simulation.dt > 0) out << "dt = " << fmt(sc.simulation.dt) << "\n";
    out << "dx = " << fmt(sc.simulation.dx_target) << "\n";
    out << "trajectories = " << sc.simulation.trajectories << "\n";
    out << "stride = " << sc.simulation.stride << "\n";
    for (const auto& [pipe, frac] : sc.simulation.probes)
      out << "probe = " << pipe << ":" << fmt(frac) << "\n";
  }
  return out.str();
}

namespace {

std::vector<int> resolve_nodes(const Network& net, const std::vector<std::string>& ids) {
  std::vector<int> out;
  for (const auto& id : ids) {
    int i = net.node_index(id);
    if (i < 0) throw ReferenceError("node", id);
    out.push_back(i);
  }
  return out;
}

}  // namespace

Network apply_transforms(const Network& net, const std::vector<Transform>& transforms) {
  Network cur = net;
  for (const auto& t : transforms) {
    if (const auto* s = std::get_if<ScaleTransform>(&t)) {
      cur = scale_loads(cur, s->factor);
    } else if (const auto* s2 = std::get_if<SupplyShiftTransform>(&t)) {
      cur = shift_supply(cur, resolve_nodes(cur, s2->from), resolve_nodes(cur, s2->to),
                         s2->fraction);
    } else if (const auto* s3 = std::get_if<LoadShiftTransform>(&t)) {
      cur = shift_load(cur, resolve_nodes(cur, s3->from), resolve_nodes(cur, s3->to),
                       s3->fraction);
    } else {
      cur = aggregate_branches(cur);
    }
  }
  return cur;
}

ScenarioReport run_scenario(const Scenario& sc) {
  Network base = load_network(sc.network_path);
  ScenarioReport rep;
  try {
    rep.network = apply_transforms(base, sc.transforms);
  } catch (const std::exception& e) {
    throw DomainError("stage transform: " + std::string(e.what()));
  }
  ValidationReport val = validate(rep.network);
  if (!val.ok())
    throw DomainError("stage validate: " +
                      (val.issues.empty() ? std::string("invalid network") : val.issues.front()));

  rep.milepost_m = distance_from_mainline_start(rep.network);

  EdgeFlows flows;
  try {
    flows = compute_tree_flows(rep.network);
  } catch (const std::exception& e) {
    throw DomainError("stage flows: " + std::string(e.what()));
  }

  for (DispatchMethod m : sc.methods) {
    MethodReport mr;
    mr.method = m;
    try {
      mr.dispatch = m == DispatchMethod::greedy ? greedy_dispatch(rep.network, flows)
                    : m == DispatchMethod::gp   ? solve_gp(rep.network, flows)
                                                : solve_sp(rep.network, flows);
      mr.steady = solve_steady(rep.network, mr.dispatch.ratios);
    } catch (const std::exception& e) {
      throw DomainError("stage dispatch(" + std::string(method_name(m)) +
                        "): " + e.what());
    }
    try {
      EdgeConstants consts = edge_constants(rep.network, mr.steady);
      FluctuationStrength fs = fluctuation_strength(rep.network);
      if (sc.jitter.tau_eff) fs.tau_eff = *sc.jitter.tau_eff;
      mr.jitter = diffusion_profile(rep.network, mr.steady, consts, fs);
    } catch (const std::exception& e) {
      throw DomainError("stage jitter(" + std::string(method_name(m)) + "): " + e.what());
    }
    rep.methods.push_back(std::move(mr));
  }
  return rep;
}

DispatchComparison compare_dispatch(const Network& net, DispatchMethod optimal,
                                    int samples) {
  EdgeFlows flows = compute_tree_flows(net);
  DispatchComparison cmp;
  cmp.greedy = greedy_dispatch(net, flows);
  cmp.optimal = optimal == DispatchMethod::gp ? solve_gp(net, flows)
                                              : solve_sp(net, flows);
  cmp.power_greedy = cmp.greedy.power;
  cmp.power_optimal = cmp.optimal.power;

  SteadyState ss_g = solve_steady(net, cmp.greedy.ratios);
  SteadyState ss_o = solve_steady(net, cmp.optimal.ratios);
  JitterProfile jp_g = diffusion_profile(net, ss_g);
  JitterProfile jp_o = diffusion_profile(net, ss_o);
  std::vector<double> dist = distance_from_mainline_start(net);
  for (size_t e = 0; e < net.pipes.size(); ++e) {
    const Pipe& p = net.pipes[e];
    for (int k = 0; k < samples; ++k) {
      double x = p.length * k / (samples - 1);
      double mp = dist[p.to] >= dist[p.from] ? dist[p.from] + x : dist[p.from] - x;
      cmp.rows.push_back({static_cast<int>(e), x, mp,
                          jp_g.diffusion_at(static_cast<int>(e), x),
                          jp_o.diffusion_at(static_cast<int>(e), x)});
    }
  }
  return cmp;
}

namespace {

// Pipes ordered so the milepost key is monotone along the mainline: the
// mainline path first, off-path pipes after in declaration order.
struct OrderedPipe {
  int pipe;
  bool along = true;  // sampling direction agrees with increasing milepost
};

std::vector<OrderedPipe> pipe_emission_order(const Network& net,
                                             const std::vector<double>& milepost) {
  std::vector<OrderedPipe> out;
  std::vector<char> used(net.pipes.size(), 0);
  if (net.mainline_start >= 0 && net.mainline_end >= 0) {
    std::vector<int> path = mainline_path(net);
    for (size_t i = 0; i + 1 < path.size(); ++i) {
      for (size_t e = 0; e < net.pipes.size(); ++e) {
        const Pipe& p = net.pipes[e];
        if ((p.from == path[i] && p.to == path[i + 1]) ||
            (p.to == path[i] && p.from == path[i + 1])) {
          out.push_back({static_cast<int>(e), p.from == path[i]});
          used[e] = 1;
          break;
        }
      }
    }
  }
  for (size_t e = 0; e < net.pipes.size(); ++e)
    if (!used[e])
      out.push_back({static_cast<int>(e),
                     milepost[net.pipes[e].from] <= milepost[net.pipes[e].to]});
  return out;
}

void open_csv(std::ofstream& f, const std::string& path) {
  f.open(path);
  if (!f) throw DomainError("cannot write '" + path + "'");
}

double milepost_of(const Network& net, const std::vector<double>& milepost, int pipe,
                   double x) {
  const Pipe& p = net.pipes[pipe];
  if (milepost[p.to] >= milepost[p.from]) return milepost[p.from] + x;
  return milepost[p.from] - x;
}

}  // namespace

void write_steady_csv(const Network& net, const SteadyState& ss, const std::string& dir,
                      int samples) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f;
    open_csv(f, dir + "/steady_nodes.csv");
    f << "# stationary nodal solution\n";
    f << "node_id,p_Pa,q_kg_s\n";
    for (size_t i = 0; i < net.nodes.size(); ++i)
      f << net.nodes[i].id << "," << fmt(ss.node_pressure[i]) << ","
        << fmt(net.nodes[i].injection) << "\n";
  }
  std::ofstream f;
  open_csv(f, dir + "/steady_profiles.csv");
  f << "# stationary pressure profiles sampled along each pipe\n";
  f << "pipe_id,x_m,p_Pa,phi_kg_s\n";
  for (size_t e = 0; e < net.pipes.size(); ++e) {
    for (int k = 0; k < samples; ++k) {
      double x = net.pipes[e].length * k / (samples - 1);
      f << net.pipes[e].id << "," << fmt(x) << ","
        << fmt(ss.pressure_at(static_cast<int>(e), x)) << "," << fmt(ss.flows.flow[e])
        << "\n";
    }
  }
}

void write_dispatch_csv(const Network& net, const DispatchResult& res,
                        const std::string& path) {
  std::ofstream f;
  open_csv(f, path);
  f << "# method = " << method_name(res.method) << "\n";
  f << "# total_power_W = " << fmt(res.power) << "\n";
  f << "# objective = " << fmt(res.objective) << "\n";
  f << "# iterations = " << res.iterations << "\n";
  f << "compressor_id,pipe_id,node_id,alpha\n";
  for (size_t c = 0; c < net.compressors.size(); ++c) {
    const Compressor& comp = net.compressors[c];
    f << comp.id << "," << net.pipes[comp.pipe].id << "," << net.nodes[comp.node].id << ","
      << fmt(res.ratios[c]) << "\n";
  }
  f << "node_id,p_Pa\n";
  for (size_t i = 0; i < net.nodes.size(); ++i)
    f << net.nodes[i].id << "," << fmt(res.node_pressure[i]) << "\n";
}

void write_jitter_csv(const Network& net, const SteadyState& ss, const JitterProfile& jp,
                      const JitterSettings& js, const std::string& path, int samples) {
  std::vector<double> milepost = distance_from_mainline_start(net);
  std::ofstream f;
  open_csv(f, path);
  f << "# diffusion coefficient of pressure fluctuations along each pipe\n";
  f << "# S_kg2_s2 = " << fmt(jp.strength.strength)
    << ", tau_eff_s = " << fmt(jp.strength.tau_eff) << "\n";
  f << "# D0_Pa2_s = " << fmt((js.p0 / 3) * (js.p0 / 3) / js.t0) << "\n";
  f << "pipe_id,x_m,milepost_equivalent,Z,D_Pa2_per_s,D_over_D0\n";
  for (const auto& [e, along] : pipe_emission_order(net, milepost)) {
    for (int k = 0; k < samples; ++k) {
      int kk = along ? k : samples - 1 - k;
      double x = net.pipes[e].length * kk / (samples - 1);
      double z = jp.zeta[e].value(x);
      double d = jp.diffusion_at(e, x);
      f << net.pipes[e].id << "," << fmt(x) << ","
        << fmt(units::m_to_miles(milepost_of(net, milepost, e, x))) << "," << fmt(z) << ","
        << fmt(d) << "," << fmt(normalize_diffusion(d, js.p0, js.t0)) << "\n";
    }
  }
  (void)ss;
}

void write_exceedance_csv(const Network& net, const SteadyState& ss,
                          const JitterProfile& jp, double t, std::optional<double> margin,
                          const std::string& path) {
  std::ofstream f;
  open_csv(f, path);
  f << "# probability that |delta p| exceeds the margin at elapsed time t = " << fmt(t)
    << " s\n";
  f << "node_id,p_Pa,margin_Pa,D_Pa2_per_s,probability\n";
  for (size_t i = 0; i < net.nodes.size(); ++i) {
    const Node& nd = net.nodes[i];
    double m = margin ? *margin
                      : std::max(0.0, std::min(ss.node_pressure[i] - nd.p_min,
                                               nd.p_max - ss.node_pressure[i]));
    if (!std::isfinite(m)) m = std::max(0.0, ss.node_pressure[i] - nd.p_min);
    double d = jp.node_diffusion(static_cast<int>(i));
    double prob = d > 0 ? exceedance_probability(d, t, m) : (m > 0 ? 0.0 : 1.0);
    f << nd.id << "," << fmt(ss.node_pressure[i]) << "," << fmt(m) << "," << fmt(d) << ","
      << fmt(prob) << "\n";
  }
}

void write_variance_csv(const Ensemble& ens, const std::vector<std::string>& probe_names,
                        double t_min, double t_max, const std::string& path) {
  std::ofstream f;
  open_csv(f, path);
  f << "# across-trajectory variance growth, fit window [" << fmt(t_min) << ", "
    << fmt(t_max) << "] s\n";
  f << "probe,slope_Pa2_per_s,stderr,r_squared,points\n";
  for (size_t p = 0; p < ens.series.size(); ++p) {
    VarianceFit fit = variance_growth(ens, static_cast<int>(p), t_min, t_max);
    f << probe_names[p] << "," << fmt(fit.slope) << "," << fmt(fit.stderr_) << ","
      << fmt(fit.r_squared) << "," << fit.points << "\n";
  }
}

void write_scenario_outputs(const Scenario& sc, const ScenarioReport& rep,
                            const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream f;
    open_csv(f, out_dir + "/scenario_resolved.txt");
    f << serialize_scenario(sc);
  }
  for (const auto& mr : rep.methods) {
    std::string tag = method_name(mr.method);
    write_steady_csv(rep.network, mr.steady, out_dir + "/" + tag);
    write_dispatch_csv(rep.network, mr.dispatch, out_dir + "/dispatch_" + tag + ".csv");
    write_jitter_csv(rep.network, mr.steady, mr.jitter, sc.jitter,
                     out_dir + "/jitter_" + tag + ".csv");
  }
  if (rep.methods.size() >= 2) {
    std::vector<double> milepost = distance_from_mainline_start(rep.network);
    std::ofstream f;
    open_csv(f, out_dir + "/comparison.csv");
    for (const auto& mr : rep.methods)
      f << "# power_" << method_name(mr.method) << "_W = " << fmt(mr.dispatch.power) << "\n";
    f << "pipe_id,x_m,milepost_equivalent";
    for (const auto& mr : rep.methods) f << ",D_" << method_name(mr.method);
    f << "\n";
    int samples = defaults::profile_samples;
    for (const auto& [e, along] : pipe_emission_order(rep.network, milepost)) {
      for (int k = 0; k < samples; ++k) {
        int kk = along ? k : samples - 1 - k;
        double x = rep.network.pipes[e].length * kk / (samples - 1);
        f << rep.network.pipes[e].id << "," << fmt(x) << ","
          << fmt(units::m_to_miles(milepost_of(rep.network, milepost, e, x)));
        for (const auto& mr : rep.methods) f << "," << fmt(mr.jitter.diffusion_at(e, x));
        f << "\n";
      }
    }
  }
  if (sc.simulation.enabled && !rep.methods.empty()) {
    SimulateOptions opts;
    opts.horizon = sc.simulation.horizon;
    opts.dt = sc.simulation.dt;
    opts.dx_target = sc.simulation.dx_target;
    opts.trajectories = sc.simulation.trajectories;
    opts.stride = sc.simulation.stride;
    opts.seed = sc.seed;
    std::vector<std::string> names;
    for (const auto& [pipe_id, frac] : sc.simulation.probes) {
      int e = rep.network.pipe_index(pipe_id);
      if (e < 0) throw ReferenceError("pipe", pipe_id);
      opts.probes.push_back({Probe::Kind::cell, e, frac * rep.network.pipes[e].length, -1});
      names.push_back(pipe_id + ":" + fmt(frac));
    }
    if (opts.probes.empty()) {
      opts.probes.push_back({Probe::Kind::cell, 0, 0.5 * rep.network.pipes[0].length, -1});
      names.push_back(rep.network.pipes[0].id + ":0.5");
    }
    Ensemble ens = simulate(rep.network, rep.methods.front().dispatch.ratios, opts);
    double tau_max = 0.0;
    for (const auto& nd : rep.network.nodes) tau_max = std::max(tau_max, nd.noise_tau);
    double t_min = 5.0 * tau_max;
    double t_max = ens.times.back();
    write_variance_csv(ens, names, t_min, t_max, out_dir + "/variance.csv");
    std::ofstream f;
    open_csv(f, out_dir + "/trajectories.csv");
    f << "# sampled probe pressures per trajectory\n";
    f << "probe,trajectory,t_s,p_Pa\n";
    for (size_t p = 0; p < ens.series.size(); ++p)
      for (size_t k = 0; k < ens.series[p].size(); ++k)
        for (size_t s = 0; s < ens.times.size(); ++s)
          f << names[p] << "," << k << "," << fmt(ens.times[s]) << ","
            << fmt(ens.series[p][k][s]) << "\n";
  }
}

}  // namespace gasjitter
