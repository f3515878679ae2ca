#ifndef GASJITTER_SCENARIO_HPP
#define GASJITTER_SCENARIO_HPP

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gasjitter/dispatch.hpp"
#include "gasjitter/jitter.hpp"
#include "gasjitter/network.hpp"
#include "gasjitter/transient.hpp"

namespace gasjitter {

// Declarative scenario transforms, applied in file order.
struct ScaleTransform {
  double factor = 1.0;
};
struct SupplyShiftTransform {
  std::vector<std::string> from;
  std::vector<std::string> to;
  double fraction = 0.0;
};
struct LoadShiftTransform {
  std::vector<std::string> from;
  std::vector<std::string> to;
  double fraction = 0.0;
};
struct AggregateTransform {};

using Transform =
    std::variant<ScaleTransform, SupplyShiftTransform, LoadShiftTransform, AggregateTransform>;

struct JitterSettings {
  double p0 = defaults::reference_pressure;
  double t0 = defaults::reference_time;
  std::optional<double> tau_eff;  // overrides the network-derived value
};

struct SimSettings {
  bool enabled = false;
  double horizon = 1e5;
  double dt = 0.0;
  double dx_target = 2500.0;
  int trajectories = 200;
  int stride = 20;
  std::vector<std::pair<std::string, double>> probes;  // (pipe id, fraction of length)
};

struct Scenario {
  std::string name = "scenario";
  std::string network_path;
  std::vector<Transform> transforms;
  std::vector<DispatchMethod> methods{DispatchMethod::gp};
  JitterSettings jitter;
  SimSettings simulation;
  std::uint64_t seed = 1;
};

Scenario parse_scenario(const std::string& text, const std::string& base_dir = "");
Scenario load_scenario(const std::string& path);
std::string serialize_scenario(const Scenario& sc);

Network apply_transforms(const Network& net, const std::vector<Transform>& transforms);

// One dispatch method's worth of analysis on the transformed network.
struct MethodReport {
  DispatchMethod method;
  DispatchResult dispatch;
  SteadyState steady;
  JitterProfile jitter;
};

struct ScenarioReport {
  Network network;  // after transforms
  std::vector<MethodReport> methods;
  std::vector<double> milepost_m;  // per node, distance key from the mainline start
};

ScenarioReport run_scenario(const Scenario& sc);

// Side-by-side diffusion comparison of the greedy heuristic against the
// optimizing dispatch (sp by default, matching the no-decompression OGF).
struct DispatchComparison {
  struct Row {
    int pipe;
    double x;
    double milepost_m;
    double d_greedy;
    double d_optimal;
  };
  std::vector<Row> rows;
  double power_greedy = 0.0;
  double power_optimal = 0.0;
  DispatchResult greedy;
  DispatchResult optimal;
};

DispatchComparison compare_dispatch(const Network& net,
                                    DispatchMethod optimal = DispatchMethod::sp,
                                    int samples = defaults::profile_samples);

// Files written: steady_nodes.csv, steady_profiles.csv, dispatch_<method>.csv,
// jitter_<method>.csv, comparison.csv (when two methods ran), and per-probe
// variance CSVs when simulation is enabled.
void write_scenario_outputs(const Scenario& sc, const ScenarioReport& rep,
                            const std::string& out_dir);

// CSV emission shared with the CLI subcommands.
void write_steady_csv(const Network& net, const SteadyState& ss, const std::string& dir,
                      int samples = defaults::profile_samples);
void write_dispatch_csv(const Network& net, const DispatchResult& res,
                        const std::string& path);
void write_jitter_csv(const Network& net, const SteadyState& ss, const JitterProfile& jp,
                      const JitterSettings& js, const std::string& path,
                      int samples = defaults::profile_samples);
void write_exceedance_csv(const Network& net, const SteadyState& ss,
                          const JitterProfile& jp, double t, std::optional<double> margin,
                          const std::string& path);
void write_variance_csv(const Ensemble& ens, const std::vector<std::string>& probe_names,
                        double t_min, double t_max, const std::string& path);

const char* method_name(DispatchMethod m);
DispatchMethod method_from_name(const std::string& name);

}  // namespace gasjitter

#endif
