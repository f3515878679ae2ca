#include "gasjitter/network_io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "gasjitter/errors.hpp"

namespace gasjitter {

namespace {

struct Token {
  std::string key;    // empty for the leading bare identifier
  std::string value;
};

std::string strip(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// number with optional unit suffix -> SI
double parse_value(const std::string& raw, int line) {
  std::string s = strip(raw);
  if (s == "inf") return std::numeric_limits<double>::infinity();
  size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ParseError("expected a number, got '" + s + "'", line);
  }
  std::string unit = strip(s.substr(pos));
  if (unit.empty()) return v;
  if (unit == "psi") return units::psi_to_pa(v);
  if (unit == "MPa") return v * 1e6;
  if (unit == "kPa") return v * 1e3;
  if (unit == "Pa") return v;
  if (unit == "km") return v * 1e3;
  if (unit == "mi" || unit == "mile" || unit == "miles") return units::miles_to_m(v);
  if (unit == "m") return v;
  if (unit == "min") return v * 60.0;
  if (unit == "h") return v * 3600.0;
  if (unit == "s") return v;
  throw ParseError("unknown unit suffix '" + unit + "'", line);
}

std::vector<Token> tokenize_line(const std::string& raw_line, int line_no) {
  // allow "key = value" as well as "key=value"
  std::string line;
  line.reserve(raw_line.size());
  for (size_t i = 0; i < raw_line.size(); ++i) {
    if (raw_line[i] == '=') {
      while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) line.pop_back();
      line += '=';
      while (i + 1 < raw_line.size() && (raw_line[i + 1] == ' ' || raw_line[i + 1] == '\t'))
        ++i;
    } else {
      line += raw_line[i];
    }
  }
  std::vector<Token> out;
  std::istringstream in(line);
  std::string word;
  while (in >> word) {
    size_t eq = word.find('=');
    if (eq == std::string::npos) {
      if (!out.empty())
        throw ParseError("bare token '" + word + "' after key=value fields", line_no);
      out.push_back({"", word});
    } else {
      out.push_back({word.substr(0, eq), word.substr(eq + 1)});
    }
  }
  return out;
}

struct PendingRefs {
  // name -> (kind, line) resolved once all declarations are read
  struct Ref {
    std::string field;
    std::string id;
    int line;
  };
  std::vector<Ref> node_refs;
};

}  // namespace

Network parse_network(const std::string& text) {
  Network net;
  net.gas = GasProperties{};

  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  bool any_noise_given = false;

  // deferred name references (declaration order in the file is free)
  std::string slack_id, mainline_start_id, mainline_end_id;
  int slack_line = 0, ml_line = 0;
  struct PipeRef {
    size_t pipe;
    std::string from, to;
    int line;
  };
  std::vector<PipeRef> pipe_refs;
  struct CompRef {
    size_t comp;
    std::string pipe, node;
    int line;
  };
  std::vector<CompRef> comp_refs;
  struct NoiseRef {
    std::string node;
    double sigma;
    double tau;
    bool has_tau;
    int line;
  };
  std::vector<NoiseRef> noise_refs;

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
      if (section != "gas" && section != "network" && section != "nodes" &&
          section != "pipes" && section != "compressors" && section != "noise")
        throw ParseError("unknown section '" + section + "'", line_no);
      continue;
    }
    if (section.empty()) throw ParseError("content before any [section]", line_no);

    std::vector<Token> toks = tokenize_line(line, line_no);
    if (toks.empty()) continue;

    if (section == "gas") {
      for (const auto& t : toks) {
        if (t.key == "sound_speed") net.gas.sound_speed = parse_value(t.value, line_no);
        else if (t.key == "friction") net.gas.friction = parse_value(t.value, line_no);
        else throw ParseError("unknown [gas] field '" + t.key + "'", line_no);
      }
      if (net.gas.sound_speed <= 0 || net.gas.friction <= 0)
        throw ParseError("gas properties must be positive", line_no);
    } else if (section == "network") {
      for (const auto& t : toks) {
        if (t.key == "slack") { slack_id = t.value; slack_line = line_no; }
        else if (t.key == "slack_pressure") net.slack_pressure = parse_value(t.value, line_no);
        else if (t.key == "mainline_start") { mainline_start_id = t.value; ml_line = line_no; }
        else if (t.key == "mainline_end") { mainline_end_id = t.value; ml_line = line_no; }
        else throw ParseError("unknown [network] field '" + t.key + "'", line_no);
      }
    } else if (section == "nodes") {
      if (toks[0].key != "")
        throw ParseError("node line must start with the node id", line_no);
      Node nd;
      nd.id = toks[0].value;
      if (net.node_index(nd.id) >= 0)
        throw ParseError("duplicate node id '" + nd.id + "'", line_no);
      for (size_t i = 1; i < toks.size(); ++i) {
        const auto& t = toks[i];
        if (t.key == "q") nd.injection = parse_value(t.value, line_no);
        else if (t.key == "pmin") nd.p_min = parse_value(t.value, line_no);
        else if (t.key == "pmax") nd.p_max = parse_value(t.value, line_no);
        else if (t.key == "sigma") { nd.noise_sigma = parse_value(t.value, line_no); any_noise_given = true; }
        else if (t.key == "tau") nd.noise_tau = parse_value(t.value, line_no);
        else throw ParseError("unknown node field '" + t.key + "'", line_no);
      }
      net.nodes.push_back(nd);
    } else if (section == "pipes") {
      if (toks[0].key != "")
        throw ParseError("pipe line must start with the pipe id", line_no);
      Pipe p;
      p.id = toks[0].value;
      if (net.pipe_index(p.id) >= 0)
        throw ParseError("duplicate pipe id '" + p.id + "'", line_no);
      std::string from, to;
      for (size_t i = 1; i < toks.size(); ++i) {
        const auto& t = toks[i];
        if (t.key == "from") from = t.value;
        else if (t.key == "to") to = t.value;
        else if (t.key == "length") p.length = parse_value(t.value, line_no);
        else if (t.key == "diameter") p.diameter = parse_value(t.value, line_no);
        else if (t.key == "friction") p.friction = parse_value(t.value, line_no);
        else throw ParseError("unknown pipe field '" + t.key + "'", line_no);
      }
      if (from.empty() || to.empty())
        throw ParseError("pipe '" + p.id + "' needs from= and to=", line_no);
      if (p.length <= 0 || p.diameter <= 0)
        throw ParseError("pipe '" + p.id + "' needs positive length= and diameter=", line_no);
      pipe_refs.push_back({net.pipes.size(), from, to, line_no});
      net.pipes.push_back(p);
    } else if (section == "compressors") {
      if (toks[0].key != "")
        throw ParseError("compressor line must start with the compressor id", line_no);
      Compressor c;
      c.id = toks[0].value;
      std::string pipe, node;
      for (size_t i = 1; i < toks.size(); ++i) {
        const auto& t = toks[i];
        if (t.key == "pipe") pipe = t.value;
        else if (t.key == "at") node = t.value;
        else if (t.key == "alpha_min") c.alpha_min = parse_value(t.value, line_no);
        else if (t.key == "alpha_max") c.alpha_max = parse_value(t.value, line_no);
        else if (t.key == "eta") c.efficiency = parse_value(t.value, line_no);
        else if (t.key == "cost") c.cost_coeff = parse_value(t.value, line_no);
        else if (t.key == "exponent") c.exponent = parse_value(t.value, line_no);
        else throw ParseError("unknown compressor field '" + t.key + "'", line_no);
      }
      if (pipe.empty() || node.empty())
        throw ParseError("compressor '" + c.id + "' needs pipe= and at=", line_no);
      comp_refs.push_back({net.compressors.size(), pipe, node, line_no});
      net.compressors.push_back(c);
    } else if (section == "noise") {
      if (toks[0].key != "")
        throw ParseError("noise line must start with the node id", line_no);
      NoiseRef nr{toks[0].value, 0.0, 0.0, false, line_no};
      for (size_t i = 1; i < toks.size(); ++i) {
        const auto& t = toks[i];
        if (t.key == "sigma") nr.sigma = parse_value(t.value, line_no);
        else if (t.key == "tau") { nr.tau = parse_value(t.value, line_no); nr.has_tau = true; }
        else throw ParseError("unknown noise field '" + t.key + "'", line_no);
      }
      noise_refs.push_back(nr);
      any_noise_given = true;
    }
  }

  // Resolve names.
  for (const auto& r : pipe_refs) {
    int f = net.node_index(r.from);
    if (f < 0) throw ReferenceError("node", r.from, r.line);
    int t = net.node_index(r.to);
    if (t < 0) throw ReferenceError("node", r.to, r.line);
    net.pipes[r.pipe].from = f;
    net.pipes[r.pipe].to = t;
  }
  for (const auto& r : comp_refs) {
    int p = net.pipe_index(r.pipe);
    if (p < 0) throw ReferenceError("pipe", r.pipe, r.line);
    int n = net.node_index(r.node);
    if (n < 0) throw ReferenceError("node", r.node, r.line);
    net.compressors[r.comp].pipe = p;
    net.compressors[r.comp].node = n;
  }
  for (const auto& r : noise_refs) {
    int n = net.node_index(r.node);
    if (n < 0) throw ReferenceError("node", r.node, r.line);
    net.nodes[n].noise_sigma = r.sigma;
    if (r.has_tau) net.nodes[n].noise_tau = r.tau;
  }
  if (slack_id.empty()) throw ParseError("[network] section must set slack=");
  net.slack = net.node_index(slack_id);
  if (net.slack < 0) throw ReferenceError("node", slack_id, slack_line);
  if (net.slack_pressure <= 0)
    throw ParseError("[network] section must set a positive slack_pressure=");
  if (!mainline_start_id.empty()) {
    net.mainline_start = net.node_index(mainline_start_id);
    if (net.mainline_start < 0) throw ReferenceError("node", mainline_start_id, ml_line);
  }
  if (!mainline_end_id.empty()) {
    net.mainline_end = net.node_index(mainline_end_id);
    if (net.mainline_end < 0) throw ReferenceError("node", mainline_end_id, ml_line);
  }

  // When the document specifies no noise at all, consumption nodes default to
  // sigma = |q|/3 with the reference correlation time.
  if (!any_noise_given)
    for (auto& nd : net.nodes)
      if (nd.injection < 0) {
        nd.noise_sigma = std::abs(nd.injection) / 3.0;
        nd.noise_tau = defaults::reference_time;
      }

  return net;
}

Network load_network(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open network file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_network(ss.str());
}

namespace {

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string serialize_network(const Network& net) {
  std::ostringstream out;
  out << "[gas]\n";
  out << "sound_speed = " << fmt(net.gas.sound_speed) << "\n";
  out << "friction = " << fmt(net.gas.friction) << "\n\n";
  out << "[network]\n";
  out << "slack = " << net.nodes[net.slack].id << "\n";
  out << "slack_pressure = " << fmt(net.slack_pressure) << "\n";
  if (net.mainline_start >= 0)
    out << "mainline_start = " << net.nodes[net.mainline_start].id << "\n";
  if (net.mainline_end >= 0)
    out << "mainline_end = " << net.nodes[net.mainline_end].id << "\n";
  out << "\n[nodes]\n";
  for (const auto& nd : net.nodes) {
    out << nd.id << " q=" << fmt(nd.injection) << " pmin=" << fmt(nd.p_min)
        << " pmax=" << fmt(nd.p_max);
    out << " sigma=" << fmt(nd.noise_sigma) << " tau=" << fmt(nd.noise_tau);
    out << "\n";
  }
  out << "\n[pipes]\n";
  for (const auto& p : net.pipes) {
    out << p.id << " from=" << net.nodes[p.from].id << " to=" << net.nodes[p.to].id
        << " length=" << fmt(p.length) << " diameter=" << fmt(p.diameter);
    if (p.friction) out << " friction=" << fmt(*p.friction);
    out << "\n";
  }
  if (!net.compressors.empty()) {
    out << "\n[compressors]\n";
    for (const auto& c : net.compressors) {
      out << c.id << " pipe=" << net.pipes[c.pipe].id << " at=" << net.nodes[c.node].id
          << " alpha_min=" << fmt(c.alpha_min) << " alpha_max=" << fmt(c.alpha_max)
          << " eta=" << fmt(c.efficiency) << " cost=" << fmt(c.cost_coeff)
          << " exponent=" << fmt(c.exponent) << "\n";
    }
  }
  return out.str();
}

}  // namespace gasjitter
