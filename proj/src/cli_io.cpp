#include "mfgnet/cli_io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace mfgnet {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// JSON reading with field paths

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ValidationError(path, "expected an object");
}

void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  require_object(j, path);
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* a : keys) known = known || k == a;
    if (!known) throw ValidationError(join(path, k), "unknown key");
  }
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError(path, "must be finite");
  return v;
}

double number_or(const json& obj, const char* key, const std::string& path, double def) {
  return obj.contains(key) ? number(obj.at(key), join(path, key)) : def;
}

long long integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ValidationError(path, "expected an integer");
  return j.get<long long>();
}

int int_or(const json& obj, const char* key, const std::string& path, int def) {
  if (!obj.contains(key)) return def;
  const long long v = integer(obj.at(key), join(path, key));
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ValidationError(join(path, key), "out of range");
  return static_cast<int>(v);
}

std::uint64_t unsigned_or(const json& obj, const char* key, const std::string& path,
                          std::uint64_t def) {
  if (!obj.contains(key)) return def;
  const auto& j = obj.at(key);
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<long long>() >= 0) return static_cast<std::uint64_t>(j.get<long long>());
  throw ValidationError(join(path, key), "expected a nonnegative integer");
}

bool bool_or(const json& obj, const char* key, const std::string& path, bool def) {
  if (!obj.contains(key)) return def;
  if (!obj.at(key).is_boolean()) throw ValidationError(join(path, key), "expected true or false");
  return obj.at(key).get<bool>();
}

std::string string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ValidationError(path, "expected a string");
  return j.get<std::string>();
}

std::string string_or(const json& obj, const char* key, const std::string& path, std::string def) {
  return obj.contains(key) ? string(obj.at(key), join(path, key)) : def;
}

std::vector<double> numbers(const json& j, const std::string& path) {
  if (!j.is_array()) throw ValidationError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

// ---------------------------------------------------------------------------
// Profiles

ProfileSpec parse_profile(const json& j, const std::string& path) {
  if (j.is_string()) {
    if (j.get<std::string>() != "zero") throw ValidationError(path, "unknown profile '" + j.get<std::string>() + "'");
    return {};
  }
  if (j.is_number()) return {"constant", {number(j, path)}};
  if (!j.is_object() || j.size() != 1)
    throw ValidationError(path, "expected \"zero\", a number, or one of {constant|sine|bump|samples: ...}");
  const auto& [kind, v] = *j.items().begin();
  const std::string p = join(path, kind);
  ProfileSpec out{kind, {}};
  if (kind == "constant") {
    out.values = {v.is_array() ? numbers(v, p).at(0) : number(v, p)};
    if (v.is_array() && v.size() != 1) throw ValidationError(p, "expects 1 value");
  } else if (kind == "sine") {
    out.values = numbers(v, p);
    if (out.values.size() == 2) out.values.push_back(0.0);
    if (out.values.size() != 3) throw ValidationError(p, "expects [amplitude, frequency, phase]");
  } else if (kind == "bump") {
    out.values = numbers(v, p);
    if (out.values.size() != 3) throw ValidationError(p, "expects [height, center, width]");
    if (!(out.values[2] > 0.0)) throw ValidationError(p, "width must be positive");
  } else if (kind == "samples") {
    out.values = numbers(v, p);
    if (out.values.size() < 2) throw ValidationError(p, "needs at least 2 values");
  } else {
    throw ValidationError(path, "unknown profile kind '" + kind + "'");
  }
  return out;
}

ojson profile_json(const ProfileSpec& p) {
  if (p.kind == "zero") return "zero";
  ojson o;
  if (p.kind == "constant")
    o[p.kind] = p.values.at(0);
  else
    o[p.kind] = p.values;
  return o;
}

std::map<std::string, ProfileSpec> parse_edge_profiles(const json& j, const std::string& path,
                                                       const GraphSpec& graph) {
  require_object(j, path);
  std::map<std::string, ProfileSpec> out;
  for (const auto& [id, v] : j.items()) {
    const std::string p = join(path, id);
    const EdgeSpec* edge = nullptr;
    for (const auto& e : graph.edges)
      if (e.id == id) edge = &e;
    if (!edge) throw ValidationError(p, "unknown edge '" + id + "'");
    auto prof = parse_profile(v, p);
    if (prof.kind == "samples" && prof.values.size() != static_cast<std::size_t>(edge->cells) + 1)
      throw ValidationError(join(p, "samples"), "expects cells + 1 = " + std::to_string(edge->cells + 1) +
                                                    " values, got " + std::to_string(prof.values.size()));
    out[id] = std::move(prof);
  }
  return out;
}

ojson edge_profiles_json(const std::map<std::string, ProfileSpec>& m) {
  ojson o = ojson::object();
  for (const auto& [id, p] : m) o[id] = profile_json(p);
  return o;
}

// ---------------------------------------------------------------------------
// Sections

GraphSpec parse_graph(const json& j) {
  allow_keys(j, "graph", {"vertices", "edges"});
  GraphSpec g;
  if (!j.contains("vertices") || !j.at("vertices").is_array())
    throw ValidationError("graph.vertices", "expected an array of vertex ids");
  for (std::size_t i = 0; i < j.at("vertices").size(); ++i)
    g.vertices.push_back(string(j.at("vertices")[i], "graph.vertices[" + std::to_string(i) + "]"));
  if (!j.contains("edges") || !j.at("edges").is_array())
    throw ValidationError("graph.edges", "expected an array of edges");
  for (std::size_t i = 0; i < j.at("edges").size(); ++i) {
    const auto& e = j.at("edges")[i];
    const std::string p = "graph.edges[" + std::to_string(i) + "]";
    allow_keys(e, p, {"id", "from", "to", "length", "diffusion", "cells"});
    EdgeSpec s;
    for (const char* k : {"id", "from", "to"})
      if (!e.contains(k)) throw ValidationError(join(p, k), "missing");
    s.id = string(e.at("id"), join(p, "id"));
    s.from = string(e.at("from"), join(p, "from"));
    s.to = string(e.at("to"), join(p, "to"));
    if (!e.contains("length")) throw ValidationError(join(p, "length"), "missing");
    s.length = number(e.at("length"), join(p, "length"));
    s.diffusion = number_or(e, "diffusion", p, s.diffusion);
    s.cells = int_or(e, "cells", p, s.cells);
    g.edges.push_back(std::move(s));
  }
  try {
    (void)MetricGraph::build(g);
  } catch (const ValidationError& e) {
    throw ValidationError("graph", e.what());
  }
  return g;
}

HamiltonianConfig parse_hamiltonian(const json& j, const GraphSpec& graph) {
  allow_keys(j, "hamiltonian", {"family", "cap", "kappa", "edges"});
  HamiltonianConfig h;
  h.family = string_or(j, "family", "hamiltonian", h.family);
  if (h.family != "quadratic" && h.family != "clipped_quadratic")
    throw ValidationError("hamiltonian.family",
                          "unknown family '" + h.family + "' (supported: quadratic, clipped_quadratic)");
  h.cap = number_or(j, "cap", "hamiltonian", h.cap);
  if (!(h.cap > 0.0)) throw ValidationError("hamiltonian.cap", "must be positive");
  const double kappa = number_or(j, "kappa", "hamiltonian", 0.5);
  if (!(kappa > 0.0)) throw ValidationError("hamiltonian.kappa", "must be positive");
  for (const auto& e : graph.edges) h.edges[e.id] = EdgeHamiltonianSpec{kappa, {}, {}};
  if (j.contains("edges")) {
    const auto& edges = j.at("edges");
    require_object(edges, "hamiltonian.edges");
    for (const auto& [id, v] : edges.items()) {
      const std::string p = "hamiltonian.edges." + id;
      if (!h.edges.contains(id)) throw ValidationError(p, "unknown edge '" + id + "'");
      allow_keys(v, p, {"kappa", "drift", "potential"});
      auto& spec = h.edges[id];
      spec.kappa = number_or(v, "kappa", p, kappa);
      if (!(spec.kappa > 0.0)) throw ValidationError(join(p, "kappa"), "must be positive");
      const auto cells = std::find_if(graph.edges.begin(), graph.edges.end(),
                                      [&](const EdgeSpec& e) { return e.id == id; })->cells;
      auto profile = [&](const char* key) {
        auto prof = parse_profile(v.at(key), join(p, key));
        if (prof.kind == "samples" && prof.values.size() != static_cast<std::size_t>(cells) + 1)
          throw ValidationError(join(join(p, key), "samples"),
                                "expects cells + 1 = " + std::to_string(cells + 1) + " values");
        return prof;
      };
      if (v.contains("drift")) spec.drift = profile("drift");
      if (v.contains("potential")) spec.potential = profile("potential");
    }
  }
  return h;
}

CouplingConfig parse_coupling(const json& j, std::vector<std::string>& warnings) {
  allow_keys(j, "coupling", {"name", "parameters", "monotone"});
  CouplingConfig c;
  c.name = string_or(j, "name", "coupling", c.name);
  if (j.contains("parameters")) {
    c.parameters = numbers(j.at("parameters"), "coupling.parameters");
  } else if (c.name == "power") {
    c.parameters = {1.0, 2.0};
  } else {
    c.parameters = {1.0};
  }
  c.monotone = bool_or(j, "monotone", "coupling", c.monotone);
  const auto V = Coupling::builtin(c.name, c.parameters, c.monotone);
  if (c.monotone) {
    const auto check = check_coupling(V);
    if (!check.monotone) {
      warnings.push_back("coupling '" + c.name + "' is flagged monotone but V' reaches " +
                         format_number(check.min_derivative) + " < 0; flag cleared");
      c.monotone = false;
    }
  }
  return c;
}

HjbConfig parse_hjb(const json& j) {
  const std::string p = "solver.hjb";
  allow_keys(j, p, {"newton_tol", "max_newton_iters", "damping", "min_step", "lambda_schedule", "method",
                    "cross_check", "cross_check_tol", "stencil", "scale_vertex_rows"});
  HjbConfig c;
  c.newton_tol = number_or(j, "newton_tol", p, c.newton_tol);
  c.max_newton_iters = int_or(j, "max_newton_iters", p, c.max_newton_iters);
  c.damping = number_or(j, "damping", p, c.damping);
  c.min_step = number_or(j, "min_step", p, c.min_step);
  if (j.contains("lambda_schedule")) c.lambda_schedule = numbers(j.at("lambda_schedule"), join(p, "lambda_schedule"));
  const auto method = string_or(j, "method", p, "direct_ergodic");
  if (method == "direct_ergodic")
    c.method = ErgodicMethod::direct_ergodic;
  else if (method == "vanishing_discount")
    c.method = ErgodicMethod::vanishing_discount;
  else
    throw ValidationError(join(p, "method"), "expected direct_ergodic or vanishing_discount");
  c.cross_check = bool_or(j, "cross_check", p, c.cross_check);
  c.cross_check_tol = number_or(j, "cross_check_tol", p, c.cross_check_tol);
  const auto stencil = string_or(j, "stencil", p, "second_order");
  if (stencil == "second_order")
    c.scheme.stencil = VertexStencil::second_order;
  else if (stencil == "first_order")
    c.scheme.stencil = VertexStencil::first_order;
  else
    throw ValidationError(join(p, "stencil"), "expected second_order or first_order");
  c.scheme.scale_vertex_rows = bool_or(j, "scale_vertex_rows", p, c.scheme.scale_vertex_rows);
  return c;
}

void parse_solver(const json& j, ProblemSpec& spec) {
  allow_keys(j, "solver", {"damping", "fp_tol", "max_outer_iters", "audit_tol", "initial_density", "hjb", "fp"});
  auto& c = spec.solver;
  c.damping = number_or(j, "damping", "solver", c.damping);
  c.fp_tol = number_or(j, "fp_tol", "solver", c.fp_tol);
  c.max_outer_iters = int_or(j, "max_outer_iters", "solver", c.max_outer_iters);
  c.audit_tol = number_or(j, "audit_tol", "solver", c.audit_tol);
  if (j.contains("hjb")) c.hjb = parse_hjb(j.at("hjb"));
  if (j.contains("fp")) {
    allow_keys(j.at("fp"), "solver.fp", {"residual_tol"});
    c.fp.residual_tol = number_or(j.at("fp"), "residual_tol", "solver.fp", c.fp.residual_tol);
  }
  if (j.contains("initial_density")) {
    const auto& d = j.at("initial_density");
    if (d.is_string()) {
      if (d.get<std::string>() != "uniform")
        throw ValidationError("solver.initial_density", "expected \"uniform\" or per-edge profiles");
      c.initial = InitialDensity::uniform;
    } else {
      c.initial = InitialDensity::user;
      spec.initial_density = parse_edge_profiles(d, "solver.initial_density", spec.graph);
    }
  }
  validate(c);
}

void parse_oracle(const json& j, OracleConfig& c) {
  allow_keys(j, "oracle", {"agents", "steps", "dt", "burn_in", "seed", "threads"});
  c.n_agents = unsigned_or(j, "agents", "oracle", c.n_agents);
  c.n_steps = unsigned_or(j, "steps", "oracle", c.n_steps);
  c.dt = number_or(j, "dt", "oracle", c.dt);
  c.burn_in = number_or(j, "burn_in", "oracle", c.burn_in);
  c.seed = unsigned_or(j, "seed", "oracle", c.seed);
  c.threads = static_cast<unsigned>(unsigned_or(j, "threads", "oracle", c.threads));
  validate(c);
}

std::vector<Task> parse_tasks(const json& j) {
  if (!j.is_array()) throw ValidationError("tasks", "expected an array of task names");
  std::set<Task> set;
  for (std::size_t i = 0; i < j.size(); ++i) {
    try {
      set.insert(parse_task(string(j[i], "tasks[" + std::to_string(i) + "]")));
    } catch (const ValidationError& e) {
      throw ValidationError("tasks[" + std::to_string(i) + "]", e.what());
    }
  }
  if (set.empty()) throw ValidationError("tasks", "no tasks requested");
  return {set.begin(), set.end()};
}

// ---------------------------------------------------------------------------
// Output helpers

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  out << text;
  if (!out) throw Error("write failed: " + file.string());
}

ojson audit_json(const ResidualAudit& a, double tol) {
  return {{"hjb_interior", a.hjb_interior}, {"fp_interior", a.fp_interior},
          {"kirchhoff", a.kirchhoff},       {"flux", a.flux},
          {"u_integral", a.u_integral},     {"m_mass", a.m_mass},
          {"min_m", a.min_m},               {"tolerance", tol},
          {"passed", a.passed(tol)}};
}

ojson history_json(const std::vector<IterationRecord>& h) {
  ojson out = ojson::array();
  for (const auto& r : h) out.push_back({{"update", r.update}, {"rho", r.rho}});
  return out;
}

ojson graph_json(const MetricGraph& g) {
  ojson out;
  out["vertices"] = g.spec().vertices;
  out["edges"] = ojson::array();
  for (const auto& e : g.spec().edges)
    out["edges"].push_back({{"id", e.id}, {"from", e.from}, {"to", e.to}, {"length", e.length},
                            {"diffusion", e.diffusion}, {"cells", e.cells}});
  out["routing"] = ojson::object();
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    ojson beta = ojson::object();
    const auto& inc = g.incident(VertexId{v});
    for (std::size_t s = 0; s < inc.size(); ++s) {
      const auto& e = g.edge(inc[s].edge);
      beta[e.name + (inc[s].end == EdgeEnd::start ? ":start" : ":end")] = g.routing(VertexId{v})[s];
    }
    out["routing"][g.vertex_name(VertexId{v})] = beta;
  }
  return out;
}

std::string edge_table(const MetricGraph& g, const EdgeRecord& e, const std::string& header,
                       const std::vector<std::vector<double>>& columns) {
  std::string out = header + "\n";
  for (int k = 0; k <= e.cells; ++k) {
    out += fmt(e.node_x(k));
    for (const auto& c : columns) out += "," + fmt(c[static_cast<std::size_t>(k)]);
    out += "\n";
  }
  (void)g;
  return out;
}

ProblemSpec refined(const ProblemSpec& spec, int factor) {
  ProblemSpec out = spec;
  for (auto& e : out.graph.edges) e.cells *= factor;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

EdgeProfile make_profile(const ProfileSpec& p, double length) {
  const auto& v = p.values;
  if (p.kind == "zero") return {};
  if (p.kind == "constant") return [c = v.at(0)](double) { return c; };
  if (p.kind == "sine")
    return [a = v.at(0), k = v.at(1), phase = v.at(2)](double x) {
      return a * std::sin(2.0 * M_PI * k * x + phase);
    };
  if (p.kind == "bump")
    return [hgt = v.at(0), c = v.at(1), w = v.at(2)](double x) {
      const double z = (x - c) / w;
      return hgt * std::exp(-z * z);
    };
  if (p.kind == "samples")
    return [v, length](double x) {
      const double h = length / static_cast<double>(v.size() - 1);
      const double t = std::clamp(x / h, 0.0, static_cast<double>(v.size() - 1));
      const auto k = std::min(static_cast<std::size_t>(t), v.size() - 2);
      const double w = t - static_cast<double>(k);
      return (1.0 - w) * v[k] + w * v[k + 1];
    };
  throw ValidationError("profile", "unknown profile kind '" + p.kind + "'");
}

const char* task_name(Task t) noexcept {
  switch (t) {
    case Task::hjb: return "hjb";
    case Task::fp: return "fp";
    case Task::mfg: return "mfg";
    case Task::oracle: return "oracle";
    case Task::refine: return "refine";
  }
  return "?";
}

Task parse_task(const std::string& name) {
  for (Task t : {Task::hjb, Task::fp, Task::mfg, Task::oracle, Task::refine})
    if (name == task_name(t)) return t;
  throw ValidationError("tasks", "unknown task '" + name + "' (expected hjb, fp, mfg, oracle, refine)");
}

bool operator==(const ProblemSpec& a, const ProblemSpec& b) {
  return a.graph == b.graph && a.hamiltonian == b.hamiltonian && a.coupling == b.coupling &&
         a.solver == b.solver && a.initial_density == b.initial_density && a.rhs == b.rhs &&
         a.oracle == b.oracle && a.refine_levels == b.refine_levels && a.out_dir == b.out_dir &&
         a.tasks == b.tasks;
}

ProblemSpec parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    // keep only the reason; the library's own location prefix is replaced by ours
    const std::string what = e.what();
    const auto reason = what.find(": ", what.find("parse error"));
    throw ValidationError("config", "parse error at line " + std::to_string(line) + ", column " +
                                        std::to_string(col) + ": " +
                                        (reason == std::string::npos ? what : what.substr(reason + 2)));
  }
  allow_keys(j, "", {"graph", "hamiltonian", "coupling", "solver", "rhs", "oracle", "refine", "outputs", "tasks"});
  ProblemSpec spec;
  if (!j.contains("graph")) throw ValidationError("graph", "missing");
  spec.graph = parse_graph(j.at("graph"));
  spec.hamiltonian = parse_hamiltonian(j.contains("hamiltonian") ? j.at("hamiltonian") : json::object(), spec.graph);
  spec.coupling = parse_coupling(j.contains("coupling") ? j.at("coupling") : json::object(), spec.warnings);
  parse_solver(j.contains("solver") ? j.at("solver") : json::object(), spec);
  if (j.contains("rhs")) spec.rhs = parse_edge_profiles(j.at("rhs"), "rhs", spec.graph);
  parse_oracle(j.contains("oracle") ? j.at("oracle") : json::object(), spec.oracle);
  if (j.contains("refine")) {
    allow_keys(j.at("refine"), "refine", {"levels"});
    spec.refine_levels = int_or(j.at("refine"), "levels", "refine", spec.refine_levels);
  }
  if (spec.refine_levels < 2 || spec.refine_levels > 6)
    throw ValidationError("refine.levels", "must lie in [2, 6]");
  if (j.contains("outputs")) {
    allow_keys(j.at("outputs"), "outputs", {"directory"});
    spec.out_dir = string_or(j.at("outputs"), "directory", "outputs", spec.out_dir);
  }
  if (j.contains("tasks")) spec.tasks = parse_tasks(j.at("tasks"));
  return spec;
}

ProblemSpec parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("config", "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

nlohmann::ordered_json echo_config(const ProblemSpec& spec) {
  ojson out;
  out["graph"]["vertices"] = spec.graph.vertices;
  out["graph"]["edges"] = ojson::array();
  for (const auto& e : spec.graph.edges)
    out["graph"]["edges"].push_back({{"id", e.id}, {"from", e.from}, {"to", e.to}, {"length", e.length},
                                     {"diffusion", e.diffusion}, {"cells", e.cells}});
  out["hamiltonian"]["family"] = spec.hamiltonian.family;
  out["hamiltonian"]["cap"] = spec.hamiltonian.cap;
  out["hamiltonian"]["edges"] = ojson::object();
  for (const auto& [id, h] : spec.hamiltonian.edges)
    out["hamiltonian"]["edges"][id] = {{"kappa", h.kappa}, {"drift", profile_json(h.drift)},
                                       {"potential", profile_json(h.potential)}};
  out["coupling"] = {{"name", spec.coupling.name}, {"parameters", spec.coupling.parameters},
                     {"monotone", spec.coupling.monotone}};
  const auto& s = spec.solver;
  ojson solver;
  solver["damping"] = s.damping;
  solver["fp_tol"] = s.fp_tol;
  solver["max_outer_iters"] = s.max_outer_iters;
  solver["audit_tol"] = s.audit_tol;
  solver["initial_density"] =
      s.initial == InitialDensity::uniform ? ojson("uniform") : edge_profiles_json(spec.initial_density);
  solver["hjb"] = {{"newton_tol", s.hjb.newton_tol},
                   {"max_newton_iters", s.hjb.max_newton_iters},
                   {"damping", s.hjb.damping},
                   {"min_step", s.hjb.min_step},
                   {"lambda_schedule", s.hjb.lambda_schedule},
                   {"method", s.hjb.method == ErgodicMethod::direct_ergodic ? "direct_ergodic" : "vanishing_discount"},
                   {"cross_check", s.hjb.cross_check},
                   {"cross_check_tol", s.hjb.cross_check_tol},
                   {"stencil", s.hjb.scheme.stencil == VertexStencil::second_order ? "second_order" : "first_order"},
                   {"scale_vertex_rows", s.hjb.scheme.scale_vertex_rows}};
  solver["fp"] = {{"residual_tol", s.fp.residual_tol}};
  out["solver"] = solver;
  out["rhs"] = edge_profiles_json(spec.rhs);
  out["oracle"] = {{"agents", spec.oracle.n_agents}, {"steps", spec.oracle.n_steps},
                   {"dt", spec.oracle.dt},           {"burn_in", spec.oracle.burn_in},
                   {"seed", spec.oracle.seed},       {"threads", spec.oracle.threads}};
  out["refine"] = {{"levels", spec.refine_levels}};
  out["outputs"] = {{"directory", spec.out_dir}};
  out["tasks"] = ojson::array();
  for (Task t : spec.tasks) out["tasks"].push_back(task_name(t));
  return out;
}

MetricGraph build_graph(const ProblemSpec& spec) { return MetricGraph::build(spec.graph); }

Hamiltonian build_hamiltonian(const ProblemSpec& spec, const MetricGraph& g) {
  std::vector<QuadraticEdge> edges;
  for (const auto& e : g.edges()) {
    const auto it = spec.hamiltonian.edges.find(e.name);
    const EdgeHamiltonianSpec h = it == spec.hamiltonian.edges.end() ? EdgeHamiltonianSpec{} : it->second;
    edges.push_back({h.kappa, make_profile(h.drift, e.length), make_profile(h.potential, e.length)});
  }
  if (spec.hamiltonian.family == "clipped_quadratic")
    return Hamiltonian::clipped_quadratic(std::move(edges), spec.hamiltonian.cap);
  return Hamiltonian::quadratic(std::move(edges));
}

Coupling build_coupling(const ProblemSpec& spec) {
  return Coupling::builtin(spec.coupling.name, spec.coupling.parameters, spec.coupling.monotone);
}

GridFunction sample_profiles(const MetricGraph& g, const std::map<std::string, ProfileSpec>& p) {
  std::vector<EdgeProfile> f;
  for (const auto& e : g.edges()) {
    const auto it = p.find(e.name);
    f.push_back(it == p.end() ? EdgeProfile{} : make_profile(it->second, e.length));
  }
  return GridFunction::sample(g, [&](EdgeId j, double x) { return f[j.value] ? f[j.value](x) : 0.0; });
}

std::vector<std::string> emit_solution(const MfgSolution& sol, const MetricGraph& g,
                                       const Hamiltonian& H, const std::filesystem::path& dir,
                                       const nlohmann::ordered_json& extra, SchemeOptions options) {
  require_compatible(g, sol.u, "emit_solution");
  require_compatible(g, sol.m, "emit_solution");
  fs::create_directories(dir);
  std::vector<std::string> files;
  const auto drift = HjbDiscretization(g, H, options).drift_profiles(sol.u);
  for (const auto& e : g.edges()) {
    const std::string name = "edge_" + e.name + ".csv";
    write_text(dir / name, edge_table(g, e, "x,u,m,drift",
                                      {sol.u.edge_profile(g, e.id), sol.m.edge_profile(g, e.id), drift[e.id.value]}));
    files.push_back(name);
  }
  write_text(dir / "graph.json", graph_json(g).dump(2) + "\n");
  files.push_back("graph.json");

  ojson summary;
  summary["rho"] = sol.rho;
  summary["fixed_point_iters"] = sol.fixed_point_iters;
  summary["final_update_norm"] = sol.final_update_norm;
  summary["history"] = history_json(sol.history);
  summary["warnings"] = sol.warnings;
  for (const auto& [k, v] : extra.items()) summary[k] = v;
  if (!summary.contains("audit")) summary["audit"] = audit_json(sol.audit, MfgConfig{}.audit_tol);
  files.push_back("summary.json");
  // callers may list files they wrote themselves under "files"
  std::vector<std::string> manifest;
  if (extra.contains("files"))
    for (const auto& f : extra.at("files")) manifest.push_back(f.get<std::string>());
  manifest.insert(manifest.end(), files.begin(), files.end());
  summary["files"] = manifest;
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  return files;
}

int RunReport::exit_code() const noexcept {
  for (const auto& t : tasks)
    if (!t.ok) return 1;
  return 0;
}

RunReport run(const ProblemSpec& spec) {
  RunReport rep;
  rep.warnings = spec.warnings;
  const fs::path dir = spec.out_dir;
  fs::create_directories(dir);
  const auto g = build_graph(spec);
  const auto H = build_hamiltonian(spec, g);
  const auto V = build_coupling(spec);
  const auto& opts = spec.solver.hjb.scheme;

  ojson extra;
  extra["tasks"] = ojson::object();
  std::optional<ErgodicSolution> hjb;
  std::optional<MfgSolution> mfg;
  std::vector<std::string> files;

  auto attempt = [&](Task t, const auto& body) {
    const auto t0 = std::chrono::steady_clock::now();
    TaskReport r{t, false, "", 0.0};
    try {
      body();
      r.ok = true;
    } catch (const std::exception& e) {
      r.message = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ojson status = {{"status", r.ok ? "ok" : "failed"}};
    if (!r.message.empty()) status["message"] = r.message;
    extra["tasks"][task_name(t)] = status;
    rep.tasks.push_back(std::move(r));
  };
  auto requested = [&](Task t) {
    return std::find(spec.tasks.begin(), spec.tasks.end(), t) != spec.tasks.end();
  };
  auto solve_hjb = [&] {
    if (!hjb) hjb = solve_ergodic(g, H, sample_profiles(g, spec.rhs), spec.solver.hjb);
  };
  auto solve_game = [&] {
    if (mfg) return;
    GridFunction init;
    if (spec.solver.initial == InitialDensity::user) init = sample_profiles(g, spec.initial_density);
    try {
      mfg = solve_mfg(g, H, V, spec.solver, spec.solver.initial == InitialDensity::user ? &init : nullptr);
    } catch (const MfgNonConvergence& e) {
      extra["mfg"] = {{"history", history_json(e.history())}};
      throw;
    }
    for (const auto& w : mfg->warnings)
      if (std::find(rep.warnings.begin(), rep.warnings.end(), w) == rep.warnings.end()) rep.warnings.push_back(w);
    rep.rho = mfg->rho;
    rep.fixed_point_iters = mfg->fixed_point_iters;
    rep.audit = mfg->audit;
    extra["audit"] = audit_json(mfg->audit, spec.solver.audit_tol);
    if (!mfg->audit.passed(spec.solver.audit_tol))
      throw Error("residual audit failed: worst line " + fmt(mfg->audit.worst()) + " (tolerance " +
                  fmt(spec.solver.audit_tol) + ", min m " + fmt(mfg->audit.min_m) + ")");
  };

  if (requested(Task::hjb))
    attempt(Task::hjb, [&] {
      solve_hjb();
      std::vector<std::string> written;
      for (const auto& e : g.edges()) {
        const std::string name = "hjb_edge_" + e.name + ".csv";
        write_text(dir / name, edge_table(g, e, "x,u", {hjb->u.edge_profile(g, e.id)}));
        written.push_back(name);
      }
      extra["hjb"] = {{"rho", hjb->rho},
                      {"newton_iters", hjb->newton_iters},
                      {"residual_norm", hjb->residual_norm},
                      {"rho_bound", ergodic_constant_bound(g, H, sample_profiles(g, spec.rhs))},
                      {"kirchhoff_consistency", kirchhoff_consistency(g, H, hjb->u, opts)}};
      files.insert(files.end(), written.begin(), written.end());
    });

  if (requested(Task::fp))
    attempt(Task::fp, [&] {
      solve_hjb();
      const auto d = solve_stationary_fp(g, assemble_fp_operator(g, H, hjb->u, opts), spec.solver.fp);
      const auto drift = HjbDiscretization(g, H, opts).drift_profiles(hjb->u);
      for (const auto& e : g.edges()) {
        const std::string name = "fp_edge_" + e.name + ".csv";
        write_text(dir / name, edge_table(g, e, "x,m,drift", {d.m.edge_profile(g, e.id), drift[e.id.value]}));
        files.push_back(name);
      }
      double flux = 0.0;
      for (double r : flux_residual(g, H, hjb->u, d.m, opts)) flux = std::max(flux, std::abs(r));
      extra["fp"] = {{"min_m", d.min_value},
                     {"linear_residual_norm", d.linear_residual_norm},
                     {"mass", integrate(g, d.m)},
                     {"flux_residual", flux}};
    });

  if (requested(Task::mfg)) attempt(Task::mfg, solve_game);

  if (requested(Task::oracle))
    attempt(Task::oracle, [&] {
      solve_game();
      const auto drift = HjbDiscretization(g, H, opts).drift_profiles(mfg->u);
      const auto hist = simulate(g, drift, spec.oracle);
      for (const auto& e : g.edges()) {
        const std::string name = "histogram_edge_" + e.name + ".csv";
        const auto m = mfg->m.edge_profile(g, e.id);
        std::string text = "x_left,x_right,empirical,m_cell\n";
        for (int k = 0; k < e.cells; ++k)
          text += fmt(e.node_x(k)) + "," + fmt(e.node_x(k + 1)) + "," + fmt(hist.density(g, e.id, k)) + "," +
                  fmt(0.5 * (m[static_cast<std::size_t>(k)] + m[static_cast<std::size_t>(k) + 1])) + "\n";
        write_text(dir / name, text);
        files.push_back(name);
      }
      ojson routing = ojson::array();
      const auto tests = routing_test(g, hist);
      for (std::size_t v = 0; v < tests.size(); ++v)
        routing.push_back({{"vertex", g.vertex_name(VertexId{v})},
                           {"crossings", tests[v].crossings},
                           {"chi_squared", tests[v].chi_squared},
                           {"dof", tests[v].dof},
                           {"p_value", tests[v].p_value}});
      extra["oracle"] = {{"l1_distance", compare_histogram(g, hist, mfg->m)},
                         {"samples", hist.total},
                         {"model_time", hist.elapsed},
                         {"seed", spec.oracle.seed},
                         {"routing", routing}};
    });

  if (requested(Task::refine))
    attempt(Task::refine, [&] {
      std::vector<double> rhos;
      std::vector<int> factors;
      for (int level = 0; level < spec.refine_levels; ++level) {
        const int factor = 1 << level;
        const auto fine = refined(spec, factor);
        const auto gf = build_graph(fine);
        const auto Hf = build_hamiltonian(fine, gf);
        GridFunction init;
        if (fine.solver.initial == InitialDensity::user) init = sample_profiles(gf, fine.initial_density);
        const auto s = solve_mfg(gf, Hf, V, fine.solver, fine.solver.initial == InitialDensity::user ? &init : nullptr);
        rhos.push_back(s.rho);
        factors.push_back(factor);
      }
      const std::size_t n = rhos.size();
      double order = 1.0;
      const double d_last = rhos[n - 1] - rhos[n - 2];
      if (n >= 3) {
        const double d_prev = rhos[n - 2] - rhos[n - 3];
        if (d_last != 0.0 && d_prev / d_last > 0.0) order = std::log2(d_prev / d_last);
      }
      const double extrapolated = rhos[n - 1] + d_last / (std::pow(2.0, order) - 1.0);
      extra["refine"] = {{"cells_factor", factors},
                         {"rho", rhos},
                         {"observed_order", n >= 3 ? ojson(order) : ojson(nullptr)},
                         {"extrapolated_rho", extrapolated}};
    });

  extra["warnings"] = rep.warnings;
  if (mfg) {
    extra["files"] = files;
    const auto written = emit_solution(*mfg, g, H, dir, extra, opts);
    files.insert(files.end(), written.begin(), written.end());
    rep.summary = extra;
  } else {
    write_text(dir / "graph.json", graph_json(g).dump(2) + "\n");
    files.push_back("graph.json");
    files.push_back("summary.json");
    extra["files"] = files;
    write_text(dir / "summary.json", extra.dump(2) + "\n");
    rep.summary = extra;
  }
  rep.files = files;
  return rep;
}

}  // namespace mfgnet
