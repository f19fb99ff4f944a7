#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfgnet/mfg_coupler.hpp"
#include "mfgnet/stochastic_oracle.hpp"

namespace mfgnet {

/// Edge coefficient profile of a config file. Built-ins take parameters:
///   zero                              0
///   constant  [c]                     c
///   sine      [A, k, phase]           A sin(2 pi k x + phase)
///   bump      [height, center, width] height exp(-((x - center) / width)^2)
///   samples   N_j + 1 nodal values    piecewise linear in x
struct ProfileSpec {
  std::string kind = "zero";
  std::vector<double> values;

  friend bool operator==(const ProfileSpec&, const ProfileSpec&) = default;
};

/// Evaluates the profile at arclength x on an edge of the given length.
EdgeProfile make_profile(const ProfileSpec& p, double length);

struct EdgeHamiltonianSpec {
  double kappa = 0.5;
  ProfileSpec drift;
  ProfileSpec potential;

  friend bool operator==(const EdgeHamiltonianSpec&, const EdgeHamiltonianSpec&) = default;
};

struct HamiltonianConfig {
  /// "quadratic", or "clipped_quadratic" (the same family clamped to [-cap, cap]).
  std::string family = "quadratic";
  double cap = 2.0;
  /// Per-edge coefficients; edges not listed get kappa 0.5 and zero profiles.
  std::map<std::string, EdgeHamiltonianSpec> edges;

  friend bool operator==(const HamiltonianConfig&, const HamiltonianConfig&) = default;
};

struct CouplingConfig {
  std::string name = "linear";
  std::vector<double> parameters{1.0};
  bool monotone = true;

  friend bool operator==(const CouplingConfig&, const CouplingConfig&) = default;
};

enum class Task { hjb, fp, mfg, oracle, refine };

const char* task_name(Task t) noexcept;
Task parse_task(const std::string& name);

struct ProblemSpec {
  GraphSpec graph;
  HamiltonianConfig hamiltonian;
  CouplingConfig coupling;
  MfgConfig solver;
  /// Per-edge profiles of a user initial density (solver.initial == user).
  std::map<std::string, ProfileSpec> initial_density;
  /// Right-hand side f of the standalone hjb task.
  std::map<std::string, ProfileSpec> rhs;
  OracleConfig oracle;
  /// Number of meshes of the refine task (cells doubled each level).
  int refine_levels = 3;
  std::string out_dir = "out";
  std::vector<Task> tasks{Task::mfg};
  /// Notes produced while validating (not part of the problem itself).
  std::vector<std::string> warnings;

  friend bool operator==(const ProblemSpec& a, const ProblemSpec& b);
};

/// Reads and validates a JSON config; every default is materialized. Parse
/// errors carry line and column, semantic errors the field path.
ProblemSpec parse_config(const std::filesystem::path& path);
ProblemSpec parse_config_text(const std::string& text);

/// The fully materialized spec as JSON; parse_config_text of its dump
/// reproduces the spec.
nlohmann::ordered_json echo_config(const ProblemSpec& spec);

MetricGraph build_graph(const ProblemSpec& spec);
Hamiltonian build_hamiltonian(const ProblemSpec& spec, const MetricGraph& g);
Coupling build_coupling(const ProblemSpec& spec);

/// Samples per-edge profiles onto g (edges without an entry are zero).
GridFunction sample_profiles(const MetricGraph& g, const std::map<std::string, ProfileSpec>& p);

/// Writes edge_<id>.csv (x, u, m, drift; vertex rows at x = 0 and x = l),
/// graph.json and summary.json (rho, history, audit, plus `extra` fields).
/// Returns the file names written.
std::vector<std::string> emit_solution(const MfgSolution& sol, const MetricGraph& g,
                                       const Hamiltonian& H, const std::filesystem::path& dir,
                                       const nlohmann::ordered_json& extra = {},
                                       SchemeOptions options = {});

struct TaskReport {
  Task task;
  bool ok = false;
  std::string message;
  double seconds = 0.0;
};

struct RunReport {
  std::vector<TaskReport> tasks;
  std::optional<double> rho;
  int fixed_point_iters = 0;
  std::optional<ResidualAudit> audit;
  std::vector<std::string> files;
  std::vector<std::string> warnings;
  nlohmann::ordered_json summary;

  int exit_code() const noexcept;
};

/// Runs the requested tasks in dependency order and writes their outputs.
/// Task failures are recorded, not thrown.
RunReport run(const ProblemSpec& spec);

}  // namespace mfgnet
