#pragma once

#include <cstdint>
#include <vector>

#include "mfgnet/metric_graph.hpp"

namespace mfgnet {

struct OracleConfig {
  std::size_t n_agents = 10000;
  std::size_t n_steps = 10000;
  double dt = 1e-3;
  /// Fraction of the steps discarded before occupation is recorded.
  double burn_in = 0.2;
  std::uint64_t seed = 1;
  /// Worker threads; 0 picks the hardware concurrency. Results do not depend on it.
  unsigned threads = 0;

  friend bool operator==(const OracleConfig&, const OracleConfig&) = default;
};

void validate(const OracleConfig& cfg);

/// Per-edge drift a(x) as N_j + 1 nodal values, linearly interpolated.
using DriftProfiles = std::vector<std::vector<double>>;

DriftProfiles zero_drift(const MetricGraph& g);

struct OccupationHistogram {
  /// counts[j][k]: samples in cell [k h_j, (k+1) h_j) of edge j.
  std::vector<std::vector<std::uint64_t>> counts;
  std::uint64_t total = 0;
  double elapsed = 0.0;
  /// crossings[v][s]: exits from vertex v into its s-th incident edge
  /// (aligned with MetricGraph::incident and routing).
  std::vector<std::vector<std::uint64_t>> crossings;

  /// Empirical density of cell k on edge j.
  double density(const MetricGraph& g, EdgeId j, int k) const;
};

/// Euler-Maruyama for dX = -a(X) dt + sqrt(2 nu_j) dW inside edges. An agent
/// that crosses a vertex continues, with its leftover displacement, into an
/// incident edge drawn from the routing probabilities. Agents start uniformly
/// along the network. Each agent draws from its own generator, seeded from
/// (seed, agent index), so results are independent of the thread count.
/// The occupation matches the Kirchhoff-condition density only where all
/// edges meeting at a vertex share one diffusion coefficient; with unequal
/// nu the excursion routing weights edge j by beta_j sqrt(nu_j).
OccupationHistogram simulate(const MetricGraph& g, const DriftProfiles& drift,
                             const OracleConfig& cfg);

/// L1 distance on the network between the normalized histogram and the cell
/// averages (m_k + m_{k+1}) / 2 of m.
double compare_histogram(const MetricGraph& g, const OccupationHistogram& hist,
                         const GridFunction& m);

struct RoutingVertexTest {
  std::uint64_t crossings = 0;
  double chi_squared = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

/// Pearson chi-squared test of the exit frequencies at every vertex against
/// the routing probabilities.
std::vector<RoutingVertexTest> routing_test(const MetricGraph& g, const OccupationHistogram& hist);

}  // namespace mfgnet
