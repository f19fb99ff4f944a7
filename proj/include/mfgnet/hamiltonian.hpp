#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "mfgnet/metric_graph.hpp"

namespace mfgnet {

/// Edge coefficient profile of arclength, e.g. the drift c(x) or potential f0(x).
using EdgeProfile = std::function<double(double)>;

/// Coefficients of H_j(x,p) = kappa p^2 + c(x) p + f0(x) on one edge. Empty
/// profiles are identically zero.
struct QuadraticEdge {
  double kappa = 0.5;
  EdgeProfile drift;
  EdgeProfile potential;
};

/// Discretization of a general (callback) Hamiltonian.
enum class GeneralScheme {
  upwind,    ///< Godunov choice driven by the sign of dH/dp at the one-sided slopes
  centered,  ///< H((p^- + p^+)/2); monotone only under the mesh Peclet bound
};

/// Per-edge convex Hamiltonian H_j(x,p) together with dH_j/dp.
class Hamiltonian {
 public:
  using PointFunction = std::function<double(EdgeId, double /*x*/, double /*p*/)>;

  /// Same quadratic coefficients on every edge.
  static Hamiltonian quadratic(std::size_t edge_count, double kappa);
  static Hamiltonian quadratic(std::vector<QuadraticEdge> edges);
  static Hamiltonian general(PointFunction value, PointFunction derivative,
                             GeneralScheme scheme = GeneralScheme::upwind, bool convex = true);
  /// The quadratic family clamped to [-cap, cap]: bounded, hence not convex.
  static Hamiltonian clipped_quadratic(std::vector<QuadraticEdge> edges, double cap);

  bool is_quadratic() const noexcept { return !quadratic_.empty(); }
  bool convex() const noexcept { return convex_; }
  GeneralScheme scheme() const noexcept { return scheme_; }
  const QuadraticEdge& quadratic_edge(EdgeId j) const { return quadratic_.at(j.value); }
  std::size_t quadratic_edge_count() const noexcept { return quadratic_.size(); }

  double value(EdgeId j, double x, double p) const;
  double derivative(EdgeId j, double x, double p) const;

  /// Growth constants (delta, C) of delta p^2 - C <= H <= C p^2 + C, for diagnostics.
  double growth_delta = 0.0;
  double growth_c = 0.0;

 private:
  std::vector<QuadraticEdge> quadratic_;
  PointFunction value_;
  PointFunction derivative_;
  GeneralScheme scheme_ = GeneralScheme::upwind;
  bool convex_ = true;
};

/// Monotone two-slope value of H at a node with its slope sensitivities.
struct NumericalHamiltonian {
  double value = 0.0;
  double d_minus = 0.0;  ///< >= 0 for a monotone scheme
  double d_plus = 0.0;   ///< <= 0 for a monotone scheme
};

/// Godunov-type numerical Hamiltonian of edge j at arclength x from the
/// backward slope p_minus and the forward slope p_plus.
NumericalHamiltonian numerical_hamiltonian(const Hamiltonian& H, EdgeId j, double x, double p_minus,
                                           double p_plus);

/// Sampled spot checks of convexity in p and of the growth sandwich.
struct HamiltonianDiagnostics {
  bool convex = true;
  bool growth_ok = true;
  double worst_secant_gap = 0.0;  ///< most negative midpoint-convexity gap found
};
HamiltonianDiagnostics check_hamiltonian(const Hamiltonian& H, const MetricGraph& g,
                                         int samples_per_edge = 16, double p_range = 10.0);

}  // namespace mfgnet
