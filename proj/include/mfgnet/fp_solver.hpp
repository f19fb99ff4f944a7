#pragma once

#include <functional>
#include <vector>

#include "mfgnet/discrete_operators.hpp"

namespace mfgnet {

struct FpConfig {
  /// Allowed residual of the row overwritten by the normalization, relative
  /// to the row's scale.
  double residual_tol = 1e-9;

  friend bool operator==(const FpConfig&, const FpConfig&) = default;
};

struct DensityResult {
  GridFunction m;
  double min_value = 0.0;
  /// Sup-norm of A_fp m, all rows including the replaced one.
  double linear_residual_norm = 0.0;
  /// Row of A_fp that was overwritten by the normalization row.
  std::size_t replaced_row = 0;
};

/// Invariant density: the kernel of A_fp normalized to unit trapezoid mass.
/// Throws NumericallySingular when the kernel is not one-dimensional and
/// NonPositiveDensity when the result has a nonpositive entry.
///
/// With the first-order vertex stencil A_fp is an M-matrix up to sign and the
/// density is always positive. The second-order stencil puts a positive weight
/// on the second node off a vertex, so positivity needs the drift next to
/// vertices to be moderate on the mesh scale (cell Peclet number of order one).
DensityResult solve_stationary_fp(const MetricGraph& g, const SparseOperator& A_fp,
                                  const FpConfig& cfg = {});

enum class Stepper { implicit_euler };

struct ParabolicConfig {
  double dt = 0.01;
  double t_final = 1.0;
  Stepper stepper = Stepper::implicit_euler;
};

void validate(const ParabolicConfig& cfg);

/// Called after every time step with the current time and state.
using EvolutionObserver = std::function<void(double, const GridFunction&)>;

/// Backward equation U_t - nu U'' + a U' = 0 with Kirchhoff vertex rows,
/// U(0) = phi, drift a read from the linearization at u. Returns U(t_final).
///
/// The step is shortened so that t_final is hit exactly. With the
/// second-order vertex stencil the iteration is positivity preserving for
/// dt >= h^2 / (2 nu); smaller steps may produce small undershoots at vertices.
GridFunction evolve_dual(const MetricGraph& g, const Hamiltonian& H, const GridFunction& u,
                         const GridFunction& phi, const ParabolicConfig& cfg,
                         SchemeOptions options = {}, const EvolutionObserver& observer = {});

/// Forward equation M m_t = A_fp m: the adjoint of evolve_dual. Conserves the
/// trapezoid mass exactly (second-order stencil).
GridFunction evolve_density(const MetricGraph& g, const Hamiltonian& H, const GridFunction& u,
                            const GridFunction& m0, const ParabolicConfig& cfg,
                            SchemeOptions options = {}, const EvolutionObserver& observer = {});

/// Literal vertex flux sum_j [nu_j d_j m(v) + dH_j/dp(v, d_j u) m(v)] per
/// vertex. The solver enforces the transposed rows instead, so this is a
/// consistency diagnostic that vanishes as h -> 0. The trace and slope of m
/// are taken one-sided from the first interior nodes of each edge.
std::vector<double> flux_residual(const MetricGraph& g, const Hamiltonian& H, const GridFunction& u,
                                  const GridFunction& m, SchemeOptions options = {});

}  // namespace mfgnet
