#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "mfgnet/hamiltonian.hpp"
#include "mfgnet/metric_graph.hpp"

namespace mfgnet {

struct SchemeOptions {
  VertexStencil stencil = VertexStencil::second_order;
  /// Multiply Kirchhoff rows of solver systems by 1 / (mean incident h).
  bool scale_vertex_rows = true;

  friend bool operator==(const SchemeOptions&, const SchemeOptions&) = default;
};

enum class RowKind : std::uint8_t { interior, kirchhoff, flux, normalization };

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct SparseOperator {
  SparseMatrix matrix;
  std::vector<RowKind> row_kinds;

  Eigen::Index rows() const noexcept { return matrix.rows(); }
  Eigen::Index cols() const noexcept { return matrix.cols(); }
};

struct ResidualVector {
  std::vector<double> values;
  std::vector<RowKind> kinds;

  double sup_norm() const noexcept;
  double sup_norm(RowKind kind) const noexcept;
  double l2_norm() const noexcept;
};

/// Which linear system an HJB assembly targets.
enum class HjbSystem {
  ergodic,     ///< unknowns (u, rho); interior + Kirchhoff + normalization rows
  discounted,  ///< unknowns u; lambda u added to interior rows
  pde_block,   ///< unknowns u; interior + Kirchhoff rows, no lambda, no rho
};

/// Discrete HJB operator on a fixed graph and Hamiltonian. Holds the node
/// coefficients of the quadratic family so repeated assembly (Newton
/// iterations, fixed-point sweeps) does not resample them.
class HjbDiscretization {
 public:
  HjbDiscretization(const MetricGraph& g, const Hamiltonian& H, SchemeOptions options = {});

  const MetricGraph& graph() const noexcept { return *graph_; }
  const Hamiltonian& hamiltonian() const noexcept { return *hamiltonian_; }
  const SchemeOptions& options() const noexcept { return options_; }

  /// Per-node data of the numerical Hamiltonian at u, stored in DOF order
  /// (vertex entries unused).
  struct NodeData {
    std::vector<double> residual;  ///< -nu u'' + H_num (no lambda, rho or rhs)
    std::vector<double> d_minus;
    std::vector<double> d_plus;
  };
  NodeData evaluate(const GridFunction& u) const;

  /// Residual of the chosen system. `rhs` enters interior rows as -rhs;
  /// `lambda` is used by the discounted system, `rho` by the ergodic one.
  ResidualVector residual(HjbSystem system, const GridFunction& u, const GridFunction& rhs,
                          double rho, double lambda) const;

  /// Exact Jacobian of residual() with respect to the unknowns of `system`.
  SparseOperator jacobian(HjbSystem system, const GridFunction& u, double lambda,
                          bool scale_vertex_rows) const;
  SparseOperator jacobian(HjbSystem system, const GridFunction& u, double lambda) const {
    return jacobian(system, u, lambda, options_.scale_vertex_rows);
  }

  /// Raw Kirchhoff sums sum_j nu_j d_j u(v), one per vertex.
  std::vector<double> kirchhoff_sums(const GridFunction& u) const;
  std::vector<double> kirchhoff_sums(const GridFunction& u, VertexStencil stencil) const;

  double vertex_row_scale(VertexId v) const { return vertex_scale_.at(v.value); }

  /// Drift a = dH_num/dp^- + dH_num/dp^+ along each edge (N_j + 1 values).
  /// Endpoint values use the one-sided slope of that edge, dH_j/dp(x_v, u_j'(x_v)).
  std::vector<std::vector<double>> drift_profiles(const GridFunction& u) const;

  /// H(x, 0) at every DOF: the numerical Hamiltonian at zero slopes on interior
  /// nodes and H_j(x_v, 0) of the first incident edge at vertices.
  GridFunction hamiltonian_at_zero() const;

 private:
  const MetricGraph* graph_;
  const Hamiltonian* hamiltonian_;
  SchemeOptions options_;
  std::vector<std::vector<double>> edge_drift_;      // c at interior nodes
  std::vector<std::vector<double>> edge_potential_;  // f0 at interior nodes
  std::vector<double> vertex_scale_;
};

/// Residual of the ergodic system at (u, rho) with right-hand side rhs:
/// interior rows -nu u'' + H_num + rho - rhs, Kirchhoff rows, and the
/// normalization row integrate(u).
ResidualVector assemble_hjb_system(const MetricGraph& g, const Hamiltonian& H,
                                   const GridFunction& rhs, const GridFunction& u, double rho,
                                   SchemeOptions options = {});

/// Jacobian of assemble_hjb_system with respect to (u, rho).
SparseOperator assemble_hjb_jacobian(const MetricGraph& g, const Hamiltonian& H,
                                     const GridFunction& u, SchemeOptions options = {});

/// Weak form of the dual generator w -> nu w'' - a w' at u, with the
/// Kirchhoff conditions folded into the vertex rows. Its transpose is the
/// Fokker-Planck operator.
SparseOperator assemble_dual_generator(const MetricGraph& g, const Hamiltonian& H,
                                       const GridFunction& u, SchemeOptions options = {});

/// Fokker-Planck operator m -> nu m'' + (a m)' (in weak form) at u: the exact
/// transpose of assemble_dual_generator. Vertex rows are the discrete flux
/// conservation conditions.
SparseOperator assemble_fp_operator(const MetricGraph& g, const Hamiltonian& H,
                                    const GridFunction& u, SchemeOptions options = {});

/// Mass operator pairing densities with test functions: <m, w> = m^T M w.
/// Interior rows carry h_j; with the second-order stencil the vertex rows
/// carry h_j/2 on the node next to the vertex on each incident edge. With the
/// first-order stencil the vertex rows are empty: M 1 is then the trapezoid
/// weights with the vertex entries dropped.
SparseMatrix mass_operator(const MetricGraph& g, SchemeOptions options = {});

/// Discrete version of the integral of m times w over the network.
double pairing(const MetricGraph& g, const GridFunction& m, const GridFunction& w,
               SchemeOptions options = {});

}  // namespace mfgnet
