#pragma once

#include <utility>
#include <vector>

#include "mfgnet/discrete_operators.hpp"

namespace mfgnet {

enum class ErgodicMethod { direct_ergodic, vanishing_discount };

struct HjbConfig {
  double newton_tol = 1e-10;
  int max_newton_iters = 100;
  /// Initial step length of the damped Newton line search.
  double damping = 1.0;
  /// Line-search floor; the step is halved down to this value.
  double min_step = 0x1p-20;
  std::vector<double> lambda_schedule{1.0, 0.5, 0.1, 0.01, 0.001};
  ErgodicMethod method = ErgodicMethod::direct_ergodic;
  /// Run both methods and compare the ergodic constants.
  bool cross_check = false;
  double cross_check_tol = 1e-2;
  SchemeOptions scheme;

  friend bool operator==(const HjbConfig&, const HjbConfig&) = default;
};

void validate(const HjbConfig& cfg);

struct ErgodicSolution {
  GridFunction u;
  double rho = 0.0;
  double residual_norm = 0.0;
  int newton_iters = 0;
  /// (lambda, lambda * mean(u_lambda)) along the vanishing-discount path.
  std::vector<std::pair<double, double>> lambda_trace;
};

/// Solves -nu u'' + H(x, u') + lambda u = f with Kirchhoff vertex rows by
/// damped Newton. `initial` is an optional warm start.
GridFunction solve_discounted(const MetricGraph& g, const Hamiltonian& H, const GridFunction& f,
                              double lambda, const HjbConfig& cfg = {},
                              const GridFunction* initial = nullptr);

/// Solves -nu u'' + H(x, u') + rho = f, Kirchhoff rows, integral of u = 0, for (u, rho).
/// `warm` seeds the direct method (used by fixed-point sweeps).
ErgodicSolution solve_ergodic(const MetricGraph& g, const Hamiltonian& H, const GridFunction& f,
                              const HjbConfig& cfg = {}, const ErgodicSolution* warm = nullptr);

/// Upper bound max |H(., 0) - f| of the ergodic constant.
double ergodic_constant_bound(const MetricGraph& g, const Hamiltonian& H, const GridFunction& f);

/// Largest |Kirchhoff sum| of u measured with the vertex stencil the solver did
/// not use. The enforced sums vanish to solver tolerance; this one shrinks with h
/// and serves as a vertex consistency diagnostic.
double kirchhoff_consistency(const MetricGraph& g, const Hamiltonian& H, const GridFunction& u,
                             SchemeOptions options = {});

enum class ComparisonStatus {
  holds,         ///< hypotheses hold and u1 >= u2 at every DOF
  violated,      ///< hypotheses hold but u1 < u2 somewhere
  inapplicable,  ///< hypotheses not satisfied
};

struct ComparisonReport {
  ComparisonStatus status = ComparisonStatus::inapplicable;
  double min_interior_gap = 0.0;  ///< min over interior rows of F(u1) - F(u2)
  double min_vertex_gap = 0.0;    ///< min over vertices of K(u2) - K(u1)
  double min_difference = 0.0;    ///< min over DOFs of u1 - u2
};

/// Checks the discrete hypotheses of the comparison principle for the
/// discounted operator F(u) = -nu u'' + H_num + lambda u and Kirchhoff sums K,
/// and whether u1 >= u2 follows. `tol` is the slack allowed in every inequality.
ComparisonReport verify_comparison(const MetricGraph& g, const Hamiltonian& H, double lambda,
                                   const GridFunction& u1, const GridFunction& u2,
                                   SchemeOptions options = {}, double tol = 1e-9);

}  // namespace mfgnet
