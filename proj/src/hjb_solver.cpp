#include "mfgnet/hjb_solver.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <functional>

#include <Eigen/SparseLU>

#include "mfgnet/errors.hpp"

namespace mfgnet {

namespace {

using Vector = Eigen::VectorXd;

struct NewtonResult {
  Vector z;
  double residual = 0.0;
  int iterations = 0;
};

// Damped Newton with a residual-norm line search (step halving down to
// cfg.min_step). Converged when the residual sup-norm drops below cfg.newton_tol,
// or when it stalls within the roundoff of evaluating the residual.
NewtonResult newton(Vector z, const std::function<ResidualVector(const Vector&)>& residual,
                    const std::function<SparseMatrix(const Vector&)>& jacobian,
                    const HjbConfig& cfg, const char* what) {
  ResidualVector F = residual(z);
  double sup = F.sup_norm();
  double l2 = F.l2_norm();
  double previous = INFINITY;
  int it = 0;
  while (sup >= cfg.newton_tol) {
    if (it >= cfg.max_newton_iters)
      throw NonConvergence(std::string(what) + ": Newton did not converge in " +
                               std::to_string(cfg.max_newton_iters) +
                               " iterations (residual " + format_number(sup) + ")",
                           sup, it);
    ++it;
    const Eigen::SparseMatrix<double> J = jacobian(z);
    // Interior rows scale like nu / h^2, so on fine meshes roundoff in the
    // residual itself can exceed newton_tol. Once Newton stalls at that floor
    // the iterate is as converged as it can get.
    if (sup > 0.5 * previous) {
      const Vector floor = J.cwiseAbs() * z.cwiseAbs();
      if (sup <= 64 * DBL_EPSILON * floor.lpNorm<Eigen::Infinity>()) break;
    }
    previous = sup;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(J);
    if (lu.info() != Eigen::Success)
      throw NumericallySingular(std::string(what) + ": singular Newton Jacobian (internal error)");
    const Eigen::Map<const Vector> f(F.values.data(), static_cast<Eigen::Index>(F.values.size()));
    const Vector step = lu.solve(-f);
    if (!step.allFinite())
      throw NumericallySingular(std::string(what) + ": non-finite Newton step (internal error)");

    double t = cfg.damping;
    Vector trial;
    ResidualVector Ft;
    for (;;) {
      trial = z + t * step;
      Ft = residual(trial);
      const double l2t = Ft.l2_norm();
      if ((std::isfinite(l2t) && l2t < (1.0 - 1e-4 * t) * l2) || t <= cfg.min_step) break;
      t *= 0.5;
    }
    z = std::move(trial);
    F = std::move(Ft);
    sup = F.sup_norm();
    l2 = F.l2_norm();
    if (!std::isfinite(sup))
      throw NonConvergence(std::string(what) + ": residual became non-finite", sup, it);
  }
  return {std::move(z), sup, it};
}

Vector to_vector(const GridFunction& u, std::size_t extra = 0) {
  Vector z(static_cast<Eigen::Index>(u.size() + extra));
  for (std::size_t i = 0; i < u.size(); ++i) z[static_cast<Eigen::Index>(i)] = u[i];
  return z;
}

GridFunction to_grid(const MetricGraph& g, const Vector& z) {
  std::vector<double> values(g.dof_count());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = z[static_cast<Eigen::Index>(i)];
  return GridFunction(g, std::move(values));
}

ErgodicSolution direct_ergodic(const HjbDiscretization& disc, const GridFunction& f,
                               GridFunction u0, double rho0, const HjbConfig& cfg) {
  const auto& g = disc.graph();
  const std::size_t n = g.dof_count();
  Vector z = to_vector(u0, 1);
  z[static_cast<Eigen::Index>(n)] = rho0;
  auto res = [&](const Vector& x) {
    return disc.residual(HjbSystem::ergodic, to_grid(g, x), f, x[static_cast<Eigen::Index>(n)], 0.0);
  };
  auto jac = [&](const Vector& x) {
    return disc.jacobian(HjbSystem::ergodic, to_grid(g, x), 0.0).matrix;
  };
  auto r = newton(std::move(z), res, jac, cfg, "ergodic HJB");
  ErgodicSolution out;
  out.u = to_grid(g, r.z);
  out.rho = r.z[static_cast<Eigen::Index>(n)];
  out.residual_norm = r.residual;
  out.newton_iters = r.iterations;
  return out;
}

struct DiscountPath {
  GridFunction u;
  double rho_estimate = 0.0;
  int newton_iters = 0;
  std::vector<std::pair<double, double>> trace;
};

// The discounted solutions grow like rho / lambda, so each solve is carried out
// on the deviation w = u - c from a constant c = rho_estimate / lambda with
// right-hand side f - lambda c; constants drop out of everything but lambda u.
// This keeps the Newton residual at the scale of the data for small lambda.
DiscountPath vanishing_discount(const HjbDiscretization& disc, const GridFunction& f,
                                double rho_guess, const HjbConfig& cfg) {
  const auto& g = disc.graph();
  DiscountPath path;
  path.rho_estimate = rho_guess;
  GridFunction w(g, 0.0);
  for (double lambda : cfg.lambda_schedule) {
    const double c = path.rho_estimate / lambda;
    GridFunction rhs = f;
    rhs += -lambda * c;
    w += -mean(g, w);
    Vector z = to_vector(w);
    auto res = [&](const Vector& x) {
      return disc.residual(HjbSystem::discounted, to_grid(g, x), rhs, 0.0, lambda);
    };
    auto jac = [&](const Vector& x) {
      return disc.jacobian(HjbSystem::discounted, to_grid(g, x), lambda).matrix;
    };
    auto r = newton(std::move(z), res, jac, cfg, "discounted HJB");
    w = to_grid(g, r.z);
    path.newton_iters += r.iterations;
    path.rho_estimate = lambda * c + lambda * mean(g, w);
    path.trace.emplace_back(lambda, path.rho_estimate);
  }
  w += -mean(g, w);
  path.u = std::move(w);
  return path;
}

}  // namespace

void validate(const HjbConfig& cfg) {
  if (!(cfg.newton_tol > 0.0)) throw ValidationError("solver.hjb.newton_tol", "must be positive");
  if (cfg.max_newton_iters <= 0)
    throw ValidationError("solver.hjb.max_newton_iters", "must be positive");
  if (!(cfg.damping > 0.0 && cfg.damping <= 1.0))
    throw ValidationError("solver.hjb.damping", "must lie in (0, 1]");
  if (!(cfg.min_step > 0.0 && cfg.min_step <= cfg.damping))
    throw ValidationError("solver.hjb.min_step", "must lie in (0, damping]");
  if (cfg.lambda_schedule.empty())
    throw ValidationError("solver.hjb.lambda_schedule", "must not be empty");
  for (std::size_t i = 0; i < cfg.lambda_schedule.size(); ++i) {
    if (!(cfg.lambda_schedule[i] > 0.0))
      throw ValidationError("solver.hjb.lambda_schedule", "entries must be positive");
    if (i > 0 && !(cfg.lambda_schedule[i] < cfg.lambda_schedule[i - 1]))
      throw ValidationError("solver.hjb.lambda_schedule", "must be strictly decreasing");
  }
  if (!(cfg.cross_check_tol > 0.0))
    throw ValidationError("solver.hjb.cross_check_tol", "must be positive");
}

GridFunction solve_discounted(const MetricGraph& g, const Hamiltonian& H, const GridFunction& f,
                              double lambda, const HjbConfig& cfg, const GridFunction* initial) {
  validate(cfg);
  if (!(lambda > 0.0)) throw ValidationError("lambda", "discount must be positive");
  require_compatible(g, f, "solve_discounted");
  const HjbDiscretization disc(g, H, cfg.scheme);
  Vector z = initial ? to_vector(*initial) : to_vector(GridFunction(g, 0.0));
  auto res = [&](const Vector& x) {
    return disc.residual(HjbSystem::discounted, to_grid(g, x), f, 0.0, lambda);
  };
  auto jac = [&](const Vector& x) {
    return disc.jacobian(HjbSystem::discounted, to_grid(g, x), lambda).matrix;
  };
  return to_grid(g, newton(std::move(z), res, jac, cfg, "discounted HJB").z);
}

ErgodicSolution solve_ergodic(const MetricGraph& g, const Hamiltonian& H, const GridFunction& f,
                              const HjbConfig& cfg, const ErgodicSolution* warm) {
  validate(cfg);
  require_compatible(g, f, "solve_ergodic");
  for (double v : f.values())
    if (!std::isfinite(v)) throw ValidationError("rhs", "non-finite right-hand side");
  const HjbDiscretization disc(g, H, cfg.scheme);
  const double rho_guess = mean(g, f - disc.hamiltonian_at_zero());

  ErgodicSolution out;
  std::optional<DiscountPath> path;
  if (cfg.method == ErgodicMethod::vanishing_discount) {
    path = vanishing_discount(disc, f, rho_guess, cfg);
    out = direct_ergodic(disc, f, path->u, path->rho_estimate, cfg);
    out.newton_iters += path->newton_iters;
    out.lambda_trace = path->trace;
  } else if (warm && warm->u.compatible_with(g)) {
    out = direct_ergodic(disc, f, warm->u, warm->rho, cfg);
  } else {
    out = direct_ergodic(disc, f, GridFunction(g, 0.0), rho_guess, cfg);
  }

  if (cfg.cross_check) {
    if (!path) {
      path = vanishing_discount(disc, f, rho_guess, cfg);
      out.lambda_trace = path->trace;
    }
    const double gap = std::abs(path->rho_estimate - out.rho);
    if (gap > cfg.cross_check_tol)
      throw Error("ergodic cross-check failed: direct rho " + format_number(out.rho) +
                  " vs vanishing-discount estimate " + format_number(path->rho_estimate));
  }
  return out;
}

double ergodic_constant_bound(const MetricGraph& g, const Hamiltonian& H, const GridFunction& f) {
  require_compatible(g, f, "ergodic_constant_bound");
  const HjbDiscretization disc(g, H);
  return (disc.hamiltonian_at_zero() - f).max_abs();
}

double kirchhoff_consistency(const MetricGraph& g, const Hamiltonian& H, const GridFunction& u,
                             SchemeOptions options) {
  const auto other = options.stencil == VertexStencil::second_order ? VertexStencil::first_order
                                                                    : VertexStencil::second_order;
  double out = 0.0;
  for (double s : HjbDiscretization(g, H, options).kirchhoff_sums(u, other))
    out = std::max(out, std::abs(s));
  return out;
}

ComparisonReport verify_comparison(const MetricGraph& g, const Hamiltonian& H, double lambda,
                                   const GridFunction& u1, const GridFunction& u2,
                                   SchemeOptions options, double tol) {
  if (!(lambda > 0.0)) throw ValidationError("lambda", "discount must be positive");
  require_compatible(g, u1, "verify_comparison");
  require_compatible(g, u2, "verify_comparison");
  options.scale_vertex_rows = false;
  const HjbDiscretization disc(g, H, options);
  const GridFunction zero(g, 0.0);
  const auto F1 = disc.residual(HjbSystem::discounted, u1, zero, 0.0, lambda);
  const auto F2 = disc.residual(HjbSystem::discounted, u2, zero, 0.0, lambda);

  ComparisonReport out;
  out.min_interior_gap = INFINITY;
  out.min_vertex_gap = INFINITY;
  for (std::size_t i = 0; i < g.dof_count(); ++i) {
    const double d = F1.values[i] - F2.values[i];
    if (i < g.vertex_count())
      out.min_vertex_gap = std::min(out.min_vertex_gap, -d);
    else
      out.min_interior_gap = std::min(out.min_interior_gap, d);
  }
  out.min_difference = (u1 - u2).min();
  if (out.min_interior_gap < -tol || out.min_vertex_gap < -tol)
    out.status = ComparisonStatus::inapplicable;
  else
    out.status = out.min_difference >= -tol ? ComparisonStatus::holds : ComparisonStatus::violated;
  return out;
}

}  // namespace mfgnet
