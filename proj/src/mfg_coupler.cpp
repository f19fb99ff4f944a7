#include "mfgnet/mfg_coupler.hpp"

#include <algorithm>
#include <cmath>

namespace mfgnet {

namespace {

// Convexity gap of the numerical Hamiltonian at every interior node: the
// first-order Taylor expansion at the slopes of `base`, evaluated at the slopes
// of `other`. Vertex entries are zero (the mass operator ignores them).
GridFunction bregman_field(const MetricGraph& g, const Hamiltonian& H, const GridFunction& base,
                           const GridFunction& other) {
  GridFunction out(g, 0.0);
  for (const auto& e : g.edges()) {
    const auto pb = base.edge_profile(g, e.id);
    const auto po = other.edge_profile(g, e.id);
    for (int k = 1; k < e.cells; ++k) {
      const double bm = (pb[k] - pb[k - 1]) / e.h, bp = (pb[k + 1] - pb[k]) / e.h;
      const double om = (po[k] - po[k - 1]) / e.h, op = (po[k + 1] - po[k]) / e.h;
      const double x = e.node_x(k);
      const auto hb = numerical_hamiltonian(H, e.id, x, bm, bp);
      const auto ho = numerical_hamiltonian(H, e.id, x, om, op);
      out[g.layout()->interior_dof(e.id, k)] =
          ho.value - hb.value - hb.d_minus * (om - bm) - hb.d_plus * (op - bp);
    }
  }
  return out;
}

GridFunction uniform_density(const MetricGraph& g) { return GridFunction(g, 1.0 / g.total_length()); }

}  // namespace

Coupling Coupling::linear(double scale) {
  return {"linear", {scale}, [scale](double m) { return scale * m; },
          [scale](double) { return scale; }, scale >= 0.0};
}

Coupling Coupling::power(double scale, double exponent) {
  if (!(exponent > 0.0)) throw ValidationError("coupling.parameters", "exponent must be positive");
  return {"power", {scale, exponent},
          [scale, exponent](double m) { return scale * std::pow(m, exponent); },
          [scale, exponent](double m) { return scale * exponent * std::pow(m, exponent - 1.0); },
          scale >= 0.0};
}

Coupling Coupling::logarithmic(double scale) {
  return {"log", {scale}, [scale](double m) { return scale * std::log(m); },
          [scale](double m) { return scale / m; }, scale >= 0.0};
}

Coupling Coupling::negative_linear(double scale) {
  return {"negative_linear", {scale}, [scale](double m) { return -scale * m; },
          [scale](double) { return -scale; }, false};
}

Coupling Coupling::builtin(const std::string& name, const std::vector<double>& p, bool monotone) {
  auto need = [&](std::size_t lo, std::size_t hi) {
    if (p.size() < lo || p.size() > hi)
      throw ValidationError("coupling.parameters",
                            "coupling '" + name + "' takes " + std::to_string(lo) +
                                (lo == hi ? "" : "-" + std::to_string(hi)) + " parameters");
  };
  Coupling V;
  if (name == "linear") {
    need(0, 1);
    V = linear(p.empty() ? 1.0 : p[0]);
  } else if (name == "power") {
    need(2, 2);
    V = power(p[0], p[1]);
  } else if (name == "log") {
    need(0, 1);
    V = logarithmic(p.empty() ? 1.0 : p[0]);
  } else if (name == "negative_linear") {
    need(0, 1);
    V = negative_linear(p.empty() ? 1.0 : p[0]);
  } else {
    throw ValidationError("coupling.name", "unknown coupling '" + name + "'");
  }
  V.monotone = monotone;
  return V;
}

CouplingCheck check_coupling(const Coupling& V, double m_max, int samples) {
  CouplingCheck out;
  out.min_derivative = INFINITY;
  for (int i = 1; i <= samples; ++i) {
    const double d = V.derivative(m_max * i / samples);
    out.min_derivative = std::min(out.min_derivative, d);
    if (!(d >= -1e-12)) out.monotone = false;
  }
  return out;
}

GridFunction apply_coupling(const Coupling& V, const GridFunction& m) {
  GridFunction out = m;
  for (double& x : out.values()) x = V.value(x);
  return out;
}

void validate(const MfgConfig& cfg) {
  if (!(cfg.damping > 0.0 && cfg.damping <= 1.0))
    throw ValidationError("solver.damping", "must lie in (0, 1]");
  if (!(cfg.fp_tol > 0.0)) throw ValidationError("solver.fp_tol", "must be positive");
  if (cfg.max_outer_iters <= 0) throw ValidationError("solver.max_outer_iters", "must be positive");
  if (!(cfg.audit_tol > 0.0)) throw ValidationError("solver.audit_tol", "must be positive");
  validate(cfg.hjb);
}

FixedPointStep apply_T(const MetricGraph& g, const Hamiltonian& H, const Coupling& V,
                       const GridFunction& mu, const MfgConfig& cfg, const ErgodicSolution* warm) {
  require_compatible(g, mu, "apply_T");
  FixedPointStep out;
  ErgodicSolution hjb;
  try {
    hjb = solve_ergodic(g, H, apply_coupling(V, mu), cfg.hjb, warm);
  } catch (const ValidationError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(Stage::hjb, e.what());
  }
  try {
    const auto d = solve_stationary_fp(g, assemble_fp_operator(g, H, hjb.u, cfg.hjb.scheme), cfg.fp);
    out.m = d.m;
  } catch (const Error& e) {
    throw StageError(Stage::fp, e.what());
  }
  out.u = std::move(hjb.u);
  out.rho = hjb.rho;
  out.newton_iters = hjb.newton_iters;
  return out;
}

double ResidualAudit::worst() const noexcept {
  return std::max({hjb_interior, fp_interior, kirchhoff, flux, u_integral, m_mass});
}

ResidualAudit audit(const MetricGraph& g, const Hamiltonian& H, const Coupling& V,
                    const GridFunction& u, const GridFunction& m, double rho,
                    SchemeOptions options) {
  require_compatible(g, u, "audit");
  require_compatible(g, m, "audit");
  ResidualAudit out;
  options.scale_vertex_rows = false;
  const HjbDiscretization disc(g, H, options);
  const auto r = disc.residual(HjbSystem::ergodic, u, apply_coupling(V, m), rho, 0.0);
  out.hjb_interior = r.sup_norm(RowKind::interior);
  out.kirchhoff = r.sup_norm(RowKind::kirchhoff);

  const auto A = assemble_fp_operator(g, H, u, options);
  const Eigen::Map<const Eigen::VectorXd> mv(m.values().data(), static_cast<Eigen::Index>(m.size()));
  const Eigen::VectorXd fp = A.matrix * mv;
  for (std::size_t i = 0; i < g.vertex_count(); ++i)
    out.flux = std::max(out.flux, std::abs(fp[static_cast<Eigen::Index>(i)]));
  for (const auto& e : g.edges())
    for (int k = 1; k < e.cells; ++k) {
      const auto i = static_cast<Eigen::Index>(g.layout()->interior_dof(e.id, k));
      out.fp_interior = std::max(out.fp_interior, std::abs(fp[i]) / e.h);
    }
  out.u_integral = std::abs(integrate(g, u));
  out.m_mass = std::abs(integrate(g, m) - 1.0);
  out.min_m = m.min();
  return out;
}

MfgSolution solve_mfg(const MetricGraph& g, const Hamiltonian& H, const Coupling& V,
                      const MfgConfig& cfg, const GridFunction* initial) {
  validate(cfg);
  MfgSolution sol;
  if (!V.monotone)
    sol.warnings.push_back("coupling '" + V.name +
                           "' is not monotone: uniqueness is not guaranteed and the "
                           "iteration may fail to converge");

  GridFunction mu;
  if (cfg.initial == InitialDensity::user) {
    if (!initial) throw ValidationError("solver.initial_density", "user density not supplied");
    require_compatible(g, *initial, "initial density");
    if (initial->min() < 0.0)
      throw ValidationError("solver.initial_density", "density must be nonnegative");
    const double mass = integrate(g, *initial);
    if (!(mass > 0.0)) throw ValidationError("solver.initial_density", "density has zero mass");
    mu = (1.0 / mass) * *initial;
  } else {
    mu = uniform_density(g);
  }

  std::optional<ErgodicSolution> warm;
  for (int k = 1; k <= cfg.max_outer_iters; ++k) {
    auto step = apply_T(g, H, V, mu, cfg, warm ? &*warm : nullptr);
    const double update = (step.m - mu).max_abs();
    sol.history.push_back({update, step.rho});
    if (update < cfg.fp_tol) {
      sol.u = std::move(step.u);
      sol.m = std::move(step.m);
      sol.rho = step.rho;
      sol.fixed_point_iters = k;
      sol.final_update_norm = update;
      sol.audit = audit(g, H, V, sol.u, sol.m, sol.rho, cfg.hjb.scheme);
      return sol;
    }
    ErgodicSolution w;
    w.u = std::move(step.u);
    w.rho = step.rho;
    warm = std::move(w);
    mu *= 1.0 - cfg.damping;
    mu += cfg.damping * step.m;
  }
  const std::string message = "MFG fixed point did not converge in " +
                              std::to_string(cfg.max_outer_iters) + " iterations (last update " +
                              format_number(sol.history.back().update) + ")";
  throw MfgNonConvergence(message, std::move(sol.history));
}

EnergyReport energy_identity_gap(const MetricGraph& g, const Hamiltonian& H, const Coupling& V,
                                 const MfgSolution& sol1, const MfgSolution& sol2,
                                 SchemeOptions options) {
  for (const auto* s : {&sol1, &sol2}) {
    require_compatible(g, s->u, "energy_identity_gap");
    require_compatible(g, s->m, "energy_identity_gap");
  }
  EnergyReport out;
  out.coupling = pairing(g, sol1.m - sol2.m,
                         apply_coupling(V, sol1.m) - apply_coupling(V, sol2.m), options);
  out.bregman1 = pairing(g, sol1.m, bregman_field(g, H, sol1.u, sol2.u), options);
  out.bregman2 = pairing(g, sol2.m, bregman_field(g, H, sol2.u, sol1.u), options);
  out.sum = out.coupling + out.bregman1 + out.bregman2;
  return out;
}

}  // namespace mfgnet
