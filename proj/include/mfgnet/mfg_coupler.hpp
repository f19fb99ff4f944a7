#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mfgnet/errors.hpp"
#include "mfgnet/fp_solver.hpp"
#include "mfgnet/hjb_solver.hpp"

namespace mfgnet {

/// Local coupling V[m](x) = V(m(x)).
struct Coupling {
  std::string name;
  std::vector<double> parameters;
  std::function<double(double)> value;
  std::function<double(double)> derivative;
  /// Claimed by the user: V' >= 0, which grants uniqueness.
  bool monotone = true;

  static Coupling linear(double scale = 1.0);
  /// scale * m^exponent, exponent > 0.
  static Coupling power(double scale, double exponent);
  /// scale * log(m); defined for m > 0 only.
  static Coupling logarithmic(double scale = 1.0);
  /// -scale * m: a deliberately non-monotone coupling.
  static Coupling negative_linear(double scale = 1.0);
  /// Builds a named built-in from its parameter list.
  static Coupling builtin(const std::string& name, const std::vector<double>& parameters,
                          bool monotone);
};

struct CouplingCheck {
  bool monotone = true;
  double min_derivative = 0.0;
};

/// Samples V' on (0, m_max]. Monotone means V' >= -1e-12 at every sample.
CouplingCheck check_coupling(const Coupling& V, double m_max = 10.0, int samples = 400);

GridFunction apply_coupling(const Coupling& V, const GridFunction& m);

enum class InitialDensity { uniform, user };

struct MfgConfig {
  double damping = 0.5;
  double fp_tol = 1e-8;
  int max_outer_iters = 500;
  HjbConfig hjb;
  FpConfig fp;
  InitialDensity initial = InitialDensity::uniform;
  /// Bound applied to every line of the final residual audit.
  double audit_tol = 1e-6;

  friend bool operator==(const MfgConfig&, const MfgConfig&) = default;
};

void validate(const MfgConfig& cfg);

/// One evaluation of the fixed-point map: u, rho from the ergodic HJB with
/// right-hand side V(mu), then m from the FP operator linearized at u.
struct FixedPointStep {
  GridFunction u;
  double rho = 0.0;
  GridFunction m;
  int newton_iters = 0;
};

enum class Stage { hjb, fp };

/// A solver failure inside the fixed-point map, tagged with its stage.
class StageError : public Error {
 public:
  StageError(Stage stage, const std::string& message)
      : Error(std::string(stage == Stage::hjb ? "HJB stage: " : "FP stage: ") + message),
        stage_(stage) {}
  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

FixedPointStep apply_T(const MetricGraph& g, const Hamiltonian& H, const Coupling& V,
                       const GridFunction& mu, const MfgConfig& cfg = {},
                       const ErgodicSolution* warm = nullptr);

/// Residuals of the six conditions of the stationary system, plus min m.
struct ResidualAudit {
  double hjb_interior = 0.0;  ///< -nu u'' + H(u') + rho - V(m)
  double fp_interior = 0.0;   ///< FP interior rows divided by h
  double kirchhoff = 0.0;     ///< sum_j nu_j d_j u(v)
  double flux = 0.0;          ///< FP vertex rows
  double u_integral = 0.0;    ///< |integral of u|
  double m_mass = 0.0;        ///< |integral of m - 1|
  double min_m = 0.0;

  double worst() const noexcept;
  bool passed(double tol) const noexcept { return worst() < tol && min_m > 0.0; }
};

ResidualAudit audit(const MetricGraph& g, const Hamiltonian& H, const Coupling& V,
                    const GridFunction& u, const GridFunction& m, double rho,
                    SchemeOptions options = {});

struct IterationRecord {
  double update = 0.0;  ///< sup |m_k - mu_k|
  double rho = 0.0;
};

struct MfgSolution {
  GridFunction u;
  GridFunction m;
  double rho = 0.0;
  int fixed_point_iters = 0;
  double final_update_norm = 0.0;
  std::vector<IterationRecord> history;
  ResidualAudit audit;
  std::vector<std::string> warnings;
};

/// The fixed-point iteration ran out of iterations; the history is attached.
class MfgNonConvergence : public NonConvergence {
 public:
  MfgNonConvergence(const std::string& what, std::vector<IterationRecord> history)
      : NonConvergence(what, history.empty() ? 0.0 : history.back().update,
                       static_cast<int>(history.size())),
        history_(std::move(history)) {}
  const std::vector<IterationRecord>& history() const noexcept { return history_; }

 private:
  std::vector<IterationRecord> history_;
};

/// Damped iteration mu <- (1 - theta) mu + theta m until sup |m - mu| < fp_tol.
/// `initial` is required when cfg.initial is InitialDensity::user.
MfgSolution solve_mfg(const MetricGraph& g, const Hamiltonian& H, const Coupling& V,
                      const MfgConfig& cfg = {}, const GridFunction* initial = nullptr);

/// The three terms of the uniqueness energy identity for two solutions:
/// coupling = <m1 - m2, V(m1) - V(m2)> and bregman_i = <m_i, B_i>, with B_i the
/// convexity gap of the numerical Hamiltonian at the slopes of u_i towards
/// those of u_{3-i}. For exact solutions the sum vanishes.
struct EnergyReport {
  double coupling = 0.0;
  double bregman1 = 0.0;
  double bregman2 = 0.0;
  double sum = 0.0;
};

EnergyReport energy_identity_gap(const MetricGraph& g, const Hamiltonian& H, const Coupling& V,
                                 const MfgSolution& sol1, const MfgSolution& sol2,
                                 SchemeOptions options = {});

}  // namespace mfgnet
