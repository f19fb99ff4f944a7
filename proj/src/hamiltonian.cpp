#include "mfgnet/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "mfgnet/errors.hpp"
#include "mfgnet/kernels.hpp"

namespace mfgnet {

namespace {

double eval(const EdgeProfile& f, double x) { return f ? f(x) : 0.0; }

// Minimizer of a convex H between two slopes where dH/dp changes sign.
double bracketed_minimizer(const Hamiltonian& H, EdgeId j, double x, double lo, double hi) {
  for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo) + std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (H.derivative(j, x, mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

Hamiltonian Hamiltonian::quadratic(std::size_t edge_count, double kappa) {
  return quadratic(std::vector<QuadraticEdge>(edge_count, QuadraticEdge{kappa, {}, {}}));
}

Hamiltonian Hamiltonian::quadratic(std::vector<QuadraticEdge> edges) {
  if (edges.empty()) throw ValidationError("hamiltonian", "no edges");
  for (const auto& e : edges)
    if (!(e.kappa > 0.0)) throw ValidationError("hamiltonian.kappa", "kappa must be positive");
  Hamiltonian H;
  H.quadratic_ = std::move(edges);
  double kmin = H.quadratic_.front().kappa, kmax = kmin;
  for (const auto& e : H.quadratic_) {
    kmin = std::min(kmin, e.kappa);
    kmax = std::max(kmax, e.kappa);
  }
  H.growth_delta = 0.5 * kmin;
  H.growth_c = 2.0 * kmax;
  return H;
}

Hamiltonian Hamiltonian::general(PointFunction value, PointFunction derivative,
                                 GeneralScheme scheme, bool convex) {
  if (!value || !derivative) throw ValidationError("hamiltonian", "value and derivative are required");
  Hamiltonian H;
  H.value_ = std::move(value);
  H.derivative_ = std::move(derivative);
  H.scheme_ = scheme;
  H.convex_ = convex;
  return H;
}

Hamiltonian Hamiltonian::clipped_quadratic(std::vector<QuadraticEdge> edges, double cap) {
  if (!(cap > 0.0)) throw ValidationError("hamiltonian.cap", "must be positive");
  const auto base = std::make_shared<const Hamiltonian>(quadratic(std::move(edges)));
  auto value = [base, cap](EdgeId j, double x, double p) {
    return std::clamp(base->value(j, x, p), -cap, cap);
  };
  auto derivative = [base, cap](EdgeId j, double x, double p) {
    const double q = base->value(j, x, p);
    return q > -cap && q < cap ? base->derivative(j, x, p) : 0.0;
  };
  auto H = general(value, derivative, GeneralScheme::upwind, false);
  return H;
}

double Hamiltonian::value(EdgeId j, double x, double p) const {
  if (!is_quadratic()) return value_(j, x, p);
  const auto& q = quadratic_edge(j);
  return q.kappa * p * p + eval(q.drift, x) * p + eval(q.potential, x);
}

double Hamiltonian::derivative(EdgeId j, double x, double p) const {
  if (!is_quadratic()) return derivative_(j, x, p);
  const auto& q = quadratic_edge(j);
  return 2.0 * q.kappa * p + eval(q.drift, x);
}

NumericalHamiltonian numerical_hamiltonian(const Hamiltonian& H, EdgeId j, double x, double p_minus,
                                           double p_plus) {
  if (H.is_quadratic()) {
    const auto& q = H.quadratic_edge(j);
    const auto g = kernels::quadratic_godunov(q.kappa, eval(q.drift, x), eval(q.potential, x),
                                              p_minus, p_plus);
    return {g.value, g.d_minus, g.d_plus};
  }

  if (H.scheme() == GeneralScheme::centered) {
    const double p = 0.5 * (p_minus + p_plus);
    const double d = 0.5 * H.derivative(j, x, p);
    return {H.value(j, x, p), d, d};
  }

  const double dm = H.derivative(j, x, p_minus);
  const double dp = H.derivative(j, x, p_plus);
  if (dm >= 0.0 && dp >= 0.0) return {H.value(j, x, p_minus), dm, 0.0};
  if (dm <= 0.0 && dp <= 0.0) return {H.value(j, x, p_plus), 0.0, dp};
  if (dm < 0.0 && dp > 0.0) {
    // rarefaction: the minimum of H between the slopes
    const double p_star = bracketed_minimizer(H, j, x, p_minus, p_plus);
    return {H.value(j, x, p_star), 0.0, 0.0};
  }
  // shock: the larger of the two one-sided values
  const double hm = H.value(j, x, p_minus);
  const double hp = H.value(j, x, p_plus);
  if (hm >= hp) return {hm, dm, 0.0};
  return {hp, 0.0, dp};
}

HamiltonianDiagnostics check_hamiltonian(const Hamiltonian& H, const MetricGraph& g,
                                         int samples_per_edge, double p_range) {
  HamiltonianDiagnostics out;
  for (const auto& e : g.edges()) {
    for (int s = 0; s <= samples_per_edge; ++s) {
      const double x = e.length * s / samples_per_edge;
      for (int a = -8; a <= 8; ++a) {
        const double p = p_range * a / 8.0;
        const double q = p + p_range / 4.0;
        const double mid = 0.5 * (H.value(e.id, x, p) + H.value(e.id, x, q)) -
                           H.value(e.id, x, 0.5 * (p + q));
        const double scale = 1e-10 * (1.0 + std::abs(H.value(e.id, x, p)));
        if (mid < -scale) out.convex = false;
        out.worst_secant_gap = std::min(out.worst_secant_gap, mid);
        if (H.growth_delta > 0.0 || H.growth_c > 0.0) {
          const double v = H.value(e.id, x, p);
          if (v < H.growth_delta * p * p - H.growth_c - 1e-12 ||
              v > H.growth_c * p * p + H.growth_c + 1e-12)
            out.growth_ok = false;
        }
      }
    }
  }
  return out;
}

}  // namespace mfgnet
