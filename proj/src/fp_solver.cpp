#include "mfgnet/fp_solver.hpp"

#include <cmath>

#include <Eigen/SparseLU>

#include "mfgnet/errors.hpp"

namespace mfgnet {

namespace {

using ColMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

Eigen::Map<const Vector> view(const GridFunction& f) {
  return {f.values().data(), static_cast<Eigen::Index>(f.size())};
}

GridFunction from_vector(const MetricGraph& g, const Vector& x) {
  return GridFunction(g, std::vector<double>(x.data(), x.data() + x.size()));
}

// Row with the largest diagonal surplus |a_ii| - sum_{j != i} |a_ij|. Its
// information is redundant up to rounding, since the weighted column sums vanish.
std::size_t most_dominant_row(const SparseMatrix& A) {
  std::size_t best = 0;
  double best_surplus = -INFINITY;
  for (Eigen::Index r = 0; r < A.outerSize(); ++r) {
    double diag = 0.0, off = 0.0;
    for (SparseMatrix::InnerIterator it(A, r); it; ++it)
      (it.col() == r ? diag : off) += std::abs(it.value());
    if (diag - off > best_surplus) {
      best_surplus = diag - off;
      best = static_cast<std::size_t>(r);
    }
  }
  return best;
}

int step_count(const ParabolicConfig& cfg) {
  return std::max(1, static_cast<int>(std::ceil(cfg.t_final / cfg.dt - 1e-9)));
}

}  // namespace

DensityResult solve_stationary_fp(const MetricGraph& g, const SparseOperator& A_fp,
                                  const FpConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(g.dof_count());
  if (A_fp.rows() != n || A_fp.cols() != n)
    throw ValidationError("fp operator", "size does not match the graph");

  const std::size_t replaced = most_dominant_row(A_fp.matrix);
  const auto weights = g.quadrature_weights();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(A_fp.matrix.nonZeros()) + weights.size());
  for (Eigen::Index r = 0; r < n; ++r) {
    if (static_cast<std::size_t>(r) == replaced) continue;
    for (SparseMatrix::InnerIterator it(A_fp.matrix, r); it; ++it)
      trip.emplace_back(r, it.col(), it.value());
  }
  for (Eigen::Index c = 0; c < n; ++c)
    trip.emplace_back(static_cast<Eigen::Index>(replaced), c, weights[static_cast<std::size_t>(c)]);
  ColMatrix B(n, n);
  B.setFromTriplets(trip.begin(), trip.end());

  Eigen::SparseLU<ColMatrix> lu;
  lu.compute(B);
  if (lu.info() != Eigen::Success)
    throw NumericallySingular("stationary FP: kernel is not one-dimensional (factorization failed)");
  Vector rhs = Vector::Zero(n);
  rhs[static_cast<Eigen::Index>(replaced)] = 1.0;
  const Vector m = lu.solve(rhs);
  if (!m.allFinite()) throw NumericallySingular("stationary FP: non-finite kernel vector");

  const Vector r = A_fp.matrix * m;
  double row_scale = 0.0;
  for (SparseMatrix::InnerIterator it(A_fp.matrix, static_cast<Eigen::Index>(replaced)); it; ++it)
    row_scale += std::abs(it.value());
  row_scale *= m.cwiseAbs().maxCoeff();
  if (std::abs(r[static_cast<Eigen::Index>(replaced)]) > cfg.residual_tol * std::max(row_scale, 1.0))
    throw NumericallySingular("stationary FP: replaced row not satisfied (residual " +
                              format_number(r[static_cast<Eigen::Index>(replaced)]) +
                              "), kernel is not one-dimensional");

  DensityResult out;
  out.m = from_vector(g, m);
  out.min_value = out.m.min();
  out.linear_residual_norm = r.cwiseAbs().maxCoeff();
  out.replaced_row = replaced;
  if (!(out.min_value > 0.0))
    throw NonPositiveDensity("stationary FP: density has nonpositive entries (min " +
                                 format_number(out.min_value) +
                                 "); the second-order vertex stencil is not monotone under strong "
                                 "drift next to a vertex: refine the mesh or use the first-order stencil",
                             out.min_value);
  return out;
}

void validate(const ParabolicConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw ValidationError("dt", "must be positive");
  if (!(cfg.t_final > 0.0)) throw ValidationError("t_final", "must be positive");
  if (cfg.dt > cfg.t_final) throw ValidationError("dt", "must not exceed t_final");
}

GridFunction evolve_dual(const MetricGraph& g, const Hamiltonian& H, const GridFunction& u,
                         const GridFunction& phi, const ParabolicConfig& cfg, SchemeOptions options,
                         const EvolutionObserver& observer) {
  validate(cfg);
  require_compatible(g, phi, "evolve_dual");
  const int steps = step_count(cfg);
  const double dt = cfg.t_final / steps;

  const HjbDiscretization disc(g, H, options);
  const ColMatrix J = disc.jacobian(HjbSystem::pde_block, u, 0.0).matrix;
  const auto n = static_cast<Eigen::Index>(g.dof_count());
  const auto nv = static_cast<Eigen::Index>(g.vertex_count());
  ColMatrix D(n, n);
  D.reserve(Eigen::VectorXi::Constant(n, 1));
  for (Eigen::Index i = nv; i < n; ++i) D.insert(i, i) = 1.0;
  const ColMatrix A = D + dt * J;

  Eigen::SparseLU<ColMatrix> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw NumericallySingular("evolve_dual: singular step matrix");

  Vector U = view(phi);
  for (int s = 1; s <= steps; ++s) {
    U = lu.solve(Vector(D * U));
    if (!U.allFinite()) throw NumericallySingular("evolve_dual: non-finite state");
    if (observer) observer(s * dt, from_vector(g, U));
  }
  return from_vector(g, U);
}

GridFunction evolve_density(const MetricGraph& g, const Hamiltonian& H, const GridFunction& u,
                            const GridFunction& m0, const ParabolicConfig& cfg,
                            SchemeOptions options, const EvolutionObserver& observer) {
  validate(cfg);
  require_compatible(g, m0, "evolve_density");
  const int steps = step_count(cfg);
  const double dt = cfg.t_final / steps;

  const ColMatrix Mt = ColMatrix(mass_operator(g, options).transpose());
  const ColMatrix FP = assemble_fp_operator(g, H, u, options).matrix;
  const ColMatrix A = Mt - dt * FP;

  Eigen::SparseLU<ColMatrix> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw NumericallySingular("evolve_density: singular step matrix");

  Vector m = view(m0);
  for (int s = 1; s <= steps; ++s) {
    m = lu.solve(Vector(Mt * m));
    if (!m.allFinite()) throw NumericallySingular("evolve_density: non-finite state");
    if (observer) observer(s * dt, from_vector(g, m));
  }
  return from_vector(g, m);
}

std::vector<double> flux_residual(const MetricGraph& g, const Hamiltonian& H, const GridFunction& u,
                                  const GridFunction& m, SchemeOptions options) {
  require_compatible(g, u, "flux_residual");
  require_compatible(g, m, "flux_residual");
  std::vector<double> out(g.vertex_count(), 0.0);
  for (std::size_t i = 0; i < g.vertex_count(); ++i) {
    const VertexId v{i};
    for (const auto& inc : g.incident(v)) {
      const auto& e = g.edge(inc.edge);
      // sigma converts the inward oriented derivative to the edge parameter
      const double sigma = inc.end == EdgeEnd::start ? 1.0 : -1.0;
      const double x = inc.end == EdgeEnd::start ? 0.0 : e.length;
      // The transposed vertex rows carry no advective face flux of their own,
      // and the second-order fold moves half of the first node's advection
      // into the vertex row. Both leave an O(h) offset on the vertex value of m
      // (and, for the fold, on the two faces next to it) while the discrete
      // face fluxes still balance exactly. The trace and slope of m are
      // therefore read from the first clean pair of interior nodes and
      // extrapolated linearly to the vertex.
      const int a = options.stencil == VertexStencil::second_order ? 2 : 1;
      const int ka = inc.end == EdgeEnd::start ? a : e.cells - a;
      const int kb = inc.end == EdgeEnd::start ? a + 1 : e.cells - a - 1;
      const double ma = m.node(g, e.id, ka);
      const double mb = m.node(g, e.id, kb);
      const double dm = (mb - ma) / e.h;
      const double m_trace = ma - a * (mb - ma);
      const double du = oriented_derivative(g, u, v, e.id, options.stencil);
      out[i] += e.diffusion * dm + sigma * H.derivative(e.id, x, sigma * du) * m_trace;
    }
  }
  return out;
}

}  // namespace mfgnet
