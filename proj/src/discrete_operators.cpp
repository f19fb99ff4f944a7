#include "mfgnet/discrete_operators.hpp"

#include <cmath>

#include "mfgnet/errors.hpp"
#include "mfgnet/kernels.hpp"

namespace mfgnet {

namespace {

using Triplet = Eigen::Triplet<double>;

// Grid node k of edge j as a DOF index (k = 0 and k = N_j map to vertices).
std::size_t node_dof(const MetricGraph& g, const EdgeRecord& e, int k) {
  if (k == 0) return g.layout()->vertex_dof(e.start);
  if (k == e.cells) return g.layout()->vertex_dof(e.end);
  return g.layout()->interior_dof(e.id, k);
}

// Node next to (k1) and second next to (k2) the vertex at the given end.
std::pair<int, int> near_nodes(const EdgeRecord& e, EdgeEnd end) {
  return end == EdgeEnd::start ? std::pair{1, 2} : std::pair{e.cells - 1, e.cells - 2};
}

std::vector<RowKind> pde_row_kinds(const MetricGraph& g, RowKind vertex_kind) {
  std::vector<RowKind> kinds(g.dof_count(), RowKind::interior);
  for (std::size_t v = 0; v < g.vertex_count(); ++v) kinds[v] = vertex_kind;
  return kinds;
}

}  // namespace

double ResidualVector::sup_norm() const noexcept {
  double out = 0.0;
  for (double v : values) out = std::max(out, std::abs(v));
  return out;
}

double ResidualVector::sup_norm(RowKind kind) const noexcept {
  double out = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (kinds[i] == kind) out = std::max(out, std::abs(values[i]));
  return out;
}

double ResidualVector::l2_norm() const noexcept {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------

HjbDiscretization::HjbDiscretization(const MetricGraph& g, const Hamiltonian& H,
                                     SchemeOptions options)
    : graph_(&g), hamiltonian_(&H), options_(options) {
  if (H.is_quadratic()) {
    if (H.quadratic_edge_count() != g.edge_count())
      throw ValidationError("hamiltonian", "expects " + std::to_string(H.quadratic_edge_count()) +
                                               " edges, graph has " +
                                               std::to_string(g.edge_count()));
    for (const auto& e : g.edges()) {
      const auto& q = H.quadratic_edge(e.id);
      std::vector<double> c, f0;
      if (q.drift)
        for (int k = 1; k < e.cells; ++k) c.push_back(q.drift(e.node_x(k)));
      if (q.potential)
        for (int k = 1; k < e.cells; ++k) f0.push_back(q.potential(e.node_x(k)));
      edge_drift_.push_back(std::move(c));
      edge_potential_.push_back(std::move(f0));
    }
  }
  vertex_scale_.resize(g.vertex_count());
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    double hsum = 0.0;
    for (const auto& inc : g.incident(VertexId{v})) hsum += g.edge(inc.edge).h;
    vertex_scale_[v] = g.degree(VertexId{v}) / hsum;
  }
}

HjbDiscretization::NodeData HjbDiscretization::evaluate(const GridFunction& u) const {
  const auto& g = *graph_;
  require_compatible(g, u, "hjb operator");
  NodeData out;
  out.residual.assign(g.dof_count(), 0.0);
  out.d_minus.assign(g.dof_count(), 0.0);
  out.d_plus.assign(g.dof_count(), 0.0);
  for (const auto& e : g.edges()) {
    const auto profile = u.edge_profile(g, e.id);
    const std::size_t off = g.layout()->edge_offset(e.id);
    if (hamiltonian_->is_quadratic()) {
      kernels::EdgeHjbArgs args;
      args.nodes = profile.data();
      args.interior = e.interior_nodes();
      args.h = e.h;
      args.nu = e.diffusion;
      args.kappa = hamiltonian_->quadratic_edge(e.id).kappa;
      const auto& c = edge_drift_[e.id.value];
      const auto& f0 = edge_potential_[e.id.value];
      args.drift = c.empty() ? nullptr : c.data();
      args.potential = f0.empty() ? nullptr : f0.data();
      args.residual = out.residual.data() + off;
      args.d_minus = out.d_minus.data() + off;
      args.d_plus = out.d_plus.data() + off;
      kernels::edge_hjb(args);
    } else {
      const double inv_h = 1.0 / e.h;
      const double inv_h2 = inv_h * inv_h;
      for (int k = 1; k < e.cells; ++k) {
        const double pm = (profile[k] - profile[k - 1]) * inv_h;
        const double pp = (profile[k + 1] - profile[k]) * inv_h;
        const double lap = ((profile[k + 1] - 2.0 * profile[k]) + profile[k - 1]) * inv_h2;
        const auto nh = numerical_hamiltonian(*hamiltonian_, e.id, e.node_x(k), pm, pp);
        const std::size_t i = off + static_cast<std::size_t>(k - 1);
        out.residual[i] = nh.value - e.diffusion * lap;
        out.d_minus[i] = nh.d_minus;
        out.d_plus[i] = nh.d_plus;
      }
    }
  }
  return out;
}

std::vector<double> HjbDiscretization::kirchhoff_sums(const GridFunction& u) const {
  return kirchhoff_sums(u, options_.stencil);
}

std::vector<double> HjbDiscretization::kirchhoff_sums(const GridFunction& u,
                                                      VertexStencil stencil) const {
  const auto& g = *graph_;
  std::vector<double> out(g.vertex_count(), 0.0);
  for (std::size_t v = 0; v < g.vertex_count(); ++v)
    for (const auto& inc : g.incident(VertexId{v}))
      out[v] += g.edge(inc.edge).diffusion * oriented_derivative(g, u, VertexId{v}, inc.edge, stencil);
  return out;
}

ResidualVector HjbDiscretization::residual(HjbSystem system, const GridFunction& u,
                                           const GridFunction& rhs, double rho,
                                           double lambda) const {
  const auto& g = *graph_;
  require_compatible(g, rhs, "hjb right-hand side");
  const auto data = evaluate(u);
  const std::size_t n = g.dof_count();
  ResidualVector out;
  out.values.assign(n, 0.0);
  out.kinds = pde_row_kinds(g, RowKind::kirchhoff);
  for (std::size_t i = g.vertex_count(); i < n; ++i) {
    double r = data.residual[i] - rhs[i];
    if (system == HjbSystem::ergodic) r += rho;
    if (system == HjbSystem::discounted) r += lambda * u[i];
    out.values[i] = r;
  }
  const auto sums = kirchhoff_sums(u);
  for (std::size_t v = 0; v < g.vertex_count(); ++v)
    out.values[v] = (options_.scale_vertex_rows ? vertex_scale_[v] : 1.0) * sums[v];
  if (system == HjbSystem::ergodic) {
    out.values.push_back(integrate(g, u));
    out.kinds.push_back(RowKind::normalization);
  }
  return out;
}

SparseOperator HjbDiscretization::jacobian(HjbSystem system, const GridFunction& u, double lambda,
                                           bool scale_vertex_rows) const {
  const auto& g = *graph_;
  const auto data = evaluate(u);
  const std::size_t n = g.dof_count();
  const std::size_t dim = system == HjbSystem::ergodic ? n + 1 : n;

  std::vector<Triplet> trip;
  trip.reserve(4 * n + 3 * g.edge_count() * 2 + 2 * n);
  for (const auto& e : g.edges()) {
    const double inv_h = 1.0 / e.h;
    const double diff = e.diffusion * inv_h * inv_h;
    for (int k = 1; k < e.cells; ++k) {
      const std::size_t r = g.layout()->interior_dof(e.id, k);
      const double dm = data.d_minus[r];
      const double dp = data.d_plus[r];
      double center = (dm - dp) * inv_h + 2.0 * diff;
      if (system == HjbSystem::discounted) center += lambda;
      trip.emplace_back(r, node_dof(g, e, k - 1), -dm * inv_h - diff);
      trip.emplace_back(r, r, center);
      trip.emplace_back(r, node_dof(g, e, k + 1), dp * inv_h - diff);
      if (system == HjbSystem::ergodic) trip.emplace_back(r, n, 1.0);
    }
  }
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    const double s = scale_vertex_rows ? vertex_scale_[v] : 1.0;
    for (const auto& inc : g.incident(VertexId{v})) {
      const auto& e = g.edge(inc.edge);
      const auto w = oriented_weights(options_.stencil, e.h);
      const auto [k1, k2] = near_nodes(e, inc.end);
      trip.emplace_back(v, v, s * e.diffusion * w.vertex);
      trip.emplace_back(v, node_dof(g, e, k1), s * e.diffusion * w.first);
      if (w.second != 0.0) trip.emplace_back(v, node_dof(g, e, k2), s * e.diffusion * w.second);
    }
  }
  if (system == HjbSystem::ergodic) {
    const auto weights = g.quadrature_weights();
    for (std::size_t i = 0; i < n; ++i) trip.emplace_back(n, i, weights[i]);
  }

  SparseOperator out;
  out.matrix.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  out.matrix.setFromTriplets(trip.begin(), trip.end());
  out.row_kinds = pde_row_kinds(g, RowKind::kirchhoff);
  if (system == HjbSystem::ergodic) out.row_kinds.push_back(RowKind::normalization);
  return out;
}

std::vector<std::vector<double>> HjbDiscretization::drift_profiles(const GridFunction& u) const {
  const auto& g = *graph_;
  const auto data = evaluate(u);
  std::vector<std::vector<double>> out;
  for (const auto& e : g.edges()) {
    std::vector<double> a(static_cast<std::size_t>(e.cells) + 1, 0.0);
    for (int k = 1; k < e.cells; ++k) {
      const std::size_t i = g.layout()->interior_dof(e.id, k);
      a[k] = data.d_minus[i] + data.d_plus[i];
    }
    const double slope_start = oriented_derivative(g, u, e.start, e.id, options_.stencil);
    const double slope_end = -oriented_derivative(g, u, e.end, e.id, options_.stencil);
    a.front() = hamiltonian_->derivative(e.id, 0.0, slope_start);
    a.back() = hamiltonian_->derivative(e.id, e.length, slope_end);
    out.push_back(std::move(a));
  }
  return out;
}

GridFunction HjbDiscretization::hamiltonian_at_zero() const {
  const auto& g = *graph_;
  GridFunction out(g);
  const auto data = evaluate(GridFunction(g));
  for (std::size_t i = g.vertex_count(); i < g.dof_count(); ++i) out[i] = data.residual[i];
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    const auto& inc = g.incident(VertexId{v}).front();
    const auto& e = g.edge(inc.edge);
    const double x = inc.end == EdgeEnd::start ? 0.0 : e.length;
    out.vertex(VertexId{v}) = hamiltonian_->value(e.id, x, 0.0);
  }
  return out;
}

// ---------------------------------------------------------------------------

ResidualVector assemble_hjb_system(const MetricGraph& g, const Hamiltonian& H,
                                   const GridFunction& rhs, const GridFunction& u, double rho,
                                   SchemeOptions options) {
  return HjbDiscretization(g, H, options).residual(HjbSystem::ergodic, u, rhs, rho, 0.0);
}

SparseOperator assemble_hjb_jacobian(const MetricGraph& g, const Hamiltonian& H,
                                     const GridFunction& u, SchemeOptions options) {
  return HjbDiscretization(g, H, options).jacobian(HjbSystem::ergodic, u, 0.0);
}

SparseOperator assemble_dual_generator(const MetricGraph& g, const Hamiltonian& H,
                                       const GridFunction& u, SchemeOptions options) {
  const HjbDiscretization disc(g, H, options);
  const auto J = disc.jacobian(HjbSystem::pde_block, u, 0.0, false);
  const std::size_t n = g.dof_count();

  std::vector<double> row_h(n, 0.0);
  for (const auto& e : g.edges())
    for (int k = 1; k < e.cells; ++k) row_h[g.layout()->interior_dof(e.id, k)] = e.h;

  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(J.matrix.nonZeros()) * 2);
  for (Eigen::Index r = 0; r < J.matrix.outerSize(); ++r) {
    const std::size_t row = static_cast<std::size_t>(r);
    if (row < g.vertex_count()) {
      for (SparseMatrix::InnerIterator it(J.matrix, r); it; ++it)
        trip.emplace_back(r, it.col(), it.value());
    } else {
      for (SparseMatrix::InnerIterator it(J.matrix, r); it; ++it)
        trip.emplace_back(r, it.col(), -row_h[row] * it.value());
    }
  }
  if (options.stencil == VertexStencil::second_order) {
    // Fold h/2 of the first interior row of each incident edge into the
    // vertex row: the second-order Kirchhoff stencil then becomes the weak
    // form tested against the vertex hat function.
    for (std::size_t v = 0; v < g.vertex_count(); ++v) {
      for (const auto& inc : g.incident(VertexId{v})) {
        const auto& e = g.edge(inc.edge);
        const auto k1 = near_nodes(e, inc.end).first;
        const auto r1 = static_cast<Eigen::Index>(g.layout()->interior_dof(e.id, k1));
        for (SparseMatrix::InnerIterator it(J.matrix, r1); it; ++it)
          trip.emplace_back(v, it.col(), -0.5 * e.h * it.value());
      }
    }
  }
  SparseOperator out;
  out.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  out.matrix.setFromTriplets(trip.begin(), trip.end());
  out.matrix.prune(0.0);
  out.row_kinds = pde_row_kinds(g, RowKind::kirchhoff);
  return out;
}

SparseOperator assemble_fp_operator(const MetricGraph& g, const Hamiltonian& H,
                                    const GridFunction& u, SchemeOptions options) {
  const auto L = assemble_dual_generator(g, H, u, options);
  SparseOperator out;
  out.matrix = SparseMatrix(L.matrix.transpose());
  out.row_kinds = pde_row_kinds(g, RowKind::flux);
  return out;
}

SparseMatrix mass_operator(const MetricGraph& g, SchemeOptions options) {
  std::vector<Triplet> trip;
  for (const auto& e : g.edges())
    for (int k = 1; k < e.cells; ++k) {
      const auto r = g.layout()->interior_dof(e.id, k);
      trip.emplace_back(r, r, e.h);
    }
  if (options.stencil == VertexStencil::second_order) {
    for (std::size_t v = 0; v < g.vertex_count(); ++v)
      for (const auto& inc : g.incident(VertexId{v})) {
        const auto& e = g.edge(inc.edge);
        const auto k1 = near_nodes(e, inc.end).first;
        trip.emplace_back(v, g.layout()->interior_dof(e.id, k1), 0.5 * e.h);
      }
  }
  SparseMatrix M(static_cast<Eigen::Index>(g.dof_count()), static_cast<Eigen::Index>(g.dof_count()));
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

double pairing(const MetricGraph& g, const GridFunction& m, const GridFunction& w,
               SchemeOptions options) {
  require_compatible(g, m, "pairing");
  require_compatible(g, w, "pairing");
  const auto M = mass_operator(g, options);
  const Eigen::Map<const Eigen::VectorXd> mv(m.values().data(), static_cast<Eigen::Index>(m.size()));
  const Eigen::Map<const Eigen::VectorXd> wv(w.values().data(), static_cast<Eigen::Index>(w.size()));
  return mv.dot(M * wv);
}

}  // namespace mfgnet
