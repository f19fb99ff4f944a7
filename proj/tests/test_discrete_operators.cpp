#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "graphs.hpp"
#include "mfgnet/discrete_operators.hpp"
#include "mfgnet/hjb_solver.hpp"
#include "mfgnet/kernels.hpp"

using namespace mfgnet;
using namespace mfgnet::testing;

namespace {

Hamiltonian varied_quadratic(std::size_t edges) {
  std::vector<QuadraticEdge> q;
  for (std::size_t j = 0; j < edges; ++j)
    q.push_back({0.5 + 0.25 * static_cast<double>(j % 3),
                 [j](double x) { return std::sin(2.0 * x + static_cast<double>(j)); },
                 [j](double x) { return 0.3 * std::cos(x) * static_cast<double>(j % 2); }});
  return Hamiltonian::quadratic(std::move(q));
}

// Convex, non-quadratic: sqrt(1 + p^2) + 0.3 p
Hamiltonian smooth_convex() {
  return Hamiltonian::general([](EdgeId, double, double p) { return std::sqrt(1 + p * p) + 0.3 * p; },
                              [](EdgeId, double, double p) { return p / std::sqrt(1 + p * p) + 0.3; });
}

Eigen::VectorXd vec(const GridFunction& f) {
  return Eigen::Map<const Eigen::VectorXd>(f.values().data(), static_cast<Eigen::Index>(f.size()));
}

}  // namespace

TEST_CASE("numerical Hamiltonian: hand-evaluated values") {
  const auto H = Hamiltonian::quadratic(1, 0.5);
  CHECK(numerical_hamiltonian(H, EdgeId{0}, 0.0, 0.0, 0.0).value == 0.0);
  CHECK(numerical_hamiltonian(H, EdgeId{0}, 0.0, 1.0, -1.0).value == 1.0);
  CHECK(numerical_hamiltonian(H, EdgeId{0}, 0.0, -1.0, 1.0).value == 0.0);
  // consistency: equal slopes give H itself
  CHECK(numerical_hamiltonian(H, EdgeId{0}, 0.0, 0.7, 0.7).value == doctest::Approx(0.5 * 0.49));
  CHECK(numerical_hamiltonian(H, EdgeId{0}, 0.0, -0.7, -0.7).value == doctest::Approx(0.5 * 0.49));
}

TEST_CASE("numerical Hamiltonian is monotone in both slopes") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> P(-4.0, 4.0);
  const auto Hq = varied_quadratic(3);
  const auto Hg = smooth_convex();
  for (const Hamiltonian* H : {&Hq, &Hg})
    for (int t = 0; t < 2000; ++t) {
      const EdgeId j{static_cast<std::size_t>(t % 3)};
      const double x = 0.5 * (P(rng) + 4.0) / 4.0, a = P(rng), b = P(rng), d = std::abs(P(rng)) * 0.25;
      const auto base = numerical_hamiltonian(*H, j, x, a, b);
      CHECK(numerical_hamiltonian(*H, j, x, a + d, b).value >= base.value - 1e-12);
      CHECK(numerical_hamiltonian(*H, j, x, a, b + d).value <= base.value + 1e-12);
      CHECK(base.d_minus >= 0.0);
      CHECK(base.d_plus <= 0.0);
    }
}

TEST_CASE("clipped quadratic is bounded and flagged nonconvex") {
  std::vector<QuadraticEdge> q(3, QuadraticEdge{0.5, [](double x) { return x; }, {}});
  const auto H = Hamiltonian::clipped_quadratic(q, 2.0);
  CHECK_FALSE(H.convex());
  for (double p = -20; p <= 20; p += 0.37) {
    CHECK(std::abs(H.value(EdgeId{1}, 0.3, p)) <= 2.0);
    CHECK(std::abs(numerical_hamiltonian(H, EdgeId{1}, 0.3, p, -p).value) <= 2.0);
  }
  CHECK(H.value(EdgeId{0}, 0.5, 1.0) == doctest::Approx(1.0));
  CHECK(H.derivative(EdgeId{0}, 0.5, 10.0) == 0.0);
  const auto g = triangle();
  CHECK_FALSE(check_hamiltonian(H, g).convex);
  CHECK(check_hamiltonian(varied_quadratic(3), g).convex);
}

TEST_CASE("HJB system residual on constant states") {
  const auto g = triangle(10);
  const auto H = Hamiltonian::quadratic(3, 0.5);
  const GridFunction zero(g, 0.0);
  const auto r0 = assemble_hjb_system(g, H, zero, zero, 0.0);
  CHECK(r0.sup_norm() == 0.0);

  const auto r1 = assemble_hjb_system(g, H, zero, zero, 1.0);
  REQUIRE(r1.values.size() == g.dof_count() + 1);
  for (std::size_t i = 0; i < r1.values.size(); ++i) {
    if (r1.kinds[i] == RowKind::interior)
      CHECK(r1.values[i] == 1.0);
    else
      CHECK(r1.values[i] == 0.0);
  }
  CHECK(r1.kinds.back() == RowKind::normalization);
  CHECK(r1.sup_norm(RowKind::kirchhoff) == 0.0);
}

TEST_CASE("solved HJB state has a tiny residual") {
  const auto g = lens(20);
  const auto H = varied_quadratic(3);
  std::mt19937_64 rng(5);
  const auto f = random_field(g, rng);
  const auto sol = solve_ergodic(g, H, f);
  CHECK(assemble_hjb_system(g, H, f, sol.u, sol.rho).sup_norm() < 1e-10);
}

TEST_CASE("HJB Jacobian matches central finite differences") {
  std::mt19937_64 rng(17);
  for (auto stencil : {VertexStencil::second_order, VertexStencil::first_order})
    for (const auto& g : {lens(8), star(6)}) {
      const auto H = varied_quadratic(g.edge_count());
      SchemeOptions opts;
      opts.stencil = stencil;
      const auto rhs = random_field(g, rng);
      const auto u = random_field(g, rng, 2.0);
      const double rho = 0.37;
      const auto J = Eigen::MatrixXd(assemble_hjb_jacobian(g, H, u, opts).matrix);
      const std::size_t n = g.dof_count();
      REQUIRE(J.rows() == static_cast<Eigen::Index>(n + 1));
      REQUIRE(J.cols() == static_cast<Eigen::Index>(n + 1));
      const double eps = 1e-6;
      double worst = 0.0;
      for (std::size_t c = 0; c <= n; ++c) {
        auto up = u, um = u;
        double rp = rho, rm = rho;
        if (c < n) {
          up[c] += eps;
          um[c] -= eps;
        } else {
          rp += eps;
          rm -= eps;
        }
        const auto Fp = assemble_hjb_system(g, H, rhs, up, rp, opts);
        const auto Fm = assemble_hjb_system(g, H, rhs, um, rm, opts);
        for (std::size_t r = 0; r <= n; ++r) {
          const double fd = (Fp.values[r] - Fm.values[r]) / (2 * eps);
          const double ex = J(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
          worst = std::max(worst, std::abs(fd - ex) / std::max(1.0, std::abs(ex)));
        }
      }
      CHECK(worst < 1e-6);
    }
}

TEST_CASE("zero-slope Jacobian is the Kirchhoff Laplacian") {
  const auto g = triangle(10);
  const auto H = Hamiltonian::quadratic(3, 0.5);
  const GridFunction zero(g, 0.0);
  const HjbDiscretization disc(g, H);
  const auto J = Eigen::MatrixXd(disc.jacobian(HjbSystem::pde_block, zero, 0.0, false).matrix);
  const auto& e = g.edge(EdgeId{1});
  const auto& L = *g.layout();
  for (int k = 2; k <= e.cells - 2; ++k) {
    const auto i = static_cast<Eigen::Index>(L.interior_dof(e.id, k));
    const double s = e.diffusion / (e.h * e.h);
    CHECK(J(i, i) == doctest::Approx(2 * s));
    CHECK(J(i, i - 1) == doctest::Approx(-s));
    CHECK(J(i, i + 1) == doctest::Approx(-s));
  }
  // constants are annihilated, at interior and vertex rows alike
  const Eigen::VectorXd rows = J.rowwise().sum();
  CHECK(rows.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("linear HJB part annihilates constants at any state") {
  std::mt19937_64 rng(23);
  const auto g = star(10);
  const auto H = varied_quadratic(g.edge_count());
  for (int t = 0; t < 5; ++t) {
    const auto u = random_field(g, rng);
    const auto J = Eigen::MatrixXd(HjbDiscretization(g, H).jacobian(HjbSystem::pde_block, u, 0.0).matrix);
    CHECK(J.rowwise().sum().cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("FP operator is the exact transpose of the dual generator") {
  std::mt19937_64 rng(29);
  for (auto stencil : {VertexStencil::second_order, VertexStencil::first_order})
    for (const auto& g : {triangle(12), lens(15), star(9), loop(20)}) {
      const auto H = varied_quadratic(g.edge_count());
      SchemeOptions opts;
      opts.stencil = stencil;
      const auto u = random_field(g, rng);
      const auto A = assemble_fp_operator(g, H, u, opts).matrix;
      const auto L = assemble_dual_generator(g, H, u, opts).matrix;
      for (int t = 0; t < 100; ++t) {
        const auto m = vec(noise(g, rng)), w = vec(noise(g, rng));
        const double lhs = (A * m).dot(w), rhs = m.dot(L * w);
        const double scale = (A * m).cwiseAbs().dot(w.cwiseAbs()) + 1.0;
        CHECK(std::abs(lhs - rhs) <= 1e-12 * scale);
      }
      // discrete mass conservation: 1^T A_fp = 0
      const Eigen::VectorXd ones = Eigen::VectorXd::Ones(A.rows());
      const Eigen::RowVectorXd col = ones.transpose() * A;
      CHECK(col.cwiseAbs().maxCoeff() <= 1e-12 * Eigen::MatrixXd(A).cwiseAbs().maxCoeff());
    }
}

TEST_CASE("zero drift: constants lie in the FP kernel") {
  const auto g = lens(12);
  const auto H = Hamiltonian::quadratic(3, 0.5);
  const auto A = assemble_fp_operator(g, H, GridFunction(g, 0.0)).matrix;
  const Eigen::VectorXd m = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(g.dof_count()), 0.3);
  CHECK((A * m).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("interior rows of the dual generator are -h times the linearization") {
  std::mt19937_64 rng(31);
  const auto g = lens(12);
  const auto H = varied_quadratic(3);
  const auto u = random_field(g, rng);
  const auto L = Eigen::MatrixXd(assemble_dual_generator(g, H, u).matrix);
  const auto J = Eigen::MatrixXd(HjbDiscretization(g, H).jacobian(HjbSystem::pde_block, u, 0.0, false).matrix);
  for (const auto& e : g.edges())
    for (int k = 2; k <= e.cells - 2; ++k) {
      const auto i = static_cast<Eigen::Index>(g.layout()->interior_dof(e.id, k));
      CHECK((L.row(i) + e.h * J.row(i)).cwiseAbs().maxCoeff() < 1e-12 * J.row(i).cwiseAbs().maxCoeff());
    }
}

TEST_CASE("mass operator reproduces the trapezoid rule") {
  std::mt19937_64 rng(37);
  const auto g = star(8);
  const auto m = noise(g, rng);
  CHECK(pairing(g, m, GridFunction(g, 1.0)) == doctest::Approx(integrate(g, m)).epsilon(1e-13));

  // the first-order stencil folds nothing into the vertex rows, so vertex
  // values carry no weight in the pairing
  SchemeOptions first;
  first.stencil = VertexStencil::first_order;
  double vertex_mass = 0.0;
  for (std::size_t v = 0; v < g.vertex_count(); ++v) vertex_mass += g.quadrature_weights()[v] * m[v];
  CHECK(pairing(g, m, GridFunction(g, 1.0), first) ==
        doctest::Approx(integrate(g, m) - vertex_mass).epsilon(1e-13));
}

TEST_CASE("drift profiles and H at zero slopes") {
  const auto g = triangle(10);
  std::vector<QuadraticEdge> q(3, QuadraticEdge{0.5, [](double x) { return 1.0 + x; }, [](double x) { return 2.0 * x; }});
  const auto H = Hamiltonian::quadratic(q);
  const HjbDiscretization disc(g, H);
  const auto a = disc.drift_profiles(GridFunction(g, 0.0));
  for (const auto& e : g.edges())
    for (int k = 0; k <= e.cells; ++k) CHECK(a[e.id.value][static_cast<std::size_t>(k)] == doctest::Approx(1.0 + e.node_x(k)));
  const auto h0 = disc.hamiltonian_at_zero();
  const auto f0 = GridFunction::sample(g, [](EdgeId, double x) { return 2.0 * x; });
  CHECK((h0 - f0).max_abs() < 1e-15);
}

TEST_CASE("SIMD kernels agree with the scalar reference") {
  const auto* simd = kernels::avx2_table();
  if (!simd) {
    MESSAGE("no AVX2 on this host; only the scalar kernels are exercised");
    return;
  }
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  for (int interior : {1, 2, 3, 4, 5, 7, 8, 9, 31, 64, 101}) {
    std::vector<double> nodes(static_cast<std::size_t>(interior) + 2), c(interior), f0(interior);
    for (auto& v : nodes) v = U(rng);
    for (auto& v : c) v = U(rng);
    for (auto& v : f0) v = U(rng);
    for (bool with_coeffs : {false, true}) {
      std::vector<double> r1(interior), m1(interior), p1(interior), r2(interior), m2(interior), p2(interior);
      kernels::EdgeHjbArgs args{nodes.data(), interior, 0.07, 1.3, 0.6,
                                with_coeffs ? c.data() : nullptr, with_coeffs ? f0.data() : nullptr,
                                r1.data(), m1.data(), p1.data()};
      kernels::scalar_table().edge_hjb(args);
      args.residual = r2.data();
      args.d_minus = m2.data();
      args.d_plus = p2.data();
      simd->edge_hjb(args);
      CHECK(r1 == r2);  // bitwise: same operation order, no contraction
      CHECK(m1 == m2);
      CHECK(p1 == p2);
    }
    const double d1 = kernels::scalar_table().dot(nodes.data(), nodes.data() + 1, nodes.size() - 1);
    const double d2 = simd->dot(nodes.data(), nodes.data() + 1, nodes.size() - 1);
    CHECK(d1 == doctest::Approx(d2).epsilon(1e-13));
  }
}

TEST_CASE("scalar kernel matches the pointwise Godunov formula") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  const int n = 9;
  const double h = 0.1, nu = 0.8, kappa = 0.5;
  std::vector<double> nodes(n + 2), c(n), f0(n), r(n), dm(n), dp(n);
  for (auto& v : nodes) v = U(rng);
  for (auto& v : c) v = U(rng);
  for (auto& v : f0) v = U(rng);
  kernels::scalar_table().edge_hjb({nodes.data(), n, h, nu, kappa, c.data(), f0.data(), r.data(), dm.data(), dp.data()});
  for (int k = 0; k < n; ++k) {
    const double um = nodes[k], u0 = nodes[k + 1], up = nodes[k + 2];
    const auto G = kernels::quadratic_godunov(kappa, c[k], f0[k], (u0 - um) / h, (up - u0) / h);
    CHECK(r[k] == doctest::Approx(-nu * (um - 2 * u0 + up) / (h * h) + G.value).epsilon(1e-13));
    CHECK(dm[k] == doctest::Approx(G.d_minus));
    CHECK(dp[k] == doctest::Approx(G.d_plus));
  }
}
