#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hcdd/fem.hpp"
#include "hcdd/pou.hpp"
#include "oracles.hpp"

using namespace hcdd;

TEST_CASE("interior stiffness stencil for constant kappa") {
  // 9-point stencil of the Q1 Laplacian: 8/3 center, -1/3 on all 8 neighbours
  GridHierarchy g = build_hierarchy(8, 4);
  CoefficientField f = generate(g, Pattern::constant, 1.0, 0);
  SparseOperator A = assemble_stiffness(g, f, nullptr, BC::dirichlet_eliminated);
  int d = g.free_index(g.fine_node(4, 4));
  const SpMat& m = A.matrix();
  CHECK(m.coeff(d, d) == doctest::Approx(8.0 / 3.0).epsilon(1e-14));
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy) {
      if (dx == 0 && dy == 0) continue;
      int e = g.free_index(g.fine_node(4 + dx, 4 + dy));
      CHECK(m.coeff(d, e) == doctest::Approx(-1.0 / 3.0).epsilon(1e-14));
    }
  // scaling: kappa multiplies the matrix
  CoefficientField f5 = generate(g, Pattern::constant, 1.0, 0);
  for (auto& v : f5.values) v = 5.0;
  SparseOperator A5 = assemble_stiffness(g, f5, nullptr, BC::dirichlet_eliminated);
  CHECK((A5.matrix() - 5.0 * m).norm() < 1e-12);
}

TEST_CASE("stiffness rows sum to zero away from the boundary") {
  GridHierarchy g = build_hierarchy(8, 2);
  CoefficientField f = generate(g, Pattern::channels, 1e3, 1);
  SparseOperator A = assemble_stiffness(g, f, nullptr, BC::neumann);
  Vec ones = Vec::Ones(A.dim());
  CHECK(A.apply(ones).lpNorm<Eigen::Infinity>() < 1e-10 * f.kappa_max);
  // and the matrix is symmetric
  CHECK((A.matrix() - SpMat(A.matrix().transpose())).norm() < 1e-12);
}

TEST_CASE("mass matrix row sums give the cell areas") {
  GridHierarchy g = build_hierarchy(8, 4);
  WeightField w{std::vector<double>(g.fine_cell_count(), 1.0)};
  SparseOperator M = assemble_weighted_mass(g, w, nullptr, BC::neumann);
  Vec rs = M.apply(Vec::Ones(M.dim()));
  double h2 = g.h() * g.h();
  // interior node: 4 cells x h^2/4
  CHECK(rs[g.fine_node(4, 4)] == doctest::Approx(h2).epsilon(1e-13));
  // corner node: one cell x h^2/4
  CHECK(rs[g.fine_node(0, 0)] == doctest::Approx(h2 / 4).epsilon(1e-13));
  // total mass is the domain area
  CHECK(rs.sum() == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("load vector of f=1 matches the mass row sums") {
  GridHierarchy g = build_hierarchy(8, 4);
  Vec b = assemble_load(g, std::vector<double>(g.fine_cell_count(), 1.0));
  double h2 = g.h() * g.h();
  CHECK(b[g.free_index(g.fine_node(3, 5))] == doctest::Approx(h2));
  CHECK(b.sum() == doctest::Approx(h2 * g.free_node_count()));
}

TEST_CASE("smallest Laplace eigenvalue approaches 2 pi^2") {
  GridHierarchy g = build_hierarchy(32, 4);
  CoefficientField f = generate(g, Pattern::constant, 1.0, 0);
  SparseOperator A = assemble_stiffness(g, f, nullptr, BC::dirichlet_eliminated);
  WeightField w{std::vector<double>(g.fine_cell_count(), 1.0)};
  SparseOperator M = assemble_weighted_mass(g, w, nullptr, BC::dirichlet_eliminated);
  EigPairs ep = dense_generalized_eig(A, M, 1);
  double exact = 2.0 * std::numbers::pi * std::numbers::pi;
  CHECK(ep.values[0] == doctest::Approx(exact).epsilon(0.05));
  CHECK(ep.values[0] >= exact);  // conforming elements bound from above
}

TEST_CASE("direct solve on the assembled system") {
  GridHierarchy g = build_hierarchy(16, 4);
  CoefficientField f = generate(g, Pattern::channels, 1e4, 2);
  SparseOperator A = assemble_stiffness(g, f, nullptr, BC::dirichlet_eliminated);
  Vec b = assemble_load(g, std::vector<double>(g.fine_cell_count(), 1.0));
  Vec x = A.solve(b);
  CHECK((A.apply(x) - b).norm() < 1e-10 * b.norm());
}

TEST_CASE("floating Neumann solve: compatibility and zero mean") {
  GridHierarchy g = build_hierarchy(16, 4);
  CoefficientField f = generate(g, Pattern::constant, 1.0, 0);
  Region k = coarse_block(g, g.coarse_cell(1, 1));
  REQUIRE(k.floating);
  SparseOperator A = assemble_stiffness(g, f, &k, BC::neumann);
  CHECK(A.neumann_singular());

  std::mt19937_64 rng(5);
  Vec b(A.dim());
  for (int i = 0; i < b.size(); ++i)
    b[i] = std::uniform_real_distribution<double>(-1, 1)(rng);
  b.array() -= b.mean();  // compatible rhs
  Vec x = A.solve(b);
  CHECK(std::abs(x.mean()) < 1e-12 * x.norm() + 1e-300);
  CHECK((A.apply(x) - b).norm() < 1e-9 * b.norm());
  // incompatible rhs is rejected
  CHECK_THROWS(A.solve(Vec::Ones(A.dim())));
}

TEST_CASE("region assembly with eliminated boundary matches a manual restriction") {
  GridHierarchy g = build_hierarchy(12, 4);
  CoefficientField f = generate(g, Pattern::channels, 1e3, 9);
  Region k = coarse_block(g, g.coarse_cell(1, 1));
  SparseOperator Aloc = assemble_stiffness(g, f, &k, BC::dirichlet_eliminated);
  SparseOperator Aglob = assemble_stiffness(g, f, nullptr, BC::dirichlet_eliminated);
  REQUIRE(Aloc.dim() == int(k.interior.size()));
  // interior-interior entries agree with the global matrix
  for (size_t a = 0; a < k.interior.size(); ++a)
    for (size_t b = 0; b < k.interior.size(); ++b) {
      double loc = Aloc.matrix().coeff(int(a), int(b));
      double glob = Aglob.matrix().coeff(g.free_index(k.interior[a]),
                                         g.free_index(k.interior[b]));
      CHECK(loc == doctest::Approx(glob).epsilon(1e-14));
    }
}

TEST_CASE("kappa-hat weight formula at cell midpoints") {
  GridHierarchy g = build_hierarchy(12, 4);
  CoefficientField f = generate(g, Pattern::constant, 1.0, 0);
  PartitionOfUnity pou = build_pou(g);
  WeightField w = build_weight(g, f, pou);
  double H = g.H();
  for (int c : {g.fine_cell(0, 0), g.fine_cell(4, 7), g.fine_cell(11, 11)}) {
    double xi = (g.fine_cell_x(c) % g.ratio + 0.5) / g.ratio;
    double eta = (g.fine_cell_y(c) % g.ratio + 0.5) / g.ratio;
    double expect = 2.0 *
                    ((1 - xi) * (1 - xi) + xi * xi + (1 - eta) * (1 - eta) +
                     eta * eta) /
                    (H * H);
    CHECK(w[c] == doctest::Approx(expect).epsilon(1e-13));
  }
}

TEST_CASE("dense generalized eigensolver agrees with the Jacobi oracle") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 5; ++trial) {
    int n = 10 + trial * 7;
    Mat R(n, n), S(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        R(i, j) = u(rng);
        S(i, j) = u(rng);
      }
    Mat A = R * R.transpose() + 0.1 * Mat::Identity(n, n);
    Mat B = S * S.transpose() + 0.5 * Mat::Identity(n, n);
    int count = 4;
    EigPairs ep = dense_generalized_eig(A, B, count);
    oracle::Vec ov;
    oracle::Mat oV;
    oracle::generalized_eig(A, B, ov, oV);
    for (int k = 0; k < count; ++k) {
      CHECK(ep.values[k] ==
            doctest::Approx(ov[k]).epsilon(1e-8).scale(std::abs(ov[n - 1])));
      // residual check on the returned vectors
      Vec r = A * ep.vectors.col(k) - ep.values[k] * (B * ep.vectors.col(k));
      CHECK(r.norm() < 1e-8 * A.norm());
      // B-normalized
      CHECK(ep.vectors.col(k).dot(B * ep.vectors.col(k)) ==
            doctest::Approx(1.0).epsilon(1e-8));
    }
  }
}

TEST_CASE("partition of unity sums to one everywhere") {
  GridHierarchy g = build_hierarchy(12, 4);
  PartitionOfUnity pou = build_pou(g);
  std::vector<double> sum(g.fine_node_count(), 0.0);
  for (size_t i = 0; i < pou.chi.size(); ++i)
    for (size_t t = 0; t < pou.chi[i].nodes.size(); ++t) {
      double v = pou.chi[i].values[t];
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      sum[pou.chi[i].nodes[t]] += v;
      // stored values agree with the analytic evaluation
      CHECK(pou.value(g, int(i), pou.chi[i].nodes[t]) == doctest::Approx(v));
    }
  for (double s : sum) CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
}
