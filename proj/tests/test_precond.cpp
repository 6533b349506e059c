#include <doctest.h>

#include <random>

#include "hcdd/experiment.hpp"
#include "hcdd/precond.hpp"

using namespace hcdd;

namespace {

struct Setup {
  GridHierarchy g = build_hierarchy(16, 4);
  CoefficientField f = generate(g, Pattern::channels, 1e4, 3);
  SparseOperator A{assemble_stiffness(g, f, nullptr, BC::dirichlet_eliminated)};
  Vec b{assemble_load(g, std::vector<double>(g.fine_cell_count(), 1.0))};
};

Vec random_vec(int n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

void check_spd_operator(const Preconditioner& M, int n) {
  Vec r = random_vec(n, 1), s = random_vec(n, 2);
  // symmetry: r' M s == s' M r
  double a = r.dot(M.apply(s)), bb = s.dot(M.apply(r));
  CHECK(a == doctest::Approx(bb).epsilon(1e-10));
  // linearity
  Vec lhs = M.apply(2.0 * r - 3.0 * s);
  Vec rhs = 2.0 * M.apply(r) - 3.0 * M.apply(s);
  CHECK((lhs - rhs).norm() < 1e-10 * (rhs.norm() + 1.0));
  // positivity
  CHECK(r.dot(M.apply(r)) > 0.0);
}

std::unique_ptr<Preconditioner> make_hybrid(const Setup& s, int layers,
                                            int count = 2) {
  PartitionOfUnity pou = build_pou(s.g);
  Selection sel;
  sel.mode = Selection::Mode::fixed;
  sel.count = count;
  CemAux aux = build_cem_aux(s.g, s.f, pou, sel);
  CemCoarseSpace cem = build_cem_basis(s.g, s.f, aux, layers);
  return make_hybrid_cem(s.g, s.f, aux, cem, layers, s.A);
}

}  // namespace

TEST_CASE("exact preconditioner converges in one iteration") {
  Setup s;
  auto M = make_exact(s.A);
  auto [x, rep] = pcg(s.A, s.b, *M);
  CHECK(rep.converged);
  CHECK(rep.iterations == 1);
  CHECK((s.A.apply(x) - s.b).norm() < 1e-8 * s.b.norm());
}

TEST_CASE("identity-preconditioned cg solves the system") {
  Setup s;
  auto M = make_identity();
  PcgOptions opt;
  opt.maxit = 2000;
  auto [x, rep] = pcg(s.A, s.b, *M, opt);
  CHECK(rep.converged);
  CHECK((s.A.apply(x) - s.b).norm() < 1e-7 * s.b.norm());
  CHECK(rep.residuals.size() == size_t(rep.iterations));
  // relative residual history is recorded and ends under the tolerance
  CHECK(rep.residuals.back() <= 1e-8);
  CHECK(rep.cond_estimate >= 1.0);
}

TEST_CASE("pcg rejects an indefinite operator") {
  SpMat m(2, 2);
  m.insert(0, 0) = 1.0;
  m.insert(1, 1) = -1.0;
  SparseOperator A(m);
  Vec b(2);
  b << 1.0, 1.0;
  auto M = make_identity();
  CHECK_THROWS_WITH_AS(pcg(A, b, *M), doctest::Contains("operator"),
                       std::runtime_error);
}

TEST_CASE("one- and two-level schwarz are symmetric positive operators") {
  Setup s;
  auto subs = overlapping_decomposition(s.g, 2);
  auto M1 = make_one_level(s.g, s.f, subs);
  check_spd_operator(*M1, s.A.dim());

  PartitionOfUnity pou = build_pou(s.g);
  Selection sel;
  sel.mode = Selection::Mode::fixed;
  sel.count = 2;
  auto space =
      build_spectral_space(s.g, s.f, pou, SpectralVariant::kappa_mass, sel);
  auto M2 = make_two_level(s.g, s.f, subs, s.A, space.matrix(s.g));
  check_spd_operator(*M2, s.A.dim());
}

TEST_CASE("hybrid preconditioner is symmetric and linear") {
  Setup s;
  auto M = make_hybrid(s, 2);
  check_spd_operator(*M, s.A.dim());
}

TEST_CASE("two-level beats one-level on high contrast") {
  GridHierarchy g = build_hierarchy(40, 8);
  CoefficientField f = generate(g, Pattern::channels, 1e6, 3);
  SparseOperator A = assemble_stiffness(g, f, nullptr, BC::dirichlet_eliminated);
  Vec b = assemble_load(g, std::vector<double>(g.fine_cell_count(), 1.0));
  auto subs = overlapping_decomposition(g, 2);
  auto M1 = make_one_level(g, f, subs);
  PartitionOfUnity pou = build_pou(g);
  Selection sel;
  sel.mode = Selection::Mode::gap;
  auto space =
      build_spectral_space(g, f, pou, SpectralVariant::kappa_mass, sel);
  auto M2 = make_two_level(g, f, subs, A, space.matrix(g));
  PcgOptions opt;
  opt.maxit = 1000;
  auto [x1, r1] = pcg(A, b, *M1, opt);
  auto [x2, r2] = pcg(A, b, *M2, opt);
  CHECK(r1.converged);
  CHECK(r2.converged);
  CHECK(r2.iterations < r1.iterations);
}

TEST_CASE("lanczos condition estimate matches the dense oracle") {
  Setup s;
  auto subs = overlapping_decomposition(s.g, 2);
  auto M = make_one_level(s.g, s.f, subs);
  double exact = dense_cond_oracle(s.A, *M);
  PcgOptions opt;
  opt.tol = 1e-12;
  opt.maxit = 1000;
  auto [x, rep] = pcg(s.A, s.b, *M, opt);
  CHECK(rep.cond_estimate == doctest::Approx(exact).epsilon(0.05));
  CHECK(rep.lambda_min > 0.0);
  CHECK(rep.lambda_max >= rep.lambda_min);
}

TEST_CASE("hybrid iterations do not increase with oversampling") {
  Setup s;
  PcgOptions opt;
  int prev = 1 << 30;
  for (int layers : {1, 2, 3}) {
    auto M = make_hybrid(s, layers);
    auto [x, rep] = pcg(s.A, s.b, *M, opt);
    CHECK(rep.converged);
    CHECK(rep.iterations <= prev + 1);
    prev = rep.iterations;
  }
}

TEST_CASE("hybrid with domain-covering oversampling is exact") {
  Setup s;  // 4x4 coarse cells: 4 layers span everything
  auto M = make_hybrid(s, 4);
  double cond = dense_cond_oracle(s.A, *M);
  CHECK(cond <= 1.0 + 1e-6);
  auto [x, rep] = pcg(s.A, s.b, *M);
  CHECK(rep.iterations <= 2);
  CHECK((s.A.apply(x) - s.b).norm() < 1e-7 * s.b.norm());
}

TEST_CASE("report serializes to json") {
  Setup s;
  auto M = make_exact(s.A);
  auto [x, rep] = pcg(s.A, s.b, *M);
  std::string j = report_to_json(rep);
  auto parsed = nlohmann::json::parse(j);
  CHECK(parsed.at("iterations").get<int>() == rep.iterations);
  CHECK(parsed.at("converged").get<bool>());
}
