#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "hcdd/coarse.hpp"

using namespace hcdd;

namespace {
struct Setup {
  GridHierarchy g = build_hierarchy(24, 4);
  CoefficientField f = generate(g, Pattern::channels, 1e4, 3);
  PartitionOfUnity pou = build_pou(g);
};
}  // namespace

TEST_CASE("columns_to_matrix places entries") {
  BasisColumn c0{{1, 4}, {2.0, -1.0}};
  BasisColumn c1{{0}, {3.0}};
  SpMat m = columns_to_matrix(6, {c0, c1});
  CHECK(m.rows() == 6);
  CHECK(m.cols() == 2);
  CHECK(m.coeff(4, 0) == -1.0);
  CHECK(m.coeff(0, 1) == 3.0);
  CHECK(m.nonZeros() == 3);
}

TEST_CASE("pou coarse space is one hat per coarse node") {
  Setup s;
  SpectralCoarseSpace sp = build_pou_space(s.g, s.pou);
  CHECK(sp.dim() == s.g.coarse_node_count());
  SpMat B = sp.matrix(s.g);
  // the hats still sum to one at fine nodes away from the boundary layer
  Vec sums = B * Vec::Ones(B.cols());
  int n = s.g.fine_node(12, 12);
  CHECK(sums[s.g.free_index(n)] == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("fixed selection sizes the spectral space") {
  Setup s;
  Selection sel;
  sel.mode = Selection::Mode::fixed;
  sel.count = 2;
  SpectralCoarseSpace sp =
      build_spectral_space(s.g, s.f, s.pou, SpectralVariant::kappa_mass, sel);
  CHECK(sp.dim() == 2 * s.g.coarse_node_count());
  CHECK(sp.spectra.size() == size_t(s.g.coarse_node_count()));
  for (const auto& r : sp.spectra) {
    CHECK(r.count == 2);
    // ascending eigenvalues
    for (int k = 1; k < r.eigenvalues.size(); ++k)
      CHECK(r.eigenvalues[k] >= r.eigenvalues[k - 1] - 1e-12);
    CHECK(r.lambda_next >= r.eigenvalues[1] - 1e-12);
  }
  CHECK(sp.Lambda > 0.0);
}

TEST_CASE("floating neighborhoods have a near-zero first eigenvalue") {
  Setup s;
  Selection sel;
  sel.mode = Selection::Mode::fixed;
  sel.count = 1;
  SpectralCoarseSpace sp =
      build_spectral_space(s.g, s.f, s.pou, SpectralVariant::kappa_mass, sel);
  for (const auto& r : sp.spectra) {
    Region omega = neighborhood(s.g, r.region_id);
    if (omega.floating)
      CHECK(std::abs(r.eigenvalues[0]) < 1e-8 * r.eigenvalues[r.eigenvalues.size() - 1]);
  }
}

TEST_CASE("threshold selection keeps exactly the modes below lambda_star") {
  Setup s;
  Selection thr;
  thr.mode = Selection::Mode::threshold;
  thr.lambda_star = 1e-2;
  SpectralCoarseSpace sp =
      build_spectral_space(s.g, s.f, s.pou, SpectralVariant::kappa_mass, thr);
  int total = 0;
  for (const auto& r : sp.spectra) {
    total += r.count;
    // everything selected is below the threshold, the next mode is not
    // (unless the scan hit the cap)
    for (int k = 0; k < r.count; ++k) CHECK(r.eigenvalues[k] < thr.lambda_star);
    if (r.count < thr.max_count) CHECK(r.lambda_next >= thr.lambda_star);
  }
  CHECK(total >= 1);  // floating regions always contribute the near-kernel
}

TEST_CASE("basis columns live on their neighborhood") {
  Setup s;
  Selection sel;
  sel.mode = Selection::Mode::fixed;
  sel.count = 2;
  SpectralCoarseSpace sp =
      build_spectral_space(s.g, s.f, s.pou, SpectralVariant::kappa_mass, sel);
  REQUIRE(sp.basis_region.size() == size_t(sp.dim()));
  for (int c = 0; c < sp.dim(); ++c) {
    Region omega = neighborhood(s.g, sp.basis_region[c]);
    std::set<int> allowed(omega.free_nodes.begin(), omega.free_nodes.end());
    for (int dof : sp.basis[c].dofs)
      CHECK(allowed.count(s.g.free_node(dof)) == 1);
  }
}

TEST_CASE("snapshot space is orthonormal and contains the constants") {
  Setup s;
  Region omega = neighborhood(s.g, s.g.coarse_node(2, 2));
  SnapshotSpace w = build_snapshot_space(s.g, s.f, omega, 6, 99);
  CHECK(w.basis.rows() == int(omega.free_nodes.size()));
  CHECK(w.basis.cols() <= 7);  // constants + 6 samples
  CHECK(w.basis.cols() >= 2);
  Mat gram = w.basis.transpose() * w.basis;
  CHECK((gram - Mat::Identity(gram.rows(), gram.cols())).norm() < 1e-9);
  // the constant vector lies in the span
  Vec ones = Vec::Ones(w.basis.rows());
  Vec proj = w.basis * (w.basis.transpose() * ones);
  CHECK((proj - ones).norm() < 1e-8 * ones.norm());
  // deterministic in the seed
  SnapshotSpace w2 = build_snapshot_space(s.g, s.f, omega, 6, 99);
  CHECK((w.basis - w2.basis).norm() == 0.0);
}

TEST_CASE("gmsfem eigenvalues converge to the full spectral ones from above") {
  Setup s;
  Selection sel;
  sel.mode = Selection::Mode::fixed;
  sel.count = 3;
  SpectralCoarseSpace full =
      build_spectral_space(s.g, s.f, s.pou, SpectralVariant::kappa_mass, sel);
  std::vector<SnapshotSpace> snaps;
  for (int cn = 0; cn < s.g.coarse_node_count(); ++cn)
    snaps.push_back(
        build_snapshot_space(s.g, s.f, neighborhood(s.g, cn), 20, 1234));
  SpectralCoarseSpace red = build_gmsfem_space(
      s.g, s.f, s.pou, snaps, SpectralVariant::kappa_mass, sel);
  CHECK(red.dim() == full.dim());
  for (size_t i = 0; i < red.spectra.size(); ++i)
    for (int k = 0; k < 3; ++k) {
      double lam = red.spectra[i].eigenvalues[k];
      double ref = full.spectra[i].eigenvalues[k];
      CHECK(lam >= ref - 1e-9 * std::abs(ref) - 1e-12);  // Rayleigh-Ritz bound
    }
}

TEST_CASE("cem auxiliary blocks are mass-orthonormal with sorted spectra") {
  Setup s;
  Selection sel;
  sel.mode = Selection::Mode::fixed;
  sel.count = 3;
  CemAux aux = build_cem_aux(s.g, s.f, s.pou, sel);
  CHECK(aux.blocks.size() == size_t(s.g.coarse_cell_count()));
  CHECK(aux.total_count() == 3 * s.g.coarse_cell_count());
  CHECK(aux.Lambda > 0.0);
  for (const auto& b : aux.blocks) {
    CHECK(b.phi.cols() == 3);
    Mat gram = b.phi.transpose() * b.mass_phi;
    CHECK((gram - Mat::Identity(3, 3)).norm() < 1e-8);
    for (int k = 1; k < b.eigenvalues.size(); ++k)
      CHECK(b.eigenvalues[k] >= b.eigenvalues[k - 1] - 1e-12);
  }
}

TEST_CASE("aux projection is idempotent in coefficient form") {
  Setup s;
  Selection sel;
  sel.mode = Selection::Mode::fixed;
  sel.count = 2;
  CemAux aux = build_cem_aux(s.g, s.f, s.pou, sel);
  Vec v = Vec::LinSpaced(s.g.free_node_count(), -1.0, 2.0);
  auto c1 = aux_coefficients(s.g, aux, v);
  // lifting one block's coefficients and reading them back is exact, because
  // blocks do not overlap in their own cells
  for (size_t k = 0; k < aux.blocks.size(); ++k) {
    Vec lifted = Vec::Zero(s.g.free_node_count());
    const auto& b = aux.blocks[k];
    for (size_t t = 0; t < b.nodes.size(); ++t) {
      int dof = s.g.free_index(b.nodes[t]);
      for (int j = 0; j < b.count; ++j)
        lifted[dof] += b.phi(int(t), j) * c1[k][j];
    }
    auto c2 = aux_coefficients(s.g, aux, lifted);
    CHECK((c2[k] - c1[k]).norm() < 1e-10 * (c1[k].norm() + 1.0));
  }
}

TEST_CASE("cem basis is supported on the oversampled block") {
  Setup s;
  Selection sel;
  sel.mode = Selection::Mode::fixed;
  sel.count = 2;
  CemAux aux = build_cem_aux(s.g, s.f, s.pou, sel);
  CemCoarseSpace cem = build_cem_basis(s.g, s.f, aux, 1);
  CHECK(cem.dim() == aux.total_count());
  CHECK(cem.layers == 1);
  for (int c = 0; c < cem.dim(); ++c) {
    Region kp = oversample(s.g, coarse_block(s.g, cem.basis_block[c]), 1);
    std::set<int> allowed(kp.interior.begin(), kp.interior.end());
    for (int dof : cem.basis[c].dofs)
      CHECK(allowed.count(s.g.free_node(dof)) == 1);
  }
  CHECK_THROWS(build_cem_basis(s.g, s.f, aux, 0));
}

TEST_CASE("coarse space export writes readable metadata and data") {
  Setup s;
  SpectralCoarseSpace sp = build_pou_space(s.g, s.pou);
  auto dir = std::filesystem::temp_directory_path();
  std::string jpath = (dir / "hcdd_space.json").string();
  std::string bpath = (dir / "hcdd_space.bin").string();
  export_coarse_space(s.g, sp, jpath, bpath);

  std::ifstream bin(bpath, std::ios::binary);
  REQUIRE(bin.good());
  int64_t rows = 0, cols = 0;
  bin.read(reinterpret_cast<char*>(&rows), 8);
  bin.read(reinterpret_cast<char*>(&cols), 8);
  CHECK(rows == s.g.free_node_count());
  CHECK(cols == sp.dim());
  bin.seekg(0, std::ios::end);
  CHECK(int64_t(bin.tellg()) == 16 + rows * cols * 8);

  std::ifstream js(jpath);
  REQUIRE(js.good());
  std::remove(jpath.c_str());
  std::remove(bpath.c_str());
}

TEST_CASE("variant name round trip") {
  for (SpectralVariant v :
       {SpectralVariant::kappa_mass, SpectralVariant::ms_mass,
        SpectralVariant::gmsfem, SpectralVariant::pou_only})
    CHECK(variant_from_string(to_string(v)) == v);
  CHECK_THROWS(variant_from_string("bogus"));
}
