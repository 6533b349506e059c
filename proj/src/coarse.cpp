#include "hcdd/coarse.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace hcdd {

SpMat columns_to_matrix(int n_rows, const std::vector<BasisColumn>& cols) {
  std::vector<Eigen::Triplet<double>> trip;
  for (int c = 0; c < static_cast<int>(cols.size()); ++c)
    for (size_t k = 0; k < cols[c].dofs.size(); ++k)
      trip.emplace_back(cols[c].dofs[k], c, cols[c].values[k]);
  SpMat m(n_rows, static_cast<int>(cols.size()));
  m.setFromTriplets(trip.begin(), trip.end());
  m.makeCompressed();
  return m;
}

std::string to_string(SpectralVariant v) {
  switch (v) {
    case SpectralVariant::kappa_mass: return "kappa_mass";
    case SpectralVariant::ms_mass: return "ms_mass";
    case SpectralVariant::gmsfem: return "gmsfem";
    case SpectralVariant::pou_only: return "pou_only";
  }
  return "?";
}

SpectralVariant variant_from_string(const std::string& s) {
  if (s == "kappa_mass") return SpectralVariant::kappa_mass;
  if (s == "ms_mass") return SpectralVariant::ms_mass;
  if (s == "gmsfem") return SpectralVariant::gmsfem;
  if (s == "pou_only") return SpectralVariant::pou_only;
  throw std::invalid_argument("unknown coarse-space variant: " + s);
}

namespace {

int modes_to_request(const Selection& sel, int dim) {
  int want = sel.mode == Selection::Mode::fixed ? sel.count + 1
                                                : sel.max_count + 1;
  return std::min(std::max(want, 2), dim);
}

/// Number of modes kept from an ascending eigenvalue list.
int select_count(const Selection& sel, const Vec& ev, int dim) {
  const int m = static_cast<int>(ev.size());
  switch (sel.mode) {
    case Selection::Mode::fixed:
      return std::min(sel.count, dim);
    case Selection::Mode::threshold: {
      int L = 0;
      while (L < m && ev[L] < sel.lambda_star) ++L;
      return std::min(L, sel.max_count);
    }
    case Selection::Mode::gap: {
      // Cut at the last comparable-to-largest relative jump in the window.
      // Taking the single largest jump is brittle: the near-kernel mode of a
      // floating region produces a jump of the same order as the true
      // small-to-large gap, and would truncate the small cluster after one
      // mode. Any jump within the square root of the largest one is treated
      // as part of the same separation, and the latest such cut keeps the
      // whole small cluster.
      double floor = 1e-12 * std::max(ev[m - 1], 1e-300);
      int window = std::min(m, sel.max_count + 1);
      double best_ratio = -1.0;
      std::vector<double> ratio(window, 0.0);
      for (int L = 1; L < window; ++L) {
        ratio[L] = ev[L] / std::max(ev[L - 1], floor);
        best_ratio = std::max(best_ratio, ratio[L]);
      }
      int best = 1;
      double accept = std::max(std::sqrt(best_ratio), 1.0);
      for (int L = 1; L < window; ++L)
        if (ratio[L] >= accept) best = L;
      return best;
    }
  }
  return 1;
}

double lambda_after(const Vec& ev, int L, int dim) {
  if (L < ev.size()) return ev[L];
  if (L >= dim) return std::numeric_limits<double>::infinity();
  return ev[ev.size() - 1];  // best available bound
}

}  // namespace

SpectralCoarseSpace build_pou_space(const GridHierarchy& g,
                                    const PartitionOfUnity& pou) {
  SpectralCoarseSpace space;
  space.variant = SpectralVariant::pou_only;
  for (int cn = 0; cn < g.coarse_node_count(); ++cn) {
    BasisColumn col;
    const auto& chi = pou.chi[cn];
    for (size_t k = 0; k < chi.nodes.size(); ++k) {
      int dof = g.free_index(chi.nodes[k]);
      if (dof >= 0) {
        col.dofs.push_back(dof);
        col.values.push_back(chi.values[k]);
      }
    }
    space.basis.push_back(std::move(col));
    space.basis_region.push_back(cn);
  }
  space.Lambda = 0.0;
  return space;
}

namespace {

/// chi_i * psi interpolated on the fine grid, as a global sparse column.
BasisColumn cut_off(const GridHierarchy& g, const PartitionOfUnity& pou,
                    int coarse_node, const Region& region, const Vec& psi) {
  BasisColumn col;
  for (size_t t = 0; t < region.free_nodes.size(); ++t) {
    int node = region.free_nodes[t];
    double chi = pou.value(g, coarse_node, node);
    double v = chi * psi[static_cast<int>(t)];
    if (v != 0.0) {
      col.dofs.push_back(g.free_index(node));
      col.values.push_back(v);
    }
  }
  return col;
}

WeightField kappa_weight(const CoefficientField& field) {
  return WeightField{field.values};
}

}  // namespace

SpectralCoarseSpace build_spectral_space(const GridHierarchy& g,
                                         const CoefficientField& field,
                                         const PartitionOfUnity& pou,
                                         SpectralVariant variant,
                                         const Selection& sel) {
  if (variant != SpectralVariant::kappa_mass &&
      variant != SpectralVariant::ms_mass)
    throw std::invalid_argument(
        "build_spectral_space: variant must be kappa_mass or ms_mass");
  const WeightField weight = variant == SpectralVariant::kappa_mass
                                 ? kappa_weight(field)
                                 : build_weight(g, field, pou);
  SpectralCoarseSpace space;
  space.variant = variant;
  space.Lambda = std::numeric_limits<double>::infinity();
  for (int cn = 0; cn < g.coarse_node_count(); ++cn) {
    Region omega = neighborhood(g, cn);
    const int dim = static_cast<int>(omega.free_nodes.size());
    if (dim == 0) continue;  // cannot happen for n_coarse >= 2
    SparseOperator A = assemble_stiffness(g, field, &omega, BC::neumann);
    SparseOperator B = assemble_weighted_mass(g, weight, &omega, BC::neumann);
    EigPairs eig = dense_generalized_eig(A, B, modes_to_request(sel, dim));
    int L = select_count(sel, eig.values, dim);
    if (L == 0 && omega.floating && variant == SpectralVariant::kappa_mass) {
      std::cerr << "build_spectral_space: floating neighborhood " << cn
                << " selected 0 modes; keeping the near-constant mode\n";
      L = 1;
    }
    RegionSpectrum spec;
    spec.region_id = cn;
    spec.eigenvalues = eig.values;
    spec.count = L;
    spec.lambda_next = lambda_after(eig.values, L, dim);
    space.Lambda = std::min(space.Lambda, spec.lambda_next);
    space.spectra.push_back(std::move(spec));
    for (int j = 0; j < L; ++j) {
      space.basis.push_back(cut_off(g, pou, cn, omega, eig.vectors.col(j)));
      space.basis_region.push_back(cn);
    }
  }
  return space;
}

SnapshotSpace build_snapshot_space(const GridHierarchy& g,
                                   const CoefficientField& field,
                                   const Region& omega, int samples,
                                   uint64_t seed) {
  if (samples < 0)
    throw std::invalid_argument("build_snapshot_space: negative sample count");
  const int n_loc = static_cast<int>(omega.free_nodes.size());
  SnapshotSpace snap;
  snap.region_id = omega.anchor;
  snap.samples = samples;
  snap.seed = seed;

  SparseOperator A = assemble_stiffness(g, field, &omega, BC::neumann);
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + omega.anchor);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);

  std::vector<Vec> cols;
  cols.push_back(Vec::Ones(n_loc));
  std::vector<double> f(g.fine_cell_count(), 0.0);
  for (int s = 0; s < samples; ++s) {
    double mean = 0.0;
    for (int c : omega.cells) {
      f[c] = uni(rng);
      mean += f[c];
    }
    mean /= static_cast<double>(omega.cells.size());
    for (int c : omega.cells) f[c] -= mean;  // per-region zero integral
    Vec b = assemble_load(g, f, &omega, BC::neumann);
    Vec u = A.solve(b);
    if (!omega.floating) {
      // mixed problem is uniquely solvable; still normalize for uniform scale
      u.array() -= u.mean();
    }
    cols.push_back(std::move(u));
    for (int c : omega.cells) f[c] = 0.0;
  }

  // modified Gram-Schmidt with relative drop tolerance
  std::vector<Vec> kept;
  for (auto& v : cols) {
    double n0 = v.norm();
    if (n0 == 0.0) continue;
    for (const auto& q : kept) v -= q.dot(v) * q;
    for (const auto& q : kept) v -= q.dot(v) * q;  // re-orthogonalize
    if (v.norm() < 1e-10 * n0) continue;
    kept.push_back(v / v.norm());
  }
  snap.basis.resize(n_loc, static_cast<int>(kept.size()));
  for (int c = 0; c < static_cast<int>(kept.size()); ++c)
    snap.basis.col(c) = kept[c];
  return snap;
}

SpectralCoarseSpace build_gmsfem_space(const GridHierarchy& g,
                                       const CoefficientField& field,
                                       const PartitionOfUnity& pou,
                                       const std::vector<SnapshotSpace>& snaps,
                                       SpectralVariant base_variant,
                                       const Selection& sel) {
  if (static_cast<int>(snaps.size()) != g.coarse_node_count())
    throw std::invalid_argument(
        "build_gmsfem_space: need one snapshot space per coarse node");
  const WeightField weight = base_variant == SpectralVariant::kappa_mass
                                 ? kappa_weight(field)
                                 : build_weight(g, field, pou);
  SpectralCoarseSpace space;
  space.variant = SpectralVariant::gmsfem;
  space.Lambda = std::numeric_limits<double>::infinity();
  for (int cn = 0; cn < g.coarse_node_count(); ++cn) {
    Region omega = neighborhood(g, cn);
    const Mat& W = snaps[cn].basis;
    if (W.rows() != static_cast<long>(omega.free_nodes.size()))
      throw std::invalid_argument(
          "build_gmsfem_space: snapshot basis does not match neighborhood " +
          std::to_string(cn));
    const int red = static_cast<int>(W.cols());
    if (red == 0) continue;
    SparseOperator A = assemble_stiffness(g, field, &omega, BC::neumann);
    SparseOperator B = assemble_weighted_mass(g, weight, &omega, BC::neumann);
    Mat Ar = W.transpose() * A.matrix() * W;
    Mat Br = W.transpose() * B.matrix() * W;
    EigPairs eig = dense_generalized_eig(Ar, Br, modes_to_request(sel, red));
    int L = select_count(sel, eig.values, red);
    if (L == 0) L = 1;
    RegionSpectrum spec;
    spec.region_id = cn;
    spec.eigenvalues = eig.values;
    spec.count = L;
    spec.lambda_next = lambda_after(eig.values, L, red);
    space.Lambda = std::min(space.Lambda, spec.lambda_next);
    space.spectra.push_back(std::move(spec));
    for (int j = 0; j < L; ++j) {
      Vec psi = W * eig.vectors.col(j);
      space.basis.push_back(cut_off(g, pou, cn, omega, psi));
      space.basis_region.push_back(cn);
    }
  }
  return space;
}

// ---------------------------------------------------------------------------
// CEM coarse space

int CemAux::total_count() const {
  int n = 0;
  for (const auto& b : blocks) n += b.count;
  return n;
}

CemAux build_cem_aux(const GridHierarchy& g, const CoefficientField& field,
                     const PartitionOfUnity& pou, const Selection& sel) {
  CemAux aux;
  aux.kappa_hat = build_weight(g, field, pou);
  aux.Lambda = std::numeric_limits<double>::infinity();
  for (int cc = 0; cc < g.coarse_cell_count(); ++cc) {
    Region K = coarse_block(g, cc);
    const int dim = static_cast<int>(K.free_nodes.size());
    SparseOperator A = assemble_stiffness(g, field, &K, BC::neumann);
    SparseOperator B =
        assemble_weighted_mass(g, aux.kappa_hat, &K, BC::neumann);
    EigPairs eig = dense_generalized_eig(A, B, modes_to_request(sel, dim));
    int L = select_count(sel, eig.values, dim);
    CemAux::Block blk;
    blk.coarse_cell = cc;
    blk.nodes = K.free_nodes;
    blk.eigenvalues = eig.values;
    blk.count = L;
    blk.lambda_next = lambda_after(eig.values, L, dim);
    blk.phi = eig.vectors.leftCols(L);
    blk.mass_phi = B.matrix() * blk.phi;
    aux.Lambda = std::min(aux.Lambda, blk.lambda_next);
    aux.blocks.push_back(std::move(blk));
  }
  return aux;
}

std::vector<Vec> aux_coefficients(const GridHierarchy& g, const CemAux& aux,
                                  const Vec& v) {
  std::vector<Vec> coeffs;
  coeffs.reserve(aux.blocks.size());
  for (const auto& blk : aux.blocks) {
    Vec vloc(blk.nodes.size());
    for (size_t t = 0; t < blk.nodes.size(); ++t)
      vloc[static_cast<int>(t)] = v[g.free_index(blk.nodes[t])];
    coeffs.push_back(blk.mass_phi.transpose() * vloc);
  }
  return coeffs;
}

Vec project_aux(const GridHierarchy& g, const CemAux& aux, const Vec& v) {
  Vec out = Vec::Zero(v.size());
  auto coeffs = aux_coefficients(g, aux, v);
  for (size_t b = 0; b < aux.blocks.size(); ++b) {
    const auto& blk = aux.blocks[b];
    if (blk.count == 0) continue;
    Vec lifted = blk.phi * coeffs[b];
    for (size_t t = 0; t < blk.nodes.size(); ++t)
      out[g.free_index(blk.nodes[t])] += lifted[static_cast<int>(t)];
  }
  return out;
}

CemCoarseSpace build_cem_basis(const GridHierarchy& g,
                               const CoefficientField& field,
                               const CemAux& aux, int layers) {
  if (layers < 1)
    throw std::invalid_argument(
        "build_cem_basis: need at least one oversampling layer");
  CemCoarseSpace space;
  space.layers = layers;
  space.Lambda = aux.Lambda;
  std::vector<int> block_of_cell(g.coarse_cell_count());
  for (size_t b = 0; b < aux.blocks.size(); ++b)
    block_of_cell[aux.blocks[b].coarse_cell] = static_cast<int>(b);

  std::vector<int> loc(g.fine_node_count(), -1);
  for (int cc = 0; cc < g.coarse_cell_count(); ++cc) {
    const auto& kblk = aux.blocks[block_of_cell[cc]];
    if (kblk.count == 0) continue;
    Region kplus = oversample(g, coarse_block(g, cc), layers);
    const int n_int = static_cast<int>(kplus.interior.size());
    for (int t = 0; t < n_int; ++t) loc[kplus.interior[t]] = t;

    SparseOperator A =
        assemble_stiffness(g, field, &kplus, BC::dirichlet_eliminated);
    // pi_D coefficient map on K+, Dirichlet rows dropped
    std::vector<Eigen::Triplet<double>> ptrip;
    int row = 0;
    int row_of_k = -1;
    for (int cc2 : kplus.coarse_cells) {
      const auto& blk = aux.blocks[block_of_cell[cc2]];
      if (cc2 == cc) row_of_k = row;
      for (int j = 0; j < blk.count; ++j, ++row)
        for (size_t t = 0; t < blk.nodes.size(); ++t) {
          int l = loc[blk.nodes[t]];
          if (l >= 0)
            ptrip.emplace_back(row, l, blk.mass_phi(static_cast<int>(t), j));
        }
    }
    SpMat P(row, n_int);
    P.setFromTriplets(ptrip.begin(), ptrip.end());
    SpMat S = A.matrix() + SpMat(SpMat(P.transpose()) * P);
    SparseOperator solver(std::move(S));
    for (int j = 0; j < kblk.count; ++j) {
      Vec e = Vec::Zero(row);
      e[row_of_k + j] = 1.0;
      Vec rhs = P.transpose() * e;
      Vec psi = solver.solve(rhs);
      BasisColumn col;
      for (int t = 0; t < n_int; ++t) {
        if (psi[t] != 0.0) {
          col.dofs.push_back(g.free_index(kplus.interior[t]));
          col.values.push_back(psi[t]);
        }
      }
      space.basis.push_back(std::move(col));
      space.basis_block.push_back(cc);
    }
    for (int t = 0; t < n_int; ++t) loc[kplus.interior[t]] = -1;
  }
  return space;
}

void export_coarse_space(const GridHierarchy& g,
                         const SpectralCoarseSpace& space,
                         const std::string& json_path,
                         const std::string& bin_path) {
  nlohmann::json meta;
  meta["variant"] = to_string(space.variant);
  meta["dim"] = space.dim();
  meta["rows"] = g.free_node_count();
  meta["Lambda"] = space.Lambda;
  auto& regions = meta["regions"] = nlohmann::json::array();
  for (const auto& s : space.spectra) {
    nlohmann::json r;
    r["region_id"] = s.region_id;
    r["count"] = s.count;
    r["lambda_next"] = s.lambda_next;
    r["eigenvalues"] = std::vector<double>(
        s.eigenvalues.data(), s.eigenvalues.data() + s.eigenvalues.size());
    regions.push_back(std::move(r));
  }
  std::ofstream jout(json_path);
  if (!jout) throw std::runtime_error("export_coarse_space: cannot open " +
                                      json_path);
  jout << meta.dump(2) << '\n';

  std::ofstream bout(bin_path, std::ios::binary);
  if (!bout) throw std::runtime_error("export_coarse_space: cannot open " +
                                      bin_path);
  int64_t rows = g.free_node_count(), cols = space.dim();
  bout.write(reinterpret_cast<const char*>(&rows), 8);
  bout.write(reinterpret_cast<const char*>(&cols), 8);
  Vec column(rows);
  for (const auto& col : space.basis) {
    column.setZero();
    for (size_t k = 0; k < col.dofs.size(); ++k)
      column[col.dofs[k]] = col.values[k];
    bout.write(reinterpret_cast<const char*>(column.data()), 8 * rows);
  }
}

}  // namespace hcdd
