#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hcdd/fem.hpp"
#include "hcdd/grid.hpp"
#include "hcdd/pou.hpp"

namespace hcdd {

/// One coarse basis vector over global free dofs (sparse, sorted dof ids).
struct BasisColumn {
  std::vector<int> dofs;
  std::vector<double> values;
};

SpMat columns_to_matrix(int n_rows, const std::vector<BasisColumn>& cols);

enum class SpectralVariant { kappa_mass, ms_mass, gmsfem, pou_only };
std::string to_string(SpectralVariant v);
SpectralVariant variant_from_string(const std::string& s);

/// Eigenvector count rule per region.
struct Selection {
  enum class Mode { fixed, threshold, gap };
  Mode mode = Mode::fixed;
  int count = 3;            // fixed
  double lambda_star = 0.0; // threshold
  int max_count = 12;       // scan cap for threshold/gap
};

struct RegionSpectrum {
  int region_id = -1;    // coarse node (spectral) or coarse cell (CEM aux)
  Vec eigenvalues;       // all computed modes, ascending
  int count = 0;         // selected L
  double lambda_next = 0;  // lambda_{L+1} (inf when the local space is exhausted)
};

struct SpectralCoarseSpace {
  SpectralVariant variant = SpectralVariant::kappa_mass;
  std::vector<BasisColumn> basis;
  std::vector<int> basis_region;  // owning coarse node per column
  std::vector<RegionSpectrum> spectra;
  double Lambda = 0.0;  // min_i lambda_{L_i+1}

  int dim() const { return static_cast<int>(basis.size()); }
  SpMat matrix(const GridHierarchy& g) const {
    return columns_to_matrix(g.free_node_count(), basis);
  }
};

/// Coarse space spanned by the partition of unity alone (one hat per coarse
/// node, zeroed on the global boundary). The "MS" baseline.
SpectralCoarseSpace build_pou_space(const GridHierarchy& g,
                                    const PartitionOfUnity& pou);

/// GenEO-type spectral space: per omega_i solve A psi = lambda B psi with
/// Neumann stiffness and kappa-mass (kappa_mass) or kappa-hat-mass (ms_mass),
/// keep the lowest modes per `sel`, basis = I_h(chi_i * psi_j).
SpectralCoarseSpace build_spectral_space(const GridHierarchy& g,
                                         const CoefficientField& field,
                                         const PartitionOfUnity& pou,
                                         SpectralVariant variant,
                                         const Selection& sel);

/// Randomized local snapshot space W_i on one neighborhood: zero-mean random
/// forcings, local Neumann solves, plus the constants; orthonormalized.
struct SnapshotSpace {
  int region_id = -1;  // coarse node
  Mat basis;           // n_loc x dim, columns over region free_nodes
  int samples = 0;
  uint64_t seed = 0;
};
SnapshotSpace build_snapshot_space(const GridHierarchy& g,
                                   const CoefficientField& field,
                                   const Region& omega, int samples,
                                   uint64_t seed);

/// GMsFEM space: the spectral eigenproblem restricted to the snapshot spaces
/// (one per coarse node, indexed by coarse node id).
SpectralCoarseSpace build_gmsfem_space(const GridHierarchy& g,
                                       const CoefficientField& field,
                                       const PartitionOfUnity& pou,
                                       const std::vector<SnapshotSpace>& snaps,
                                       SpectralVariant base_variant,
                                       const Selection& sel);

// ---------------------------------------------------------------------------
// Constrained (CEM) coarse space

/// Per-coarse-block auxiliary eigenpairs for the kappa-hat-weighted quotient.
struct CemAux {
  struct Block {
    int coarse_cell = -1;
    std::vector<int> nodes;  // free nodes of K, global fine ids
    Mat phi;                 // n_K x L_K, kappa-hat-mass-orthonormal
    Mat mass_phi;            // M_hat_K * phi
    Vec eigenvalues;
    int count = 0;
    double lambda_next = 0;
  };
  WeightField kappa_hat;
  std::vector<Block> blocks;  // one per coarse cell
  double Lambda = 0.0;

  int total_count() const;
};

CemAux build_cem_aux(const GridHierarchy& g, const CoefficientField& field,
                     const PartitionOfUnity& pou, const Selection& sel);

/// Per-block projection coefficients (the direct-sum representation of pi_D).
std::vector<Vec> aux_coefficients(const GridHierarchy& g, const CemAux& aux,
                                  const Vec& v);
/// pi_D(v) lifted back to a free-dof vector (blockwise scatter-add).
Vec project_aux(const GridHierarchy& g, const CemAux& aux, const Vec& v);

struct CemCoarseSpace {
  std::vector<BasisColumn> basis;  // one per (K, j), supported on K+
  std::vector<int> basis_block;    // owning coarse cell
  int layers = 0;
  double Lambda = 0.0;

  int dim() const { return static_cast<int>(basis.size()); }
  SpMat matrix(const GridHierarchy& g) const {
    return columns_to_matrix(g.free_node_count(), basis);
  }
};

/// Oversampled multiscale basis: for each (K, j) solve on the interior of K+
/// (A_{K+} + P^T P) psi = P^T e_{K,j}, P the pi_D coefficient map on K+.
CemCoarseSpace build_cem_basis(const GridHierarchy& g,
                               const CoefficientField& field,
                               const CemAux& aux, int layers);

/// Export: JSON metadata + dense binary column file (two little-endian int64
/// {rows, cols}, then column-major float64).
void export_coarse_space(const GridHierarchy& g,
                         const SpectralCoarseSpace& space,
                         const std::string& json_path,
                         const std::string& bin_path);

}  // namespace hcdd
