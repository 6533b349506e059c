#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "hcdd/coeff.hpp"
#include "hcdd/grid.hpp"
#include "hcdd/pou.hpp"

namespace hcdd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

enum class BC { dirichlet_eliminated, neumann };

/// Per-fine-cell nonnegative weight (kappa-tilde / kappa-hat).
struct WeightField {
  std::vector<double> values;
  double operator[](int cell) const { return values[cell]; }
};

/// Symmetric sparse matrix with a lazily cached direct factorization.
/// A Neumann stiffness matrix of a floating region carries the constants in
/// its kernel; solve() then requires rhs orthogonal to constants and returns
/// the zero-mean solution.
class SparseOperator {
 public:
  SparseOperator() = default;
  explicit SparseOperator(SpMat m, bool neumann_singular = false)
      : mat_(std::move(m)), neumann_singular_(neumann_singular) {}

  int dim() const { return static_cast<int>(mat_.rows()); }
  const SpMat& matrix() const { return mat_; }
  bool neumann_singular() const { return neumann_singular_; }

  Vec apply(const Vec& x) const { return mat_ * x; }
  Vec solve(const Vec& rhs) const;

  /// Force factorization now (useful before sharing across threads).
  void factorize() const;

 private:
  SpMat mat_;
  bool neumann_singular_ = false;

  struct Factor;
  mutable std::shared_ptr<Factor> factor_;
  mutable std::shared_ptr<std::mutex> factor_mutex_ =
      std::make_shared<std::mutex>();
};

/// Q1 stiffness: entries sum_cells kappa_cell * (element Laplacian).
/// region == nullptr assembles on the whole domain (unknowns: free nodes for
/// dirichlet_eliminated, all nodes for neumann). For a region, unknowns are
/// region->interior (dirichlet_eliminated) or region->free_nodes (neumann,
/// i.e. natural condition on the region boundary, Dirichlet on the global
/// boundary).
SparseOperator assemble_stiffness(const GridHierarchy& g,
                                  const CoefficientField& field,
                                  const Region* region, BC bc);

/// Q1 mass with per-cell weight w.
SparseOperator assemble_weighted_mass(const GridHierarchy& g,
                                      const WeightField& w,
                                      const Region* region, BC bc);

/// kappa-hat = kappa * sum_j |grad chi_j|^2, evaluated at cell midpoints.
WeightField build_weight(const GridHierarchy& g, const CoefficientField& field,
                         const PartitionOfUnity& pou);

/// Q1 load vector for a per-cell constant f, over the same unknown sets as
/// the assembly routines.
Vec assemble_load(const GridHierarchy& g, const std::vector<double>& f_cell,
                  const Region* region = nullptr,
                  BC bc = BC::dirichlet_eliminated);

/// Lowest eigenpairs of A psi = lambda B psi (ascending, B-orthonormal).
struct EigPairs {
  Vec values;
  Mat vectors;  // column j pairs with values[j]
};
EigPairs dense_generalized_eig(const SparseOperator& A, const SparseOperator& B,
                               int count);
EigPairs dense_generalized_eig(const Mat& A, Mat B, int count);

/// Matrix Market coordinate export (symmetric), for debugging.
void write_matrix_market(const SparseOperator& op, const std::string& path);

}  // namespace hcdd
