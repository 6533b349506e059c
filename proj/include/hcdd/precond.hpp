#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hcdd/coarse.hpp"
#include "hcdd/fem.hpp"
#include "hcdd/grid.hpp"

namespace hcdd {

/// Symmetric positive definite linear operator applied to a residual.
class Preconditioner {
 public:
  virtual ~Preconditioner() = default;
  virtual Vec apply(const Vec& r) const = 0;
  virtual std::string kind() const = 0;
};

std::unique_ptr<Preconditioner> make_identity();
std::unique_ptr<Preconditioner> make_exact(SparseOperator A);

/// One-level additive Schwarz: sum of zero-Dirichlet solves on the
/// overlapping subdomains.
std::unique_ptr<Preconditioner> make_one_level(
    const GridHierarchy& g, const CoefficientField& field,
    const std::vector<Region>& subdomains);

/// Two-level additive: one-level plus a Galerkin coarse correction on the
/// given basis (n_free x m). An empty basis degenerates to one-level.
std::unique_ptr<Preconditioner> make_two_level(
    const GridHierarchy& g, const CoefficientField& field,
    const std::vector<Region>& subdomains, const SparseOperator& A,
    const SpMat& coarse_basis);

struct HybridOptions {
  /// Local sum: symmetrized chi-weighted solves (default) or plain additive.
  bool chi_weighted = true;
  /// Assemble the coarse operator from the kappa=1 stiffness instead of A.
  bool unweighted_coarse = false;
  /// Byte budget for cached local factorizations; beyond it, subdomain
  /// factorizations are redone per application.
  size_t cache_budget_bytes = size_t(2) << 30;
};

/// Hybrid preconditioner
///   M^{-1} = (I - C A) (sum_i local solves) (I - A C) + C,   C = coarse solve
/// with penalized local operators on the oversampled neighborhoods.
std::unique_ptr<Preconditioner> make_hybrid_cem(
    const GridHierarchy& g, const CoefficientField& field, const CemAux& aux,
    const CemCoarseSpace& cem, int layers, const SparseOperator& A,
    const HybridOptions& opts = {});

struct PcgOptions {
  double tol = 1e-8;  // relative residual
  int maxit = 500;
};

struct SolveReport {
  int iterations = 0;
  bool converged = false;
  std::vector<double> residuals;  // ||r_k||/||b|| per iteration
  double lambda_min = 0.0;        // Lanczos extremal estimates
  double lambda_max = 0.0;
  double cond_estimate = 0.0;
  double wall_ms = 0.0;
};

std::string report_to_json(const SolveReport& r);

std::pair<Vec, SolveReport> pcg(const SparseOperator& A, const Vec& b,
                                const Preconditioner& M,
                                const PcgOptions& opts = {});

/// Ground-truth condition number of M^{-1}A on small instances (dim <= 2500):
/// materialize M, symmetrize, and solve the dense symmetric pencil.
double dense_cond_oracle(const SparseOperator& A, const Preconditioner& M);

}  // namespace hcdd
