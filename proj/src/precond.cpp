#include "hcdd/precond.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hcdd {

namespace {

class IdentityPrecond final : public Preconditioner {
 public:
  Vec apply(const Vec& r) const override { return r; }
  std::string kind() const override { return "identity"; }
};

class ExactPrecond final : public Preconditioner {
 public:
  explicit ExactPrecond(SparseOperator A) : A_(std::move(A)) {
    A_.factorize();
  }
  Vec apply(const Vec& r) const override { return A_.solve(r); }
  std::string kind() const override { return "exact"; }

 private:
  SparseOperator A_;
};

/// Zero-Dirichlet local solve block over a list of free dofs.
struct LocalBlock {
  std::vector<int> dofs;  // global free-dof ids, in local order
  SpMat S;
  std::unique_ptr<Eigen::SimplicialLDLT<SpMat>> fact;  // null: factor on use
  Vec chi;  // chi_i at local dofs (hybrid only)

  size_t factorize_cached() {
    fact = std::make_unique<Eigen::SimplicialLDLT<SpMat>>(S);
    if (fact->info() != Eigen::Success)
      throw std::runtime_error("local subdomain factorization failed");
    return static_cast<size_t>(fact->matrixL().nestedExpression().nonZeros()) *
               12 +
           dofs.size() * 24;
  }

  Vec gather(const Vec& r) const {
    Vec out(dofs.size());
    for (size_t t = 0; t < dofs.size(); ++t)
      out[static_cast<int>(t)] = r[dofs[t]];
    return out;
  }
  void scatter_add(const Vec& v, Vec& out) const {
    for (size_t t = 0; t < dofs.size(); ++t)
      out[dofs[t]] += v[static_cast<int>(t)];
  }
};

/// Solve one or two right-hand sides with at most one factorization.
void block_solve(const LocalBlock& b, const Vec* r1, Vec* x1, const Vec* r2,
                 Vec* x2) {
  if (b.fact) {
    if (r1) *x1 = b.fact->solve(*r1);
    if (r2) *x2 = b.fact->solve(*r2);
    return;
  }
  Eigen::SimplicialLDLT<SpMat> f(b.S);
  if (f.info() != Eigen::Success)
    throw std::runtime_error("local subdomain factorization failed");
  if (r1) *x1 = f.solve(*r1);
  if (r2) *x2 = f.solve(*r2);
}

std::vector<LocalBlock> build_local_blocks(const GridHierarchy& g,
                                           const CoefficientField& field,
                                           const std::vector<Region>& subs) {
  std::vector<LocalBlock> blocks;
  for (const auto& r : subs) {
    if (r.interior.empty()) continue;
    LocalBlock b;
    b.dofs.reserve(r.interior.size());
    for (int n : r.interior) b.dofs.push_back(g.free_index(n));
    b.S = assemble_stiffness(g, field, &r, BC::dirichlet_eliminated).matrix();
    b.factorize_cached();
    blocks.push_back(std::move(b));
  }
  return blocks;
}

/// Penalized local solve for the hybrid smoother. The explicit operator
/// S = A_loc + P^T P fills in badly under sparse factorization (every coarse
/// block inside the region couples as a dense clique), so solves go through
/// the Woodbury form
///   S^-1 r = A^-1 r - A^-1 P^T (I + P A^-1 P^T)^-1 P A^-1 r
/// which only needs the cheap factorization of A_loc plus a small dense
/// capacitance of one row per constraint.
struct HybridBlock {
  std::vector<int> dofs;  // global free-dof ids, in local order
  SpMat A;                // local zero-Dirichlet stiffness
  SpMat P;                // constraint rows over local dofs
  SpMat Pt;               // P^T, cached
  Vec chi;

  struct Fact {
    Eigen::SimplicialLDLT<SpMat> base;
    Eigen::LLT<Mat> capacitance;
  };
  std::unique_ptr<Fact> fact;  // null: factor on use

  void build_fact(Fact& f) const {
    f.base.compute(A);
    if (f.base.info() != Eigen::Success)
      throw std::runtime_error("hybrid local factorization failed");
    const int m = static_cast<int>(P.rows());
    Mat W = f.base.solve(Mat(Pt));
    Mat C = Mat::Identity(m, m) + P * W;
    f.capacitance.compute(0.5 * (C + C.transpose()));
    if (f.capacitance.info() != Eigen::Success)
      throw std::runtime_error("hybrid capacitance factorization failed");
  }

  size_t factorize_cached() {
    fact = std::make_unique<Fact>();
    build_fact(*fact);
    return static_cast<size_t>(
               fact->base.matrixL().nestedExpression().nonZeros()) *
               12 +
           dofs.size() * 24 +
           static_cast<size_t>(P.rows()) * P.rows() * 8;
  }

  Vec solve_with(const Fact& f, const Vec& r) const {
    Vec t = f.base.solve(r);
    Vec u = f.capacitance.solve(P * t);
    return t - f.base.solve(Vec(Pt * u));
  }

  void solve(const Vec* r1, Vec* x1, const Vec* r2, Vec* x2) const {
    if (fact) {
      if (r1) *x1 = solve_with(*fact, *r1);
      if (r2) *x2 = solve_with(*fact, *r2);
      return;
    }
    Fact f;
    build_fact(f);
    if (r1) *x1 = solve_with(f, *r1);
    if (r2) *x2 = solve_with(f, *r2);
  }

  Vec gather(const Vec& r) const {
    Vec out(dofs.size());
    for (size_t t = 0; t < dofs.size(); ++t)
      out[static_cast<int>(t)] = r[dofs[t]];
    return out;
  }
  void scatter_add(const Vec& v, Vec& out) const {
    for (size_t t = 0; t < dofs.size(); ++t)
      out[dofs[t]] += v[static_cast<int>(t)];
  }
};

struct CoarseSolve {
  SpMat basis;  // n_free x m
  SparseOperator a0;

  bool empty() const { return basis.cols() == 0; }
  Vec apply(const Vec& r) const {
    return basis * a0.solve(basis.transpose() * r);
  }
};

CoarseSolve build_coarse_solve(const SpMat& amat, const SpMat& basis) {
  CoarseSolve c;
  c.basis = basis;
  if (basis.cols() > 0) {
    SpMat a0 = (SpMat(basis.transpose()) * amat * basis).pruned();
    c.a0 = SparseOperator(std::move(a0));
    c.a0.factorize();
  }
  return c;
}

class OneLevelAS final : public Preconditioner {
 public:
  OneLevelAS(std::vector<LocalBlock> blocks, int n)
      : blocks_(std::move(blocks)), n_(n) {}
  Vec apply(const Vec& r) const override {
    Vec out = Vec::Zero(n_);
    for (const auto& b : blocks_) {
      Vec rloc = b.gather(r), x;
      block_solve(b, &rloc, &x, nullptr, nullptr);
      b.scatter_add(x, out);
    }
    return out;
  }
  std::string kind() const override { return "one_level"; }

 protected:
  std::vector<LocalBlock> blocks_;
  int n_;
};

class TwoLevelAS final : public Preconditioner {
 public:
  TwoLevelAS(std::vector<LocalBlock> blocks, CoarseSolve coarse, int n)
      : blocks_(std::move(blocks)), coarse_(std::move(coarse)), n_(n) {}
  Vec apply(const Vec& r) const override {
    Vec out = coarse_.empty() ? Vec(Vec::Zero(n_)) : Vec(coarse_.apply(r));
    for (const auto& b : blocks_) {
      Vec rloc = b.gather(r), x;
      block_solve(b, &rloc, &x, nullptr, nullptr);
      b.scatter_add(x, out);
    }
    return out;
  }
  std::string kind() const override { return "two_level_additive"; }

 private:
  std::vector<LocalBlock> blocks_;
  CoarseSolve coarse_;
  int n_;
};

class HybridCem final : public Preconditioner {
 public:
  HybridCem(SpMat amat, CoarseSolve coarse, std::vector<HybridBlock> blocks,
            bool chi_weighted)
      : amat_(std::move(amat)),
        coarse_(std::move(coarse)),
        blocks_(std::move(blocks)),
        chi_weighted_(chi_weighted) {}

  Vec apply(const Vec& r) const override {
    Vec z0 = coarse_.apply(r);
    Vec rp = r - amat_ * z0;
    Vec y = local_sum(rp);
    Vec w = y - coarse_.apply(amat_ * y);
    return w + z0;
  }
  std::string kind() const override { return "hybrid_cem"; }

 private:
  Vec local_sum(const Vec& r) const {
    Vec out = Vec::Zero(r.size());
    for (const auto& b : blocks_) {
      Vec rloc = b.gather(r);
      if (chi_weighted_) {
        // symmetrized chi-weighted sum: 1/2 (S^-1 chi r + chi S^-1 r)
        Vec rw = b.chi.cwiseProduct(rloc);
        Vec x1, x2;
        b.solve(&rw, &x1, &rloc, &x2);
        Vec acc = 0.5 * (x1 + b.chi.cwiseProduct(x2));
        b.scatter_add(acc, out);
      } else {
        Vec x;
        b.solve(&rloc, &x, nullptr, nullptr);
        b.scatter_add(x, out);
      }
    }
    return out;
  }

  SpMat amat_;
  CoarseSolve coarse_;
  std::vector<HybridBlock> blocks_;
  bool chi_weighted_;
};

}  // namespace

std::unique_ptr<Preconditioner> make_identity() {
  return std::make_unique<IdentityPrecond>();
}

std::unique_ptr<Preconditioner> make_exact(SparseOperator A) {
  return std::make_unique<ExactPrecond>(std::move(A));
}

std::unique_ptr<Preconditioner> make_one_level(
    const GridHierarchy& g, const CoefficientField& field,
    const std::vector<Region>& subdomains) {
  return std::make_unique<OneLevelAS>(build_local_blocks(g, field, subdomains),
                                      g.free_node_count());
}

std::unique_ptr<Preconditioner> make_two_level(
    const GridHierarchy& g, const CoefficientField& field,
    const std::vector<Region>& subdomains, const SparseOperator& A,
    const SpMat& coarse_basis) {
  auto blocks = build_local_blocks(g, field, subdomains);
  auto coarse = build_coarse_solve(A.matrix(), coarse_basis);
  return std::make_unique<TwoLevelAS>(std::move(blocks), std::move(coarse),
                                      g.free_node_count());
}

std::unique_ptr<Preconditioner> make_hybrid_cem(
    const GridHierarchy& g, const CoefficientField& field, const CemAux& aux,
    const CemCoarseSpace& cem, int layers, const SparseOperator& A,
    const HybridOptions& opts) {
  if (layers < 1)
    throw std::invalid_argument(
        "make_hybrid_cem: need at least one oversampling layer (k >= 1)");
  if (cem.dim() == 0)
    throw std::invalid_argument("make_hybrid_cem: empty coarse space");

  CoarseSolve coarse;
  if (opts.unweighted_coarse) {
    CoefficientField ones;
    ones.values.assign(g.fine_cell_count(), 1.0);
    SparseOperator A1 = assemble_stiffness(g, ones, nullptr,
                                           BC::dirichlet_eliminated);
    coarse = build_coarse_solve(A1.matrix(), cem.matrix(g));
  } else {
    coarse = build_coarse_solve(A.matrix(), cem.matrix(g));
  }

  PartitionOfUnity pou = build_pou(g);
  std::vector<int> block_of_cell(g.coarse_cell_count());
  for (size_t b = 0; b < aux.blocks.size(); ++b)
    block_of_cell[aux.blocks[b].coarse_cell] = static_cast<int>(b);

  std::vector<HybridBlock> blocks;
  std::vector<int> loc(g.fine_node_count(), -1);
  size_t cached_bytes = 0;
  for (int cn = 0; cn < g.coarse_node_count(); ++cn) {
    Region oplus = oversample(g, neighborhood(g, cn), layers);
    if (oplus.interior.empty()) continue;
    const int n_int = static_cast<int>(oplus.interior.size());
    for (int t = 0; t < n_int; ++t) loc[oplus.interior[t]] = t;

    HybridBlock b;
    b.dofs.reserve(n_int);
    for (int n : oplus.interior) b.dofs.push_back(g.free_index(n));
    SparseOperator Aloc =
        assemble_stiffness(g, field, &oplus, BC::dirichlet_eliminated);
    std::vector<Eigen::Triplet<double>> ptrip;
    int row = 0;
    for (int cc : oplus.coarse_cells) {
      const auto& blk = aux.blocks[block_of_cell[cc]];
      for (int j = 0; j < blk.count; ++j, ++row)
        for (size_t t = 0; t < blk.nodes.size(); ++t) {
          int l = loc[blk.nodes[t]];
          if (l >= 0)
            ptrip.emplace_back(row, l, blk.mass_phi(static_cast<int>(t), j));
        }
    }
    SpMat P(row, n_int);
    P.setFromTriplets(ptrip.begin(), ptrip.end());
    b.A = Aloc.matrix();
    b.P = P;
    b.Pt = SpMat(P.transpose());
    b.chi = Vec::Zero(n_int);
    for (int t = 0; t < n_int; ++t)
      b.chi[t] = pou.value(g, cn, oplus.interior[t]);
    if (cached_bytes < opts.cache_budget_bytes)
      cached_bytes += b.factorize_cached();
    for (int t = 0; t < n_int; ++t) loc[oplus.interior[t]] = -1;
    blocks.push_back(std::move(b));
  }
  return std::make_unique<HybridCem>(A.matrix(), std::move(coarse),
                                     std::move(blocks), opts.chi_weighted);
}

// ---------------------------------------------------------------------------

std::string report_to_json(const SolveReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "{\"iterations\":" << r.iterations
     << ",\"converged\":" << (r.converged ? "true" : "false")
     << ",\"cond_estimate\":" << r.cond_estimate << ",\"residuals\":[";
  for (size_t i = 0; i < r.residuals.size(); ++i)
    os << (i ? "," : "") << r.residuals[i];
  os << "],\"wall_ms\":" << r.wall_ms << "}";
  return os.str();
}

std::pair<Vec, SolveReport> pcg(const SparseOperator& A, const Vec& b,
                                const Preconditioner& M,
                                const PcgOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  SolveReport rep;
  const int n = A.dim();
  Vec x = Vec::Zero(n);
  const double nb = b.norm();
  if (nb == 0.0) {
    rep.converged = true;
    return {x, rep};
  }
  Vec r = b;
  Vec z = M.apply(r);
  double rz = r.dot(z);
  if (rz <= 0.0)
    throw std::runtime_error("pcg: preconditioner is not positive definite");
  Vec p = z;
  std::vector<double> alphas, betas;
  for (int k = 1; k <= opts.maxit; ++k) {
    Vec Ap = A.apply(p);
    double pAp = p.dot(Ap);
    if (pAp <= 0.0)
      throw std::runtime_error("pcg: system operator is not positive definite");
    double alpha = rz / pAp;
    alphas.push_back(alpha);
    x += alpha * p;
    r -= alpha * Ap;
    double res = r.norm() / nb;
    rep.residuals.push_back(res);
    rep.iterations = k;
    if (res <= opts.tol) {
      rep.converged = true;
      break;
    }
    z = M.apply(r);
    double rz_new = r.dot(z);
    if (rz_new <= 0.0)
      throw std::runtime_error("pcg: preconditioner is not positive definite");
    double beta = rz_new / rz;
    betas.push_back(beta);
    rz = rz_new;
    p = z + beta * p;
  }

  // Lanczos tridiagonal from the CG coefficients
  const int m = static_cast<int>(alphas.size());
  if (m > 0) {
    Mat T = Mat::Zero(m, m);
    for (int k = 0; k < m; ++k) {
      T(k, k) = 1.0 / alphas[k];
      if (k > 0) T(k, k) += betas[k - 1] / alphas[k - 1];
      if (k + 1 < m) {
        double off = std::sqrt(betas[k]) / alphas[k];
        T(k, k + 1) = off;
        T(k + 1, k) = off;
      }
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(T, Eigen::EigenvaluesOnly);
    rep.lambda_min = es.eigenvalues().minCoeff();
    rep.lambda_max = es.eigenvalues().maxCoeff();
    rep.cond_estimate = rep.lambda_max / rep.lambda_min;
  }
  rep.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return {x, rep};
}

double dense_cond_oracle(const SparseOperator& A, const Preconditioner& M) {
  const int n = A.dim();
  if (n > 2500)
    throw std::invalid_argument("dense_cond_oracle: dimension > 2500");
  Mat P(n, n);
  Vec e = Vec::Zero(n);
  for (int i = 0; i < n; ++i) {
    e[i] = 1.0;
    P.col(i) = M.apply(e);
    e[i] = 0.0;
  }
  P = 0.5 * (P + P.transpose()).eval();
  Eigen::LLT<Mat> llt(P);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("dense_cond_oracle: preconditioner not SPD");
  Mat L = llt.matrixL();
  Mat S = L.transpose() * Mat(A.matrix()) * L;
  Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
}

}  // namespace hcdd
