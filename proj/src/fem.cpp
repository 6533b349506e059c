#include "hcdd/fem.hpp"

#include <lapacke.h>

#include <Eigen/SparseCholesky>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace hcdd {

namespace {

// Q1 element matrices on a square of side h, nodes counterclockwise:
// 0=(0,0) 1=(1,0) 2=(1,1) 3=(0,1).
// Stiffness (coefficient 1, h-independent in 2D), to be scaled by 1/6:
constexpr double kElemStiff[4][4] = {{4, -1, -2, -1},
                                     {-1, 4, -1, -2},
                                     {-2, -1, 4, -1},
                                     {-1, -2, -1, 4}};
// Mass (weight 1), to be scaled by h^2/36:
constexpr double kElemMass[4][4] = {{4, 2, 1, 2},
                                    {2, 4, 2, 1},
                                    {1, 2, 4, 2},
                                    {2, 1, 2, 4}};

void cell_nodes(const GridHierarchy& g, int cell, int out[4]) {
  int i = g.fine_cell_x(cell), j = g.fine_cell_y(cell);
  out[0] = g.fine_node(i, j);
  out[1] = g.fine_node(i + 1, j);
  out[2] = g.fine_node(i + 1, j + 1);
  out[3] = g.fine_node(i, j + 1);
}

const std::vector<int>& unknowns_for(const GridHierarchy& g,
                                     const Region* region, BC bc,
                                     std::vector<int>& scratch) {
  if (region) {
    return bc == BC::dirichlet_eliminated ? region->interior
                                          : region->free_nodes;
  }
  if (bc == BC::dirichlet_eliminated) return g.free_nodes();
  scratch.resize(g.fine_node_count());
  std::iota(scratch.begin(), scratch.end(), 0);
  return scratch;
}

SpMat assemble_matrix(const GridHierarchy& g, const Region* region,
                      const std::vector<int>& unknowns,
                      const double elem[4][4],
                      const std::function<double(int)>& cell_weight) {
  std::vector<int> loc(g.fine_node_count(), -1);
  for (int k = 0; k < static_cast<int>(unknowns.size()); ++k)
    loc[unknowns[k]] = k;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve((region ? region->cells.size() : g.fine_cell_count()) * 16);
  auto add_cell = [&](int c) {
    double w = cell_weight(c);
    if (w == 0.0) return;
    int n[4];
    cell_nodes(g, c, n);
    int l[4] = {loc[n[0]], loc[n[1]], loc[n[2]], loc[n[3]]};
    for (int a = 0; a < 4; ++a) {
      if (l[a] < 0) continue;
      for (int b = 0; b < 4; ++b)
        if (l[b] >= 0) trip.emplace_back(l[a], l[b], w * elem[a][b]);
    }
  };
  if (region)
    for (int c : region->cells) add_cell(c);
  else
    for (int c = 0; c < g.fine_cell_count(); ++c) add_cell(c);
  SpMat m(static_cast<int>(unknowns.size()), static_cast<int>(unknowns.size()));
  m.setFromTriplets(trip.begin(), trip.end());
  m.makeCompressed();
  return m;
}

}  // namespace

SparseOperator assemble_stiffness(const GridHierarchy& g,
                                  const CoefficientField& field,
                                  const Region* region, BC bc) {
  std::vector<int> scratch;
  const auto& unknowns = unknowns_for(g, region, bc, scratch);
  SpMat m = assemble_matrix(g, region, unknowns, kElemStiff,
                            [&](int c) { return field[c] / 6.0; });
  bool singular =
      bc == BC::neumann && (region ? region->floating : true);
  return SparseOperator(std::move(m), singular);
}

SparseOperator assemble_weighted_mass(const GridHierarchy& g,
                                      const WeightField& w,
                                      const Region* region, BC bc) {
  std::vector<int> scratch;
  const auto& unknowns = unknowns_for(g, region, bc, scratch);
  const double s = g.h() * g.h() / 36.0;
  SpMat m = assemble_matrix(g, region, unknowns, kElemMass,
                            [&](int c) { return w[c] * s; });
  return SparseOperator(std::move(m), false);
}

WeightField build_weight(const GridHierarchy& g, const CoefficientField& field,
                         const PartitionOfUnity& pou) {
  if (pou.kind != PouKind::bilinear_hat)
    throw std::invalid_argument("build_weight: unsupported PoU kind");
  WeightField w;
  w.values.resize(g.fine_cell_count());
  const int r = g.ratio;
  const double H = g.H();
  for (int c = 0; c < g.fine_cell_count(); ++c) {
    // midpoint local coordinates inside the owning coarse cell
    double xi = (g.fine_cell_x(c) % r + 0.5) / r;
    double et = (g.fine_cell_y(c) % r + 0.5) / r;
    double s = 2.0 *
               ((1 - xi) * (1 - xi) + xi * xi + (1 - et) * (1 - et) +
                et * et) /
               (H * H);
    w.values[c] = field[c] * s;
  }
  return w;
}

Vec assemble_load(const GridHierarchy& g, const std::vector<double>& f_cell,
                  const Region* region, BC bc) {
  if (static_cast<int>(f_cell.size()) != g.fine_cell_count())
    throw std::invalid_argument("assemble_load: f has wrong length");
  std::vector<int> scratch;
  const auto& unknowns = unknowns_for(g, region, bc, scratch);
  std::vector<int> loc(g.fine_node_count(), -1);
  for (int k = 0; k < static_cast<int>(unknowns.size()); ++k)
    loc[unknowns[k]] = k;
  Vec b = Vec::Zero(unknowns.size());
  const double q = g.h() * g.h() / 4.0;
  auto add_cell = [&](int c) {
    int n[4];
    cell_nodes(g, c, n);
    for (int a = 0; a < 4; ++a)
      if (loc[n[a]] >= 0) b[loc[n[a]]] += f_cell[c] * q;
  };
  if (region)
    for (int c : region->cells) add_cell(c);
  else
    for (int c = 0; c < g.fine_cell_count(); ++c) add_cell(c);
  return b;
}

// ---------------------------------------------------------------------------
// Factorized solves

struct SparseOperator::Factor {
  bool dense = false;
  Eigen::LLT<Mat> dense_llt;
  Eigen::SimplicialLDLT<SpMat> sparse_ldlt;
  // For singular Neumann operators the system is pinned at dof 0.
  SpMat pinned;  // kept alive for refinement
};

static constexpr int kDenseFallbackDim = 400;

void SparseOperator::factorize() const {
  std::lock_guard<std::mutex> lock(*factor_mutex_);
  if (!factor_) {
    auto f = std::make_shared<Factor>();
    const int n = dim();
    if (neumann_singular_) {
      // remove row/col 0; remaining matrix is SPD for a connected region
      SpMat sub = mat_.bottomRightCorner(n - 1, n - 1);
      if (n - 1 < kDenseFallbackDim) {
        f->dense = true;
        f->dense_llt.compute(Mat(sub));
        if (f->dense_llt.info() != Eigen::Success)
          throw std::runtime_error("factorize: pinned matrix not SPD");
      } else {
        f->sparse_ldlt.compute(sub);
        if (f->sparse_ldlt.info() != Eigen::Success)
          throw std::runtime_error("factorize: pinned factorization failed");
      }
      f->pinned = std::move(sub);
    } else if (n < kDenseFallbackDim) {
      f->dense = true;
      f->dense_llt.compute(Mat(mat_));
      if (f->dense_llt.info() != Eigen::Success)
        throw std::runtime_error("factorize: matrix not SPD");
    } else {
      f->sparse_ldlt.compute(mat_);
      if (f->sparse_ldlt.info() != Eigen::Success)
        throw std::runtime_error("factorize: sparse factorization failed");
    }
    factor_ = std::move(f);
  }
}

Vec SparseOperator::solve(const Vec& rhs) const {
  if (rhs.size() != dim())
    throw std::invalid_argument("solve: rhs dimension mismatch");
  factorize();
  const auto& f = *factor_;
  if (neumann_singular_) {
    const int n = dim();
    double scale = rhs.norm();
    if (scale == 0.0) return Vec::Zero(n);
    if (std::abs(rhs.sum()) > 1e-8 * std::sqrt(double(n)) * scale)
      throw std::runtime_error(
          "solve: rhs not orthogonal to constants on a floating Neumann "
          "region (ill-posed local problem)");
    auto pinned_solve = [&](const Vec& r) -> Vec {
      Vec y = f.dense ? Vec(f.dense_llt.solve(r.tail(n - 1)))
                      : Vec(f.sparse_ldlt.solve(r.tail(n - 1)));
      Vec x = Vec::Zero(n);
      x.tail(n - 1) = y;
      return x;
    };
    Vec x = pinned_solve(rhs);
    for (int pass = 0; pass < 2; ++pass) {
      Vec r = rhs - mat_ * x;
      if (r.norm() <= 1e-12 * scale) break;
      r.array() -= r.sum() / n;  // keep the correction compatible
      x += pinned_solve(r);
    }
    x.array() -= x.mean();
    return x;
  }
  Vec x = f.dense ? Vec(f.dense_llt.solve(rhs)) : Vec(f.sparse_ldlt.solve(rhs));
  double scale = rhs.norm();
  for (int pass = 0; pass < 2 && scale > 0; ++pass) {
    Vec r = rhs - mat_ * x;
    if (r.norm() <= 1e-12 * scale) break;
    x += f.dense ? Vec(f.dense_llt.solve(r)) : Vec(f.sparse_ldlt.solve(r));
  }
  return x;
}

// ---------------------------------------------------------------------------
// Dense generalized eigensolver (Cholesky-congruence reduction via LAPACK)

EigPairs dense_generalized_eig(const Mat& Ain, Mat B, int count) {
  const int n = static_cast<int>(Ain.rows());
  if (Ain.cols() != n || B.rows() != n || B.cols() != n)
    throw std::invalid_argument("dense_generalized_eig: dimension mismatch");
  if (n > 6000)
    throw std::invalid_argument("dense_generalized_eig: dimension too large");
  count = std::min(std::max(count, 1), n);

  double maxdiag = B.diagonal().maxCoeff();
  if (!(maxdiag > 0.0))
    throw std::runtime_error("dense_generalized_eig: mass matrix is zero");
  for (int i = 0; i < n; ++i)
    if (B(i, i) <= 0.0) B(i, i) += 1e-12 * maxdiag;

  Mat A = Ain;
  Vec w(n);
  Mat z(n, count);
  std::vector<lapack_int> ifail(n);
  lapack_int m = 0;
  lapack_int info = LAPACKE_dsygvx(
      LAPACK_COL_MAJOR, 1, 'V', 'I', 'L', n, A.data(), n, B.data(), n, 0.0,
      0.0, 1, count, 2 * LAPACKE_dlamch('S'), &m, w.data(), z.data(), n,
      ifail.data());
  if (info > n)
    throw std::runtime_error(
        "dense_generalized_eig: mass matrix numerically singular beyond "
        "regularization");
  if (info != 0)
    throw std::runtime_error("dense_generalized_eig: LAPACK dsygvx failed, "
                             "info=" + std::to_string(info));
  EigPairs out;
  out.values = w.head(m);
  out.vectors = z.leftCols(m);
  return out;
}

EigPairs dense_generalized_eig(const SparseOperator& A, const SparseOperator& B,
                               int count) {
  return dense_generalized_eig(Mat(A.matrix()), Mat(B.matrix()), count);
}

void write_matrix_market(const SparseOperator& op, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_matrix_market: cannot open " + path);
  const SpMat& m = op.matrix();
  long nnz_lower = 0;
  for (int k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it)
      if (it.row() >= it.col()) ++nnz_lower;
  out << "%%MatrixMarket matrix coordinate real symmetric\n";
  out << m.rows() << " " << m.cols() << " " << nnz_lower << "\n";
  char buf[48];
  for (int k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it)
      if (it.row() >= it.col()) {
        std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n",
                      static_cast<long>(it.row() + 1),
                      static_cast<long>(it.col() + 1), it.value());
        out << buf;
      }
}

}  // namespace hcdd
