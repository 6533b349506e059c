#pragma once

#include <string>
#include <vector>

namespace hcdd {

/// Structured 2D grid hierarchy on the unit square: fine mesh of n_fine x n_fine
/// square Q1 cells nested in a coarse mesh of n_coarse x n_coarse blocks.
/// Homogeneous Dirichlet condition on the whole boundary; "free" nodes are the
/// interior fine nodes, indexed 0..(n_fine-1)^2-1.
struct GridHierarchy {
  int n_fine = 0;
  int n_coarse = 0;
  int ratio = 0;  // n_fine / n_coarse

  double h() const { return 1.0 / n_fine; }
  double H() const { return 1.0 / n_coarse; }

  int fine_nodes_per_side() const { return n_fine + 1; }
  int coarse_nodes_per_side() const { return n_coarse + 1; }
  int fine_node_count() const { return (n_fine + 1) * (n_fine + 1); }
  int fine_cell_count() const { return n_fine * n_fine; }
  int coarse_node_count() const { return (n_coarse + 1) * (n_coarse + 1); }
  int coarse_cell_count() const { return n_coarse * n_coarse; }
  int free_node_count() const { return (n_fine - 1) * (n_fine - 1); }

  // x-fastest linear indexing, (i,j) = (x,y) integer coordinates
  int fine_node(int i, int j) const { return j * (n_fine + 1) + i; }
  int fine_cell(int i, int j) const { return j * n_fine + i; }
  int coarse_node(int i, int j) const { return j * (n_coarse + 1) + i; }
  int coarse_cell(int i, int j) const { return j * n_coarse + i; }

  int fine_node_x(int n) const { return n % (n_fine + 1); }
  int fine_node_y(int n) const { return n / (n_fine + 1); }
  int fine_cell_x(int c) const { return c % n_fine; }
  int fine_cell_y(int c) const { return c / n_fine; }
  int coarse_node_x(int n) const { return n % (n_coarse + 1); }
  int coarse_node_y(int n) const { return n / (n_coarse + 1); }
  int coarse_cell_x(int c) const { return c % n_coarse; }
  int coarse_cell_y(int c) const { return c / n_coarse; }

  bool is_boundary_fine_node(int n) const {
    int i = fine_node_x(n), j = fine_node_y(n);
    return i == 0 || j == 0 || i == n_fine || j == n_fine;
  }

  /// Coarse cell containing a fine cell.
  int coarse_cell_of_fine_cell(int c) const {
    return coarse_cell(fine_cell_x(c) / ratio, fine_cell_y(c) / ratio);
  }

  /// fine node id -> free dof id, or -1 for Dirichlet boundary nodes
  int free_index(int node) const { return free_index_[node]; }
  /// free dof id -> fine node id
  int free_node(int dof) const { return free_nodes_[dof]; }
  const std::vector<int>& free_nodes() const { return free_nodes_; }

  std::vector<int> free_index_;
  std::vector<int> free_nodes_;
};

enum class RegionKind {
  coarse_block,               // K
  neighborhood,               // omega_i
  oversampled_block,          // K+
  oversampled_neighborhood,   // omega_i+
  subdomain                   // D_j'
};

/// A union of fine cells with node bookkeeping. Node lists are sorted.
/// - nodes: all fine nodes of member cells
/// - free_nodes: nodes minus the global Dirichlet boundary (unknowns of a
///   Neumann / mixed Neumann-Dirichlet local problem)
/// - interior: nodes strictly inside the region footprint and off the global
///   boundary (unknowns of a zero-Dirichlet local problem)
struct Region {
  RegionKind kind;
  int anchor = -1;   // owning coarse node (neighborhoods) or coarse cell (blocks)
  int layers = 0;    // oversampling / overlap layer count
  std::vector<int> cells;
  std::vector<int> coarse_cells;  // empty for fine-layer subdomains
  std::vector<int> nodes;
  std::vector<int> free_nodes;
  std::vector<int> interior;
  bool floating = false;       // does not touch the global boundary
  bool covers_domain = false;  // metadata: region is all of D
};

GridHierarchy build_hierarchy(int n_fine, int n_coarse);

/// Coarse-block K as a region (fine cells of one coarse cell).
Region coarse_block(const GridHierarchy& g, int coarse_cell);

/// omega_i: union of the (<=4) coarse cells adjacent to coarse node i.
Region neighborhood(const GridHierarchy& g, int coarse_node);

/// Add `layers` layers of node-adjacent (Moore) coarse cells, clipped at the
/// domain boundary. layers=0 returns the base region unchanged.
Region oversample(const GridHierarchy& g, const Region& base, int layers);

/// Overlapping decomposition {D_j'}: each coarse cell extended by
/// `overlap_fine_layers` fine-cell layers (delta = layers*h).
std::vector<Region> overlapping_decomposition(const GridHierarchy& g,
                                              int overlap_fine_layers);

/// The D_j' = omega_j mode: one subdomain per coarse node.
std::vector<Region> neighborhood_decomposition(const GridHierarchy& g);

}  // namespace hcdd
