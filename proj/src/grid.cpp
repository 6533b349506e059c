#include "hcdd/grid.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace hcdd {

GridHierarchy build_hierarchy(int n_fine, int n_coarse) {
  if (n_fine <= 0 || n_coarse <= 0)
    throw std::invalid_argument("build_hierarchy: mesh sizes must be positive");
  if (n_coarse < 2)
    throw std::invalid_argument("build_hierarchy: n_coarse must be >= 2, got " +
                                std::to_string(n_coarse));
  if (n_fine % n_coarse != 0)
    throw std::invalid_argument(
        "build_hierarchy: n_coarse=" + std::to_string(n_coarse) +
        " does not divide n_fine=" + std::to_string(n_fine) +
        "; the fine mesh must be nested in the coarse mesh");
  GridHierarchy g;
  g.n_fine = n_fine;
  g.n_coarse = n_coarse;
  g.ratio = n_fine / n_coarse;
  g.free_index_.assign(g.fine_node_count(), -1);
  g.free_nodes_.reserve(g.free_node_count());
  for (int j = 1; j < n_fine; ++j)
    for (int i = 1; i < n_fine; ++i) {
      int n = g.fine_node(i, j);
      g.free_index_[n] = static_cast<int>(g.free_nodes_.size());
      g.free_nodes_.push_back(n);
    }
  return g;
}

namespace {

// Fill cells/nodes/free/interior from a set of fine cells.
void finalize_region(const GridHierarchy& g, Region& r,
                     const std::set<int>& cell_set) {
  r.cells.assign(cell_set.begin(), cell_set.end());
  std::set<int> node_set;
  for (int c : r.cells) {
    int ci = g.fine_cell_x(c), cj = g.fine_cell_y(c);
    node_set.insert(g.fine_node(ci, cj));
    node_set.insert(g.fine_node(ci + 1, cj));
    node_set.insert(g.fine_node(ci, cj + 1));
    node_set.insert(g.fine_node(ci + 1, cj + 1));
  }
  r.nodes.assign(node_set.begin(), node_set.end());
  r.floating = true;
  for (int n : r.nodes) {
    if (g.is_boundary_fine_node(n)) {
      r.floating = false;
      continue;
    }
    r.free_nodes.push_back(n);
    // interior <=> all 4 adjacent cells belong to the region
    int i = g.fine_node_x(n), j = g.fine_node_y(n);
    bool inside = cell_set.count(g.fine_cell(i - 1, j - 1)) &&
                  cell_set.count(g.fine_cell(i, j - 1)) &&
                  cell_set.count(g.fine_cell(i - 1, j)) &&
                  cell_set.count(g.fine_cell(i, j));
    if (inside) r.interior.push_back(n);
  }
  r.covers_domain =
      static_cast<int>(r.cells.size()) == g.fine_cell_count();
}

void finalize_from_coarse(const GridHierarchy& g, Region& r,
                          const std::set<int>& coarse_set) {
  r.coarse_cells.assign(coarse_set.begin(), coarse_set.end());
  std::set<int> cell_set;
  for (int cc : r.coarse_cells) {
    int cx = g.coarse_cell_x(cc) * g.ratio;
    int cy = g.coarse_cell_y(cc) * g.ratio;
    for (int j = 0; j < g.ratio; ++j)
      for (int i = 0; i < g.ratio; ++i)
        cell_set.insert(g.fine_cell(cx + i, cy + j));
  }
  finalize_region(g, r, cell_set);
}

}  // namespace

Region coarse_block(const GridHierarchy& g, int coarse_cell) {
  if (coarse_cell < 0 || coarse_cell >= g.coarse_cell_count())
    throw std::out_of_range("coarse_block: bad coarse cell index");
  Region r;
  r.kind = RegionKind::coarse_block;
  r.anchor = coarse_cell;
  finalize_from_coarse(g, r, {coarse_cell});
  return r;
}

Region neighborhood(const GridHierarchy& g, int coarse_node) {
  if (coarse_node < 0 || coarse_node >= g.coarse_node_count())
    throw std::out_of_range("neighborhood: bad coarse node index");
  Region r;
  r.kind = RegionKind::neighborhood;
  r.anchor = coarse_node;
  int i = g.coarse_node_x(coarse_node), j = g.coarse_node_y(coarse_node);
  std::set<int> cc;
  for (int dj = -1; dj <= 0; ++dj)
    for (int di = -1; di <= 0; ++di) {
      int ci = i + di, cj = j + dj;
      if (ci >= 0 && ci < g.n_coarse && cj >= 0 && cj < g.n_coarse)
        cc.insert(g.coarse_cell(ci, cj));
    }
  finalize_from_coarse(g, r, cc);
  return r;
}

Region oversample(const GridHierarchy& g, const Region& base, int layers) {
  if (layers < 0) throw std::invalid_argument("oversample: negative layers");
  if (base.coarse_cells.empty())
    throw std::invalid_argument(
        "oversample: base region has no coarse-cell footprint");
  if (layers == 0) return base;
  std::set<int> cc(base.coarse_cells.begin(), base.coarse_cells.end());
  for (int l = 0; l < layers; ++l) {
    std::set<int> grown = cc;
    for (int c : cc) {
      int ci = g.coarse_cell_x(c), cj = g.coarse_cell_y(c);
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          int ni = ci + di, nj = cj + dj;
          if (ni >= 0 && ni < g.n_coarse && nj >= 0 && nj < g.n_coarse)
            grown.insert(g.coarse_cell(ni, nj));
        }
    }
    cc.swap(grown);
  }
  Region r;
  r.kind = base.kind == RegionKind::neighborhood
               ? RegionKind::oversampled_neighborhood
               : RegionKind::oversampled_block;
  r.anchor = base.anchor;
  r.layers = base.layers + layers;
  finalize_from_coarse(g, r, cc);
  return r;
}

std::vector<Region> overlapping_decomposition(const GridHierarchy& g,
                                              int overlap_fine_layers) {
  if (overlap_fine_layers < 0)
    throw std::invalid_argument("overlapping_decomposition: negative overlap");
  std::vector<Region> out;
  out.reserve(g.coarse_cell_count());
  for (int c = 0; c < g.coarse_cell_count(); ++c) {
    Region r;
    r.kind = RegionKind::subdomain;
    r.anchor = c;
    r.layers = overlap_fine_layers;
    int x0 = g.coarse_cell_x(c) * g.ratio - overlap_fine_layers;
    int y0 = g.coarse_cell_y(c) * g.ratio - overlap_fine_layers;
    int x1 = g.coarse_cell_x(c) * g.ratio + g.ratio + overlap_fine_layers;
    int y1 = g.coarse_cell_y(c) * g.ratio + g.ratio + overlap_fine_layers;
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, g.n_fine);
    y1 = std::min(y1, g.n_fine);
    std::set<int> cells;
    for (int j = y0; j < y1; ++j)
      for (int i = x0; i < x1; ++i) cells.insert(g.fine_cell(i, j));
    finalize_region(g, r, cells);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<Region> neighborhood_decomposition(const GridHierarchy& g) {
  std::vector<Region> out;
  out.reserve(g.coarse_node_count());
  for (int n = 0; n < g.coarse_node_count(); ++n) {
    Region r = neighborhood(g, n);
    r.kind = RegionKind::subdomain;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace hcdd
