#pragma once

#include <vector>

#include "hcdd/grid.hpp"

namespace hcdd {

enum class PouKind { bilinear_hat };

/// One fine-grid nodal function chi_i per coarse node, supp chi_i in omega_i,
/// 0 <= chi_i <= 1, sum_i chi_i = 1 at every fine node.
struct PartitionOfUnity {
  struct Chi {
    std::vector<int> nodes;      // fine node ids, sorted
    std::vector<double> values;  // chi at those nodes
  };
  PouKind kind = PouKind::bilinear_hat;
  std::vector<Chi> chi;  // one per coarse node

  /// chi_i at an arbitrary fine node (0 outside the support).
  double value(const GridHierarchy& g, int coarse_node, int fine_node) const;
};

PartitionOfUnity build_pou(const GridHierarchy& g,
                           PouKind kind = PouKind::bilinear_hat);

}  // namespace hcdd
