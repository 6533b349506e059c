#include "hcdd/pou.hpp"

#include <cmath>
#include <cstdlib>

namespace hcdd {

PartitionOfUnity build_pou(const GridHierarchy& g, PouKind kind) {
  PartitionOfUnity pou;
  pou.kind = kind;
  pou.chi.resize(g.coarse_node_count());
  const int r = g.ratio;
  for (int cn = 0; cn < g.coarse_node_count(); ++cn) {
    int cx = g.coarse_node_x(cn) * r;
    int cy = g.coarse_node_y(cn) * r;
    auto& chi = pou.chi[cn];
    for (int j = std::max(0, cy - r); j <= std::min(g.n_fine, cy + r); ++j) {
      double wy = 1.0 - std::abs(j - cy) / static_cast<double>(r);
      for (int i = std::max(0, cx - r); i <= std::min(g.n_fine, cx + r); ++i) {
        double wx = 1.0 - std::abs(i - cx) / static_cast<double>(r);
        double v = wx * wy;
        if (v > 0.0) {
          chi.nodes.push_back(g.fine_node(i, j));
          chi.values.push_back(v);
        }
      }
    }
  }
  return pou;
}

double PartitionOfUnity::value(const GridHierarchy& g, int coarse_node,
                               int fine_node) const {
  const int r = g.ratio;
  int cx = g.coarse_node_x(coarse_node) * r;
  int cy = g.coarse_node_y(coarse_node) * r;
  double wx = 1.0 - std::abs(g.fine_node_x(fine_node) - cx) /
                        static_cast<double>(r);
  double wy = 1.0 - std::abs(g.fine_node_y(fine_node) - cy) /
                        static_cast<double>(r);
  if (wx <= 0.0 || wy <= 0.0) return 0.0;
  return wx * wy;
}

}  // namespace hcdd
