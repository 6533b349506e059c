#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hcdd/grid.hpp"

namespace hcdd {

/// Piecewise-constant permeability per fine cell, kappa > 0.
struct CoefficientField {
  std::vector<double> values;  // one per fine cell
  double kappa_min = 1.0;
  double kappa_max = 1.0;

  double eta() const { return kappa_max / kappa_min; }
  double operator[](int cell) const { return values[cell]; }
};

enum class Pattern {
  constant,
  interior_inclusions,
  boundary_inclusions,
  channels,
  mixed,  // channels plus inclusions straddling the coarse-cell edges
  binary_mask
};

Pattern pattern_from_string(const std::string& s);
std::string to_string(Pattern p);

struct GenParams {
  // channels: counts and width (fine cells) of full-span strips
  int channels_x = 3;   // horizontal channels (span left-right)
  int channels_y = 3;   // vertical channels (span bottom-top)
  int channel_width = 2;
  // inclusions: half-width margin control, in fine cells
  int inclusion_margin = 1;
  // binary_mask: caller-provided mask, one bool per fine cell
  std::vector<uint8_t> mask;
};

/// Background kappa=1, features kappa=eta. Deterministic in (g, pattern, eta,
/// seed, params).
CoefficientField generate(const GridHierarchy& g, Pattern pattern, double eta,
                          uint64_t seed, const GenParams& params = {});

CoefficientField load_csv(const GridHierarchy& g, const std::string& path);
void save_csv(const GridHierarchy& g, const CoefficientField& f,
              const std::string& path);
/// JSON sidecar {n_fine, pattern, eta, seed} next to the CSV.
void save_sidecar(const GridHierarchy& g, Pattern pattern, double eta,
                  uint64_t seed, const std::string& path);

}  // namespace hcdd
