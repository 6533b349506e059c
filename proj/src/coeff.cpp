#include "hcdd/coeff.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace hcdd {

Pattern pattern_from_string(const std::string& s) {
  if (s == "constant") return Pattern::constant;
  if (s == "interior_inclusions") return Pattern::interior_inclusions;
  if (s == "boundary_inclusions") return Pattern::boundary_inclusions;
  if (s == "channels") return Pattern::channels;
  if (s == "mixed") return Pattern::mixed;
  if (s == "binary_mask") return Pattern::binary_mask;
  throw std::invalid_argument("unknown coefficient pattern: " + s);
}

std::string to_string(Pattern p) {
  switch (p) {
    case Pattern::constant: return "constant";
    case Pattern::interior_inclusions: return "interior_inclusions";
    case Pattern::boundary_inclusions: return "boundary_inclusions";
    case Pattern::channels: return "channels";
    case Pattern::mixed: return "mixed";
    case Pattern::binary_mask: return "binary_mask";
  }
  return "?";
}

namespace {

void paint_rect(const GridHierarchy& g, std::vector<uint8_t>& mask, int x0,
                int y0, int x1, int y1) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, g.n_fine);
  y1 = std::min(y1, g.n_fine);
  for (int j = y0; j < y1; ++j)
    for (int i = x0; i < x1; ++i) mask[g.fine_cell(i, j)] = 1;
}

std::vector<uint8_t> make_mask(const GridHierarchy& g, Pattern pattern,
                               uint64_t seed, const GenParams& p) {
  std::mt19937_64 rng(seed);
  std::vector<uint8_t> mask(g.fine_cell_count(), 0);
  const int r = g.ratio;
  switch (pattern) {
    case Pattern::constant:
      break;
    case Pattern::interior_inclusions: {
      const int m = p.inclusion_margin;
      if (r < 2 * m + 1)
        throw std::invalid_argument(
            "interior_inclusions: inclusion margin leaves no room inside a "
            "coarse cell (ratio=" + std::to_string(r) + ")");
      for (int c = 0; c < g.coarse_cell_count(); ++c) {
        int avail = r - 2 * m;
        std::uniform_int_distribution<int> size(std::max(1, avail / 2), avail);
        int w = size(rng), hgt = size(rng);
        std::uniform_int_distribution<int> px(m, r - m - w);
        std::uniform_int_distribution<int> py(m, r - m - hgt);
        int x0 = g.coarse_cell_x(c) * r + px(rng);
        int y0 = g.coarse_cell_y(c) * r + py(rng);
        paint_rect(g, mask, x0, y0, x0 + w, y0 + hgt);
      }
      break;
    }
    case Pattern::boundary_inclusions: {
      int half = std::max(1, r / 4);
      if (2 * half > r)
        throw std::invalid_argument("boundary_inclusions: feature exceeds cell");
      std::uniform_int_distribution<int> jitter(-half / 2, half / 2);
      // one blob per interior coarse edge, straddling it
      for (int j = 0; j < g.n_coarse; ++j)
        for (int i = 1; i < g.n_coarse; ++i) {  // vertical edges
          int cx = i * r, cy = j * r + r / 2 + jitter(rng);
          paint_rect(g, mask, cx - half, cy - half, cx + half, cy + half);
        }
      for (int j = 1; j < g.n_coarse; ++j)
        for (int i = 0; i < g.n_coarse; ++i) {  // horizontal edges
          int cx = i * r + r / 2 + jitter(rng), cy = j * r;
          paint_rect(g, mask, cx - half, cy - half, cx + half, cy + half);
        }
      break;
    }
    case Pattern::channels: {
      int w = std::max(2, p.channel_width);
      if (w > g.n_fine)
        throw std::invalid_argument("channels: channel width exceeds domain");
      auto place = [&](int count, std::vector<int>& starts) {
        std::uniform_int_distribution<int> pos(1, g.n_fine - w - 1);
        for (int c = 0; c < count; ++c) {
          int s = 0;
          for (int tries = 0; tries < 64; ++tries) {
            s = pos(rng);
            bool clash = false;
            for (int o : starts) clash |= std::abs(o - s) < w + 2;
            if (!clash) break;
          }
          starts.push_back(s);
        }
      };
      std::vector<int> ys, xs;
      place(p.channels_x, ys);
      place(p.channels_y, xs);
      for (int y0 : ys) paint_rect(g, mask, 0, y0, g.n_fine, y0 + w);
      for (int x0 : xs) paint_rect(g, mask, x0, 0, x0 + w, g.n_fine);
      break;
    }
    case Pattern::mixed: {
      auto ch = make_mask(g, Pattern::channels, seed, p);
      auto in = make_mask(g, Pattern::boundary_inclusions, seed + 1, p);
      for (int c = 0; c < g.fine_cell_count(); ++c) mask[c] = ch[c] | in[c];
      break;
    }
    case Pattern::binary_mask: {
      if (static_cast<int>(p.mask.size()) != g.fine_cell_count())
        throw std::invalid_argument(
            "binary_mask: mask length does not match fine cell count");
      mask = p.mask;
      break;
    }
  }
  return mask;
}

}  // namespace

CoefficientField generate(const GridHierarchy& g, Pattern pattern, double eta,
                          uint64_t seed, const GenParams& params) {
  if (eta < 1.0)
    throw std::invalid_argument("generate: contrast eta must be >= 1");
  auto mask = make_mask(g, pattern, seed, params);
  CoefficientField f;
  f.values.resize(g.fine_cell_count());
  for (int c = 0; c < g.fine_cell_count(); ++c)
    f.values[c] = mask[c] ? eta : 1.0;
  f.kappa_min = 1.0;
  f.kappa_max =
      std::any_of(mask.begin(), mask.end(), [](uint8_t m) { return m; }) ? eta
                                                                         : 1.0;
  return f;
}

CoefficientField load_csv(const GridHierarchy& g, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);
  CoefficientField f;
  f.values.resize(g.fine_cell_count());
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (row >= g.n_fine)
      throw std::runtime_error("load_csv: too many rows, expected " +
                               std::to_string(g.n_fine));
    std::stringstream ss(line);
    std::string tok;
    int col = 0;
    while (std::getline(ss, tok, ',')) {
      if (col >= g.n_fine)
        throw std::runtime_error("load_csv: row " + std::to_string(row) +
                                 " has more than " + std::to_string(g.n_fine) +
                                 " entries");
      double v = std::stod(tok);
      if (!(v > 0.0))
        throw std::runtime_error("load_csv: non-positive entry at row " +
                                 std::to_string(row) + ", col " +
                                 std::to_string(col));
      f.values[g.fine_cell(col, row)] = v;
      ++col;
    }
    if (col != g.n_fine)
      throw std::runtime_error("load_csv: row " + std::to_string(row) +
                               " has " + std::to_string(col) +
                               " entries, expected " + std::to_string(g.n_fine));
    ++row;
  }
  if (row != g.n_fine)
    throw std::runtime_error("load_csv: got " + std::to_string(row) +
                             " rows, expected " + std::to_string(g.n_fine));
  auto [mn, mx] = std::minmax_element(f.values.begin(), f.values.end());
  f.kappa_min = *mn;
  f.kappa_max = *mx;
  return f;
}

void save_csv(const GridHierarchy& g, const CoefficientField& f,
              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot open " + path);
  char buf[40];
  for (int j = 0; j < g.n_fine; ++j) {
    for (int i = 0; i < g.n_fine; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", f.values[g.fine_cell(i, j)]);
      out << buf << (i + 1 == g.n_fine ? '\n' : ',');
    }
  }
}

void save_sidecar(const GridHierarchy& g, Pattern pattern, double eta,
                  uint64_t seed, const std::string& path) {
  nlohmann::json j{{"n_fine", g.n_fine},
                   {"pattern", to_string(pattern)},
                   {"eta", eta},
                   {"seed", seed}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_sidecar: cannot open " + path);
  out << j.dump(2) << '\n';
}

}  // namespace hcdd
