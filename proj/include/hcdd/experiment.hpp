#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcdd/coarse.hpp"
#include "hcdd/coeff.hpp"
#include "hcdd/precond.hpp"

namespace hcdd {

struct CoeffConfig {
  Pattern pattern = Pattern::constant;
  double eta = 1.0;
  uint64_t seed = 0;
  GenParams params;
  std::string csv;  // non-empty: load instead of generate
};

struct MethodConfig {
  enum class Type { one_level, two_level, hybrid };
  Type type = Type::two_level;
  std::string name;  // CSV label; defaults to the type name
  SpectralVariant variant = SpectralVariant::kappa_mass;
  Selection selection;
  int overlap = 2;                       // fine-cell layers, delta = overlap*h
  std::string decomp = "coarse_cells";   // or "neighborhoods" (D_j' = omega_j)
  int snapshots = 8;                     // gmsfem sample count
  int basis_per_block = 3;               // hybrid aux count per coarse block
  int layers = 3;                        // hybrid oversampling k (coarse layers)
  // per-method sweep overrides; empty falls back to the experiment-level sweep
  std::vector<double> sweep_eta;
  std::vector<int> sweep_layers, sweep_overlap, sweep_basis;
};

struct ExperimentConfig {
  int schema_version = 1;
  int n_fine = 32, n_coarse = 4;
  CoeffConfig coeff;
  std::vector<MethodConfig> methods;
  PcgOptions pcg;
  std::vector<double> sweep_eta;
  std::vector<int> sweep_layers, sweep_overlap, sweep_basis;
  std::string output = "results.csv";
};

/// Strict parse: unknown keys anywhere are rejected with a field-level message.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// Built-in configurations: "table1", "table2", "smoke".
const char* preset_json(const std::string& name);

struct RunRow {
  std::string method, variant;
  double eta = 1, H = 0, h = 0;
  int overlap_or_k = 0, basis_count = 0, coarse_dim = 0, iterations = 0;
  double cond_estimate = 0, wall_ms = 0;
  bool converged = false;
};

std::string csv_header();
std::string csv_line(const RunRow& r);

struct RunResult {
  std::vector<RunRow> rows;
  bool all_converged = true;
};

RunResult run_experiment(const ExperimentConfig& cfg, int jobs = 1);
void write_rows_csv(const std::vector<RunRow>& rows, const std::string& path);

/// Per-region eigenvalue dump for the first configured method:
/// rows "region_id,index,lambda".
std::string dump_eigs_csv(const ExperimentConfig& cfg);

}  // namespace hcdd
