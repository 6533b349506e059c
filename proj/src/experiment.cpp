#include "hcdd/experiment.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace hcdd {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& where,
                               const std::string& what) {
  throw std::invalid_argument("config error at " + where + ": " + what);
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) config_error(where, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok |= it.key() == k;
    if (!ok) config_error(where, "unknown field \"" + it.key() + "\"");
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

Selection parse_selection(const json& j, const std::string& where) {
  check_keys(j, where, {"mode", "count", "lambda", "max_count"});
  Selection s;
  std::string mode = get_or<std::string>(j, "mode", "fixed");
  if (mode == "fixed") {
    s.mode = Selection::Mode::fixed;
    s.count = get_or(j, "count", 3);
    if (s.count < 0) config_error(where, "count must be >= 0");
  } else if (mode == "threshold") {
    s.mode = Selection::Mode::threshold;
    if (!j.contains("lambda")) config_error(where, "threshold needs \"lambda\"");
    s.lambda_star = j.at("lambda").get<double>();
  } else if (mode == "gap") {
    s.mode = Selection::Mode::gap;
  } else {
    config_error(where, "unknown selection mode \"" + mode + "\"");
  }
  s.max_count = get_or(j, "max_count", 12);
  if (s.max_count < 1) config_error(where, "max_count must be >= 1");
  return s;
}

MethodConfig parse_method(const json& j, const std::string& where) {
  check_keys(j, where,
             {"type", "name", "variant", "selection", "overlap", "decomp",
              "snapshots", "basis_per_block", "layers", "sweep"});
  MethodConfig m;
  std::string type = get_or<std::string>(j, "type", "");
  if (type == "one_level")
    m.type = MethodConfig::Type::one_level;
  else if (type == "two_level")
    m.type = MethodConfig::Type::two_level;
  else if (type == "hybrid")
    m.type = MethodConfig::Type::hybrid;
  else
    config_error(where, "method type must be one_level|two_level|hybrid");
  m.name = get_or<std::string>(j, "name", type);
  if (j.contains("variant"))
    m.variant = variant_from_string(j.at("variant").get<std::string>());
  if (j.contains("selection"))
    m.selection = parse_selection(j.at("selection"), where + ".selection");
  m.overlap = get_or(j, "overlap", 2);
  if (m.overlap < 0) config_error(where, "overlap must be >= 0");
  m.decomp = get_or<std::string>(j, "decomp", "coarse_cells");
  if (m.decomp != "coarse_cells" && m.decomp != "neighborhoods")
    config_error(where, "decomp must be coarse_cells|neighborhoods");
  m.snapshots = get_or(j, "snapshots", 8);
  if (m.snapshots < 0) config_error(where, "snapshots must be >= 0");
  m.basis_per_block = get_or(j, "basis_per_block", 3);
  if (m.basis_per_block < 1) config_error(where, "basis_per_block must be >= 1");
  m.layers = get_or(j, "layers", 3);
  if (m.type == MethodConfig::Type::hybrid && m.layers < 1)
    config_error(where, "hybrid needs layers (k) >= 1");
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    check_keys(s, where + ".sweep", {"eta", "layers", "overlap", "basis"});
    m.sweep_eta = get_or(s, "eta", std::vector<double>{});
    m.sweep_layers = get_or(s, "layers", std::vector<int>{});
    m.sweep_overlap = get_or(s, "overlap", std::vector<int>{});
    m.sweep_basis = get_or(s, "basis", std::vector<int>{});
  }
  return m;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  check_keys(j, "$",
             {"schema_version", "grid", "coefficient", "method", "methods",
              "pcg", "sweep", "output"});
  ExperimentConfig cfg;
  cfg.schema_version = get_or(j, "schema_version", 0);
  if (cfg.schema_version != 1)
    config_error("$.schema_version", "expected 1");

  if (!j.contains("grid")) config_error("$", "missing \"grid\"");
  const json& gj = j.at("grid");
  check_keys(gj, "$.grid", {"n_fine", "n_coarse"});
  if (!gj.contains("n_fine") || !gj.contains("n_coarse"))
    config_error("$.grid", "need n_fine and n_coarse");
  cfg.n_fine = gj.at("n_fine").get<int>();
  cfg.n_coarse = gj.at("n_coarse").get<int>();
  if (cfg.n_coarse < 2 || cfg.n_fine <= 0 || cfg.n_fine % cfg.n_coarse != 0)
    config_error("$.grid", "n_coarse must be >= 2 and divide n_fine");

  if (j.contains("coefficient")) {
    const json& cj = j.at("coefficient");
    check_keys(cj, "$.coefficient",
               {"pattern", "eta", "seed", "params", "csv"});
    if (cj.contains("csv")) {
      cfg.coeff.csv = cj.at("csv").get<std::string>();
    } else {
      cfg.coeff.pattern =
          pattern_from_string(get_or<std::string>(cj, "pattern", "constant"));
    }
    cfg.coeff.eta = get_or(cj, "eta", 1.0);
    if (cfg.coeff.eta < 1.0) config_error("$.coefficient", "eta must be >= 1");
    cfg.coeff.seed = get_or<uint64_t>(cj, "seed", 0);
    if (cj.contains("params")) {
      const json& pj = cj.at("params");
      check_keys(pj, "$.coefficient.params",
                 {"channels_x", "channels_y", "channel_width",
                  "inclusion_margin"});
      cfg.coeff.params.channels_x = get_or(pj, "channels_x", 3);
      cfg.coeff.params.channels_y = get_or(pj, "channels_y", 3);
      cfg.coeff.params.channel_width = get_or(pj, "channel_width", 2);
      cfg.coeff.params.inclusion_margin = get_or(pj, "inclusion_margin", 1);
    }
  }

  if (j.contains("method") == j.contains("methods"))
    config_error("$", "need exactly one of \"method\" or \"methods\"");
  if (j.contains("method"))
    cfg.methods.push_back(parse_method(j.at("method"), "$.method"));
  else {
    const json& ms = j.at("methods");
    if (!ms.is_array() || ms.empty())
      config_error("$.methods", "expected a non-empty array");
    for (size_t i = 0; i < ms.size(); ++i)
      cfg.methods.push_back(
          parse_method(ms[i], "$.methods[" + std::to_string(i) + "]"));
  }

  if (j.contains("pcg")) {
    const json& pj = j.at("pcg");
    check_keys(pj, "$.pcg", {"tol", "maxit"});
    cfg.pcg.tol = get_or(pj, "tol", 1e-8);
    cfg.pcg.maxit = get_or(pj, "maxit", 500);
    if (!(cfg.pcg.tol > 0) || cfg.pcg.maxit < 1)
      config_error("$.pcg", "tol must be > 0 and maxit >= 1");
  }

  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    check_keys(s, "$.sweep", {"eta", "layers", "overlap", "basis"});
    cfg.sweep_eta = get_or(s, "eta", std::vector<double>{});
    cfg.sweep_layers = get_or(s, "layers", std::vector<int>{});
    cfg.sweep_overlap = get_or(s, "overlap", std::vector<int>{});
    cfg.sweep_basis = get_or(s, "basis", std::vector<int>{});
  }
  cfg.output = get_or<std::string>(j, "output", "results.csv");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config is not valid JSON: " +
                                std::string(e.what()));
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------

std::string csv_header() {
  return "method,variant,eta,H,h,overlap_or_k,basis_count,coarse_dim,"
         "iterations,cond_estimate,wall_ms";
}

std::string csv_line(const RunRow& r) {
  char buf[320];
  std::snprintf(buf, sizeof buf, "%s,%s,%.9g,%.9g,%.9g,%d,%d,%d,%d,%.6g,%.1f",
                r.method.c_str(), r.variant.c_str(), r.eta, r.H, r.h,
                r.overlap_or_k, r.basis_count, r.coarse_dim, r.iterations,
                r.cond_estimate, r.wall_ms);
  return buf;
}

void write_rows_csv(const std::vector<RunRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << csv_header() << '\n';
  for (const auto& r : rows) out << csv_line(r) << '\n';
}

namespace {

struct SweepPoint {
  const MethodConfig* method;
  double eta;
  int layers;   // hybrid k
  int overlap;  // AS fine layers
  int basis;    // hybrid basis per block / fixed selection count
};

std::vector<SweepPoint> expand_points(const ExperimentConfig& cfg) {
  std::vector<SweepPoint> pts;
  for (const auto& m : cfg.methods) {
    auto etas = !m.sweep_eta.empty()
                    ? m.sweep_eta
                    : (!cfg.sweep_eta.empty() ? cfg.sweep_eta
                                              : std::vector<double>{cfg.coeff.eta});
    auto layers = !m.sweep_layers.empty()
                      ? m.sweep_layers
                      : (!cfg.sweep_layers.empty() ? cfg.sweep_layers
                                                   : std::vector<int>{m.layers});
    auto overlaps =
        !m.sweep_overlap.empty()
            ? m.sweep_overlap
            : (!cfg.sweep_overlap.empty() ? cfg.sweep_overlap
                                          : std::vector<int>{m.overlap});
    auto bases = !m.sweep_basis.empty()
                     ? m.sweep_basis
                     : (!cfg.sweep_basis.empty()
                            ? cfg.sweep_basis
                            : std::vector<int>{m.type == MethodConfig::Type::hybrid
                                                   ? m.basis_per_block
                                                   : m.selection.count});
    // only the dimensions relevant to the method vary
    if (m.type != MethodConfig::Type::hybrid) layers = {m.layers};
    if (m.type == MethodConfig::Type::hybrid) overlaps = {m.overlap};
    for (double e : etas)
      for (int l : layers)
        for (int o : overlaps)
          for (int b : bases) pts.push_back({&m, e, l, o, b});
  }
  return pts;
}

CoefficientField make_field(const ExperimentConfig& cfg,
                            const GridHierarchy& g, double eta) {
  if (!cfg.coeff.csv.empty()) {
    if (eta != cfg.coeff.eta)
      throw std::invalid_argument(
          "eta sweep is not available with a CSV coefficient");
    return load_csv(g, cfg.coeff.csv);
  }
  return generate(g, cfg.coeff.pattern, eta, cfg.coeff.seed, cfg.coeff.params);
}

RunRow run_point(const ExperimentConfig& cfg, const SweepPoint& pt) {
  const MethodConfig& m = *pt.method;
  GridHierarchy g = build_hierarchy(cfg.n_fine, cfg.n_coarse);
  CoefficientField field = make_field(cfg, g, pt.eta);
  SparseOperator A =
      assemble_stiffness(g, field, nullptr, BC::dirichlet_eliminated);
  Vec b = assemble_load(g, std::vector<double>(g.fine_cell_count(), 1.0));

  RunRow row;
  row.method = m.name;
  row.variant = to_string(m.variant);
  row.eta = pt.eta;
  row.H = g.H();
  row.h = g.h();

  std::unique_ptr<Preconditioner> M;
  if (m.type == MethodConfig::Type::one_level) {
    auto subs = m.decomp == "neighborhoods"
                    ? neighborhood_decomposition(g)
                    : overlapping_decomposition(g, pt.overlap);
    M = make_one_level(g, field, subs);
    row.variant = "-";
    row.overlap_or_k = pt.overlap;
  } else if (m.type == MethodConfig::Type::two_level) {
    auto subs = m.decomp == "neighborhoods"
                    ? neighborhood_decomposition(g)
                    : overlapping_decomposition(g, pt.overlap);
    PartitionOfUnity pou = build_pou(g);
    Selection sel = m.selection;
    if (sel.mode == Selection::Mode::fixed) sel.count = pt.basis;
    SpectralCoarseSpace space;
    if (m.variant == SpectralVariant::pou_only) {
      space = build_pou_space(g, pou);
    } else if (m.variant == SpectralVariant::gmsfem) {
      std::vector<SnapshotSpace> snaps;
      for (int cn = 0; cn < g.coarse_node_count(); ++cn)
        snaps.push_back(build_snapshot_space(g, field, neighborhood(g, cn),
                                             m.snapshots, cfg.coeff.seed));
      space = build_gmsfem_space(g, field, pou, snaps,
                                 SpectralVariant::kappa_mass, sel);
    } else {
      space = build_spectral_space(g, field, pou, m.variant, sel);
    }
    row.coarse_dim = space.dim();
    row.basis_count = sel.mode == Selection::Mode::fixed ? pt.basis : 0;
    row.overlap_or_k = pt.overlap;
    M = make_two_level(g, field, subs, A, space.matrix(g));
  } else {
    PartitionOfUnity pou = build_pou(g);
    Selection sel;
    sel.mode = Selection::Mode::fixed;
    sel.count = pt.basis;
    CemAux aux = build_cem_aux(g, field, pou, sel);
    CemCoarseSpace cem = build_cem_basis(g, field, aux, pt.layers);
    row.variant = "cem";
    row.coarse_dim = cem.dim();
    row.basis_count = pt.basis;
    row.overlap_or_k = pt.layers;
    M = make_hybrid_cem(g, field, aux, cem, pt.layers, A);
  }

  auto [x, rep] = pcg(A, b, *M, cfg.pcg);
  row.iterations = rep.iterations;
  row.cond_estimate = rep.cond_estimate;
  row.wall_ms = rep.wall_ms;
  row.converged = rep.converged;
  return row;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, int jobs) {
  auto pts = expand_points(cfg);
  RunResult result;
  result.rows.resize(pts.size());
  if (jobs < 1) jobs = 1;
  std::atomic<size_t> next{0};
  std::vector<std::string> errors(pts.size());
  auto worker = [&] {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= pts.size()) return;
      try {
        result.rows[i] = run_point(cfg, pts[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (size_t i = 0; i < pts.size(); ++i)
    if (!errors[i].empty())
      throw std::runtime_error("sweep point " + std::to_string(i) +
                               " failed: " + errors[i]);
  for (const auto& r : result.rows) result.all_converged &= r.converged;
  return result;
}

std::string dump_eigs_csv(const ExperimentConfig& cfg) {
  if (cfg.methods.empty()) throw std::invalid_argument("no method configured");
  const MethodConfig& m = cfg.methods.front();
  GridHierarchy g = build_hierarchy(cfg.n_fine, cfg.n_coarse);
  CoefficientField field = make_field(cfg, g, cfg.coeff.eta);
  PartitionOfUnity pou = build_pou(g);

  std::ostringstream os;
  os << "region_id,index,lambda\n";
  auto emit = [&os](int region, const Vec& ev) {
    char buf[64];
    for (int k = 0; k < ev.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g\n", region, k + 1, ev[k]);
      os << buf;
    }
  };
  if (m.type == MethodConfig::Type::hybrid) {
    Selection sel;
    sel.mode = Selection::Mode::fixed;
    sel.count = m.basis_per_block;
    CemAux aux = build_cem_aux(g, field, pou, sel);
    for (const auto& blk : aux.blocks) emit(blk.coarse_cell, blk.eigenvalues);
    return os.str();
  }
  if (m.variant == SpectralVariant::pou_only)
    throw std::invalid_argument(
        "eigs: the pou_only coarse space has no spectral data");
  SpectralCoarseSpace space;
  if (m.variant == SpectralVariant::gmsfem) {
    std::vector<SnapshotSpace> snaps;
    for (int cn = 0; cn < g.coarse_node_count(); ++cn)
      snaps.push_back(build_snapshot_space(g, field, neighborhood(g, cn),
                                           m.snapshots, cfg.coeff.seed));
    space = build_gmsfem_space(g, field, pou, snaps,
                               SpectralVariant::kappa_mass, m.selection);
  } else {
    space = build_spectral_space(g, field, pou, m.variant, m.selection);
  }
  for (const auto& s : space.spectra) emit(s.region_id, s.eigenvalues);
  return os.str();
}

// ---------------------------------------------------------------------------

const char* preset_json(const std::string& name) {
  // Table-shaped experiments with generated stand-in coefficients; the
  // reference iteration counts from the literature are quoted in the README.
  static const char* kTable1 = R"JSON({
  "schema_version": 1,
  "grid": {"n_fine": 200, "n_coarse": 10},
  "coefficient": {"pattern": "mixed", "eta": 1e6, "seed": 20240817,
                  "params": {"channels_x": 3, "channels_y": 3, "channel_width": 2}},
  "methods": [
    {"type": "two_level", "name": "MS", "variant": "pou_only", "overlap": 2},
    {"type": "two_level", "name": "Full", "variant": "kappa_mass",
     "selection": {"mode": "gap", "max_count": 12}, "overlap": 2},
    {"type": "two_level", "name": "8rand", "variant": "gmsfem", "snapshots": 8,
     "selection": {"mode": "gap", "max_count": 8}, "overlap": 2},
    {"type": "two_level", "name": "15rand", "variant": "gmsfem", "snapshots": 15,
     "selection": {"mode": "gap", "max_count": 12}, "overlap": 2}
  ],
  "pcg": {"tol": 1e-8, "maxit": 5000},
  "sweep": {"eta": [1e6, 1e9]},
  "output": "table1.csv"
})JSON";
  static const char* kTable2 = R"JSON({
  "schema_version": 1,
  "grid": {"n_fine": 200, "n_coarse": 20},
  "coefficient": {"pattern": "channels", "eta": 1e4, "seed": 20240817,
                  "params": {"channels_x": 3, "channels_y": 3, "channel_width": 2}},
  "methods": [
    {"type": "hybrid", "name": "hybrid_k", "basis_per_block": 3,
     "sweep": {"layers": [3, 4, 5, 6]}},
    {"type": "hybrid", "name": "hybrid_eta", "basis_per_block": 3, "layers": 3,
     "sweep": {"eta": [1e3, 1e4, 1e5]}}
  ],
  "pcg": {"tol": 1e-8, "maxit": 500},
  "output": "table2.csv"
})JSON";
  static const char* kSmoke = R"JSON({
  "schema_version": 1,
  "grid": {"n_fine": 32, "n_coarse": 4},
  "coefficient": {"pattern": "constant", "eta": 1},
  "methods": [
    {"type": "two_level", "variant": "kappa_mass",
     "selection": {"mode": "fixed", "count": 1}, "overlap": 2}
  ],
  "pcg": {"tol": 1e-8, "maxit": 200},
  "output": "smoke.csv"
})JSON";
  if (name == "table1") return kTable1;
  if (name == "table2") return kTable2;
  if (name == "smoke") return kSmoke;
  throw std::invalid_argument("unknown preset: " + name);
}

}  // namespace hcdd
