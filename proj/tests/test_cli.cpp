#include <doctest.h>

#include <json.hpp>

#include "hcdd/experiment.hpp"

using namespace hcdd;
using nlohmann::json;

namespace {
json minimal() {
  return json::parse(R"({
    "schema_version": 1,
    "grid": {"n_fine": 16, "n_coarse": 4},
    "method": {"type": "two_level", "variant": "kappa_mass",
               "selection": {"mode": "fixed", "count": 1}}
  })");
}
}  // namespace

TEST_CASE("minimal config parses with defaults") {
  ExperimentConfig cfg = parse_config(minimal());
  CHECK(cfg.n_fine == 16);
  CHECK(cfg.methods.size() == 1);
  CHECK(cfg.methods[0].overlap == 2);
  CHECK(cfg.pcg.tol == 1e-8);
  CHECK(cfg.coeff.pattern == Pattern::constant);
  CHECK(cfg.output == "results.csv");
}

TEST_CASE("unknown keys are rejected with their location") {
  json j = minimal();
  j["grid"]["n_fien"] = 8;
  CHECK_THROWS_WITH_AS(parse_config(j), doctest::Contains("n_fien"),
                       std::invalid_argument);
  j = minimal();
  j["method"]["selection"]["lambda_star"] = 1.0;  // the key is "lambda"
  CHECK_THROWS_WITH_AS(parse_config(j), doctest::Contains("lambda_star"),
                       std::invalid_argument);
}

TEST_CASE("config validation catches bad values") {
  json j = minimal();
  j["grid"]["n_coarse"] = 3;  // does not divide 16
  CHECK_THROWS_AS(parse_config(j), std::invalid_argument);

  j = minimal();
  j["schema_version"] = 2;
  CHECK_THROWS_AS(parse_config(j), std::invalid_argument);

  j = minimal();
  j["method"]["type"] = "three_level";
  CHECK_THROWS_AS(parse_config(j), std::invalid_argument);

  j = minimal();
  j["coefficient"] = {{"pattern", "channels"}, {"eta", 0.1}};
  CHECK_THROWS_AS(parse_config(j), std::invalid_argument);

  j = minimal();
  j["methods"] = json::array({j["method"]});  // both method and methods
  CHECK_THROWS_AS(parse_config(j), std::invalid_argument);
}

TEST_CASE("presets parse") {
  for (const char* name : {"table1", "table2", "smoke"}) {
    ExperimentConfig cfg = parse_config(json::parse(preset_json(name)));
    CHECK(!cfg.methods.empty());
  }
  CHECK_THROWS(preset_json("table9"));
}

TEST_CASE("csv header and line column counts agree") {
  RunRow r;
  r.method = "m";
  r.variant = "v";
  auto count = [](const std::string& s) {
    return std::count(s.begin(), s.end(), ',');
  };
  CHECK(count(csv_header()) == count(csv_line(r)));
}

TEST_CASE("smoke experiment runs and is deterministic") {
  ExperimentConfig cfg =
      parse_config(json::parse(preset_json("smoke")));
  RunResult a = run_experiment(cfg);
  RunResult b = run_experiment(cfg);
  REQUIRE(a.rows.size() == 1);
  CHECK(a.all_converged);
  CHECK(a.rows[0].converged);
  CHECK(a.rows[0].iterations == b.rows[0].iterations);
  CHECK(a.rows[0].cond_estimate == b.rows[0].cond_estimate);
  CHECK(csv_line(a.rows[0]).substr(0, 40) == csv_line(b.rows[0]).substr(0, 40));
}

TEST_CASE("sweep expansion honors per-method overrides") {
  json j = minimal();
  j.erase("method");
  j["coefficient"] = {{"pattern", "channels"}, {"eta", 100.0}, {"seed", 1}};
  j["methods"] = json::array({
      json{{"type", "two_level"},
           {"name", "a"},
           {"selection", {{"mode", "fixed"}, {"count", 1}}},
           {"sweep", {{"eta", {10.0, 100.0}}}}},
      json{{"type", "two_level"},
           {"name", "b"},
           {"selection", {{"mode", "fixed"}, {"count", 1}}}},
  });
  j["sweep"] = {{"eta", {100.0}}};
  ExperimentConfig cfg = parse_config(j);
  RunResult res = run_experiment(cfg, 2);
  REQUIRE(res.rows.size() == 3);  // a: two etas, b: the top-level one
  CHECK(res.rows[0].method == "a");
  CHECK(res.rows[0].eta == 10.0);
  CHECK(res.rows[1].eta == 100.0);
  CHECK(res.rows[2].method == "b");
  CHECK(res.rows[2].eta == 100.0);
}

TEST_CASE("eigenvalue dump has one block per region") {
  json j = minimal();
  j["coefficient"] = {{"pattern", "channels"}, {"eta", 1000.0}, {"seed", 2}};
  ExperimentConfig cfg = parse_config(j);
  std::string csv = dump_eigs_csv(cfg);
  CHECK(csv.rfind("region_id,index,lambda\n", 0) == 0);
  // 5x5 coarse nodes, at least one eigenvalue each
  int lines = int(std::count(csv.begin(), csv.end(), '\n'));
  CHECK(lines >= 1 + 25);
}
