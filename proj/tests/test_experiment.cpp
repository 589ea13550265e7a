#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "changraph/experiment.hpp"
#include "test_domains.hpp"

using namespace changraph;
using namespace changraph::testing;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / fs::path("changraph_test_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
  return p.string();
}

}  // namespace

TEST_CASE("config loading and validation errors") {
  TempDir tmp;
  const auto domain = tmp.path / "dom.json";
  save_domain_spec(sine_strip_spec(), domain.string());

  const auto good = write_file(tmp.path / "good.json", R"({
    "kind": "frozen-slow",
    "domain": "dom.json",
    "seed": 3,
    "params": {"eps_list": [0.3, 0.2], "pairs": 4, "T": 0.05}
  })");
  CHECK_NOTHROW(validate_experiment_config(good));

  const auto bad_kind = write_file(tmp.path / "bad_kind.json", R"({
    "kind": "nonsense", "domain": "dom.json"
  })");
  CHECK_THROWS_WITH_AS(validate_experiment_config(bad_kind),
                       doctest::Contains("unknown experiment kind"), std::invalid_argument);

  const auto bad_eps = write_file(tmp.path / "bad_eps.json", R"({
    "kind": "frozen-slow", "domain": "dom.json", "params": {"eps_ladder": [1.5]}
  })");
  CHECK_THROWS_WITH_AS(validate_experiment_config(bad_eps), doctest::Contains("eps"),
                       std::invalid_argument);

  const auto missing = write_file(tmp.path / "missing.json", R"({
    "kind": "frozen-slow", "domain": "nope.json"
  })");
  CHECK_THROWS_WITH_AS(validate_experiment_config(missing), doctest::Contains("does not exist"),
                       std::invalid_argument);

  const auto syntax = write_file(tmp.path / "syntax.json", "{ not json");
  CHECK_THROWS_WITH_AS(validate_experiment_config(syntax), doctest::Contains("parse error"),
                       std::invalid_argument);
}

TEST_CASE("runs are deterministic: identical seeds give identical bytes") {
  const auto sc = build_complex(sine_strip_spec());
  const auto g = build_graph_of(*sc);
  nlohmann::json params = {{"eps_list", {0.3, 0.2}}, {"pairs", 20}, {"T", 0.05}, {"stride", 5}};
  const KindReport a = run_kind("frozen-slow", sc, g, params, 17);
  const KindReport b = run_kind("frozen-slow", sc, g, params, 17);
  REQUIRE(a.tables.size() == b.tables.size());
  for (std::size_t i = 0; i < a.tables.size(); ++i) {
    CHECK(a.tables[i].first == b.tables[i].first);
    CHECK(a.tables[i].second == b.tables[i].second);
  }
  const KindReport c = run_kind("frozen-slow", sc, g, params, 18);
  CHECK(c.tables[0].second != a.tables[0].second);
}

TEST_CASE("run_experiment writes tables and metadata with the config echo") {
  TempDir tmp;
  const auto domain = tmp.path / "dom.json";
  save_domain_spec(sine_strip_spec(), domain.string());
  ExperimentConfig cfg;
  cfg.kind = "frozen-slow";
  cfg.domain_file = domain.string();
  cfg.params = {{"eps_list", {0.3}}, {"pairs", 8}, {"T", 0.04}, {"stride", 4}};
  cfg.seed = 4;
  cfg.output_dir = (tmp.path / "out").string();
  const KindReport rep = run_experiment(cfg);
  CHECK(fs::exists(tmp.path / "out" / "frozen_slow.csv"));
  CHECK(fs::exists(tmp.path / "out" / "metadata.json"));
  std::ifstream meta(tmp.path / "out" / "metadata.json");
  const nlohmann::json j = nlohmann::json::parse(meta);
  CHECK(j.at("kind") == "frozen-slow");
  CHECK(j.at("seed") == 4);
  CHECK(j.at("params").at("pairs") == 8);
  CHECK(j.contains("checks"));
  CHECK(j.contains("wall_time_s"));
  CHECK(j.at("pass").is_boolean());
  (void)rep;
}

TEST_CASE("operator self-checks pass on the curved fork at documented tolerances") {
  const auto sc = build_complex(curved_fork_spec());
  const auto g = build_graph_of(*sc);
  nlohmann::json params;
  params["cells"] = 128;
  params["quadrature_cells"] = 32;
  params["algebra_cases"] = 25;
  params["spectrum_cells"] = 400;
  params["spectrum_tol"] = 2e-4;  // the second-order stencil level at 400 cells
  params["hy"] = 0.08;
  params["hx"] = 0.05;
  const KindReport rep = run_kind("operator-selfchecks", sc, g, params, 21);
  for (const auto& c : rep.checks) {
    INFO(c.name, " value=", c.value, " bound=", c.bound);
    CHECK(c.pass);
  }

  // the pinned 1e-6 spectral gate is out of reach for a second-order
  // positivity-preserving stencil at 400 cells: expect that one red
  params["spectrum_tol"] = 1e-6;
  const KindReport strict = run_kind("operator-selfchecks", sc, g, params, 21);
  int failures = 0;
  for (const auto& c : strict.checks)
    if (!c.pass) {
      ++failures;
      CHECK(c.name == "generator.neumann_spectrum_rel");
    }
  CHECK(failures == 1);
}

TEST_CASE("negative control: unreachable tolerance makes the run fail") {
  const auto sc = build_complex(sine_strip_spec());
  const auto g = build_graph_of(*sc);
  nlohmann::json params = {{"eps_ladder", {0.4, 0.2}},
                           {"cells", 32},
                           {"hy", 0.15},
                           {"dt", 0.01},
                           {"T", 0.5},
                           {"final_fraction", 1e-9},  // deliberately unattainable
                           {"u0", "cosx_1py"},
                           {"mc", {{"enabled", false}}}};
  const KindReport rep = run_kind("semigroup-convergence", sc, g, params, 30);
  CHECK_FALSE(rep.pass());
  bool saw_failure_line = false;
  for (const auto& c : rep.checks)
    if (c.name == "semigroup.fv_final_gap") saw_failure_line = !c.pass;
  CHECK(saw_failure_line);
}

TEST_CASE("csv numbers are emitted with full round-trip precision") {
  CHECK(format_csv_number(0.1) == "0.10000000000000001");
  CHECK(format_csv_number(1.0) == "1");
  const double v = 0.123456789012345678;
  CHECK(std::stod(format_csv_number(v)) == v);
}
