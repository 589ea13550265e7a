// Acceptance suite: runs every gate criterion at its pinned tolerance and
// prints one PASS/FAIL line per criterion. Exits nonzero when any criterion
// (or supplementary invariant) fails.

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "changraph/experiment.hpp"
#include "test_domains.hpp"

using namespace changraph;
using namespace changraph::testing;

namespace {

struct Criterion {
  int id;
  std::string title;
  std::vector<std::string> prefixes;
};

bool matches(const std::string& name, const std::vector<std::string>& prefixes) {
  for (const auto& p : prefixes)
    if (name.rfind(p, 0) == 0) return true;
  return false;
}

void collect(const KindReport& rep, std::vector<CheckLine>& all) {
  for (const auto& c : rep.checks) all.push_back(c);
}

void print_check(const CheckLine& c, const char* ok_tag) {
  if (c.cmp.find('[') != std::string::npos)
    std::printf("    [%s] %-45s value=%.6g %s%s%s\n", c.pass ? ok_tag : "FAIL", c.name.c_str(),
                c.value, c.cmp.c_str(), c.note.empty() ? "" : "  # ", c.note.c_str());
  else
    std::printf("    [%s] %-45s value=%.6g %s %.6g%s%s\n", c.pass ? ok_tag : "FAIL", c.name.c_str(),
                c.value, c.cmp.c_str(), c.bound, c.note.empty() ? "" : "  # ", c.note.c_str());
}

}  // namespace

int main() {
  std::setvbuf(stdout, nullptr, _IONBF, 0);
  std::vector<CheckLine> checks;

  // --- operator self-checks on the curved fork (criteria 1-3 and 11) -------
  {
    const auto sc = build_complex(curved_fork_spec());
    const auto g = build_graph_of(*sc);
    nlohmann::json params = {{"cells", 400},          {"quadrature_cells", 64},
                             {"algebra_cases", 100},  {"algebra_tol", 1e-8},
                             {"spectrum_cells", 400}, {"spectrum_tol", 1e-6},
                             {"hy", 0.05},            {"hx", 0.04}};
    std::printf("# running operator self-checks (fork domain, 400 cells)\n");
    collect(run_kind("operator-selfchecks", sc, g, params, 1001), checks);
  }

  const auto sine_sc = build_complex(sine_strip_spec());
  const auto sine_g = build_graph_of(*sine_sc);

  // --- semigroup convergence ladders (criteria 4 and 5) --------------------
  {
    nlohmann::json params = {
        {"eps_ladder", {0.4, 0.2, 0.1}},
        {"cells", 160},
        {"hy", 0.04},
        {"dt", 5e-3},
        {"T", 1.0},
        {"tau_fraction", 0.25},
        {"final_fraction", 0.05},
        {"u0", "cosx_1py"},
        {"mc",
         {{"enabled", true},
          {"paths", 20000},
          {"t", {0.5, 1.0}},
          {"z0", {3.14159265358979323846, 1.0}},
          {"final_slack", 0.03},
          {"oracle_cells", 800},
          {"observable", "cosx_1py"}}}};
    std::printf("# running semigroup convergence ladders (deterministic + Monte Carlo)\n");
    collect(run_kind("semigroup-convergence", sine_sc, sine_g, params, 1002), checks);
  }

  // --- frozen-slow coupling ladder (criterion 6) ----------------------------
  {
    nlohmann::json params = {{"eps_list", {0.2, 0.1, 0.05}},
                             {"kappa1", 0.5},
                             {"pairs", 5000},
                             {"T", 1.0},
                             {"z0", {3.14159265358979323846, 1.0}},
                             {"stride", 10}};
    std::printf("# running frozen-slow coupling ladder\n");
    collect(run_kind("frozen-slow", sine_sc, sine_g, params, 1003), checks);
  }

  // --- local-time moment shape (criterion 7) --------------------------------
  {
    nlohmann::json params = {{"eps_list", {0.2, 0.1, 0.05}},
                             {"kappa1", 0.5},
                             {"pairs", 2000},
                             {"slack", 1.5},
                             {"window_start", 0.3},
                             {"z0", {3.14159265358979323846, 1.0}}};
    std::printf("# running local-time window moments\n");
    collect(run_kind("local-time", sine_sc, sine_g, params, 1004), checks);
  }

  // --- equilibration oracles (criterion 8) -----------------------------------
  {
    nlohmann::json params = {
        {"relax",
         {{"eps", 0.05}, {"samples", 10000}, {"kappa1", 0.5}, {"ks_tol", 0.05},
          {"z0", {3.14159265358979323846, 1.2}}}},
        {"chi2", {{"eps", 0.5}, {"T", 50.0}, {"paths", 2500}, {"bins", 10}, {"p_min", 0.01}}},
        {"conditional",
         {{"eps", 0.05}, {"t", 0.25}, {"paths", 6000}, {"x_center", 3.14159265358979323846},
          {"x_halfwidth", 0.5}, {"ks_tol", 0.05}}}};
    std::printf("# running equilibration oracles\n");
    collect(run_kind("equilibration", sine_sc, sine_g, params, 1005), checks);
  }

  // --- coupled SPDE ladder, covariance and OU oracles (criteria 9, 10) ------
  {
    nlohmann::json params = {
        {"eps_ladder", {0.4, 0.2, 0.1}},
        {"cells", 96},
        {"hy", 0.065},
        {"dt", 2e-3},
        {"T", 1.0},
        {"realizations", 100},
        {"b", "tanh"},
        {"u0", "cosx_1py"},
        {"noise", {{"family", "cosine"}, {"modes", 4}, {"lambda", {{"kind", "dyadic"}}}}},
        {"covariance",
         {{"enabled", true},
          {"cells", 60},
          {"t", 0.5},
          {"dt", 2e-3},
          {"realizations", 2000},
          {"noise", {{"family", "cosine"}, {"modes", 4}, {"lambda", {{"kind", "dyadic"}}}}}}},
        {"ou",
         {{"enabled", true}, {"cells", 60}, {"lambda", 0.3}, {"dt", 1e-3}, {"steps", 10000},
          {"burn", 2000}, {"mode", 2}}}};
    std::printf("# running coupled SPDE comparison and covariance oracles\n");
    collect(run_kind("spde-convergence", sine_sc, sine_g, params, 1006), checks);
  }

  const std::vector<Criterion> criteria = {
      {1,
       "operator algebra suite (averaging/lifting identities, 100 randomized cases, 1e-8)",
       {"algebra.wedge_vee_roundtrip", "algebra.vee_isometry", "algebra.wedge_contraction_excess",
        "algebra.adjointness", "algebra.diag_operator_roundtrip", "algebra.split_orthogonality",
        "algebra.split_tail_wedge", "algebra.orthonormal_transport_gram"}},
      {2,
       "discrete generator invariants (row sums, invariance, W-symmetry, Neumann spectrum)",
       {"generator."}},
      {3, "Kirchhoff flux-balance residual decays at first order (ratio 2 +- 0.3)", {"kirchhoff."}},
      {4, "Monte Carlo semigroup ladder vs graph oracle (20000 paths, final <= 3 SE + 0.03)",
       {"semigroup.mc_"}},
      {5, "deterministic channel-vs-graph semigroup ladder (final <= 0.05 ||phi||)",
       {"semigroup.fv_"}},
      {6, "coupled frozen-slow ladder: sup_t E|Z - Zhat|^2 decreasing over eps", {"frozen."}},
      {7, "local-time window moment dominated by the fitted bound (1.5x slack)", {"localtime."}},
      {8, "equilibration: frozen-window KS, uniform occupation chi^2, conditional uniformity",
       {"equilibration."}},
      {9, "coupled SPDE ladder strictly decreasing (b = tanh, 4-mode dyadic noise)",
       {"spde.ladder_"}},
      {10, "stochastic convolution covariance vs Monte Carlo; discrete OU variance",
       {"spde.covariance_", "spde.ou_"}},
      {11, "rescaling isometries and the bit-exact shared-noise identity",
       {"rescale.", "noise.", "algebra.hilbert_schmidt_match"}},
  };

  std::printf("\n================ acceptance report ================\n");
  int failed_criteria = 0;
  std::map<std::string, bool> used;
  for (const auto& crit : criteria) {
    bool pass = true;
    int found = 0;
    for (const auto& c : checks)
      if (matches(c.name, crit.prefixes)) {
        ++found;
        used[c.name] = true;
        pass = pass && c.pass;
      }
    if (found == 0) pass = false;
    std::printf("CRITERION %2d: %s  --  %s\n", crit.id, pass ? "PASS" : "FAIL", crit.title.c_str());
    for (const auto& c : checks)
      if (matches(c.name, crit.prefixes)) print_check(c, "ok");
    if (!pass) ++failed_criteria;
  }

  bool supplementary_fail = false;
  std::printf("supplementary invariants:\n");
  for (const auto& c : checks)
    if (!used.count(c.name)) {
      print_check(c, "ok");
      supplementary_fail = supplementary_fail || !c.pass;
    }

  std::printf("SUMMARY: %d/11 criteria passed%s\n", 11 - failed_criteria,
              supplementary_fail ? " (supplementary failures present)" : "");
  return (failed_criteria == 0 && !supplementary_fail) ? 0 : 1;
}
