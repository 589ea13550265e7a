#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "changraph/channel_fv.hpp"
#include "changraph/experiment.hpp"
#include "changraph/fields.hpp"
#include "changraph/graph_operator.hpp"
#include "changraph/graph_spde.hpp"
#include "changraph/noise.hpp"
#include "changraph/parallel.hpp"
#include "changraph/reflected.hpp"

namespace changraph {

namespace {

constexpr double kPi = 3.14159265358979323846;

CheckLine check_le(std::string name, double value, double bound, std::string note = "") {
  CheckLine c;
  c.name = std::move(name);
  c.value = value;
  c.bound = bound;
  c.cmp = "<=";
  c.pass = value <= bound;
  c.note = std::move(note);
  return c;
}

CheckLine check_bool(std::string name, bool ok, std::string note = "") {
  CheckLine c;
  c.name = std::move(name);
  c.value = ok ? 1.0 : 0.0;
  c.bound = 1.0;
  c.cmp = "bool";
  c.pass = ok;
  c.note = std::move(note);
  return c;
}

double get_num(const nlohmann::json& p, const std::string& key, double dflt) {
  return p.contains(key) ? p.at(key).get<double>() : dflt;
}

int get_int(const nlohmann::json& p, const std::string& key, int dflt) {
  return p.contains(key) ? p.at(key).get<int>() : dflt;
}

std::vector<double> get_ladder(const nlohmann::json& p, const std::string& key,
                               std::vector<double> dflt) {
  if (!p.contains(key)) return dflt;
  return p.at(key).get<std::vector<double>>();
}

nlohmann::json sub(const nlohmann::json& p, const std::string& key) {
  return p.contains(key) ? p.at(key) : nlohmann::json::object();
}

std::function<double(int)> parse_lambda_decay(const nlohmann::json& spec) {
  const std::string kind = spec.is_null() ? "dyadic" : spec.value("kind", "dyadic");
  if (kind == "dyadic") return [](int j) { return std::pow(2.0, -j); };
  if (kind == "pow") {
    const double s = spec.value("s", 1.0);
    return [s](int j) { return std::pow(static_cast<double>(j), -s); };
  }
  if (kind == "list") {
    const auto values = spec.at("values").get<std::vector<double>>();
    return [values](int j) { return values.at(static_cast<std::size_t>(j - 1)); };
  }
  throw std::invalid_argument("unknown lambda decay kind '" + kind + "' (dyadic|pow|list)");
}

NoiseModel parse_noise(const nlohmann::json& spec, const DiscreteGraphOperator& op,
                       const Spectrum* spectrum) {
  const std::string family = spec.is_null() ? "cosine" : spec.value("family", "cosine");
  const int modes = spec.is_null() ? 64 : spec.value("modes", 64);
  const double trace_bound = spec.is_null() ? 1e6 : spec.value("trace_bound", 1e6);
  const auto lambda = parse_lambda_decay(sub(spec, "lambda"));
  if (family == "cosine") return NoiseModel::cosine(op, modes, lambda, trace_bound);
  if (family == "constant") return NoiseModel::constant_mode(op, spec.value("lambda1", 1.0));
  if (family == "eigen") {
    if (!spectrum) throw std::invalid_argument("noise family 'eigen' needs a spectrum");
    return NoiseModel::eigenmodes(op, *spectrum, modes, lambda, trace_bound);
  }
  throw std::invalid_argument("unknown noise family '" + family + "' (cosine|constant|eigen)");
}

// Truncation tail sum_{j > J} lambda_j^2 for the declared decay laws.
double noise_tail_estimate(const nlohmann::json& spec) {
  const int modes = spec.is_null() ? 64 : spec.value("modes", 64);
  const nlohmann::json decay = sub(spec, "lambda");
  const std::string kind = decay.is_null() ? "dyadic" : decay.value("kind", "dyadic");
  if (kind == "dyadic") return std::pow(4.0, -modes) / 3.0;
  if (kind == "pow") {
    const double s = decay.value("s", 1.0);
    if (s <= 0.5) return std::numeric_limits<double>::infinity();
    return std::pow(static_cast<double>(modes), 1.0 - 2.0 * s) / (2.0 * s - 1.0);
  }
  return 0.0;  // explicit lists truncate exactly
}

struct LadderCheckResult {
  bool monotone = true;
  std::string detail;
};

LadderCheckResult ladder_decreasing(const std::vector<double>& values,
                                    const std::vector<double>& slack) {
  LadderCheckResult res;
  std::ostringstream os;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    const bool ok = values[i + 1] < values[i] + slack[i];
    res.monotone = res.monotone && ok;
    os << format_csv_number(values[i]) << " -> " << format_csv_number(values[i + 1])
       << (ok ? " ok; " : " VIOLATION; ");
  }
  res.detail = os.str();
  return res;
}

}  // namespace

// ---------------------------------------------------------------------------
// semigroup-convergence: deterministic FV ladder plus the Monte Carlo ladder
// against the graph semigroup oracle.
// ---------------------------------------------------------------------------

KindReport run_semigroup_convergence(std::shared_ptr<const StripComplex> sc,
                                     std::shared_ptr<const GraphSkeleton> g,
                                     const nlohmann::json& params, std::uint64_t seed) {
  KindReport rep;
  rep.kind = "semigroup-convergence";
  const std::vector<double> ladder = get_ladder(params, "eps_ladder", {0.4, 0.2, 0.1});
  const int cells = get_int(params, "cells", 160);
  const double hy = get_num(params, "hy", 0.04);
  const double dt = get_num(params, "dt", 5e-3);
  const double T = get_num(params, "T", 1.0);
  const double tau_fraction = get_num(params, "tau_fraction", 0.25);
  const double final_frac = get_num(params, "final_fraction", 0.05);
  const nlohmann::json u0_spec = params.contains("u0") ? params.at("u0") : nlohmann::json("cosx_1py");

  rep.resolved_params = {{"eps_ladder", ladder}, {"cells", cells},         {"hy", hy},
                         {"dt", dt},             {"T", T},                 {"tau_fraction", tau_fraction},
                         {"final_fraction", final_frac}, {"u0", u0_spec}};

  const auto op = DiscreteGraphOperator::assemble(g, cells);

  CompareConfig ccfg;
  ccfg.eps_ladder = ladder;
  ccfg.hy = hy;
  ccfg.dt = dt;
  ccfg.T = T;
  ccfg.tau_fraction = tau_fraction;
  ccfg.snapshot_stride = std::max(1, static_cast<int>(std::llround(0.05 / dt)));
  ccfg.u0 = parse_field(u0_spec, sc);
  ccfg.u0_wedge = exact_wedge_fn(sc, ccfg.u0);
  const std::vector<CompareRow> fv = compare_semigroups(sc, g, op, ccfg);

  // ||phi|| on the channel grid, for the final-gap normalization.
  const auto grid =
      std::make_shared<const ChannelGrid>(ChannelGrid::build(sc, g, op.dx(0), hy));
  const double phi_norm = grid->norm_area(grid->sample(ccfg.u0));

  {
    std::ostringstream csv;
    csv << "eps,sup_error,phi_norm\n";
    for (const auto& row : fv)
      csv << format_csv_number(row.eps) << "," << format_csv_number(row.value) << ","
          << format_csv_number(phi_norm) << "\n";
    rep.tables.emplace_back("semigroup_fv.csv", csv.str());
  }
  {
    std::vector<double> vals, slack(fv.size(), 0.0);
    for (const auto& r : fv) vals.push_back(r.value);
    const auto lad = ladder_decreasing(vals, slack);
    rep.checks.push_back(check_bool("semigroup.fv_ladder_decreasing", lad.monotone, lad.detail));
    rep.checks.push_back(
        check_le("semigroup.fv_final_gap", fv.back().value, final_frac * phi_norm));
  }

  // -- Monte Carlo ladder ----------------------------------------------------
  const nlohmann::json mc = sub(params, "mc");
  if (mc.value("enabled", true)) {
    const int paths = mc.value("paths", 20000);
    const std::vector<double> ts = mc.contains("t") ? mc.at("t").get<std::vector<double>>()
                                                    : std::vector<double>{0.5, 1.0};
    const std::vector<double> z0v =
        mc.contains("z0") ? mc.at("z0").get<std::vector<double>>() : std::vector<double>{kPi, 1.0};
    const Vec2 z0{z0v.at(0), z0v.at(1)};
    const double slack = mc.value("final_slack", 0.03);
    const int oracle_cells = mc.value("oracle_cells", 800);
    const std::string obs_name = mc.value("observable", std::string("cosx_1py"));
    const auto obs = parse_observable(obs_name);
    rep.resolved_params["mc"] = {{"paths", paths},   {"t", ts},
                                 {"z0", z0v},        {"final_slack", slack},
                                 {"oracle_cells", oracle_cells}, {"observable", obs_name}};

    const auto op_fine = DiscreteGraphOperator::assemble(g, oracle_cells);
    const Spectrum spec = eigen_decompose(op_fine);
    const auto wedge_obs = exact_wedge_fn(sc, [&obs](double x, double y) {
      return obs(Vec2{x, y});
    });
    GraphFunction gf;
    gf.edge.resize(static_cast<std::size_t>(g->num_edges()));
    for (int e = 0; e < g->num_edges(); ++e) {
      Eigen::VectorXd v(op_fine.cells(e) + 1);
      for (int j = 0; j <= op_fine.cells(e); ++j) v[j] = wedge_obs(e, op_fine.x_of_node(e, j));
      gf.edge[static_cast<std::size_t>(e)] = std::move(v);
    }
    const Eigen::VectorXd wedge_state = op_fine.project(gf);
    const int probe = nearest_unknown(op_fine, sc->project_to_graph(z0));

    std::ostringstream csv;
    csv << "eps,t,mc_mean,mc_stderr,oracle,gap,n\n";
    std::vector<CheckLine> mc_checks;
    for (std::size_t ti = 0; ti < ts.size(); ++ti) {
      const double t = ts[ti];
      const Eigen::VectorXd bar = apply_semigroup_spectral(op_fine, spec, wedge_state, t);
      const double oracle = bar[probe];
      std::vector<double> gaps, ses;
      for (const double eps : ladder) {
        SimConfig scfg;
        scfg.eps = eps;
        scfg.dt = SimConfig::default_dt(eps);
        scfg.T = t;
        scfg.seed = splitmix64(seed ^ 0x4d435334ull);
        scfg.n_paths = paths;
        const McResult r = mc_expectation(*sc, z0, scfg, t, obs);
        const double gap = std::abs(r.mean - oracle);
        gaps.push_back(gap);
        ses.push_back(r.stderr_);
        csv << format_csv_number(eps) << "," << format_csv_number(t) << ","
            << format_csv_number(r.mean) << "," << format_csv_number(r.stderr_) << ","
            << format_csv_number(oracle) << "," << format_csv_number(gap) << "," << r.n << "\n";
      }
      std::vector<double> slacks;
      for (std::size_t i = 0; i + 1 < gaps.size(); ++i)
        slacks.push_back(3.0 * std::hypot(ses[i], ses[i + 1]));
      slacks.push_back(0.0);
      const auto lad = ladder_decreasing(gaps, slacks);
      mc_checks.push_back(check_bool("semigroup.mc_ladder_decreasing_t" + format_csv_number(t),
                                     lad.monotone, lad.detail));
      mc_checks.push_back(check_le("semigroup.mc_final_gap_t" + format_csv_number(t), gaps.back(),
                                   3.0 * ses.back() + slack));
    }
    rep.tables.emplace_back("semigroup_mc.csv", csv.str());
    for (auto& c : mc_checks) rep.checks.push_back(std::move(c));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// spde-convergence: the coupled channel/graph SPDE ladder, the stochastic
// convolution covariance oracle and the discrete OU stationary variance.
// ---------------------------------------------------------------------------

KindReport run_spde_convergence(std::shared_ptr<const StripComplex> sc,
                                std::shared_ptr<const GraphSkeleton> g,
                                const nlohmann::json& params, std::uint64_t seed) {
  KindReport rep;
  rep.kind = "spde-convergence";
  const std::vector<double> ladder = get_ladder(params, "eps_ladder", {0.4, 0.2, 0.1});
  const int cells = get_int(params, "cells", 96);
  const double hy = get_num(params, "hy", 0.065);
  const double dt = get_num(params, "dt", 2e-3);
  const double T = get_num(params, "T", 1.0);
  const int realizations = get_int(params, "realizations", 100);
  const nlohmann::json b_spec = params.contains("b") ? params.at("b") : nlohmann::json("tanh");
  const nlohmann::json u0_spec = params.contains("u0") ? params.at("u0") : nlohmann::json("cosx_1py");
  const nlohmann::json noise_spec = sub(params, "noise");

  rep.resolved_params = {{"eps_ladder", ladder}, {"cells", cells}, {"hy", hy},
                         {"dt", dt},             {"T", T},         {"realizations", realizations},
                         {"b", b_spec},          {"u0", u0_spec},  {"noise", noise_spec},
                         {"noise_truncation_tail", noise_tail_estimate(noise_spec)}};

  if (params.value("ladder_enabled", true)) {
    const auto op = DiscreteGraphOperator::assemble(g, cells);
    const NoiseModel noise = parse_noise(noise_spec, op, nullptr);
    CompareConfig ccfg;
    ccfg.eps_ladder = ladder;
    ccfg.hy = hy;
    ccfg.dt = dt;
    ccfg.T = T;
    ccfg.realizations = realizations;
    ccfg.seed = splitmix64(seed ^ 0x53504445ull);
    ccfg.snapshot_stride = get_int(params, "snapshot_stride", 10);
    ccfg.b = parse_reaction(b_spec);
    ccfg.u0 = parse_field(u0_spec, sc);
    ccfg.u0_wedge = exact_wedge_fn(sc, ccfg.u0);
    const CompareResult cmp = compare_channel_graph(sc, g, op, noise, ccfg);

    std::ostringstream csv;
    csv << "eps,mean_sup_sq_error,stderr,realizations\n";
    for (const auto& row : cmp.rows)
      csv << format_csv_number(row.eps) << "," << format_csv_number(row.value) << ","
          << format_csv_number(row.stderr_) << "," << row.realizations << "\n";
    rep.tables.emplace_back("spde_ladder.csv", csv.str());

    std::vector<double> vals;
    for (const auto& r : cmp.rows) vals.push_back(r.value);
    const auto lad = ladder_decreasing(vals, std::vector<double>(vals.size(), 0.0));
    rep.checks.push_back(check_bool("spde.ladder_strictly_decreasing", lad.monotone, lad.detail));
  }

  // -- stochastic convolution covariance vs Monte Carlo ----------------------
  const nlohmann::json cov = sub(params, "covariance");
  if (cov.value("enabled", true)) {
    const int cov_cells = cov.value("cells", 60);
    const double t = cov.value("t", 0.5);
    const double cdt = cov.value("dt", 2e-3);
    const int n_real = cov.value("realizations", 2000);
    const auto op = DiscreteGraphOperator::assemble(g, cov_cells);
    const Spectrum spec = eigen_decompose(op);
    const NoiseModel noise = parse_noise(sub(cov, "noise"), op, &spec);
    rep.resolved_params["covariance"] = {
        {"cells", cov_cells}, {"t", t}, {"dt", cdt}, {"realizations", n_real}};

    const Eigen::MatrixXd oracle = stochastic_convolution_cov(op, spec, noise, t);
    const int steps = static_cast<int>(std::llround(t / cdt));
    const int n = op.size();
    std::vector<Eigen::VectorXd> finals(static_cast<std::size_t>(n_real));
    parallel_for(n_real, [&](int r) {
      const BrownianLog log =
          BrownianLog::generate(noise.modes(), steps, cdt, splitmix64(seed ^ 0x434f5641ull),
                                derive_stream(0x434f5641u, static_cast<std::uint64_t>(r)));
      const GraphTrajectory traj = solve_graph_spde(op, noise, Eigen::VectorXd::Zero(n), nullptr,
                                                    log, t, cdt, steps);
      finals[static_cast<std::size_t>(r)] = traj.states.back();
    });
    Eigen::MatrixXd mc = Eigen::MatrixXd::Zero(n, n);
    for (const auto& u : finals) mc.noalias() += u * u.transpose();
    mc /= static_cast<double>(n_real);

    // SE of a sample-covariance entry from the oracle moments (Gaussian
    // states): Var(u_i u_j) = C_ii C_jj + C_ij^2.
    double worst_excess = -1e300;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double se = std::sqrt(
            (oracle(i, i) * oracle(j, j) + oracle(i, j) * oracle(i, j)) / static_cast<double>(n_real));
        worst_excess = std::max(worst_excess, std::abs(mc(i, j) - oracle(i, j)) - 4.0 * se - 1e-12);
      }
    rep.checks.push_back(check_le("spde.covariance_mc_vs_oracle_excess", worst_excess, 0.0,
                                  "max over entries of |mc-oracle| - 4 SE"));
    // t = 0 sanity: the covariance vanishes
    rep.checks.push_back(check_le(
        "spde.covariance_t0",
        stochastic_convolution_cov(op, spec, noise, 0.0).cwiseAbs().maxCoeff(), 0.0));
  }

  // -- discrete OU stationary variance on a single eigenmode ----------------
  const nlohmann::json ou = sub(params, "ou");
  if (ou.value("enabled", true)) {
    const int ou_cells = ou.value("cells", 60);
    const double lambda = ou.value("lambda", 0.3);
    const double odt = ou.value("dt", 1e-3);
    const int steps = ou.value("steps", 10000);
    const int burn = ou.value("burn", 2000);
    const int mode = ou.value("mode", 2);  // 1-based; 2 = first non-constant
    const auto op = DiscreteGraphOperator::assemble(g, ou_cells);
    const Spectrum spec = eigen_decompose(op);
    rep.resolved_params["ou"] = {
        {"cells", ou_cells}, {"lambda", lambda}, {"dt", odt}, {"steps", steps}, {"burn", burn},
        {"mode", mode}};

    const NoiseModel noise = NoiseModel::single_eigenmode(op, spec, mode - 1, lambda);
    const Eigen::VectorXd phi = spec.vectors.col(mode - 1);
    const double mu = spec.mu[mode - 1];

    const BrownianLog log = BrownianLog::generate(
        1, steps, odt, splitmix64(seed ^ 0x4f550000ull), derive_stream(0x4f550000u, 1));
    const GraphTrajectory traj = solve_graph_spde(
        op, noise, Eigen::VectorXd::Zero(op.size()), [](double u) { return -u; }, log,
        steps * odt, odt, 1);

    std::vector<double> coeffs;
    for (int k = burn; k < static_cast<int>(traj.states.size()); ++k)
      coeffs.push_back(op.dot_w(phi, traj.states[static_cast<std::size_t>(k)]));
    const int batches = 20;
    const int per = static_cast<int>(coeffs.size()) / batches;
    std::vector<double> batch_vars;
    for (int b = 0; b < batches; ++b) {
      double acc = 0.0;
      for (int k = 0; k < per; ++k) {
        const double c = coeffs[static_cast<std::size_t>(b * per + k)];
        acc += c * c;
      }
      batch_vars.push_back(acc / per);
    }
    double mean = 0.0;
    for (const double v : batch_vars) mean += v;
    mean /= batches;
    double var = 0.0;
    for (const double v : batch_vars) var += (v - mean) * (v - mean);
    const double se = std::sqrt(var / (batches - 1) / batches);

    const double a = (1.0 - odt) / (1.0 + odt * std::abs(mu));
    const double sig2 = lambda * lambda * odt / ((1.0 + odt * std::abs(mu)) * (1.0 + odt * std::abs(mu)));
    const double var_discrete = sig2 / (1.0 - a * a);
    const double var_continuum = lambda * lambda / (2.0 * (1.0 + std::abs(mu)));

    std::ostringstream csv;
    csv << "quantity,value\n";
    csv << "mc_variance," << format_csv_number(mean) << "\n";
    csv << "mc_stderr," << format_csv_number(se) << "\n";
    csv << "discrete_recursion," << format_csv_number(var_discrete) << "\n";
    csv << "continuum," << format_csv_number(var_continuum) << "\n";
    rep.tables.emplace_back("ou_variance.csv", csv.str());

    rep.checks.push_back(
        check_le("spde.ou_mc_vs_discrete", std::abs(mean - var_discrete), 3.0 * se));
    rep.checks.push_back(
        check_le("spde.ou_mc_vs_continuum", std::abs(mean - var_continuum), 3.0 * se));
    rep.checks.push_back(check_le("spde.ou_discretization_bias",
                                  std::abs(var_discrete - var_continuum), 0.01 * var_continuum));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// frozen-slow: sup_t E|Z - Zhat|^2 ladder with gamma_eps windows.
// ---------------------------------------------------------------------------

KindReport run_frozen_slow(std::shared_ptr<const StripComplex> sc,
                           std::shared_ptr<const GraphSkeleton> g, const nlohmann::json& params,
                           std::uint64_t seed) {
  (void)g;
  KindReport rep;
  rep.kind = "frozen-slow";
  const std::vector<double> ladder = get_ladder(params, "eps_list", {0.2, 0.1, 0.05});
  const double kappa1 = get_num(params, "kappa1", 0.5);
  const int pairs = get_int(params, "pairs", 5000);
  const double T = get_num(params, "T", 1.0);
  const std::vector<double> z0v =
      params.contains("z0") ? params.at("z0").get<std::vector<double>>() : std::vector<double>{kPi, 1.0};
  const Vec2 z0{z0v.at(0), z0v.at(1)};
  const int stride = get_int(params, "stride", 10);
  rep.resolved_params = {{"eps_list", ladder}, {"kappa1", kappa1}, {"pairs", pairs},
                         {"T", T},             {"z0", z0v},        {"stride", stride}};

  std::ostringstream csv;
  csv << "eps,gamma,sup_E_sq,stderr_at_sup,pairs\n";
  std::vector<double> sups;
  for (const double eps : ladder) {
    SimConfig cfg;
    cfg.eps = eps;
    cfg.dt = SimConfig::default_dt(eps);
    cfg.T = T;
    cfg.seed = splitmix64(seed ^ 0x46524f5aull);
    cfg.n_paths = pairs;
    const double gamma_raw = gamma_eps(eps, kappa1);
    const int spw = std::max(1, static_cast<int>(std::llround(gamma_raw / cfg.dt)));
    const double gamma = spw * cfg.dt;

    std::vector<Eigen::ArrayXd> sq(static_cast<std::size_t>(pairs));
    parallel_for(pairs, [&](int p) {
      Philox rng(cfg.seed, derive_stream(0x46524f5au, static_cast<std::uint64_t>(p)));
      const CoupledFrozenPath path = simulate_frozen_pair(*sc, z0, cfg, gamma, rng, stride);
      Eigen::ArrayXd v(static_cast<Eigen::Index>(path.times.size()));
      for (std::size_t k = 0; k < path.times.size(); ++k)
        v[static_cast<Eigen::Index>(k)] = (path.z[k] - path.zhat[k]).squaredNorm();
      sq[static_cast<std::size_t>(p)] = std::move(v);
    });

    const Eigen::Index m = sq.front().size();
    Eigen::ArrayXd mean = Eigen::ArrayXd::Zero(m), m2 = Eigen::ArrayXd::Zero(m);
    int n = 0;
    for (const auto& v : sq) {
      ++n;
      const Eigen::ArrayXd d = v - mean;
      mean += d / n;
      m2 += d * (v - mean);
    }
    Eigen::Index arg = 0;
    const double sup = mean.maxCoeff(&arg);
    const double se = n > 1 ? std::sqrt(m2[arg] / (n - 1) / n) : 0.0;
    sups.push_back(sup);
    csv << format_csv_number(eps) << "," << format_csv_number(gamma) << ","
        << format_csv_number(sup) << "," << format_csv_number(se) << "," << n << "\n";
  }
  rep.tables.emplace_back("frozen_slow.csv", csv.str());
  const auto lad = ladder_decreasing(sups, std::vector<double>(sups.size(), 0.0));
  rep.checks.push_back(check_bool("frozen.sup_E_sq_decreasing", lad.monotone, lad.detail));
  return rep;
}

// ---------------------------------------------------------------------------
// local-time: fit the window-increment bound at the coarsest eps, then
// require domination at the finer ones.
// ---------------------------------------------------------------------------

KindReport run_local_time(std::shared_ptr<const StripComplex> sc,
                          std::shared_ptr<const GraphSkeleton> g, const nlohmann::json& params,
                          std::uint64_t seed) {
  (void)g;
  KindReport rep;
  rep.kind = "local-time";
  const std::vector<double> ladder = get_ladder(params, "eps_list", {0.2, 0.1, 0.05});
  const double kappa1 = get_num(params, "kappa1", 0.5);
  const int pairs = get_int(params, "pairs", 2000);
  const double slack = get_num(params, "slack", 1.5);
  const std::vector<double> z0v =
      params.contains("z0") ? params.at("z0").get<std::vector<double>>() : std::vector<double>{kPi, 1.0};
  const Vec2 z0{z0v.at(0), z0v.at(1)};
  const double window_start = get_num(params, "window_start", 0.3);
  rep.resolved_params = {{"eps_list", ladder}, {"kappa1", kappa1},          {"pairs", pairs},
                         {"slack", slack},     {"window_start", window_start}, {"z0", z0v}};

  struct Row {
    double eps, gamma, m2, se, shape;
  };
  std::vector<Row> rows;
  for (const double eps : ladder) {
    SimConfig cfg;
    cfg.eps = eps;
    cfg.dt = SimConfig::default_dt(eps);
    cfg.seed = splitmix64(seed ^ 0x4c54494dull);
    cfg.n_paths = pairs;
    const double gamma_raw = gamma_eps(eps, kappa1);
    const int spw = std::max(1, static_cast<int>(std::llround(gamma_raw / cfg.dt)));
    const double gamma = spw * cfg.dt;
    const int k_window = static_cast<int>(std::ceil(window_start / gamma));
    cfg.T = (k_window + 1) * gamma - cfg.dt;  // end strictly inside the window

    std::vector<double> incr(static_cast<std::size_t>(pairs));
    parallel_for(pairs, [&](int p) {
      Philox rng(cfg.seed, derive_stream(0x4c54494du, static_cast<std::uint64_t>(p)));
      const CoupledFrozenPath path = simulate_frozen_pair(*sc, z0, cfg, gamma, rng, spw);
      // phihat at the window start k_window*gamma and at the final time.
      double phi_r = 0.0;
      for (std::size_t k = 0; k < path.times.size(); ++k)
        if (path.times[k] <= k_window * gamma + 1e-12) phi_r = path.phihat[k];
      incr[static_cast<std::size_t>(p)] = path.phihat.back() - phi_r;
    });
    double mean = 0.0, m2acc = 0.0;
    int n = 0;
    for (const double v : incr) {
      const double s = v * v;  // p = 2 moment
      ++n;
      const double d = s - mean;
      mean += d / n;
      m2acc += d * (s - mean);
    }
    const double se = n > 1 ? std::sqrt(m2acc / (n - 1) / n) : 0.0;
    const double shape = gamma * gamma + eps * eps * gamma + std::pow(eps, 4.0);
    rows.push_back({eps, gamma, mean, se, shape});
  }

  const double c_fit = rows.front().m2 / rows.front().shape;
  std::ostringstream csv;
  csv << "eps,gamma,m2,stderr,shape,bound,dominated\n";
  bool dominated = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double bound = slack * c_fit * rows[i].shape;
    const bool ok = i == 0 || rows[i].m2 <= bound;
    dominated = dominated && ok;
    csv << format_csv_number(rows[i].eps) << "," << format_csv_number(rows[i].gamma) << ","
        << format_csv_number(rows[i].m2) << "," << format_csv_number(rows[i].se) << ","
        << format_csv_number(rows[i].shape) << "," << format_csv_number(bound) << "," << (ok ? 1 : 0)
        << "\n";
  }
  rep.tables.emplace_back("local_time.csv", csv.str());
  rep.checks.push_back(check_bool("localtime.bound_dominates", dominated,
                                  "c fitted at eps=" + format_csv_number(rows.front().eps)));
  return rep;
}

// ---------------------------------------------------------------------------
// equilibration: frozen-window KS oracle, long-run uniform occupation chi^2,
// and conditional y|x uniformity.
// ---------------------------------------------------------------------------

KindReport run_equilibration(std::shared_ptr<const StripComplex> sc,
                             std::shared_ptr<const GraphSkeleton> g, const nlohmann::json& params,
                             std::uint64_t seed) {
  (void)g;
  KindReport rep;
  rep.kind = "equilibration";

  const nlohmann::json relax = sub(params, "relax");
  if (relax.value("enabled", true)) {
    const double eps = relax.value("eps", 0.05);
    const int samples = relax.value("samples", 10000);
    const double kappa1 = relax.value("kappa1", 0.5);
    const double ks_tol = relax.value("ks_tol", 0.05);
    // fine steps keep the projection scheme's boundary atom well below the
    // KS tolerance
    const double dt_div = relax.value("dt_divisor", 320.0);
    const std::vector<double> z0v = relax.contains("z0") ? relax.at("z0").get<std::vector<double>>()
                                                         : std::vector<double>{kPi, 1.2};
    const Vec2 z0{z0v.at(0), z0v.at(1)};
    rep.resolved_params["relax"] = {{"eps", eps},       {"samples", samples}, {"kappa1", kappa1},
                                    {"ks_tol", ks_tol}, {"z0", z0v},          {"dt_divisor", dt_div}};

    SimConfig cfg;
    cfg.eps = eps;
    cfg.dt = eps * eps / dt_div;
    cfg.seed = splitmix64(seed ^ 0x52454c58ull);
    cfg.n_paths = samples;
    const double gamma_raw = gamma_eps(eps, kappa1);
    const int spw = std::max(1, static_cast<int>(std::llround(gamma_raw / cfg.dt)));
    const double gamma = spw * cfg.dt;
    cfg.T = gamma;

    std::vector<double> ys(static_cast<std::size_t>(samples));
    parallel_for(samples, [&](int p) {
      Philox rng(cfg.seed, derive_stream(0x52454c58u, static_cast<std::uint64_t>(p)));
      const CoupledFrozenPath path = simulate_frozen_pair(*sc, z0, cfg, gamma, rng, spw);
      ys[static_cast<std::size_t>(p)] = path.zhat.back().y();
    });
    const Strip& strip = sc->strips().front();
    const double h1 = strip.h_lo(z0.x());
    const double l = strip.width(z0.x());
    const double tau = gamma / (eps * eps);
    const double ks = ks_statistic(
        [&] {
          std::vector<double> rel(ys.size());
          for (std::size_t i = 0; i < ys.size(); ++i) rel[i] = ys[i] - h1;
          return rel;
        }(),
        [&](double y) { return relaxation_cdf(l, z0.y() - h1, tau, y); });
    rep.checks.push_back(check_le("equilibration.frozen_ks", ks, ks_tol));
  }

  const nlohmann::json chi2 = sub(params, "chi2");
  if (chi2.value("enabled", true)) {
    const double eps = chi2.value("eps", 0.5);
    const double T = chi2.value("T", 50.0);
    const int paths = chi2.value("paths", 2500);
    const int bins = chi2.value("bins", 10);
    const double p_min = chi2.value("p_min", 0.01);
    const double dt_div = chi2.value("dt_divisor", 640.0);
    rep.resolved_params["chi2"] = {{"eps", eps},   {"T", T},         {"paths", paths},
                                   {"bins", bins}, {"p_min", p_min}, {"dt_divisor", dt_div}};

    SimConfig cfg;
    cfg.eps = eps;
    cfg.dt = eps * eps / dt_div;
    cfg.T = T;
    cfg.seed = splitmix64(seed ^ 0x43484932ull);
    cfg.n_paths = paths;

    const auto [x0, x1] = sc->x_range();
    double y0 = 1e300, y1 = -1e300;
    for (const auto& s : sc->strips())
      for (int k = 0; k <= 200; ++k) {
        const double x = s.x_lo + (s.x_hi - s.x_lo) * k / 200.0;
        y0 = std::min(y0, s.h_lo(x));
        y1 = std::max(y1, s.h_hi(x));
      }

    const Strip& s0 = sc->strips().front();
    const double xm = 0.5 * (s0.x_lo + s0.x_hi);
    const Vec2 start{xm, s0.h_lo(xm) + 0.5 * s0.width(xm)};
    std::vector<Vec2> finals(static_cast<std::size_t>(paths));
    parallel_for(paths, [&](int p) {
      Philox rng(cfg.seed, derive_stream(0x43484932u, static_cast<std::uint64_t>(p)));
      ReflectedState s;
      s.position = start;
      const int steps = static_cast<int>(std::llround(T / cfg.dt));
      for (int k = 0; k < steps; ++k) s = step_reflected(*sc, s, cfg, rng);
      finals[static_cast<std::size_t>(p)] = s.position;
    });

    // expected occupation per lattice bin, proportional to area(bin ∩ G)
    const double bx = (x1 - x0) / bins, by = (y1 - y0) / bins;
    Eigen::MatrixXd expected(bins, bins);
    const int sub_n = 48;
    double total_frac = 0.0;
    for (int i = 0; i < bins; ++i)
      for (int j = 0; j < bins; ++j) {
        int inside = 0;
        for (int a = 0; a < sub_n; ++a)
          for (int b = 0; b < sub_n; ++b) {
            const Vec2 q{x0 + (i + (a + 0.5) / sub_n) * bx, y0 + (j + (b + 0.5) / sub_n) * by};
            if (sc->contains(q)) ++inside;
          }
        expected(i, j) = static_cast<double>(inside) / (sub_n * sub_n);
        total_frac += expected(i, j);
      }
    expected *= static_cast<double>(paths) / total_frac;

    Eigen::MatrixXd observed = Eigen::MatrixXd::Zero(bins, bins);
    for (const auto& p : finals) {
      const int i = std::clamp(static_cast<int>((p.x() - x0) / bx), 0, bins - 1);
      const int j = std::clamp(static_cast<int>((p.y() - y0) / by), 0, bins - 1);
      observed(i, j) += 1.0;
    }

    // Merge low-expectation bins column-wise downward, then into the largest.
    struct Cell {
      double exp = 0.0, obs = 0.0;
    };
    std::vector<Cell> cells;
    for (int i = 0; i < bins; ++i) {
      Cell carry;
      std::vector<Cell> col;
      for (int j = bins - 1; j >= 0; --j) {
        if (expected(i, j) <= 0.0 && carry.exp == 0.0) continue;
        carry.exp += expected(i, j);
        carry.obs += observed(i, j);
        if (carry.exp >= 5.0) {
          col.push_back(carry);
          carry = Cell{};
        }
      }
      if (carry.exp > 0.0) {
        if (!col.empty()) {
          col.back().exp += carry.exp;
          col.back().obs += carry.obs;
        } else {
          col.push_back(carry);
        }
      }
      for (const auto& c : col) cells.push_back(c);
    }
    // fold any still-small cells into the largest one
    std::size_t largest = 0;
    for (std::size_t k = 1; k < cells.size(); ++k)
      if (cells[k].exp > cells[largest].exp) largest = k;
    std::vector<Cell> kept;
    Cell fold;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (cells[k].exp < 5.0 && k != largest) {
        fold.exp += cells[k].exp;
        fold.obs += cells[k].obs;
      } else {
        kept.push_back(cells[k]);
      }
    }
    if (!kept.empty()) {
      kept.front().exp += fold.exp;
      kept.front().obs += fold.obs;
    }
    double stat = 0.0;
    for (const auto& c : kept) stat += (c.obs - c.exp) * (c.obs - c.exp) / c.exp;
    const int dof = static_cast<int>(kept.size()) - 1;
    const double pval = chi2_pvalue(stat, dof);
    std::ostringstream csv;
    csv << "statistic,dof,p_value\n"
        << format_csv_number(stat) << "," << dof << "," << format_csv_number(pval) << "\n";
    rep.tables.emplace_back("occupation_chi2.csv", csv.str());
    CheckLine c;
    c.name = "equilibration.occupation_pvalue";
    c.value = pval;
    c.bound = p_min;
    c.cmp = ">=";
    c.pass = pval >= p_min;
    rep.checks.push_back(c);
  }

  const nlohmann::json cond = sub(params, "conditional");
  if (cond.value("enabled", true)) {
    const double eps = cond.value("eps", 0.05);
    const double t = cond.value("t", 0.25);
    const int paths = cond.value("paths", 6000);
    const double xc = cond.value("x_center", kPi);
    const double xh = cond.value("x_halfwidth", 0.5);
    const double ks_tol = cond.value("ks_tol", 0.05);
    const double dt_div = cond.value("dt_divisor", 320.0);
    rep.resolved_params["conditional"] = {{"eps", eps},       {"t", t},
                                          {"paths", paths},   {"x_center", xc},
                                          {"x_halfwidth", xh}, {"ks_tol", ks_tol},
                                          {"dt_divisor", dt_div}};

    SimConfig cfg;
    cfg.eps = eps;
    cfg.dt = eps * eps / dt_div;
    cfg.T = t;
    cfg.seed = splitmix64(seed ^ 0x434f4e44ull);
    cfg.n_paths = paths;
    const Strip& strip = sc->strips().front();
    const Vec2 z0{xc, strip.h_lo(xc) + 0.5 * strip.width(xc)};
    std::vector<Vec2> finals(static_cast<std::size_t>(paths));
    parallel_for(paths, [&](int p) {
      Philox rng(cfg.seed, derive_stream(0x434f4e44u, static_cast<std::uint64_t>(p)));
      ReflectedState s;
      s.position = z0;
      const int steps = static_cast<int>(std::llround(t / cfg.dt));
      for (int k = 0; k < steps; ++k) s = step_reflected(*sc, s, cfg, rng);
      finals[static_cast<std::size_t>(p)] = s.position;
    });
    std::vector<double> v;
    for (const auto& p : finals) {
      if (std::abs(p.x() - xc) > xh) continue;
      const auto comps = sc->cross_section(p.x());
      for (const auto& c : comps)
        if (p.y() >= c.y_lo - 1e-12 && p.y() <= c.y_hi + 1e-12) {
          v.push_back(std::clamp((p.y() - c.y_lo) / c.length, 0.0, 1.0));
          break;
        }
    }
    const double ks = ks_statistic(v, [](double x) { return std::clamp(x, 0.0, 1.0); });
    CheckLine c;
    c.name = "equilibration.conditional_y_uniform_ks";
    c.value = ks;
    c.bound = ks_tol;
    c.cmp = "<=";
    c.pass = ks <= ks_tol && static_cast<int>(v.size()) > 200;
    c.note = "in-bin samples: " + std::to_string(v.size());
    rep.checks.push_back(c);
  }
  return rep;
}

}  // namespace changraph
