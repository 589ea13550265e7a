#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "changraph/channel_fv.hpp"
#include "changraph/experiment.hpp"
#include "changraph/graph_operator.hpp"
#include "changraph/graph_spde.hpp"
#include "changraph/noise.hpp"
#include "changraph/reflected.hpp"

namespace {

using namespace changraph;

void print_report(const KindReport& rep) {
  for (const auto& c : rep.checks) {
    if (c.cmp.find('[') != std::string::npos)
      std::printf("[%s] %-45s value=%.6g %s%s%s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                  c.value, c.cmp.c_str(), c.note.empty() ? "" : "  # ", c.note.c_str());
    else
      std::printf("[%s] %-45s value=%.6g %s %.6g%s%s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                  c.value, c.cmp.c_str(), c.bound, c.note.empty() ? "" : "  # ", c.note.c_str());
  }
  std::printf("%s: %s\n", rep.kind.c_str(), rep.pass() ? "all checks passed" : "CHECK FAILURES");
}

int cmd_run(const std::string& config_path) {
  const ExperimentConfig cfg = ExperimentConfig::load(config_path);
  const KindReport rep = run_experiment(cfg);
  print_report(rep);
  std::printf("outputs written to %s\n", cfg.output_dir.c_str());
  return rep.pass() ? 0 : 1;
}

int cmd_validate(const std::string& config_path) {
  validate_experiment_config(config_path);
  std::printf("config ok: %s\n", config_path.c_str());
  return 0;
}

int cmd_selfcheck(const std::string& domain_path, int cells) {
  auto sc = std::make_shared<const StripComplex>(StripComplex::build(load_domain_spec(domain_path)));
  auto g = std::make_shared<const GraphSkeleton>(GraphSkeleton::build(*sc));
  std::printf("domain ok: %d strips, %d edges, %d vertices, nu(Gamma)=%.12g\n",
              static_cast<int>(sc->strips().size()), g->num_edges(), g->num_vertices(),
              g->measure_nu_total());
  nlohmann::json params;
  params["cells"] = cells;
  const KindReport rep = run_kind("operator-selfchecks", sc, g, params, 0);
  print_report(rep);
  return rep.pass() ? 0 : 1;
}

int cmd_simulate(const std::string& domain_path, double eps, double dt, int paths,
                 std::uint64_t seed, double t, const std::string& observable, double z0x,
                 double z0y, const std::string& dump_paths) {
  auto sc = std::make_shared<const StripComplex>(StripComplex::build(load_domain_spec(domain_path)));
  SimConfig cfg;
  cfg.eps = eps;
  cfg.dt = dt;
  cfg.T = t;
  cfg.seed = seed;
  cfg.n_paths = paths;
  cfg = cfg.validated();
  const auto obs = parse_observable(observable);
  const McResult r = mc_expectation(*sc, Vec2{z0x, z0y}, cfg, t, obs);
  std::printf("eps,t,mean,stderr,n\n%s,%s,%s,%s,%d\n", format_csv_number(eps).c_str(),
              format_csv_number(t).c_str(), format_csv_number(r.mean).c_str(),
              format_csv_number(r.stderr_).c_str(), r.n);
  if (!dump_paths.empty()) {
    // binary float64 records (path, t, x, y, phi), documented in the README
    std::ofstream out(dump_paths, std::ios::binary);
    for (int p = 0; p < std::min(paths, 64); ++p) {
      Philox prng(cfg.seed, derive_stream(0x5245464cu, static_cast<std::uint64_t>(p)));
      const auto traj = simulate_path(*sc, Vec2{z0x, z0y}, cfg, prng, 10);
      for (const auto& s : traj) {
        const double rec[5] = {static_cast<double>(p), s.time, s.position.x(), s.position.y(),
                               s.phi};
        out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
      }
    }
  }
  return 0;
}

int cmd_channel(const std::string& domain_path, double h, double eps, double T, double dt,
                const std::string& noise_spec, const std::string& b_spec,
                const std::string& u0_spec, std::uint64_t seed, const std::string& wedge_out,
                const std::string& dump_fields, int cells_per_edge) {
  auto sc = std::make_shared<const StripComplex>(StripComplex::build(load_domain_spec(domain_path)));
  auto g = std::make_shared<const GraphSkeleton>(GraphSkeleton::build(*sc));
  auto grid = std::make_shared<const ChannelGrid>(ChannelGrid::build(sc, g, h, h));
  const auto op = ChannelOperator::assemble(grid, eps);
  const auto u0 = grid->sample(parse_field(nlohmann::json(u0_spec), sc));

  ChannelTrajectory traj;
  if (noise_spec == "none") {
    traj = solve_channel_pde(op, u0, nullptr, T, dt, 10);
  } else {
    const auto gop = DiscreteGraphOperator::assemble(g, cells_per_edge);
    const NoiseModel noise = [&] {
      if (noise_spec == "cosine4")
        return NoiseModel::cosine(gop, 4, [](int j) { return std::pow(2.0, -j); });
      if (noise_spec == "constant") return NoiseModel::constant_mode(gop, 1.0);
      throw std::invalid_argument("unknown --noise (none|cosine4|constant)");
    }();
    const int steps = static_cast<int>(std::llround(T / dt));
    const BrownianLog log = BrownianLog::generate(noise.modes(), steps, dt, seed, 1);
    traj = solve_channel_spde(op, u0, parse_reaction(nlohmann::json(b_spec)), noise, log, T, dt, 10);
  }
  std::printf("t,norm,mass\n");
  for (std::size_t k = 0; k < traj.times.size(); ++k)
    std::printf("%s,%s,%s\n", format_csv_number(traj.times[k]).c_str(),
                format_csv_number(grid->norm_area(traj.states[k])).c_str(),
                format_csv_number(grid->mass(traj.states[k])).c_str());
  if (!wedge_out.empty()) {
    std::ofstream out(wedge_out);
    out << "t,edge,x,value\n";
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
      const Eigen::VectorXd w = wedge_field(*grid, traj.states[k]);
      for (std::size_t c = 0; c < grid->columns().size(); ++c)
        out << format_csv_number(traj.times[k]) << "," << grid->columns()[c].edge << ","
            << format_csv_number(grid->columns()[c].x) << ","
            << format_csv_number(w[static_cast<Eigen::Index>(c)]) << "\n";
    }
  }
  if (!dump_fields.empty()) {
    // binary float64: n_cells, then per snapshot t followed by the cell values
    std::ofstream out(dump_fields, std::ios::binary);
    const double n_cells = static_cast<double>(grid->num_cells());
    out.write(reinterpret_cast<const char*>(&n_cells), sizeof(double));
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
      out.write(reinterpret_cast<const char*>(&traj.times[k]), sizeof(double));
      out.write(reinterpret_cast<const char*>(traj.states[k].data()),
                static_cast<std::streamsize>(sizeof(double)) * grid->num_cells());
    }
  }
  return 0;
}

int cmd_dump_operator(const std::string& domain_path, int cells, const std::string& out_path) {
  auto sc = std::make_shared<const StripComplex>(StripComplex::build(load_domain_spec(domain_path)));
  auto g = std::make_shared<const GraphSkeleton>(GraphSkeleton::build(*sc));
  const auto op = DiscreteGraphOperator::assemble(g, cells);
  std::ofstream out(out_path);
  out << op.dump_json() << "\n";
  std::printf("operator dump (%d unknowns) written to %s\n", op.size(), out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"channel/graph diffusion and SPDE experiment runner"};
  app.set_help_flag("--help", "print help");  // keep -h free; `channel` uses --h
  app.require_subcommand(1);

  std::string config_path, domain_path, observable = "cosx_1py";
  std::string noise_spec = "none", b_spec = "none", u0_spec = "cosx_1py";
  std::string dump_paths, wedge_out, dump_fields, out_path = "operator.json";
  double eps = 0.2, dt = 0.0, t = 1.0, T = 1.0, h = 0.05, z0x = 3.141592653589793, z0y = 1.0;
  int paths = 1000, cells = 400;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "run an experiment config and write reports");
  run->add_option("config", config_path, "experiment config (JSON)")->required();

  auto* validate = app.add_subcommand("validate", "validate an experiment config");
  validate->add_option("config", config_path, "experiment config (JSON)")->required();

  auto* selfcheck = app.add_subcommand("selfcheck", "run operator self-checks on a domain");
  selfcheck->add_option("domain", domain_path, "domain description (JSON)")->required();
  selfcheck->add_option("--cells-per-edge", cells, "finite-volume cells per edge");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo expectation of the reflected diffusion");
  simulate->add_option("domain", domain_path)->required();
  simulate->add_option("--eps", eps, "channel thinness parameter")->required();
  simulate->add_option("--dt", dt, "time step (default eps^2/20)");
  simulate->add_option("--paths", paths, "number of independent paths");
  simulate->add_option("--seed", seed, "master seed");
  simulate->add_option("--t", t, "evaluation time");
  simulate->add_option("--observable", observable, "one|x|y|cosx_1py|left_half");
  simulate->add_option("--z0x", z0x, "start x");
  simulate->add_option("--z0y", z0y, "start y");
  simulate->add_option("--dump-paths", dump_paths, "binary float64 trajectory dump (<=64 paths)");

  auto* channel = app.add_subcommand("channel", "finite-volume channel (S)PDE run");
  channel->set_help_flag("--help", "print help");
  channel->add_option("domain", domain_path)->required();
  channel->add_option("--h", h, "cell size")->required();
  channel->add_option("--eps", eps, "anisotropy parameter")->required();
  channel->add_option("--T", T, "horizon");
  channel->add_option("--dt", dt, "time step")->required();
  channel->add_option("--noise", noise_spec, "none|cosine4|constant");
  channel->add_option("--b", b_spec, "none|linear|tanh|sin");
  channel->add_option("--u0", u0_spec, "one|cosx|cosx_1py|ydev");
  channel->add_option("--seed", seed, "master seed");
  channel->add_option("--wedge-out", wedge_out, "CSV of wedge-projected snapshots");
  channel->add_option("--dump-fields", dump_fields, "binary float64 snapshot dump");
  channel->add_option("--cells-per-edge", cells, "graph cells for the noise model");

  auto* dump = app.add_subcommand("dump-operator", "write the assembled graph operator as JSON");
  dump->add_option("domain", domain_path)->required();
  dump->add_option("--cells-per-edge", cells);
  dump->add_option("--out", out_path);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path);
    if (validate->parsed()) return cmd_validate(config_path);
    if (selfcheck->parsed()) return cmd_selfcheck(domain_path, cells);
    if (simulate->parsed())
      return cmd_simulate(domain_path, eps, dt, paths, seed, t, observable, z0x, z0y, dump_paths);
    if (channel->parsed())
      return cmd_channel(domain_path, h, eps, T, dt, noise_spec, b_spec, u0_spec, seed, wedge_out,
                         dump_fields, cells);
    if (dump->parsed()) return cmd_dump_operator(domain_path, cells, out_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
