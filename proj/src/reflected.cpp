#include "changraph/reflected.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "changraph/fields.hpp"
#include "changraph/parallel.hpp"

namespace changraph {

SimConfig SimConfig::validated() const {
  SimConfig c = *this;
  if (!(c.eps > 0.0)) throw std::invalid_argument("SimConfig: eps must be positive");
  if (c.dt == 0.0) c.dt = default_dt(c.eps);
  if (!(c.dt > 0.0)) throw std::invalid_argument("SimConfig: dt must be positive");
  if (c.dt > c.eps * c.eps / 10.0 + 1e-15)
    throw std::invalid_argument("SimConfig: dt must not exceed eps^2/10");
  if (!(c.T > 0.0)) throw std::invalid_argument("SimConfig: T must be positive");
  if (c.n_paths < 1) throw std::invalid_argument("SimConfig: n_paths must be >= 1");
  return c;
}

std::optional<ReflectedState> try_step_reflected(const StripComplex& sc, const ReflectedState& s,
                                                 double dt, double eps, double xi1, double xi2) {
  const double sq = std::sqrt(dt);
  Vec2 p{s.position.x() + sq * xi1, s.position.y() + sq * xi2 / eps};
  ReflectedState out;
  out.time = s.time + dt;
  out.phi = s.phi;
  if (sc.contains(p)) {
    out.position = p;
    return out;
  }
  const auto fix = sc.reflect_into_domain(p, eps);
  if (!fix) return std::nullopt;
  out.position = fix->p_in;
  out.phi += fix->dphi;
  return out;
}

namespace {

// Re-does one step of size dt as 2^level substeps when the one-shot
// correction fails near corners.
std::optional<ReflectedState> step_with_halving(const StripComplex& sc, const ReflectedState& s,
                                                double dt, double eps, Philox& rng, int level) {
  if (level > 4) return std::nullopt;
  if (level == 0) {
    const double xi1 = rng.next_normal();  // fixed draw order: x first, then y
    const double xi2 = rng.next_normal();
    auto next = try_step_reflected(sc, s, dt, eps, xi1, xi2);
    if (next) return next;
    return step_with_halving(sc, s, dt, eps, rng, 1);
  }
  ReflectedState cur = s;
  const int n = 1 << level;
  for (int k = 0; k < n; ++k) {
    const double xi1 = rng.next_normal();
    const double xi2 = rng.next_normal();
    auto next = try_step_reflected(sc, cur, dt / n, eps, xi1, xi2);
    if (!next) return step_with_halving(sc, s, dt, eps, rng, level + 1);
    cur = *next;
  }
  return cur;
}

}  // namespace

ReflectedState step_reflected(const StripComplex& sc, const ReflectedState& s, const SimConfig& cfg,
                              Philox& rng) {
  auto next = step_with_halving(sc, s, cfg.dt, cfg.eps, rng, 0);
  if (!next)
    throw std::runtime_error("step_reflected: boundary correction failed after 4 halvings; shrink dt");
  return *next;
}

std::vector<ReflectedState> simulate_path(const StripComplex& sc, const Vec2& z0, const SimConfig& cfg0,
                                          Philox& rng, int stride) {
  const SimConfig cfg = cfg0.validated();
  if (!sc.contains(z0)) throw std::invalid_argument("simulate_path: start point outside the domain");
  const int steps = std::max(1, static_cast<int>(std::llround(cfg.T / cfg.dt)));
  std::vector<ReflectedState> traj;
  traj.reserve(static_cast<std::size_t>(steps / std::max(1, stride)) + 2);
  ReflectedState s;
  s.position = z0;
  traj.push_back(s);
  for (int k = 0; k < steps; ++k) {
    s = step_reflected(sc, s, cfg, rng);
    if ((k + 1) % std::max(1, stride) == 0 || k + 1 == steps) traj.push_back(s);
  }
  return traj;
}

McResult mc_expectation(const StripComplex& sc, const Vec2& z0, const SimConfig& cfg0, double t,
                        const std::function<double(const Vec2&)>& phi_fn) {
  const SimConfig cfg = cfg0.validated();
  if (t > cfg.T + 1e-12) throw std::invalid_argument("mc_expectation: t exceeds the horizon T");
  const int steps = std::max(1, static_cast<int>(std::llround(t / cfg.dt)));
  std::vector<double> values(static_cast<std::size_t>(cfg.n_paths));
  parallel_for(cfg.n_paths, [&](int path) {
    Philox rng(cfg.seed, derive_stream(0x5245464cu /*"REFL"*/, static_cast<std::uint64_t>(path)));
    ReflectedState s;
    s.position = z0;
    for (int k = 0; k < steps; ++k) s = step_reflected(sc, s, cfg, rng);
    values[static_cast<std::size_t>(path)] = phi_fn(s.position);
  });
  double mean = 0.0, m2 = 0.0;
  int n = 0;
  for (const double v : values) {
    ++n;
    const double d = v - mean;
    mean += d / n;
    m2 += d * (v - mean);
  }
  McResult res;
  res.mean = mean;
  res.n = n;
  res.stderr_ = n > 1 ? std::sqrt(m2 / (n - 1) / n) : 0.0;
  return res;
}

double gamma_eps(double eps, double kappa1) { return eps * eps * std::log(std::pow(eps, -kappa1)); }

CoupledFrozenPath simulate_frozen_pair(const StripComplex& sc, const Vec2& z0, const SimConfig& cfg0,
                                       double gamma, Philox& rng, int stride) {
  const SimConfig cfg = cfg0.validated();
  if (sc.strips().size() != 1)
    throw std::invalid_argument("simulate_frozen_pair: single-strip domains only");
  if (!sc.contains(z0)) throw std::invalid_argument("simulate_frozen_pair: start outside the domain");
  const int spw = static_cast<int>(std::llround(gamma / cfg.dt));
  if (spw < 1 || std::abs(spw * cfg.dt - gamma) > 1e-9 * std::max(1.0, gamma))
    throw std::invalid_argument("simulate_frozen_pair: gamma must be a positive multiple of dt");

  const Strip& strip = sc.strips().front();
  const int steps = std::max(1, static_cast<int>(std::llround(cfg.T / cfg.dt)));
  const double inv_eps2 = 1.0 / (cfg.eps * cfg.eps);

  CoupledFrozenPath out;
  ReflectedState z;
  z.position = z0;
  double xhat = z0.x(), yhat = z0.y(), phihat = 0.0;
  double h1 = 0.0, h2 = 0.0, n2_lo = 0.0, n2_hi = 0.0;

  const auto freeze = [&](double x) {
    xhat = std::clamp(x, strip.x_lo, strip.x_hi);
    h1 = strip.h_lo(xhat);
    h2 = strip.h_hi(xhat);
    const double d1 = strip.h_lo.d(xhat), d2 = strip.h_hi.d(xhat);
    n2_lo = 1.0 / std::sqrt(1.0 + d1 * d1);   // nu_2 on the lower curve
    n2_hi = -1.0 / std::sqrt(1.0 + d2 * d2);  // nu_2 on the upper curve
  };

  const auto record = [&](double t) {
    out.times.push_back(t);
    out.z.push_back(z.position);
    out.zhat.push_back(Vec2{xhat, yhat});
    out.phi.push_back(z.phi);
    out.phihat.push_back(phihat);
  };

  freeze(z0.x());
  record(0.0);
  for (int k = 0; k < steps; ++k) {
    if (k % spw == 0) {  // window start: Zhat re-reads Z
      freeze(z.position.x());
      yhat = std::clamp(z.position.y(), h1, h2);
    }
    const double xi1 = rng.next_normal();
    const double xi2 = rng.next_normal();
    auto next = try_step_reflected(sc, z, cfg.dt, cfg.eps, xi1, xi2);
    if (!next) throw std::runtime_error("simulate_frozen_pair: correction failed; shrink dt");
    z = *next;

    // Frozen fast coordinate: same Brownian increment, sigma_hat kills xi1.
    double y = yhat + std::sqrt(cfg.dt) * xi2 / cfg.eps;
    for (int guard = 0; guard < 8 && (y < h1 || y > h2); ++guard) {
      if (y < h1) {
        const double dphi = (h1 - y) / (inv_eps2 * n2_lo);
        phihat += dphi;
        y += inv_eps2 * n2_lo * dphi;
      } else {
        const double dphi = (h2 - y) / (inv_eps2 * n2_hi);  // both factors negative
        phihat += dphi;
        y += inv_eps2 * n2_hi * dphi;
      }
    }
    yhat = std::clamp(y, h1, h2);
    if ((k + 1) % std::max(1, stride) == 0 || k + 1 == steps) record((k + 1) * cfg.dt);
  }
  return out;
}

MomentResult local_time_moments(const std::vector<std::vector<ReflectedState>>& paths, double r,
                                double t, int p) {
  if (r > t) throw std::invalid_argument("local_time_moments: need r <= t");
  if (p != 1 && p != 2 && p != 4) throw std::invalid_argument("local_time_moments: p in {1,2,4}");
  const auto phi_at = [](const std::vector<ReflectedState>& path, double time) {
    // Last stored state with state.time <= time + tiny; phi is piecewise
    // constant between corrections so this is exact on the stored grid.
    double phi = path.front().phi;
    for (const auto& s : path) {
      if (s.time > time + 1e-12) break;
      phi = s.phi;
    }
    return phi;
  };
  double mean = 0.0, m2 = 0.0;
  int n = 0;
  for (const auto& path : paths) {
    const double inc = phi_at(path, t) - phi_at(path, r);
    const double v = std::pow(inc, p);
    ++n;
    const double d = v - mean;
    mean += d / n;
    m2 += d * (v - mean);
  }
  MomentResult res;
  res.value = mean;
  res.n = n;
  res.stderr_ = n > 1 ? std::sqrt(m2 / (n - 1) / n) : 0.0;
  return res;
}

double SectionRelaxation::operator()(double y) const {
  if (coeff.empty()) return 0.0;
  double acc = coeff[0] / std::sqrt(width);
  const double pi = 3.14159265358979323846;
  for (std::size_t j = 1; j < coeff.size(); ++j)
    acc += coeff[j] * std::sqrt(2.0 / width) *
           std::cos(static_cast<double>(j) * pi * (y - y_lo) / width);
  return acc;
}

double SectionRelaxation::mean() const {
  return coeff.empty() ? 0.0 : coeff[0] / std::sqrt(width);
}

SectionRelaxation cross_section_relaxation(const StripComplex& sc, double x, int edge, double eps,
                                           double s, const std::function<double(double)>& f) {
  const auto comps = sc.cross_section(x);
  const SectionComponent* comp = nullptr;
  for (const auto& c : comps)
    if (c.edge == edge) comp = &c;
  if (!comp) throw std::domain_error("cross_section_relaxation: empty section for this edge");

  SectionRelaxation rel;
  rel.y_lo = comp->y_lo;
  rel.width = comp->length;
  const double l = comp->length;
  const double pi = 3.14159265358979323846;
  const double tau = s / (eps * eps);

  // 64-panel Gauss-Legendre x 16 nodes resolves the cosines up to the
  // truncation set by the 1e-14 damping cut.
  const auto& gn = GaussLegendre16::nodes();
  const auto& gw = GaussLegendre16::weights();
  const int panels = 64;
  const auto inner = [&](int j) {
    double acc = 0.0;
    for (int pnl = 0; pnl < panels; ++pnl) {
      const double a = rel.y_lo + l * pnl / panels;
      const double b = rel.y_lo + l * (pnl + 1) / panels;
      for (int i = 0; i < 16; ++i) {
        const double y = 0.5 * (a + b) + 0.5 * (b - a) * gn[static_cast<std::size_t>(i)];
        const double ej = j == 0 ? 1.0 / std::sqrt(l)
                                 : std::sqrt(2.0 / l) * std::cos(j * pi * (y - rel.y_lo) / l);
        acc += 0.5 * (b - a) * gw[static_cast<std::size_t>(i)] * f(y) * ej;
      }
    }
    return acc;
  };

  rel.coeff.push_back(inner(0));
  for (int j = 1; j < 4096; ++j) {
    // Neumann spectrum of the generator (1/2) d^2/dy^2 of the reflected
    // fast motion: decay rate (j pi / l)^2 / 2 per unit of fast time.
    const double damp = std::exp(-0.5 * tau * (j * pi / l) * (j * pi / l));
    if (damp < 1e-14) break;
    rel.coeff.push_back(damp * inner(j));
  }
  return rel;
}

double relaxation_cdf(double l, double y0, double tau, double y) {
  const double pi = 3.14159265358979323846;
  double acc = y / l;
  for (int j = 1; j < 4096; ++j) {
    const double damp = std::exp(-0.5 * tau * (j * pi / l) * (j * pi / l));
    if (damp < 1e-15) break;
    acc += damp * (2.0 / (j * pi)) * std::cos(j * pi * y0 / l) * std::sin(j * pi * y / l);
  }
  return std::clamp(acc, 0.0, 1.0);
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double c = cdf(samples[i]);
    worst = std::max(worst, std::abs(c - static_cast<double>(i) / n));
    worst = std::max(worst, std::abs(static_cast<double>(i + 1) / n - c));
  }
  return worst;
}

double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) {  // series
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  // continued fraction for Q, then P = 1 - Q
  double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  const double q = std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
  return 1.0 - q;
}

double chi2_pvalue(double statistic, int dof) {
  return 1.0 - gamma_p(0.5 * dof, 0.5 * statistic);
}

}  // namespace changraph
