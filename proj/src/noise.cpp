#include "changraph/noise.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace changraph {

namespace {

constexpr double kPi = 3.14159265358979323846;

}  // namespace

void NoiseModel::validate(const DiscreteGraphOperator& op, double trace_bound) const {
  for (int j = 1; j < modes(); ++j)
    if (std::abs(lambda_[j]) > std::abs(lambda_[j - 1]) + 1e-15)
      throw std::invalid_argument("noise model: |lambda_j| must be non-increasing");
  const double trace = lambda_.squaredNorm();
  if (trace > trace_bound)
    throw std::invalid_argument("noise model: sum lambda_j^2 exceeds the configured trace bound");
  const double defect = orthonormality_defect(op);
  if (defect > 1e-10)
    throw std::invalid_argument("noise model: modes are not orthonormal on the working grid (defect " +
                                std::to_string(defect) + ")");
}

double NoiseModel::orthonormality_defect(const DiscreteGraphOperator& op) const {
  const Eigen::MatrixXd gram =
      node_shapes_.transpose() * op.mass().asDiagonal() * node_shapes_;
  return (gram - Eigen::MatrixXd::Identity(modes(), modes())).cwiseAbs().maxCoeff();
}

double NoiseModel::eval(int j, int edge, double x) const {
  return eval_[static_cast<std::size_t>(j)](edge, x);
}

Eigen::VectorXd NoiseModel::profile(const std::vector<std::pair<int, double>>& points,
                                    const Eigen::VectorXd& dbeta) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(points.size()));
  for (std::size_t p = 0; p < points.size(); ++p) {
    double acc = 0.0;
    for (int j = 0; j < modes(); ++j)
      acc += lambda_[j] * eval_[static_cast<std::size_t>(j)](points[p].first, points[p].second) * dbeta[j];
    out[static_cast<Eigen::Index>(p)] = acc;
  }
  return out;
}

NoiseModel NoiseModel::cosine(const DiscreteGraphOperator& op, int modes,
                              const std::function<double(int)>& lambda, double trace_bound) {
  if (modes < 1) throw std::invalid_argument("noise model: need at least one mode");
  const GraphSkeleton& g = op.graph();
  const int ne = g.num_edges();
  const int n = op.size();

  // Raw basis: mode (m, e) is cos(m pi (x-a)/len) on edge e, zero elsewhere;
  // global order is m-major so constants come first.
  struct Raw {
    int edge;
    int m;
    double a;
    double len;
  };
  std::vector<Raw> raw;
  for (int m = 0; raw.size() < static_cast<std::size_t>(modes); ++m)
    for (int e = 0; e < ne && raw.size() < static_cast<std::size_t>(modes); ++e)
      raw.push_back({e, m, g.edge(e).a, g.edge(e).length()});

  Eigen::MatrixXd vectors(n, modes);
  for (int j = 0; j < modes; ++j) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    const Raw& r = raw[static_cast<std::size_t>(j)];
    for (int node = 0; node <= op.cells(r.edge); ++node) {
      const double x = op.x_of_node(r.edge, node);
      v[op.unknown_of_node(r.edge, node)] = std::cos(r.m * kPi * (x - r.a) / r.len);
    }
    vectors.col(j) = v;
  }

  // Modified Gram-Schmidt in the W inner product, run twice.
  Eigen::MatrixXd coeff = Eigen::MatrixXd::Identity(modes, modes);  // mode j = sum_k coeff(k,j) raw_k
  for (int pass = 0; pass < 2; ++pass) {
    for (int j = 0; j < modes; ++j) {
      for (int k = 0; k < j; ++k) {
        const double proj = op.dot_w(vectors.col(k), vectors.col(j));
        vectors.col(j) -= proj * vectors.col(k);
        coeff.col(j) -= proj * coeff.col(k);
      }
      const double nrm = op.norm_w(vectors.col(j));
      if (!(nrm > 1e-12))
        throw std::invalid_argument("noise model: cosine family degenerates at mode " + std::to_string(j));
      vectors.col(j) /= nrm;
      coeff.col(j) /= nrm;
    }
  }

  NoiseModel nm;
  nm.node_shapes_ = vectors;
  nm.lambda_.resize(modes);
  for (int j = 0; j < modes; ++j) nm.lambda_[j] = lambda(j + 1);
  for (int j = 0; j < modes; ++j) {
    Eigen::VectorXd c = coeff.col(j);
    nm.eval_.push_back([c, raw](int edge, double x) {
      double acc = 0.0;
      for (int k = 0; k < c.size(); ++k) {
        const Raw& r = raw[static_cast<std::size_t>(k)];
        if (r.edge != edge || c[k] == 0.0) continue;
        acc += c[k] * std::cos(r.m * kPi * (x - r.a) / r.len);
      }
      return acc;
    });
  }
  nm.validate(op, trace_bound);
  return nm;
}

NoiseModel NoiseModel::eigenmodes(const DiscreteGraphOperator& op, const Spectrum& spec, int modes,
                                  const std::function<double(int)>& lambda, double trace_bound) {
  if (modes < 1 || modes > spec.mu.size())
    throw std::invalid_argument("noise model: invalid eigenmode count");
  NoiseModel nm;
  nm.node_shapes_ = spec.vectors.leftCols(modes);
  nm.lambda_.resize(modes);
  for (int j = 0; j < modes; ++j) nm.lambda_[j] = lambda(j + 1);
  for (int j = 0; j < modes; ++j) {
    // Self-contained per-edge node tables, linearly interpolated.
    std::vector<Eigen::VectorXd> vals;
    std::vector<double> as, hs;
    for (int e = 0; e < op.graph().num_edges(); ++e) {
      Eigen::VectorXd v(op.cells(e) + 1);
      for (int node = 0; node <= op.cells(e); ++node)
        v[node] = nm.node_shapes_(op.unknown_of_node(e, node), j);
      vals.push_back(std::move(v));
      as.push_back(op.graph().edge(e).a);
      hs.push_back(op.dx(e));
    }
    nm.eval_.push_back([vals, as, hs](int edge, double x) {
      const auto& v = vals[static_cast<std::size_t>(edge)];
      const double s = (x - as[static_cast<std::size_t>(edge)]) / hs[static_cast<std::size_t>(edge)];
      const int j0 = std::clamp(static_cast<int>(std::floor(s)), 0, static_cast<int>(v.size()) - 2);
      const double w = s - j0;
      return (1.0 - w) * v[j0] + w * v[j0 + 1];
    });
  }
  nm.validate(op, trace_bound);
  return nm;
}

NoiseModel NoiseModel::single_eigenmode(const DiscreteGraphOperator& op, const Spectrum& spec,
                                        int index, double lambda1) {
  if (index < 0 || index >= spec.mu.size())
    throw std::invalid_argument("noise model: eigenmode index out of range");
  NoiseModel nm;
  nm.node_shapes_ = spec.vectors.col(index);
  nm.lambda_ = Eigen::VectorXd::Constant(1, lambda1);
  std::vector<Eigen::VectorXd> vals;
  std::vector<double> as, hs;
  for (int e = 0; e < op.graph().num_edges(); ++e) {
    Eigen::VectorXd v(op.cells(e) + 1);
    for (int node = 0; node <= op.cells(e); ++node)
      v[node] = nm.node_shapes_(op.unknown_of_node(e, node), 0);
    vals.push_back(std::move(v));
    as.push_back(op.graph().edge(e).a);
    hs.push_back(op.dx(e));
  }
  nm.eval_.push_back([vals, as, hs](int edge, double x) {
    const auto& v = vals[static_cast<std::size_t>(edge)];
    const double s = (x - as[static_cast<std::size_t>(edge)]) / hs[static_cast<std::size_t>(edge)];
    const int j0 = std::clamp(static_cast<int>(std::floor(s)), 0, static_cast<int>(v.size()) - 2);
    const double w = s - j0;
    return (1.0 - w) * v[j0] + w * v[j0 + 1];
  });
  nm.validate(op, 1e12);
  return nm;
}

NoiseModel NoiseModel::constant_mode(const DiscreteGraphOperator& op, double lambda1) {
  NoiseModel nm;
  const double nu_total = op.mass().sum();  // discrete nu(Gamma)
  const double value = 1.0 / std::sqrt(nu_total);
  nm.node_shapes_ = Eigen::MatrixXd::Constant(op.size(), 1, value);
  nm.lambda_ = Eigen::VectorXd::Constant(1, lambda1);
  nm.eval_.push_back([value](int, double) { return value; });
  nm.validate(op, 1e12);
  return nm;
}

NoiseModel NoiseModel::explicit_modes(const DiscreteGraphOperator& op,
                                      std::vector<std::vector<HFunction>> per_edge_shapes,
                                      std::vector<double> lambdas, double trace_bound) {
  const int modes = static_cast<int>(lambdas.size());
  if (modes < 1 || per_edge_shapes.size() != lambdas.size())
    throw std::invalid_argument("noise model: malformed explicit mode list");
  NoiseModel nm;
  nm.lambda_ = Eigen::Map<Eigen::VectorXd>(lambdas.data(), modes);
  nm.node_shapes_.resize(op.size(), modes);
  for (int j = 0; j < modes; ++j) {
    auto shapes = per_edge_shapes[static_cast<std::size_t>(j)];
    if (static_cast<int>(shapes.size()) != op.graph().num_edges())
      throw std::invalid_argument("noise model: one shape per edge required");
    for (int e = 0; e < op.graph().num_edges(); ++e)
      for (int node = 0; node <= op.cells(e); ++node)
        nm.node_shapes_(op.unknown_of_node(e, node), j) =
            shapes[static_cast<std::size_t>(e)](op.x_of_node(e, node));
    nm.eval_.push_back(
        [shapes](int edge, double x) { return shapes[static_cast<std::size_t>(edge)](x); });
  }
  nm.validate(op, trace_bound);
  return nm;
}

BrownianLog BrownianLog::generate(int modes, int steps, double dt, std::uint64_t seed,
                                  std::uint64_t stream) {
  BrownianLog log;
  log.dt = dt;
  log.steps.reserve(static_cast<std::size_t>(steps));
  Philox rng(seed, stream);
  const double sq = std::sqrt(dt);
  for (int n = 0; n < steps; ++n) {
    Eigen::VectorXd d(modes);
    for (int j = 0; j < modes; ++j) d[j] = sq * rng.next_normal();
    log.steps.push_back(std::move(d));
  }
  return log;
}

}  // namespace changraph
