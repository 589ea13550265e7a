#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "changraph/geometry.hpp"
#include "changraph/graph.hpp"

namespace changraph {

/// One gate assertion of an experiment: `value cmp bound`.
struct CheckLine {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  std::string cmp = "<=";  // "<=", ">=", or "bool" (value 1 passes)
  bool pass = false;
  std::string note;
};

struct KindReport {
  std::string kind;
  std::vector<CheckLine> checks;
  std::vector<std::pair<std::string, std::string>> tables;  // (file name, CSV text)
  nlohmann::json resolved_params;                           // params with defaults filled

  bool pass() const;
};

/// Dispatches one experiment kind on a built domain. Kinds:
/// operator-selfchecks, semigroup-convergence, spde-convergence,
/// frozen-slow, local-time, equilibration.
KindReport run_kind(const std::string& kind, std::shared_ptr<const StripComplex> sc,
                    std::shared_ptr<const GraphSkeleton> g, const nlohmann::json& params,
                    std::uint64_t seed);

struct ExperimentConfig {
  std::string kind;
  std::string domain_file;
  nlohmann::json params;
  std::uint64_t seed = 0;
  std::string output_dir = ".";

  static ExperimentConfig load(const std::string& path);
  static ExperimentConfig parse(const nlohmann::json& j, const std::string& base_dir);
};

/// Runs the configured experiment, writes CSV tables plus metadata.json into
/// the output directory, and returns the report. Outputs are byte-identical
/// for identical (config, seed).
KindReport run_experiment(const ExperimentConfig& cfg);

/// Parses and semantically validates a config without running it; throws
/// with a precise message on failure.
void validate_experiment_config(const std::string& path);

// Shared catalogs (documented in the README).
std::function<double(const Vec2&)> parse_observable(const std::string& name);
std::function<double(double)> parse_reaction(const nlohmann::json& spec);
std::function<double(double, double)> parse_field(const nlohmann::json& spec,
                                                  std::shared_ptr<const StripComplex> sc);

/// Exact cross-section average of a channel field, by 16-point Gauss
/// quadrature on the true sections.
std::function<double(int, double)> exact_wedge_fn(std::shared_ptr<const StripComplex> sc,
                                                  std::function<double(double, double)> u);

std::string format_csv_number(double v);

}  // namespace changraph
