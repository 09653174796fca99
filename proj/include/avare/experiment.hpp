#pragma once

// JSON-configured experiments: samplers x seeds, aggregated traces and a
// summary document.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "avare/data_io.hpp"
#include "avare/drivers.hpp"
#include "avare/metrics.hpp"
#include "avare/problems.hpp"

namespace avare {

// Carries one message per offending field.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const noexcept { return errors_; }

 private:
  std::vector<std::string> errors_;
};

struct DatasetSpec {
  std::string type = "synthetic";  // synthetic | libsvm | csv
  std::size_t n = 100;
  std::size_t d = 10;
  std::uint64_t seed = 0;
  std::filesystem::path path;
  std::size_t max_dim = 0;
  bool header = false;
  int label_column = 0;
  Normalization normalize = Normalization::none;
};

struct EpsilonSpec {
  std::string mode = "auto";  // auto | single | minibatch | constant_step
  std::optional<double> c;
  std::optional<double> delta;
  std::optional<double> p_min;
};

struct StepSpec {
  std::string kind = "experiment";  // experiment | power_decay | constant
  double e = 1.0;
  double f = 1.0;
  double beta = 1.0;
  double alpha = 0.01;
};

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetSpec dataset;
  ModelKind model = ModelKind::logistic;
  double mu = 1.0;
  Algorithm algorithm = Algorithm::sgd;
  std::vector<SamplerKind> samplers{SamplerKind::avare, SamplerKind::uniform};
  std::optional<EstimatorKind> estimator;
  std::size_t m = 1;
  std::optional<std::uint64_t> iterations;
  double epochs = 50.0;
  EpsilonSpec epsilon;
  StepSpec step;
  double h_init = 0.0;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  MetricsMode metrics = MetricsMode::full;
  std::optional<std::filesystem::path> output;
  std::size_t parallel = 1;
};

/// Parses and checks a config document. Relative dataset paths are resolved
/// against base_dir. Throws ConfigError listing every invalid field.
ExperimentConfig parse_config(const nlohmann::json& doc,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& file);

// Fully resolved config as JSON; output and parallel are left out since they
// do not influence results.
nlohmann::json canonical_json(const ExperimentConfig& config);
std::uint64_t config_digest(const ExperimentConfig& config);

Dataset<double> load_dataset(const DatasetSpec& spec);
FiniteSumProblem<double> build_problem(const ExperimentConfig& config);

std::string to_string(SamplerKind kind);
std::string to_string(EstimatorKind kind);

EstimatorKind resolved_estimator(const ExperimentConfig& config);
std::uint64_t resolved_iterations(const ExperimentConfig& config, std::size_t n);

/// Run settings for one (sampler, seed) pair.
RunConfig make_run_config(const ExperimentConfig& config, const FiniteSumProblem<double>& prob,
                          SamplerKind sampler, std::uint64_t seed, std::optional<double> f_star);

/// Builds every run config and checks it against the problem. Throws
/// ConfigError.
void check_runnable(const ExperimentConfig& config, const FiniteSumProblem<double>& prob);

struct SeedOutcome {
  std::uint64_t seed = 0;
  // ok | diverged | error
  std::string status = "ok";
  std::string message;
  RunRecord record;
};

struct SamplerOutcome {
  SamplerKind kind = SamplerKind::avare;
  std::vector<SeedOutcome> seeds;
  // Over the seeds with status ok; absent if none succeeded.
  std::optional<AggregateTrace> aggregate;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::uint64_t digest = 0;
  std::size_t n = 0;
  std::size_t dim = 0;
  std::uint64_t iterations = 0;
  std::optional<double> f_star;
  std::optional<Table1Ratios> ratios;
  std::vector<SamplerOutcome> samplers;
};

/// Runs every (sampler, seed) pair, config.parallel at a time. A failing run
/// is recorded in its SeedOutcome and does not affect the others.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// summary.json, aggregate_<sampler>.csv and trace_<sampler>_seed<k>.csv.
void write_results(const ExperimentResult& result, const std::filesystem::path& dir);
nlohmann::json summary_json(const ExperimentResult& result);

}  // namespace avare
