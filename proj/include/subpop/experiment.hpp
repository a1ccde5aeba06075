#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "subpop/proportions.hpp"
#include "subpop/synthetic.hpp"

namespace subpop {

/// Replicated benchmark run: draw (or partition) data, fit the nuisances,
/// estimate the cell proportions, score the target rows with the adapted
/// and source-only predictors, and tabulate per-group metrics.
struct ExperimentConfig {
  enum class Source { synthetic, pool };
  Source source = Source::synthetic;

  SyntheticSpec synth;     ///< seed field is ignored; reseeded per replication
  std::string pool_path;   ///< labeled pool CSV for Source::pool
  PartitionSpec partition; ///< seed field is ignored; reseeded per replication

  double lambda = 1e-2;
  double threshold = 0.5;

  std::string beta_method = "kl";        ///< kl | moment | oracle | user
  double user_beta10 = -1.0;             ///< required for beta_method "user"
  std::string beta01_method = "anchor";  ///< anchor | oracle | user
  double user_beta01 = -1.0;             ///< required for beta01_method "user"
  double anchor_quantile = 0.01;
  int moment_coordinate = -1;  ///< -1: principal axis

  int replications = 1;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// One line of metrics.csv. Failed replications carry tag "none", empty
/// metric fields and failed = 1.
struct MetricsRow {
  int rep = 0;
  std::string tag;  ///< eta | eta1 | eta0 | xi | xi1 | xi0 | none
  long n_eval = 0;
  double accuracy = 0.0;
  double f1 = 0.0;
  double clamp_rate = 0.0;
  double beta10_hat = 0.0;
  double beta00_hat = 0.0;
  double beta01_hat = 0.0;
  double beta11_hat = 0.0;
  bool failed = false;
  std::string error;  ///< failure reason; not written to the CSV
};

struct ExperimentResult {
  std::vector<MetricsRow> rows;  ///< rep-major, tags in fixed order
  int n_replications = 0;
  int n_failed = 0;
};

/// Runs every replication (seeds derived from cfg.seed by replication
/// index, so results do not depend on thread count). Throws
/// EstimationError when more than 20% of replications fail.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Header: rep,tag,n_eval,accuracy,f1,clamp_rate,beta10_hat,beta00_hat,
/// beta01_hat,beta11_hat,failed. Floats at 17 significant digits; the file
/// is byte-identical across runs with the same config.
void write_metrics_csv(const std::vector<MetricsRow>& rows,
                       const std::string& path);

/// Per-tag {mean, sd, median, q1, q3} for accuracy, f1 and clamp_rate over
/// the successful replications, plus replication counts.
nlohmann::json summarize(const ExperimentResult& result);

/// Flat `key = value` config file; '#' starts a comment. Unknown keys are
/// rejected. Flags applied later override file values.
ExperimentConfig parse_config_file(const std::string& path);

/// Applies one key/value pair onto a config (shared by the file parser and
/// CLI overrides). Throws ConfigError on unknown keys or bad values.
void apply_config_kv(ExperimentConfig& cfg, const std::string& key,
                     const std::string& value);

/// Validates cross-field constraints before a run.
void check_config(const ExperimentConfig& cfg);

/// Four semicolon-separated mean vectors in cell order (y0a0; y0a1; y1a0;
/// y1a1), components whitespace-separated.
void parse_means(const std::string& text, SyntheticSpec& spec);

}  // namespace subpop
