#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ectn/data.hpp"
#include "ectn/eval.hpp"
#include "ectn/solver.hpp"

namespace ectn::cli {

/// Exit codes of the ectn tool.
enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericalFailure = 3 };

/// Either a QoS log on disk or a synthetic spec.
struct DataSource {
  std::optional<std::filesystem::path> path;
  std::optional<Dims> dims_override;
  SyntheticSpec synthetic;
};

/// Everything needed to re-run an experiment.
struct ExperimentManifest {
  DataSource source;
  Ratios ratios{0.01, 0.09, 0.90};
  std::size_t repeats = 1;
  std::uint64_t split_seed = 1;
  TrainConfig train;
  std::filesystem::path out_dir = "ectn_run";
};

std::string manifest_to_json(const ExperimentManifest& m);
ExperimentManifest manifest_from_json(const std::string& text);

ObservedTensor load_tensor(const DataSource& source, std::ostream& log);

/// Per repeat: trains on Ω, writes run_NN/{model.bin, split.txt, loss.csv,
/// timing.csv, metrics.csv} with test (Φ) metrics; then aggregate.csv and
/// manifest.json in out_dir. Returns the aggregated test metrics.
Metrics cmd_train(const ExperimentManifest& manifest, std::ostream& log);

struct GridRow {
  double lambda = 0.0;
  Metrics validation;
};

struct GridResult {
  double best_lambda = 0.0;
  std::vector<GridRow> rows;
};

/// Parses "start:stop:step" or a comma-separated list.
std::vector<double> parse_grid(const std::string& spec);

/// One model per λ on Ω of the first split; picks the smallest validation
/// RMSE, ties going to the smaller λ. Writes grid.csv into out_dir.
GridResult cmd_grid_lambda(const ExperimentManifest& manifest, std::span<const double> grid, std::ostream& log);

/// Test-set metrics of a saved model against a data source and split manifest.
Metrics cmd_eval(const std::filesystem::path& model_path, const DataSource& source,
                 const std::filesystem::path& split_path, const std::optional<std::filesystem::path>& out_path,
                 std::ostream& log);

struct ScalingRow {
  std::string kind;  // "entries" or "rank"
  double factor = 1.0;
  std::size_t entries = 0;
  Index rank = 0;
  Index expansion = 0;
  double seconds_per_epoch = 0.0;
};

/// Median per-epoch wall time of the full training epoch (update + objective)
/// over `epochs` timed epochs, after one warm-up epoch.
double measure_epoch_seconds(const ObservedTensor& t, std::span<const std::size_t> positions,
                             const TrainConfig& cfg, Index epochs);

/// Baseline row, then one row per entry-count factor (density scaled) and one
/// per R·M factor (expansion scaled) at the baseline density.
std::vector<ScalingRow> cmd_bench_scaling(const SyntheticSpec& base, std::span<const double> entry_factors,
                                          std::span<const Index> rm_factors, const TrainConfig& cfg, Index epochs,
                                          std::ostream& log);
void write_scaling_csv(std::span<const ScalingRow> rows, std::ostream& out);

/// Writes the synthetic tensor as a QoS log and, optionally, its truth model.
void cmd_gen_synth(const SyntheticSpec& spec, const std::filesystem::path& out,
                   const std::optional<std::filesystem::path>& truth_out, std::ostream& log);

/// Full command-line entry point.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace ectn::cli
