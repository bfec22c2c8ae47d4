#pragma once

// Corpus-to-components workflow: variances (cached), screening down to a
// dense working set, then k rounds of lambda search with deflation by
// support removal.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparsepca/bca_solver.hpp"
#include "sparsepca/corpus.hpp"
#include "sparsepca/screening.hpp"

namespace sparsepca {

struct PipelineOptions {
  std::size_t components = 5;
  std::size_t cardinality = 5;
  SolverConfig solver;
  SearchOptions search;
  std::size_t threads = 1;
  /// Largest number of features whose covariance is materialized.
  std::uint64_t working_set = 1000;
  /// Stats and triple caches live here when set.
  std::optional<std::filesystem::path> cache_dir;
  std::optional<std::filesystem::path> vocab;
};

struct ReportComponent {
  std::vector<FeatureId> support;
  std::vector<std::string> tokens;
  std::vector<double> weights;
  double explained_variance = 0.0;
  double lambda = 0.0;
  double phi = 0.0;
  int sweeps = 0;
  double wall_seconds = 0.0;
  bool within_slack = false;
  bool degenerate = false;
  /// Features left after screening at this component's lambda.
  std::uint64_t reduced_n = 0;

  bool operator==(const ReportComponent&) const = default;
};

struct ScreeningRound {
  std::uint64_t original_n = 0;
  std::uint64_t reduced_n = 0;

  bool operator==(const ScreeningRound&) const = default;
};

struct PipelineReport {
  std::uint64_t num_docs = 0;
  std::uint64_t num_words = 0;
  /// Dense working set and the lambda below which screening is no longer exact.
  std::uint64_t working_set = 0;
  double lambda_floor = 0.0;
  std::vector<ReportComponent> components;
  std::vector<ScreeningRound> screening;
  std::vector<std::string> warnings;

  bool operator==(const PipelineReport&) const = default;
};

void to_json(nlohmann::json& j, const ReportComponent& c);
void from_json(const nlohmann::json& j, ReportComponent& c);
void to_json(nlohmann::json& j, const PipelineReport& r);
void from_json(const nlohmann::json& j, PipelineReport& r);

/// Loads the stats from `cache_dir/stats-<hash>.txt` when present and valid,
/// otherwise computes them and writes the cache.
FeatureStats load_or_compute_stats(const BagOfWordsCorpus& corpus, const std::optional<std::filesystem::path>& cache_dir,
                                   std::size_t threads, bool* from_cache = nullptr);

/// Runs the whole workflow. A dictionary exhausted before `components`
/// rounds yields a partial report with a warning.
PipelineReport run_components(const std::filesystem::path& docword, const PipelineOptions& options);

/// Same rounds on an in-memory covariance; tokens are the ids in decimal.
PipelineReport run_components(const CovarianceMatrix& sigma, const PipelineOptions& options,
                              const Vocabulary* vocab = nullptr);

/// Aligned table: one line per component with lambda, sweeps, cardinality and tokens.
void write_report_table(const PipelineReport& report, std::ostream& os);

/// Lines "rank,feature_id,variance" in ranking order.
void write_variance_csv(const FeatureStats& stats, std::ostream& os);

std::string hex64(std::uint64_t value);

}  // namespace sparsepca
