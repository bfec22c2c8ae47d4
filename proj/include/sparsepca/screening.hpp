#pragma once

// Per-feature variances over a corpus and the safe elimination rule: a
// feature whose variance is at most lambda cannot be part of an optimal
// sparse principal component, so it is dropped before solving.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "sparsepca/corpus.hpp"
#include "sparsepca/types.hpp"

namespace sparsepca {

/// Optional per-feature count transform; identity when empty.
using CountTransform = std::function<double(FeatureId, std::uint32_t)>;

struct FeatureStats {
  std::uint64_t num_features = 0;
  std::uint64_t num_docs = 0;
  /// Indexed by feature id - 1.
  std::vector<double> mean;
  std::vector<double> variance;
  /// Feature ids by descending variance, ties by ascending id.
  std::vector<FeatureId> sorted_order;

  double variance_of(FeatureId id) const { return variance.at(id - 1); }
  double mean_of(FeatureId id) const { return mean.at(id - 1); }

  /// Builds the stats and the ranking. Throws FormatError on size mismatch or
  /// negative variance.
  static FeatureStats from_moments(std::uint64_t num_docs, std::vector<double> mean,
                                   std::vector<double> variance);
};

/// Streaming first and second moments of every feature.
///
/// The raw-count path sums integers, so partial accumulators over any
/// partition of the corpus merge to bit-identical results.
class MomentAccumulator {
 public:
  MomentAccumulator(std::uint64_t num_features, CountTransform transform = {});

  void operator()(DocId doc, std::span<const DocumentEntry> entries);
  void merge(const MomentAccumulator& other);

  /// Moments over `num_docs` documents; absent documents count as zeros.
  FeatureStats finish(std::uint64_t num_docs) const;

 private:
  CountTransform transform_;
  std::vector<std::int64_t> sum_;
  std::vector<std::int64_t> sum_sq_;
  std::vector<double> tsum_;
  std::vector<double> tsum_sq_;
};

struct VarianceOptions {
  std::size_t threads = 1;
  CountTransform transform;
};

/// One streaming pass computing (1/m)-normalized means and variances.
FeatureStats compute_variances(const BagOfWordsCorpus& corpus, const VarianceOptions& options = {});

struct ScreeningResult {
  double lambda = 0.0;
  /// Surviving ids in descending-variance order.
  std::vector<FeatureId> kept;
  std::uint64_t original_n = 0;
  std::uint64_t reduced_n = 0;
};

/// Keeps the features with variance strictly above `lambda`. Throws
/// InfeasibleError when nothing survives.
ScreeningResult screen(const FeatureStats& stats, double lambda);

/// The (target_n + 1)-th largest variance, or 0 when target_n equals n.
double lambda_for_size(const FeatureStats& stats, std::uint64_t target_n);

/// Stats cache. Text layout, one record per line:
///
///     SPCASTAT 1
///     n <num_features>
///     m <num_docs>
///     hash <16 lowercase hex digits>
///     # id mean variance
///     <id> <mean> <variance>        (n lines, ids 1..n, %.17g)
void write_stats_cache(const FeatureStats& stats, std::uint64_t corpus_hash, const std::filesystem::path& out);

/// Reads a cache file; returns nullopt when its hash differs from
/// `expected_hash`. Throws FormatError on a malformed file.
std::optional<FeatureStats> read_stats_cache(const std::filesystem::path& path,
                                             std::optional<std::uint64_t> expected_hash = std::nullopt);

}  // namespace sparsepca
