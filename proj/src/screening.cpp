#include "sparsepca/screening.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "sparsepca/errors.hpp"

namespace sparsepca {

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

FeatureStats FeatureStats::from_moments(std::uint64_t num_docs, std::vector<double> mean,
                                        std::vector<double> variance) {
  if (mean.size() != variance.size()) throw FormatError("mean and variance sizes differ");
  FeatureStats stats;
  stats.num_features = mean.size();
  stats.num_docs = num_docs;
  for (std::size_t i = 0; i < variance.size(); ++i) {
    if (!(variance[i] >= 0.0))
      throw FormatError("negative or NaN variance for feature " + std::to_string(i + 1));
  }
  stats.mean = std::move(mean);
  stats.variance = std::move(variance);
  stats.sorted_order.resize(stats.num_features);
  std::iota(stats.sorted_order.begin(), stats.sorted_order.end(), FeatureId{1});
  const auto& var = stats.variance;
  std::stable_sort(stats.sorted_order.begin(), stats.sorted_order.end(),
                   [&](FeatureId a, FeatureId b) { return var[a - 1] > var[b - 1]; });
  return stats;
}

MomentAccumulator::MomentAccumulator(std::uint64_t num_features, CountTransform transform)
    : transform_(std::move(transform)) {
  if (transform_) {
    tsum_.assign(num_features, 0.0);
    tsum_sq_.assign(num_features, 0.0);
  } else {
    sum_.assign(num_features, 0);
    sum_sq_.assign(num_features, 0);
  }
}

void MomentAccumulator::operator()(DocId, std::span<const DocumentEntry> entries) {
  if (transform_) {
    for (const auto& e : entries) {
      const double v = transform_(e.word, e.count);
      tsum_[e.word - 1] += v;
      tsum_sq_[e.word - 1] += v * v;
    }
    return;
  }
  for (const auto& e : entries) {
    const auto c = static_cast<std::int64_t>(e.count);
    sum_[e.word - 1] += c;
    sum_sq_[e.word - 1] += c * c;
  }
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  for (std::size_t i = 0; i < sum_.size(); ++i) {
    sum_[i] += other.sum_[i];
    sum_sq_[i] += other.sum_sq_[i];
  }
  for (std::size_t i = 0; i < tsum_.size(); ++i) {
    tsum_[i] += other.tsum_[i];
    tsum_sq_[i] += other.tsum_sq_[i];
  }
}

FeatureStats MomentAccumulator::finish(std::uint64_t num_docs) const {
  if (num_docs == 0) throw FormatError("corpus has no documents");
  const std::size_t n = transform_ ? tsum_.size() : sum_.size();
  std::vector<double> mean(n), variance(n);
  const double m = static_cast<double>(num_docs);
  for (std::size_t i = 0; i < n; ++i) {
    if (transform_) {
      mean[i] = tsum_[i] / m;
      variance[i] = std::max(0.0, tsum_sq_[i] / m - mean[i] * mean[i]);
    } else {
      // (m * S2 - S1^2) / m^2 is exact in 128-bit integers before the single
      // rounding to double.
      const __int128 s1 = sum_[i];
      const __int128 num = static_cast<__int128>(num_docs) * sum_sq_[i] - s1 * s1;
      mean[i] = static_cast<double>(sum_[i]) / m;
      variance[i] = static_cast<double>(num) / (m * m);
    }
  }
  return FeatureStats::from_moments(num_docs, std::move(mean), std::move(variance));
}

FeatureStats compute_variances(const BagOfWordsCorpus& corpus, const VarianceOptions& options) {
  auto acc = reduce_documents<MomentAccumulator>(
      corpus, options.threads, [&] { return MomentAccumulator(corpus.num_words(), options.transform); });
  return acc.finish(corpus.num_docs());
}

ScreeningResult screen(const FeatureStats& stats, double lambda) {
  if (!(lambda >= 0.0)) throw InfeasibleError("lambda must be nonnegative");
  ScreeningResult result;
  result.lambda = lambda;
  result.original_n = stats.num_features;
  for (FeatureId id : stats.sorted_order) {
    if (stats.variance_of(id) <= lambda) break;
    result.kept.push_back(id);
  }
  result.reduced_n = result.kept.size();
  if (result.kept.empty()) {
    const double max_var = stats.sorted_order.empty() ? 0.0 : stats.variance_of(stats.sorted_order.front());
    throw InfeasibleError("lambda eliminates all features (lambda = " + format_double(lambda) +
                          ", max variance = " + format_double(max_var) + ")");
  }
  return result;
}

double lambda_for_size(const FeatureStats& stats, std::uint64_t target_n) {
  if (target_n < 1 || target_n > stats.num_features)
    throw InfeasibleError("target size " + std::to_string(target_n) + " outside [1, " +
                          std::to_string(stats.num_features) + "]");
  if (target_n == stats.num_features) return 0.0;
  return stats.variance_of(stats.sorted_order[target_n]);
}

void write_stats_cache(const FeatureStats& stats, std::uint64_t corpus_hash, const std::filesystem::path& out) {
  const auto tmp = std::filesystem::path(out.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw FormatError(tmp.string() + ": cannot write stats cache");
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016" PRIx64, corpus_hash);
    os << "SPCASTAT 1\n"
       << "n " << stats.num_features << "\n"
       << "m " << stats.num_docs << "\n"
       << "hash " << hash << "\n"
       << "# id mean variance\n";
    for (std::size_t i = 0; i < stats.num_features; ++i)
      os << (i + 1) << ' ' << format_double(stats.mean[i]) << ' ' << format_double(stats.variance[i]) << '\n';
    if (!os) throw FormatError(tmp.string() + ": write failed");
  }
  std::filesystem::rename(tmp, out);
}

std::optional<FeatureStats> read_stats_cache(const std::filesystem::path& path,
                                             std::optional<std::uint64_t> expected_hash) {
  std::ifstream is(path);
  if (!is) throw FormatError(path.string() + ": cannot open stats cache");
  std::size_t line_no = 0;
  std::string line;
  auto fail = [&](const std::string& what) -> FormatError {
    return FormatError(path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  auto next_line = [&]() -> std::istringstream {
    if (!std::getline(is, line)) throw fail("unexpected end of file");
    ++line_no;
    return std::istringstream(line);
  };

  std::string key;
  int version = 0;
  if (!(next_line() >> key >> version) || key != "SPCASTAT") throw fail("bad magic");
  if (version != 1) throw fail("unsupported version " + std::to_string(version));
  std::uint64_t n = 0, m = 0;
  if (!(next_line() >> key >> n) || key != "n") throw fail("expected 'n <count>'");
  if (!(next_line() >> key >> m) || key != "m") throw fail("expected 'm <count>'");
  std::string hash_hex;
  if (!(next_line() >> key >> hash_hex) || key != "hash" || hash_hex.size() != 16) throw fail("expected 'hash <hex>'");
  const std::uint64_t hash = std::stoull(hash_hex, nullptr, 16);
  if (expected_hash && *expected_hash != hash) return std::nullopt;
  next_line();
  if (line.rfind("#", 0) != 0) throw fail("expected column comment");

  std::vector<double> mean(n), variance(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint64_t id = 0;
    if (!(next_line() >> id >> mean[i] >> variance[i])) throw fail("expected '<id> <mean> <variance>'");
    if (id != i + 1) throw fail("ids must be 1..n in order");
  }
  if (std::getline(is, line) && !line.empty()) {
    ++line_no;
    throw fail("trailing data");
  }
  return FeatureStats::from_moments(m, std::move(mean), std::move(variance));
}

}  // namespace sparsepca
