#include "sparsepca/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <unordered_set>

#include "sparsepca/errors.hpp"

namespace sparsepca {

CovarianceMatrix::CovarianceMatrix(Eigen::MatrixXd values, std::vector<FeatureId> feature_ids,
                                   std::uint64_t sample_count)
    : values_(std::move(values)), feature_ids_(std::move(feature_ids)), sample_count_(sample_count) {
  if (values_.rows() != values_.cols()) throw FormatError("covariance matrix must be square");
  const Index n = values_.rows();
  // Exact symmetry: average the two triangles.
  for (Index j = 0; j < n; ++j)
    for (Index i = j + 1; i < n; ++i) {
      const double v = 0.5 * (values_(i, j) + values_(j, i));
      values_(i, j) = v;
      values_(j, i) = v;
    }
  for (Index i = 0; i < n; ++i)
    if (!(values_(i, i) >= 0.0))
      throw FormatError("covariance diagonal entry " + std::to_string(i + 1) + " is negative");

  if (feature_ids_.empty()) {
    feature_ids_.resize(static_cast<std::size_t>(n));
    std::iota(feature_ids_.begin(), feature_ids_.end(), FeatureId{1});
  }
  if (static_cast<Index>(feature_ids_.size()) != n) throw FormatError("feature id list length differs from order");
  std::unordered_set<FeatureId> seen(feature_ids_.begin(), feature_ids_.end());
  if (seen.size() != feature_ids_.size()) throw FormatError("duplicate feature ids");
}

CovarianceMatrix CovarianceMatrix::select(std::span<const Index> positions) const {
  const Index k = static_cast<Index>(positions.size());
  Eigen::MatrixXd sub(k, k);
  std::vector<FeatureId> ids(positions.size());
  for (Index b = 0; b < k; ++b) {
    ids[b] = feature_ids_.at(static_cast<std::size_t>(positions[b]));
    for (Index a = 0; a < k; ++a) sub(a, b) = values_(positions[a], positions[b]);
  }
  return CovarianceMatrix(std::move(sub), std::move(ids), sample_count_);
}

Index CovarianceMatrix::position_of(FeatureId id) const {
  const auto it = std::find(feature_ids_.begin(), feature_ids_.end(), id);
  return it == feature_ids_.end() ? Index{-1} : static_cast<Index>(it - feature_ids_.begin());
}

CovarianceMatrix CovarianceMatrix::restrict_to(std::span<const FeatureId> ids) const {
  std::unordered_map<FeatureId, Index> where;
  for (std::size_t k = 0; k < feature_ids_.size(); ++k) where.emplace(feature_ids_[k], static_cast<Index>(k));
  std::vector<Index> positions;
  positions.reserve(ids.size());
  for (FeatureId id : ids) {
    const auto it = where.find(id);
    if (it == where.end()) throw RangeError("feature id " + std::to_string(id) + " not in covariance");
    positions.push_back(it->second);
  }
  return select(positions);
}

CovarianceMatrix CovarianceMatrix::without(std::span<const FeatureId> ids) const {
  const std::unordered_set<FeatureId> drop(ids.begin(), ids.end());
  std::vector<Index> positions;
  for (std::size_t k = 0; k < feature_ids_.size(); ++k)
    if (!drop.contains(feature_ids_[k])) positions.push_back(static_cast<Index>(k));
  return select(positions);
}

GramAccumulator::GramAccumulator(std::span<const FeatureId> kept, std::uint64_t num_words)
    : kept_(kept.begin(), kept.end()), local_(num_words, -1) {
  for (std::size_t k = 0; k < kept_.size(); ++k) {
    const FeatureId id = kept_[k];
    if (id < 1 || id > num_words)
      throw RangeError("feature id " + std::to_string(id) + " not in corpus (W = " + std::to_string(num_words) + ")");
    if (local_[id - 1] >= 0) throw FormatError("duplicate feature id " + std::to_string(id) + " in kept list");
    local_[id - 1] = static_cast<std::int32_t>(k);
  }
  const auto n = static_cast<Index>(kept_.size());
  cross_.setZero(n, n);
  sum_.assign(kept_.size(), 0);
}

void GramAccumulator::operator()(DocId, std::span<const DocumentEntry> entries) {
  scratch_.clear();
  for (const auto& e : entries) {
    const std::int32_t k = local_[e.word - 1];
    if (k >= 0) scratch_.emplace_back(k, static_cast<std::int64_t>(e.count));
  }
  for (const auto& [a, ca] : scratch_) {
    sum_[static_cast<std::size_t>(a)] += ca;
    for (const auto& [b, cb] : scratch_) {
      if (a <= b) cross_(a, b) += ca * cb;
    }
  }
}

void GramAccumulator::merge(const GramAccumulator& other) {
  cross_ += other.cross_;
  for (std::size_t k = 0; k < sum_.size(); ++k) sum_[k] += other.sum_[k];
}

CovarianceMatrix GramAccumulator::finish(std::uint64_t num_docs) const {
  if (num_docs == 0) throw FormatError("corpus has no documents");
  const auto n = static_cast<Index>(kept_.size());
  const double m2 = static_cast<double>(num_docs) * static_cast<double>(num_docs);
  Eigen::MatrixXd values(n, n);
  for (Index b = 0; b < n; ++b)
    for (Index a = 0; a <= b; ++a) {
      const __int128 num = static_cast<__int128>(num_docs) * cross_(a, b) -
                           static_cast<__int128>(sum_[a]) * sum_[b];
      values(a, b) = values(b, a) = static_cast<double>(num) / m2;
    }
  return CovarianceMatrix(std::move(values), kept_, num_docs);
}

CovarianceMatrix gram_accumulate(const BagOfWordsCorpus& corpus, std::span<const FeatureId> kept,
                                 const FeatureStats& stats, const GramOptions& options) {
  if (kept.empty()) throw InfeasibleError("empty reduced problem");
  if (kept.size() > options.max_order)
    throw InfeasibleError("reduced problem of order " + std::to_string(kept.size()) +
                          " exceeds the dense cap of " + std::to_string(options.max_order));
  if (stats.num_docs != corpus.num_docs() || stats.num_features != corpus.num_words())
    throw FormatError("feature stats were computed over a different corpus");
  auto acc = reduce_documents<GramAccumulator>(corpus, options.threads,
                                               [&] { return GramAccumulator(kept, corpus.num_words()); });
  return acc.finish(corpus.num_docs());
}

SpikedModel spiked_model(const SpikedModelSpec& spec) {
  if (spec.n < 2) throw InfeasibleError("spiked model needs n >= 2");
  if (spec.m < 1) throw InfeasibleError("spiked model needs m >= 1");
  if (!(spec.support_fraction > 0.0 && spec.support_fraction <= 1.0))
    throw InfeasibleError("support fraction must lie in (0, 1]");
  const auto card = static_cast<Index>(std::llround(spec.support_fraction * static_cast<double>(spec.n)));
  if (card < 1) throw InfeasibleError("support_fraction * n rounds to an empty support");

  std::mt19937_64 rng(spec.noise_seed);
  std::vector<Index> positions(static_cast<std::size_t>(spec.n));
  std::iota(positions.begin(), positions.end(), Index{0});
  // Partial Fisher-Yates with explicit draws keeps the layout reproducible.
  for (Index k = 0; k < card; ++k) {
    std::uniform_int_distribution<Index> pick(k, spec.n - 1);
    std::swap(positions[static_cast<std::size_t>(k)], positions[static_cast<std::size_t>(pick(rng))]);
  }
  std::vector<Index> support(positions.begin(), positions.begin() + card);
  std::sort(support.begin(), support.end());

  Eigen::VectorXd u = Eigen::VectorXd::Zero(spec.n);
  const double magnitude = 1.0 / std::sqrt(static_cast<double>(card));
  std::bernoulli_distribution sign(0.5);
  for (Index i : support) u(i) = sign(rng) ? magnitude : -magnitude;

  Eigen::MatrixXd sigma = u * u.transpose();
  if (!spec.noise_free) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd v(spec.n, spec.m);
    for (Index j = 0; j < spec.m; ++j)
      for (Index i = 0; i < spec.n; ++i) v(i, j) = gauss(rng);
    sigma.noalias() += v * v.transpose() / static_cast<double>(spec.m);
  }
  return {CovarianceMatrix(std::move(sigma)), std::move(u), std::move(support)};
}

CovarianceMatrix gaussian_model(Index n, Index m, std::uint64_t seed) {
  if (n < 1 || m < 1) throw InfeasibleError("gaussian model needs n >= 1 and m >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd f(m, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) f(i, j) = gauss(rng);
  Eigen::MatrixXd sigma = f.transpose() * f;
  return CovarianceMatrix(std::move(sigma));
}

}  // namespace sparsepca
