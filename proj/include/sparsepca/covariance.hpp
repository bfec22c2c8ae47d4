#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sparsepca/corpus.hpp"
#include "sparsepca/screening.hpp"
#include "sparsepca/types.hpp"

namespace sparsepca {

/// Dense symmetric covariance over a reduced set of features.
///
/// Immutable after construction. `feature_ids()[k]` is the original
/// dictionary id of row/column k.
class CovarianceMatrix {
 public:
  CovarianceMatrix() = default;

  /// Symmetrizes `values`. Throws FormatError on non-square input, negative
  /// diagonal, or duplicate ids. Empty `feature_ids` means 1..n.
  explicit CovarianceMatrix(Eigen::MatrixXd values, std::vector<FeatureId> feature_ids = {},
                            std::uint64_t sample_count = 0);

  Index order() const { return values_.rows(); }
  const Eigen::MatrixXd& values() const { return values_; }
  const std::vector<FeatureId>& feature_ids() const { return feature_ids_; }
  std::uint64_t sample_count() const { return sample_count_; }

  double operator()(Index i, Index j) const { return values_(i, j); }
  Eigen::VectorXd diagonal() const { return values_.diagonal(); }

  /// Rows/columns at positions `positions`, in that order.
  CovarianceMatrix select(std::span<const Index> positions) const;
  /// Rows/columns of the given original ids, in that order.
  CovarianceMatrix restrict_to(std::span<const FeatureId> ids) const;
  /// Drops the given original ids (ids not present are ignored).
  CovarianceMatrix without(std::span<const FeatureId> ids) const;
  /// Position of an original id, or -1.
  Index position_of(FeatureId id) const;

 private:
  Eigen::MatrixXd values_;
  std::vector<FeatureId> feature_ids_;
  std::uint64_t sample_count_ = 0;
};

/// Accumulates the restricted Gram matrix and feature sums over documents.
///
/// Raw counts are summed as integers; the merge is exact and associative.
class GramAccumulator {
 public:
  GramAccumulator(std::span<const FeatureId> kept, std::uint64_t num_words);

  void operator()(DocId doc, std::span<const DocumentEntry> entries);
  void merge(const GramAccumulator& other);

  /// Centered (1/m) covariance over `num_docs` documents.
  CovarianceMatrix finish(std::uint64_t num_docs) const;

 private:
  std::vector<FeatureId> kept_;
  std::vector<std::int32_t> local_;  // word id - 1 -> position, -1 when dropped
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> cross_;  // upper triangle
  std::vector<std::int64_t> sum_;
  std::vector<std::pair<Index, std::int64_t>> scratch_;
};

struct GramOptions {
  std::size_t threads = 1;
  /// Largest reduced order that may be materialized densely.
  std::uint64_t max_order = 20000;
};

/// Centered (1/m) covariance of the kept features. The diagonal reproduces
/// `stats.variance` bit for bit. Throws InfeasibleError("empty reduced
/// problem") for an empty `kept`, RangeError for unknown ids.
CovarianceMatrix gram_accumulate(const BagOfWordsCorpus& corpus, std::span<const FeatureId> kept,
                                 const FeatureStats& stats, const GramOptions& options = {});

struct SpikedModelSpec {
  Index n = 0;
  Index m = 1;
  double support_fraction = 0.1;
  std::uint64_t noise_seed = 0;
  /// Drop the noise term (the m -> infinity limit).
  bool noise_free = false;
};

struct SpikedModel {
  CovarianceMatrix sigma;
  /// Planted unit vector u.
  Eigen::VectorXd spike;
  /// 0-based positions of the nonzeros of u, ascending.
  std::vector<Index> true_support;
};

/// Sigma = u u^T + V V^T / m with V_ij ~ N(0, 1), u unit norm with
/// equal-magnitude entries on round(support_fraction * n) random positions.
SpikedModel spiked_model(const SpikedModelSpec& spec);

/// Sigma = F^T F with F an m x n standard Gaussian matrix.
CovarianceMatrix gaussian_model(Index n, Index m, std::uint64_t seed);

template <typename Scalar>
struct EigenPair {
  Scalar value = 0;
  Vector<Scalar> vector;
};

namespace detail {

template <typename Derived>
EigenPair<typename Derived::Scalar> power_iterate(const Eigen::MatrixBase<Derived>& a,
                                                  Vector<typename Derived::Scalar> v,
                                                  typename Derived::Scalar tol, int max_iter) {
  using Scalar = typename Derived::Scalar;
  v.normalize();
  Vector<Scalar> av = a * v;
  Scalar theta = v.dot(av);
  for (int it = 0; it < max_iter; ++it) {
    if ((av - theta * v).norm() <= tol * std::abs(theta)) break;
    const Scalar norm = av.norm();
    if (norm == Scalar(0)) break;
    v = av / norm;
    av.noalias() = a * v;
    theta = v.dot(av);
  }
  return {theta, std::move(v)};
}

}  // namespace detail

/// Largest eigenpair of a symmetric PSD matrix by power iteration.
///
/// Starts from the all-ones vector and restarts from two further vectors
/// (the largest-diagonal coordinate and a fixed pseudo-random direction); the
/// largest Rayleigh quotient wins, earlier starts on ties. A zero matrix
/// yields (0, e_1).
template <typename Derived>
EigenPair<typename Derived::Scalar> leading_eigenvector(const Eigen::MatrixBase<Derived>& a,
                                                        typename Derived::Scalar tol = 1e-10,
                                                        int max_iter = 200000) {
  using Scalar = typename Derived::Scalar;
  const Index n = a.rows();
  if (n == 0) return {Scalar(0), Vector<Scalar>()};
  if (a.cwiseAbs().maxCoeff() == Scalar(0)) return {Scalar(0), Vector<Scalar>::Unit(n, 0)};

  std::vector<Vector<Scalar>> starts;
  starts.push_back(Vector<Scalar>::Ones(n));
  Index arg = 0;
  a.diagonal().maxCoeff(&arg);
  starts.push_back(Vector<Scalar>::Unit(n, arg));
  Vector<Scalar> r(n);
  std::uint64_t state = 0x9e3779b97f4a7c15ULL;
  for (Index i = 0; i < n; ++i) {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    r(i) = Scalar(static_cast<double>(state >> 11) * 0x1.0p-53 - 0.5);
  }
  starts.push_back(r);

  EigenPair<Scalar> best{Scalar(-1), Vector<Scalar>()};
  const Scalar margin = tol * a.diagonal().cwiseAbs().maxCoeff();
  for (auto& s : starts) {
    auto pair = detail::power_iterate(a, std::move(s), tol, max_iter);
    if (best.vector.size() == 0 || pair.value > best.value + margin) best = std::move(pair);
  }
  return best;
}

}  // namespace sparsepca
