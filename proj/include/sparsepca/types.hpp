#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace sparsepca {

/// 1-based id of a feature (word) in the original dictionary.
using FeatureId = std::uint32_t;
/// 1-based document id.
using DocId = std::uint32_t;

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

}  // namespace sparsepca
