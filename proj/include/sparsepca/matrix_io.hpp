#pragma once

// Dense symmetric matrix text format:
//
//     <n>
//     <row 1: n whitespace-separated reals>
//     ...
//     <row n>
//
// Values are written with %.17g so a write/read cycle is exact.

#include <filesystem>
#include <iosfwd>

#include "sparsepca/covariance.hpp"

namespace sparsepca {

/// Entries may differ from their transpose by at most this much, relative to
/// max(1, max |a_ij|).
inline constexpr double kSymmetryTolerance = 1e-8;

CovarianceMatrix read_matrix(std::istream& is, const std::string& name = "<stream>");
CovarianceMatrix read_matrix_file(const std::filesystem::path& path);

void write_matrix(const Eigen::MatrixXd& values, std::ostream& os);
void write_matrix_file(const Eigen::MatrixXd& values, const std::filesystem::path& path);

}  // namespace sparsepca
