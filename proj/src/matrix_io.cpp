#include "sparsepca/matrix_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "sparsepca/errors.hpp"

namespace sparsepca {

CovarianceMatrix read_matrix(std::istream& is, const std::string& name) {
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    return FormatError(name + ":" + std::to_string(line_no) + ": " + what);
  };
  // Skip leading blank lines.
  do {
    if (!std::getline(is, line)) {
      ++line_no;
      throw fail("missing order line");
    }
    ++line_no;
  } while (line.find_first_not_of(" \t\r") == std::string::npos);

  std::istringstream head(line);
  long long n = 0;
  std::string extra;
  if (!(head >> n) || n < 1 || (head >> extra)) throw fail("expected a positive order");

  Eigen::MatrixXd values(n, n);
  for (long long i = 0; i < n; ++i) {
    if (!std::getline(is, line)) {
      ++line_no;
      throw fail("expected " + std::to_string(n) + " rows");
    }
    ++line_no;
    std::istringstream row(line);
    for (long long j = 0; j < n; ++j) {
      if (!(row >> values(i, j))) throw fail("row " + std::to_string(i + 1) + " has fewer than n entries");
      if (!std::isfinite(values(i, j))) throw fail("non-finite entry");
    }
    if (row >> extra) throw fail("row " + std::to_string(i + 1) + " has more than n entries");
  }
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) throw fail("trailing data after matrix");
  }

  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  const double asym = (values - values.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTolerance * scale)
    throw FormatError(name + ": matrix is not symmetric (max |a_ij - a_ji| = " + std::to_string(asym) + ")");
  return CovarianceMatrix(std::move(values));
}

CovarianceMatrix read_matrix_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError(path.string() + ": cannot open matrix file");
  return read_matrix(is, path.string());
}

void write_matrix(const Eigen::MatrixXd& values, std::ostream& os) {
  os << values.rows() << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", values(i, j));
      if (j) os << ' ';
      os << buf;
    }
    os << '\n';
  }
}

void write_matrix_file(const Eigen::MatrixXd& values, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError(path.string() + ": cannot write matrix file");
  write_matrix(values, os);
  if (!os) throw FormatError(path.string() + ": write failed");
}

}  // namespace sparsepca
