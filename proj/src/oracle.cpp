#include "sparsepca/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "sparsepca/errors.hpp"

namespace sparsepca::oracle {

std::vector<double> jacobi_eigenvalues(const Eigen::MatrixXd& input, double tol, int max_sweeps) {
  Eigen::MatrixXd a = input;
  const Index n = a.rows();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0, total = 0.0;
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i) {
        total += a(i, j) * a(i, j);
        if (i != j) off += a(i, j) * a(i, j);
      }
    if (off <= tol * tol * total) break;
    for (Index p = 0; p < n - 1; ++p)
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> values(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) values[static_cast<std::size_t>(i)] = a(i, i);
  std::sort(values.begin(), values.end());
  return values;
}

double max_eigenvalue(const Eigen::MatrixXd& a) {
  const Index n = a.rows();
  if (n == 0) return 0.0;
  if (n == 1) return a(0, 0);
  if (n == 2) {
    const double mean = 0.5 * (a(0, 0) + a(1, 1));
    const double half_gap = 0.5 * (a(0, 0) - a(1, 1));
    return mean + std::hypot(half_gap, a(0, 1));
  }
  return jacobi_eigenvalues(a).back();
}

CardSolution brute_force_card(const Eigen::MatrixXd& sigma, double lambda) {
  const Index n = sigma.rows();
  if (n < 1) throw InfeasibleError("brute_force_card: empty matrix");
  if (n > 20) throw InfeasibleError("brute_force_card: order " + std::to_string(n) + " exceeds the 2^20 guard");

  CardSolution best;
  bool have = false;
  std::vector<Index> support;
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    support.clear();
    for (Index i = 0; i < n; ++i)
      if (mask & (1u << i)) support.push_back(i);
    const Index k = static_cast<Index>(support.size());
    Eigen::MatrixXd sub(k, k);
    for (Index b = 0; b < k; ++b)
      for (Index a = 0; a < k; ++a) sub(a, b) = sigma(support[a], support[b]);
    const double value = max_eigenvalue(sub) - lambda * static_cast<double>(k);
    bool better = !have || value > best.psi;
    if (have && value == best.psi) {
      better = support.size() < best.support.size() ||
               (support.size() == best.support.size() && support < best.support);
    }
    if (better) {
      best.psi = value;
      best.support = support;
      have = true;
    }
  }

  // Leading eigenvector of the winning block by inverse-free power iteration
  // on a shifted matrix; only needed as a witness.
  const Index k = static_cast<Index>(best.support.size());
  Eigen::MatrixXd sub(k, k);
  for (Index b = 0; b < k; ++b)
    for (Index a = 0; a < k; ++a) sub(a, b) = sigma(best.support[a], best.support[b]);
  const double top = max_eigenvalue(sub);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(k);
  for (Index i = 0; i < k; ++i) v(i) += 0.01 * static_cast<double>(i + 1);
  const double shift = std::abs(top) + 1.0;
  Eigen::MatrixXd shifted = sub + shift * Eigen::MatrixXd::Identity(k, k);
  for (int it = 0; it < 5000; ++it) {
    Eigen::VectorXd next = shifted * v;
    next.normalize();
    if ((next - v).norm() < 1e-14) {
      v = next;
      break;
    }
    v = next;
  }
  v.normalize();
  best.x = Eigen::VectorXd::Zero(n);
  for (Index i = 0; i < k; ++i) best.x(best.support[static_cast<std::size_t>(i)]) = v(i);
  return best;
}

double xi_scan_psi(const Eigen::MatrixXd& a, double lambda, int grid_points) {
  if (a.rows() != 2) throw InfeasibleError("xi_scan_psi: the data matrix must have exactly two rows");
  if (grid_points < 360) throw InfeasibleError("xi_scan_psi: need at least 360 grid points");
  double best = 0.0;
  bool have = false;
  // xi and -xi give the same value, so half a turn suffices.
  for (int k = 0; k < grid_points; ++k) {
    const double angle = std::numbers::pi * static_cast<double>(k) / static_cast<double>(grid_points);
    const double cx = std::cos(angle), sx = std::sin(angle);
    double value = 0.0;
    for (Index i = 0; i < a.cols(); ++i) {
      const double proj = a(0, i) * cx + a(1, i) * sx;
      value += std::max(0.0, proj * proj - lambda);
    }
    if (!have || value > best) {
      best = value;
      have = true;
    }
  }
  return best;
}

}  // namespace sparsepca::oracle
