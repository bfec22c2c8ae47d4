#pragma once

// Scalar-generic kernels of the block coordinate ascent solver.
//
// The solver maximizes
//     Tr(Sigma X) - lambda ||X||_1 - (Tr X)^2 / 2 + beta log det X,   X > 0,
// one row/column at a time. Each row update goes through the dual of the
// row sub-problem: a box-constrained QP in u followed by a scalar stage in
// tau, and never forms a pseudo-inverse.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "sparsepca/errors.hpp"
#include "sparsepca/types.hpp"

namespace sparsepca {

/// Minimizer of y1 * eta^2 + 2 g eta over |eta - s1| <= lambda.
///
/// For y1 > 0 this is -g / y1 clamped to the box. For y1 == 0 the objective
/// is linear: g > 0 picks s1 - lambda, otherwise s1 + lambda.
template <typename Scalar>
Scalar eta_update(Scalar y1, Scalar g, Scalar s1, Scalar lambda) {
  const Scalar lo = s1 - lambda;
  const Scalar hi = s1 + lambda;
  if (y1 > Scalar(0)) return std::clamp(-g / y1, lo, hi);
  return g > Scalar(0) ? lo : hi;
}

struct BoxQpSettings {
  double tol = 1e-8;
  int max_passes = 100;
};

template <typename Scalar>
struct BoxQpResult {
  Vector<Scalar> u;
  Scalar r2 = 0;
  int passes = 0;
  bool converged = false;
};

namespace detail {

/// Cyclic coordinate descent on min u^T Y u, |u - s|_inf <= lambda, where Y
/// is `x` with row/column `skip` removed (skip < 0 keeps everything).
///
/// `u` and `s` are indexed like `x`; u(skip) is held at zero. On return
/// `yu` holds x * u. Coordinates whose curvature and gradient both vanish
/// keep their current value, since every point of their interval is optimal.
template <typename DerivedX>
std::pair<int, bool> box_qp_cycle(const Eigen::MatrixBase<DerivedX>& x, Index skip,
                                  const Eigen::Ref<const Vector<typename DerivedX::Scalar>>& s,
                                  typename DerivedX::Scalar lambda,
                                  Eigen::Ref<Vector<typename DerivedX::Scalar>> u,
                                  Eigen::Ref<Vector<typename DerivedX::Scalar>> yu, const BoxQpSettings& settings) {
  using Scalar = typename DerivedX::Scalar;
  const Index n = x.rows();
  if (skip >= 0) u(skip) = Scalar(0);
  for (Index i = 0; i < n; ++i) {
    if (i == skip) continue;
    u(i) = std::clamp(u(i), s(i) - lambda, s(i) + lambda);
  }
  yu.noalias() = x * u;

  Scalar s_inf = 0;
  for (Index i = 0; i < n; ++i)
    if (i != skip) s_inf = std::max(s_inf, std::abs(s(i)));
  const Scalar stop = Scalar(settings.tol) * (Scalar(1) + s_inf);

  int passes = 0;
  bool converged = n == 0 || (n == 1 && skip == 0);
  while (!converged && passes < settings.max_passes) {
    ++passes;
    Scalar largest = 0;
    for (Index i = 0; i < n; ++i) {
      if (i == skip) continue;
      const Scalar y1 = x(i, i);
      const Scalar g = yu(i) - y1 * u(i);
      if (y1 == Scalar(0) && g == Scalar(0)) continue;
      const Scalar eta = eta_update(y1, g, s(i), lambda);
      const Scalar delta = eta - u(i);
      if (delta != Scalar(0)) {
        u(i) = eta;
        yu.noalias() += delta * x.col(i);
        largest = std::max(largest, std::abs(delta));
      }
    }
    converged = largest < stop;
  }
  // Drop the drift accumulated by the incremental updates.
  yu.noalias() = x * u;
  return {passes, converged};
}

}  // namespace detail

/// R^2 = min u^T Y u subject to |u - s|_inf <= lambda, by cyclic coordinate
/// descent started from `warm` (or from s).
template <typename DerivedY, typename DerivedS>
BoxQpResult<typename DerivedY::Scalar> box_qp(const Eigen::MatrixBase<DerivedY>& y,
                                             const Eigen::MatrixBase<DerivedS>& s,
                                             typename DerivedY::Scalar lambda,
                                             const Vector<typename DerivedY::Scalar>* warm = nullptr,
                                             const BoxQpSettings& settings = {}) {
  using Scalar = typename DerivedY::Scalar;
  if (y.rows() != y.cols() || y.rows() != s.size())
    throw std::invalid_argument("box_qp: dimension mismatch");
  if (warm && warm->size() != s.size()) throw std::invalid_argument("box_qp: warm start dimension mismatch");
  BoxQpResult<Scalar> result;
  result.u = warm ? *warm : Vector<Scalar>(s);
  Vector<Scalar> yu(s.size());
  const Vector<Scalar> s_eval = s;
  auto [passes, converged] = detail::box_qp_cycle(y, Index{-1}, s_eval, lambda, result.u, yu, settings);
  result.passes = passes;
  result.converged = converged;
  result.r2 = std::max(Scalar(0), result.u.dot(yu));
  return result;
}

/// The unique tau > 0 minimizing R2 / tau - beta log tau + (c + tau)^2 / 2,
/// i.e. the positive root of p(tau) = tau^3 + c tau^2 - beta tau - R2.
///
/// Safeguarded bisection on p: the lower end starts at beta / (|c| + R + 1)
/// and halves until p < 0, the upper end starts at max(1, -c) and doubles
/// until p > 0. Throws NumericalError when either expansion exceeds 200
/// steps.
template <typename Scalar>
Scalar tau_solve(Scalar r2, Scalar c, Scalar beta, Scalar tol = Scalar(1e-12)) {
  if (!(r2 >= Scalar(0)) || !(beta > Scalar(0)) || !std::isfinite(c))
    throw NumericalError("tau stage: need R2 >= 0, beta > 0 and finite c");
  const auto p = [&](Scalar t) { return ((t + c) * t - beta) * t - r2; };
  const Scalar scale = std::max({Scalar(1), std::abs(c) * c * c, r2});
  const Scalar residual_tol = tol * scale;

  Scalar lo = beta / (std::abs(c) + std::sqrt(r2) + Scalar(1));
  int steps = 0;
  while (p(lo) >= Scalar(0)) {
    lo *= Scalar(0.5);
    if (++steps > 200 || lo == Scalar(0)) throw NumericalError("tau stage: lower bracket expansion failed");
  }
  Scalar hi = std::max(Scalar(1), -c);
  steps = 0;
  while (p(hi) <= Scalar(0)) {
    hi *= Scalar(2);
    if (++steps > 200 || !std::isfinite(hi)) throw NumericalError("tau stage: upper bracket expansion failed");
  }

  Scalar mid = Scalar(0.5) * (lo + hi);
  for (int it = 0; it < 400; ++it) {
    mid = Scalar(0.5) * (lo + hi);
    const Scalar value = p(mid);
    if (std::abs(value) <= residual_tol && (hi - lo) <= Scalar(8) * std::numeric_limits<Scalar>::epsilon() * mid)
      break;
    if (mid <= lo || mid >= hi) break;
    (value < Scalar(0) ? lo : hi) = mid;
  }
  return mid;
}

/// Tr(Sigma X) - lambda ||X||_1 - (Tr X)^2 / 2 + beta log det X.
///
/// log det comes from a Cholesky factorization; throws NumericalError when X
/// is not positive definite.
template <typename DerivedX, typename DerivedS>
typename DerivedX::Scalar penalized_objective(const Eigen::MatrixBase<DerivedX>& x,
                                              const Eigen::MatrixBase<DerivedS>& sigma,
                                              typename DerivedX::Scalar lambda,
                                              typename DerivedX::Scalar beta) {
  using Scalar = typename DerivedX::Scalar;
  const Scalar trace = x.trace();
  Scalar value = (sigma.array() * x.array()).sum() - lambda * x.cwiseAbs().sum() - Scalar(0.5) * trace * trace;
  Eigen::LLT<Matrix<Scalar>> llt(x);
  if (llt.info() != Eigen::Success) throw NumericalError("objective: X is not positive definite");
  const Scalar log_det = Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
  return value + beta * log_det;
}

/// Z = X / Tr(X). Throws NumericalError when Tr(X) <= 0.
template <typename Derived>
Matrix<typename Derived::Scalar> recover_z(const Eigen::MatrixBase<Derived>& x) {
  const auto trace = x.trace();
  if (!(trace > 0)) throw NumericalError("recover_z: trace of X must be positive");
  return x / trace;
}

}  // namespace sparsepca
