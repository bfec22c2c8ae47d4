#pragma once

// Block coordinate ascent for l1-penalized sparse PCA.
//
// Given a covariance Sigma and lambda < min_i Sigma_ii, `solve` maximizes
//     Tr(Sigma X) - lambda ||X||_1 - (Tr X)^2 / 2 + beta log det X
// over X > 0, starting from X = I and sweeping over the columns. The
// normalized solution Z = X / Tr X approximates the maximizer of
// Tr(Sigma Z) - lambda ||Z||_1 over the unit-trace PSD cone.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sparsepca/bca_kernels.hpp"
#include "sparsepca/covariance.hpp"
#include "sparsepca/types.hpp"

namespace sparsepca {

struct SolverConfig {
  double lambda = 0.0;
  /// Suboptimality target on the max-diagonal-normalized scale; beta = epsilon / n.
  double epsilon = 1e-4;
  int max_sweeps = 20;
  /// Stop once a sweep raises the objective by less than sweep_tol * max(1, |objective|).
  double sweep_tol = 1e-6;
  double qp_tol = 1e-8;
  int qp_max_passes = 100;
  double tau_tol = 1e-12;
  /// Record per-sweep wall time; when false the trace carries zeros.
  bool record_timing = true;

  /// Throws InfeasibleError when a field is out of range.
  void validate() const;
};

struct SolverState {
  Eigen::MatrixXd x;
  /// X^{-1}, kept in step with x by the row updates. Call reset() after
  /// editing x directly.
  Eigen::MatrixXd x_inv;
  /// Box-QP solution of the previous sweep, column j for row j.
  Eigen::MatrixXd warm_u;
  std::vector<bool> has_warm;
  double initial_objective = 0.0;
  /// Penalized objective after each sweep.
  std::vector<double> objective_trace;
  std::vector<double> wall_seconds;
  int sweeps_done = 0;
  std::int64_t row_updates = 0;
  std::int64_t qp_passes = 0;
  /// Row updates skipped because they would have lowered the objective.
  std::int64_t rejected_updates = 0;

  /// X = I and cold warm starts.
  static SolverState identity(Index n);
  /// Replaces x and recomputes x_inv. Throws NumericalError unless x > 0.
  void reset(Eigen::MatrixXd new_x);
};

struct RowUpdateInfo {
  double r2 = 0.0;
  double tau = 0.0;
  int qp_passes = 0;
  /// Objective change of the candidate row.
  double gain = 0.0;
  bool accepted = false;
};

/// Re-optimizes row/column j of `state.x` for the given problem data.
///
/// With Y = X minus row/column j, s = sigma's column j without its diagonal,
/// t = Tr Y and c = sigma_jj - lambda - t: solves the box QP for u, the tau
/// stage, then sets X_j = Y u / tau and X_jj = c + tau.
///
/// The objective change of the candidate row is evaluated exactly from
/// x_inv (the old Schur complement is 1 / x_inv(j, j), the new one beta /
/// tau). A candidate that would lower the objective, which an inner QP
/// stopped at qp_max_passes can produce, is discarded and the row is left
/// unchanged; its QP solution is still kept as the next warm start.
RowUpdateInfo row_update(SolverState& state, const Eigen::MatrixXd& sigma, Index j, double lambda, double beta,
                         const SolverConfig& config);

/// Called after every row update with the normalized-scale data; tests use
/// it to watch the objective.
using RowObserver = std::function<void(const SolverState& normalized, const Eigen::MatrixXd& sigma_normalized,
                                       double lambda_normalized, double beta_normalized, Index column)>;

struct SolveResult {
  /// Iterate and trace in the caller's units.
  SolverState state;
  Eigen::MatrixXd z;
  /// Tr(Sigma Z) - lambda ||Z||_1.
  double phi = 0.0;
  /// Max diagonal used to normalize Sigma.
  double scale = 1.0;
  /// Barrier weight in the caller's units (scale^2 * epsilon / n).
  double beta = 0.0;
  bool converged = false;
};

/// Runs the block coordinate ascent. Throws InfeasibleError("... run
/// screening first") when lambda >= min_i Sigma_ii, NumericalError when X
/// loses positive definiteness.
SolveResult solve(const CovarianceMatrix& sigma, const SolverConfig& config, const RowObserver& observer = {});

/// Tr(Sigma Z) - lambda ||Z||_1.
double unpenalized_objective(const Eigen::MatrixXd& z, const Eigen::MatrixXd& sigma, double lambda);

struct SparseComponent {
  /// Original feature ids, by descending |weight| then ascending id.
  std::vector<FeatureId> support;
  std::vector<double> weights;
  double explained_variance = 0.0;
  std::size_t cardinality = 0;
  double lambda_used = 0.0;
  double phi_estimate = 0.0;
  /// Leading eigenvalue of Z is not separated from the next one.
  bool degenerate = false;
};

/// Leading eigenvector v of Z, support {i : |v_i| > threshold * max_j |v_j|},
/// weights renormalized on the support, largest-magnitude weight positive.
SparseComponent extract_component(const Eigen::MatrixXd& z, const CovarianceMatrix& sigma,
                                  double support_threshold = 1e-3);

struct SearchOptions {
  std::size_t slack = 2;
  int max_solves = 30;
  int grid_points = 8;
  /// Candidates never go below this lambda (screening is exact only above it).
  double lambda_floor = 0.0;
  double support_threshold = 1e-3;
  /// Workers for the coarse grid; results do not depend on it.
  std::size_t threads = 1;
};

struct SearchProbe {
  double lambda = 0.0;
  Index reduced_n = 0;
  std::size_t cardinality = 0;
  double phi = 0.0;
  int sweeps = 0;
  bool converged = false;
};

struct SearchResult {
  SparseComponent component;
  double lambda = 0.0;
  Index reduced_n = 0;
  int sweeps = 0;
  bool within_slack = false;
  std::vector<SearchProbe> probes;
};

/// Screen-then-solve at a single lambda: keeps the features whose variance
/// exceeds lambda (in their current order), solves and extracts.
struct ProbeOutcome {
  SparseComponent component;
  Index reduced_n = 0;
  int sweeps = 0;
  bool converged = false;
};
ProbeOutcome solve_screened(const CovarianceMatrix& sigma, double lambda, const SolverConfig& base,
                            double support_threshold);

/// Searches lambda for a component with `target` features: a coarse
/// geometric grid below max_i Sigma_ii, then geometric bisection between the
/// bracketing grid points.
SearchResult search_lambda(const CovarianceMatrix& sigma, std::size_t target, const SolverConfig& base,
                           const SearchOptions& options = {});

/// CSV with header "sweep,cumulative_row_updates,objective,wall_seconds";
/// row 0 is the initial iterate.
void write_trace_csv(const SolverState& state, std::int64_t order, std::ostream& os);

}  // namespace sparsepca
