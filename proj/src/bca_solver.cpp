#include "sparsepca/bca_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <string>

#include "sparsepca/errors.hpp"

namespace sparsepca {

namespace {

double wall_now() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace

void SolverConfig::validate() const {
  if (!(lambda >= 0.0)) throw InfeasibleError("lambda must be nonnegative");
  if (!(epsilon > 0.0)) throw InfeasibleError("epsilon must be positive");
  if (max_sweeps < 1) throw InfeasibleError("max_sweeps must be at least 1");
  if (!(sweep_tol > 0.0) || !(qp_tol > 0.0) || !(tau_tol > 0.0))
    throw InfeasibleError("tolerances must be positive");
  if (qp_max_passes < 1) throw InfeasibleError("qp_max_passes must be at least 1");
}

SolverState SolverState::identity(Index n) {
  SolverState state;
  state.x = Eigen::MatrixXd::Identity(n, n);
  state.warm_u = Eigen::MatrixXd::Zero(n, n);
  state.has_warm.assign(static_cast<std::size_t>(n), false);
  state.x_inv = Eigen::MatrixXd::Identity(n, n);
  return state;
}

void SolverState::reset(Eigen::MatrixXd new_x) {
  const Index n = new_x.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(new_x);
  if (new_x.cols() != n || llt.info() != Eigen::Success)
    throw NumericalError("solver state: X must be symmetric positive definite");
  x = std::move(new_x);
  x_inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  if (warm_u.rows() != n) {
    warm_u = Eigen::MatrixXd::Zero(n, n);
    has_warm.assign(static_cast<std::size_t>(n), false);
  }
}

RowUpdateInfo row_update(SolverState& state, const Eigen::MatrixXd& sigma, Index j, double lambda, double beta,
                         const SolverConfig& config) {
  auto& x = state.x;
  const Index n = x.rows();
  if (j < 0 || j >= n) throw std::out_of_range("row_update: column index out of range");
  if (sigma.rows() != n || sigma.cols() != n) throw std::invalid_argument("row_update: sigma dimension mismatch");

  Eigen::VectorXd s = sigma.col(j);
  s(j) = 0.0;
  auto u = state.warm_u.col(j);
  if (!state.has_warm[static_cast<std::size_t>(j)]) u = s;
  Eigen::VectorXd yu(n);

  const BoxQpSettings qp{config.qp_tol, config.qp_max_passes};
  Eigen::VectorXd u_work = u;
  const auto [passes, converged] = detail::box_qp_cycle(x, j, s, lambda, u_work, yu, qp);
  (void)converged;
  u = u_work;
  state.has_warm[static_cast<std::size_t>(j)] = true;

  RowUpdateInfo info;
  info.qp_passes = passes;
  info.r2 = std::max(0.0, u_work.dot(yu));
  const double t = x.trace() - x(j, j);
  const double c = sigma(j, j) - lambda - t;
  info.tau = tau_solve(info.r2, c, beta, config.tau_tol);
  ++state.row_updates;
  state.qp_passes += passes;

  // Objective change restricted to row/column j. The Schur complement of Y
  // in X is 1 / x_inv(j, j) before and c + tau - R2 / tau^2 = beta / tau after.
  const double inv_tau = 1.0 / info.tau;
  const double x_new = c + info.tau;
  const double x_old = x(j, j);
  double linear = 0.0, l1 = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (i == j) continue;
    const double y_new = yu(i) * inv_tau, y_old = x(i, j);
    linear += sigma(i, j) * (y_new - y_old);
    l1 += std::abs(y_new) - std::abs(y_old);
  }
  const double schur_old = 1.0 / state.x_inv(j, j);
  const double schur_new = beta * inv_tau;
  info.gain = 2.0 * (linear - lambda * l1) + (sigma(j, j) - lambda) * (x_new - x_old) -
              0.5 * ((t + x_new) * (t + x_new) - (t + x_old) * (t + x_old)) +
              beta * std::log(schur_new / schur_old);
  if (!(info.gain >= 0.0) || !(schur_old > 0.0)) {
    ++state.rejected_updates;
    return info;
  }
  info.accepted = true;

  for (Index i = 0; i < n; ++i) {
    if (i == j) continue;
    const double v = yu(i) * inv_tau;
    x(i, j) = v;
    x(j, i) = v;
  }
  x(j, j) = x_new;

  // Block inverse: Y^{-1} from the old inverse, then Y^{-1} x_j = u / tau.
  auto& w = state.x_inv;
  const Eigen::VectorXd g = w.col(j);
  w.noalias() -= (g / g(j)) * g.transpose();
  Eigen::VectorXd v = u_work * inv_tau;
  v(j) = 0.0;
  w.noalias() += (v / schur_new) * v.transpose();
  w.col(j) = -v / schur_new;
  w.row(j) = w.col(j).transpose();
  w(j, j) = 1.0 / schur_new;
  return info;
}

double unpenalized_objective(const Eigen::MatrixXd& z, const Eigen::MatrixXd& sigma, double lambda) {
  return (sigma.array() * z.array()).sum() - lambda * z.cwiseAbs().sum();
}

SolveResult solve(const CovarianceMatrix& sigma, const SolverConfig& config, const RowObserver& observer) {
  config.validate();
  const Index n = sigma.order();
  if (n < 1) throw InfeasibleError("empty reduced problem");
  const Eigen::VectorXd diag = sigma.diagonal();
  if (!(config.lambda < diag.minCoeff()))
    throw InfeasibleError("lambda must be below every variance on the diagonal; run screening first");

  // Work on the scale where max_i Sigma_ii = 1; X scales linearly with it.
  const double scale = diag.maxCoeff();
  const Eigen::MatrixXd sn = sigma.values() / scale;
  const double ln = config.lambda / scale;
  const double beta = config.epsilon / static_cast<double>(n);
  const double log_scale_term = beta * static_cast<double>(n) * std::log(scale);
  const auto to_caller_units = [&](double objective) { return scale * scale * (objective + log_scale_term); };

  SolveResult result;
  SolverState& state = result.state;
  state = SolverState::identity(n);
  double previous = penalized_objective(state.x, sn, ln, beta);
  state.initial_objective = to_caller_units(previous);

  for (int sweep = 1; sweep <= config.max_sweeps; ++sweep) {
    const double started = config.record_timing ? wall_now() : 0.0;
    for (Index j = 0; j < n; ++j) {
      row_update(state, sn, j, ln, beta, config);
      if (observer) observer(state, sn, ln, beta, j);
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(state.x);
    if (llt.info() != Eigen::Success)
      throw NumericalError("X lost positive definiteness after sweep " + std::to_string(sweep));
    // Drop the drift of the incremental inverse updates.
    state.x_inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
    const double current = penalized_objective(state.x, sn, ln, beta);
    if (!std::isfinite(current)) throw NumericalError("non-finite objective after sweep " + std::to_string(sweep));
    state.objective_trace.push_back(to_caller_units(current));
    state.wall_seconds.push_back(config.record_timing ? wall_now() - started : 0.0);
    state.sweeps_done = sweep;
    // Rounding can leave the gain slightly negative near the optimum; that
    // ends the run as well.
    const double gain = current - previous;
    previous = current;
    if (gain < config.sweep_tol * std::max(1.0, std::abs(current))) {
      result.converged = true;
      break;
    }
  }

  result.z = recover_z(state.x);
  state.x *= scale;
  state.x_inv /= scale;
  state.warm_u *= scale;
  result.phi = unpenalized_objective(result.z, sigma.values(), config.lambda);
  result.scale = scale;
  result.beta = scale * scale * beta;
  return result;
}

SparseComponent extract_component(const Eigen::MatrixXd& z, const CovarianceMatrix& sigma,
                                  double support_threshold) {
  const Index n = z.rows();
  if (n != sigma.order()) throw std::invalid_argument("extract_component: dimension mismatch");
  SparseComponent comp;
  if (n == 0) return comp;
  const auto lead = leading_eigenvector(z, 1e-12);
  const Eigen::VectorXd& v = lead.vector;

  if (n > 1 && lead.value > 0.0) {
    // Second eigenvalue by power iteration on the deflated matrix, from a
    // fixed pseudo-random start.
    const Eigen::MatrixXd rest = z - lead.value * v * v.transpose();
    Eigen::VectorXd start(n);
    std::uint64_t st = 0x2545f4914f6cdd1dULL;
    for (Index i = 0; i < n; ++i) {
      st = st * 6364136223846793005ULL + 1442695040888963407ULL;
      start(i) = static_cast<double>(st >> 11) * 0x1.0p-53 - 0.5;
    }
    const auto second = detail::power_iterate(rest, start, 1e-10, 2000);
    comp.degenerate = second.value >= (1.0 - 1e-6) * lead.value;
  }

  const double vmax = v.cwiseAbs().maxCoeff();
  std::vector<Index> support;
  for (Index i = 0; i < n; ++i)
    if (std::abs(v(i)) > support_threshold * vmax) support.push_back(i);
  const auto& ids = sigma.feature_ids();
  std::stable_sort(support.begin(), support.end(), [&](Index a, Index b) {
    const double wa = std::abs(v(a)), wb = std::abs(v(b));
    if (wa != wb) return wa > wb;
    return ids[static_cast<std::size_t>(a)] < ids[static_cast<std::size_t>(b)];
  });

  Eigen::VectorXd w(static_cast<Index>(support.size()));
  for (std::size_t k = 0; k < support.size(); ++k) w(static_cast<Index>(k)) = v(support[k]);
  w.normalize();
  if (w.size() > 0 && w(0) < 0.0) w = -w;

  const CovarianceMatrix sub = sigma.select(support);
  comp.explained_variance = std::max(0.0, w.dot(sub.values() * w));
  comp.cardinality = support.size();
  for (std::size_t k = 0; k < support.size(); ++k) {
    comp.support.push_back(ids[static_cast<std::size_t>(support[k])]);
    comp.weights.push_back(w(static_cast<Index>(k)));
  }
  return comp;
}

ProbeOutcome solve_screened(const CovarianceMatrix& sigma, double lambda, const SolverConfig& base,
                            double support_threshold) {
  std::vector<Index> kept;
  for (Index i = 0; i < sigma.order(); ++i)
    if (sigma(i, i) > lambda) kept.push_back(i);
  ProbeOutcome out;
  out.reduced_n = static_cast<Index>(kept.size());
  if (kept.empty()) {
    out.component.lambda_used = lambda;
    return out;
  }
  const CovarianceMatrix reduced = sigma.select(kept);
  SolverConfig config = base;
  config.lambda = lambda;
  const SolveResult solved = solve(reduced, config);
  out.component = extract_component(solved.z, reduced, support_threshold);
  out.component.lambda_used = lambda;
  out.component.phi_estimate = solved.phi;
  out.sweeps = solved.state.sweeps_done;
  out.converged = solved.converged;
  return out;
}

SearchResult search_lambda(const CovarianceMatrix& sigma, std::size_t target, const SolverConfig& base,
                           const SearchOptions& options) {
  if (target < 1) throw InfeasibleError("target cardinality must be at least 1");
  if (sigma.order() < 1) throw InfeasibleError("empty reduced problem");
  if (options.grid_points < 1 || options.max_solves < 1) throw InfeasibleError("search budget must be positive");

  const double max_var = sigma.diagonal().maxCoeff();
  if (!(max_var > 0.0)) throw InfeasibleError("every variance is zero");
  // Just below the largest variance only the top feature survives.
  const double hi = max_var * (1.0 - 1e-9);
  const double lo = std::min(hi, std::max(options.lambda_floor, max_var * 1e-3));

  std::vector<double> grid;
  const int g = options.grid_points;
  for (int k = 0; k < g; ++k) {
    const double f = g == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(g - 1);
    grid.push_back(hi * std::pow(lo / hi, f));
  }
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (static_cast<int>(grid.size()) > options.max_solves) grid.resize(static_cast<std::size_t>(options.max_solves));

  SearchResult result;
  const auto distance = [&](std::size_t card) {
    return card > target ? card - target : target - card;
  };
  std::optional<std::size_t> best;
  std::vector<std::pair<double, ProbeOutcome>> evaluated;
  const auto record = [&](double lambda, ProbeOutcome outcome) {
    result.probes.push_back({lambda, outcome.reduced_n, outcome.component.cardinality,
                             outcome.component.phi_estimate, outcome.sweeps, outcome.converged});
    evaluated.emplace_back(lambda, std::move(outcome));
    const std::size_t k = evaluated.size() - 1;
    const std::size_t d = distance(evaluated[k].second.component.cardinality);
    if (!best || d < distance(evaluated[*best].second.component.cardinality)) best = k;
    return d;
  };
  const auto finish = [&](std::size_t k) {
    auto& [lambda, outcome] = evaluated[k];
    result.lambda = lambda;
    result.reduced_n = outcome.reduced_n;
    result.sweeps = outcome.sweeps;
    result.within_slack = distance(outcome.component.cardinality) <= options.slack;
    result.component = outcome.component;
    return result;
  };

  // Coarse grid from the largest lambda down, in batches of `threads`
  // independent solves. Probes are recorded in grid order, so the first hit
  // does not depend on the batch size.
  const std::size_t batch = std::max<std::size_t>(1, options.threads);
  for (std::size_t first = 0; first < grid.size(); first += batch) {
    const std::size_t last = std::min(grid.size(), first + batch);
    std::vector<ProbeOutcome> outcomes(last - first);
    std::vector<std::exception_ptr> errors(last - first);
    auto run = [&](std::size_t k) {
      try {
        outcomes[k - first] = solve_screened(sigma, grid[k], base, options.support_threshold);
      } catch (...) {
        errors[k - first] = std::current_exception();
      }
    };
    std::vector<std::future<void>> pending;
    for (std::size_t k = first + 1; k < last; ++k) pending.push_back(std::async(std::launch::async, run, k));
    run(first);
    for (auto& p : pending) p.get();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    for (std::size_t k = first; k < last; ++k)
      if (record(grid[k], std::move(outcomes[k - first])) <= options.slack) return finish(evaluated.size() - 1);
  }

  // Bracket: adjacent grid points whose cardinalities straddle the target.
  std::optional<std::pair<double, double>> bracket;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    if (evaluated[k].second.component.cardinality < target && evaluated[k + 1].second.component.cardinality > target) {
      bracket = std::make_pair(grid[k], grid[k + 1]);
      break;
    }
  }
  int solves = static_cast<int>(grid.size());
  while (bracket && solves < options.max_solves) {
    auto [upper, lower] = *bracket;
    const double mid = std::sqrt(upper * lower);
    if (!(mid < upper && mid > lower)) break;
    ProbeOutcome outcome = solve_screened(sigma, mid, base, options.support_threshold);
    ++solves;
    const std::size_t card = outcome.component.cardinality;
    if (record(mid, std::move(outcome)) <= options.slack) return finish(evaluated.size() - 1);
    if (card < target)
      bracket->first = mid;
    else
      bracket->second = mid;
  }
  return finish(*best);
}

void write_trace_csv(const SolverState& state, std::int64_t order, std::ostream& os) {
  char buf[128];
  os << "sweep,cumulative_row_updates,objective,wall_seconds\n";
  std::snprintf(buf, sizeof buf, "0,0,%.17g,0\n", state.initial_objective);
  os << buf;
  for (std::size_t k = 0; k < state.objective_trace.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%lld,%.17g,%.6f\n", k + 1,
                  static_cast<long long>(static_cast<std::int64_t>(k + 1) * order), state.objective_trace[k],
                  state.wall_seconds[k]);
    os << buf;
  }
}

}  // namespace sparsepca
