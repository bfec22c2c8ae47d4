// sparsepca: sparse principal components of covariance matrices and
// bag-of-words corpora.
//
// Exit status: 0 success, 2 malformed input, 3 numerical failure,
// 4 infeasible configuration.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sparsepca/bca_solver.hpp"
#include "sparsepca/covariance.hpp"
#include "sparsepca/errors.hpp"
#include "sparsepca/matrix_io.hpp"
#include "sparsepca/oracle.hpp"
#include "sparsepca/pipeline.hpp"
#include "sparsepca/topics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sparsepca;

namespace {

struct SolverFlags {
  double epsilon = 1e-4;
  int max_sweeps = 20;
  double sweep_tol = 1e-6;
  bool timing = false;

  void attach(CLI::App* app) {
    app->add_option("--epsilon", epsilon, "Suboptimality target (normalized scale)")->capture_default_str();
    app->add_option("--max-sweeps", max_sweeps, "Sweep cap per solve")->capture_default_str();
    app->add_option("--sweep-tol", sweep_tol, "Relative objective gain that ends a solve")->capture_default_str();
    app->add_flag("--timing", timing, "Record wall times (outputs are then not reproducible)");
  }
  SolverConfig config(double lambda = 0.0) const {
    SolverConfig c;
    c.lambda = lambda;
    c.epsilon = epsilon;
    c.max_sweeps = max_sweeps;
    c.sweep_tol = sweep_tol;
    c.record_timing = timing;
    return c;
  }
};

// Writes `text` to `path`, or to stdout when the path is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path);
  os << text;
  if (!os) throw FormatError("write failed: " + path);
}

std::optional<fs::path> cache_dir_from(const std::string& flag) {
  if (!flag.empty()) return fs::path(flag);
  if (const char* env = std::getenv("SPARSEPCA_CACHE_DIR"); env && *env) return fs::path(env);
  return std::nullopt;
}

json component_json(const SparseComponent& c) {
  return json{{"support", c.support},
              {"weights", c.weights},
              {"cardinality", c.cardinality},
              {"explained_variance", c.explained_variance},
              {"lambda", c.lambda_used},
              {"phi", c.phi_estimate},
              {"degenerate", c.degenerate}};
}

int run(int argc, char** argv) {
  CLI::App app{"Sparse principal components with safe feature elimination"};
  app.require_subcommand(1);
  std::size_t threads = 1;
  app.add_option("--threads", threads, "Worker cap; results do not depend on it")->capture_default_str();

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "Per-word variances of a docword corpus");
  std::string stats_corpus, stats_out, stats_cache;
  stats_cmd->add_option("corpus", stats_corpus, "UCI docword file")->required();
  stats_cmd->add_option("--out", stats_out, "Sorted-variance CSV (default stdout)");
  stats_cmd->add_option("--cache-dir", stats_cache, "Cache directory (default $SPARSEPCA_CACHE_DIR)");

  // components
  auto* comp_cmd = app.add_subcommand("components", "Sparse components of a docword corpus with deflation");
  std::string comp_corpus, comp_out, comp_table, comp_cache, comp_vocab;
  std::size_t k = 5, cardinality = 5;
  std::uint64_t working_set = 1000;
  SolverFlags comp_flags;
  comp_cmd->add_option("corpus", comp_corpus, "UCI docword file")->required();
  comp_cmd->add_option("--k", k, "Number of components")->capture_default_str();
  comp_cmd->add_option("--cardinality", cardinality, "Target cardinality")->capture_default_str();
  comp_cmd->add_option("--working-set", working_set, "Features kept for the dense covariance")->capture_default_str();
  comp_cmd->add_option("--vocab", comp_vocab, "UCI vocab file");
  comp_cmd->add_option("--cache-dir", comp_cache, "Cache directory (default $SPARSEPCA_CACHE_DIR)");
  comp_cmd->add_option("--out", comp_out, "JSON report (default stdout)");
  comp_cmd->add_option("--table", comp_table, "Aligned text table (default stderr)");
  comp_flags.attach(comp_cmd);

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "Screen and solve one dense covariance at a fixed lambda");
  std::string solve_matrix, solve_out, solve_trace;
  double solve_lambda = 0.0;
  SolverFlags solve_flags;
  solve_cmd->add_option("matrix", solve_matrix, "Matrix file")->required();
  solve_cmd->add_option("--lambda", solve_lambda, "Penalty")->required();
  solve_cmd->add_option("--out", solve_out, "Component JSON (default stdout)");
  solve_cmd->add_option("--trace", solve_trace, "Convergence trace CSV");
  solve_flags.attach(solve_cmd);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Synthetic covariances and corpora");
  std::string model, synth_out;
  Index n = 0, m = 0;
  std::uint64_t seed = 0;
  double support_fraction = 0.1;
  std::uint64_t docs = 10000, words = 2000;
  synth_cmd->add_option("--model", model, "spiked, gaussian or topics")
      ->required()
      ->check(CLI::IsMember({"spiked", "gaussian", "topics"}));
  synth_cmd->add_option("--n", n, "Order (spiked, gaussian)");
  synth_cmd->add_option("--m", m, "Samples (spiked, gaussian)");
  synth_cmd->add_option("--support-fraction", support_fraction, "Spike support fraction")->capture_default_str();
  synth_cmd->add_option("--docs", docs, "Documents (topics)")->capture_default_str();
  synth_cmd->add_option("--words", words, "Dictionary size (topics)")->capture_default_str();
  synth_cmd->add_option("--seed", seed, "Seed")->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "Output file; metadata goes to <out>.meta.json")->required();

  // oracle (hidden): brute-force reference for small matrices
  auto* oracle_cmd = app.add_subcommand("oracle", "");
  oracle_cmd->group("");
  std::string oracle_matrix;
  double oracle_lambda = 0.0;
  oracle_cmd->add_option("matrix", oracle_matrix)->required();
  oracle_cmd->add_option("--lambda", oracle_lambda)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (threads < 1) throw InfeasibleError("--threads must be at least 1");

  if (*stats_cmd) {
    const BagOfWordsCorpus corpus = parse_docword(stats_corpus);
    bool cached = false;
    const FeatureStats stats = load_or_compute_stats(corpus, cache_dir_from(stats_cache), threads, &cached);
    std::ostringstream os;
    write_variance_csv(stats, os);
    emit(stats_out, os.str());
    std::cerr << (cached ? "stats: cache hit\n" : "stats: computed\n");
    return 0;
  }

  if (*comp_cmd) {
    PipelineOptions options;
    options.components = k;
    options.cardinality = cardinality;
    options.solver = comp_flags.config();
    options.threads = threads;
    options.working_set = working_set;
    options.cache_dir = cache_dir_from(comp_cache);
    if (!comp_vocab.empty()) options.vocab = fs::path(comp_vocab);
    const PipelineReport report = run_components(comp_corpus, options);
    emit(comp_out, json(report).dump(2) + "\n");
    std::ostringstream table;
    write_report_table(report, table);
    if (comp_table.empty())
      std::cerr << table.str();
    else
      emit(comp_table, table.str());
    return 0;
  }

  if (*solve_cmd) {
    const CovarianceMatrix sigma = read_matrix_file(solve_matrix);
    std::vector<Index> kept;
    for (Index i = 0; i < sigma.order(); ++i)
      if (sigma(i, i) > solve_lambda) kept.push_back(i);
    if (kept.empty())
      throw InfeasibleError("lambda eliminates every feature (lambda = " + std::to_string(solve_lambda) + ")");
    const CovarianceMatrix reduced = sigma.select(kept);
    const SolveResult solved = solve(reduced, solve_flags.config(solve_lambda));
    SparseComponent comp = extract_component(solved.z, reduced);
    comp.lambda_used = solve_lambda;
    comp.phi_estimate = solved.phi;
    json out = component_json(comp);
    out["original_n"] = sigma.order();
    out["reduced_n"] = reduced.order();
    out["sweeps"] = solved.state.sweeps_done;
    out["converged"] = solved.converged;
    emit(solve_out, out.dump(2) + "\n");
    if (!solve_trace.empty()) {
      std::ostringstream os;
      write_trace_csv(solved.state, reduced.order(), os);
      emit(solve_trace, os.str());
    }
    return 0;
  }

  if (*synth_cmd) {
    json meta{{"model", model}, {"seed", seed}};
    if (model == "topics") {
      PlantedTopicsSpec spec;
      spec.num_docs = docs;
      spec.num_words = words;
      spec.seed = seed;
      const PlantedTopics planted = write_planted_topics(spec, synth_out);
      write_topics_vocab(spec, planted, synth_out + ".vocab");
      meta["num_docs"] = docs;
      meta["num_words"] = words;
      meta["nnz"] = planted.nnz;
      meta["topics"] = planted.topics;
    } else {
      if (n < 1 || m < 1) throw InfeasibleError("--n and --m must be positive");
      meta["n"] = n;
      meta["m"] = m;
      if (model == "spiked") {
        const SpikedModel sm = spiked_model({n, m, support_fraction, seed, false});
        write_matrix_file(sm.sigma.values(), synth_out);
        std::vector<Index> support;
        for (auto i : sm.true_support) support.push_back(i + 1);
        meta["support_fraction"] = support_fraction;
        meta["true_support"] = support;
      } else {
        write_matrix_file(gaussian_model(n, m, seed).values(), synth_out);
        meta["true_support"] = json::array();
      }
    }
    emit(synth_out + ".meta.json", meta.dump(2) + "\n");
    return 0;
  }

  if (*oracle_cmd) {
    const CovarianceMatrix sigma = read_matrix_file(oracle_matrix);
    const auto best = oracle::brute_force_card(sigma.values(), oracle_lambda);
    std::vector<Index> support;
    for (auto i : best.support) support.push_back(i + 1);
    std::cout << json{{"psi", best.psi}, {"support", support}}.dump(2) << "\n";
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
