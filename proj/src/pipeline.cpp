#include <algorithm>
#include "sparsepca/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <ostream>

#include "sparsepca/covariance.hpp"
#include "sparsepca/errors.hpp"

namespace sparsepca {

using nlohmann::json;

void to_json(json& j, const ReportComponent& c) {
  j = json{{"support", c.support},
           {"tokens", c.tokens},
           {"weights", c.weights},
           {"cardinality", c.support.size()},
           {"explained_variance", c.explained_variance},
           {"lambda", c.lambda},
           {"phi", c.phi},
           {"sweeps", c.sweeps},
           {"wall_seconds", c.wall_seconds},
           {"within_slack", c.within_slack},
           {"degenerate", c.degenerate},
           {"reduced_n", c.reduced_n}};
}

void from_json(const json& j, ReportComponent& c) {
  j.at("support").get_to(c.support);
  j.at("tokens").get_to(c.tokens);
  j.at("weights").get_to(c.weights);
  j.at("explained_variance").get_to(c.explained_variance);
  j.at("lambda").get_to(c.lambda);
  j.at("phi").get_to(c.phi);
  j.at("sweeps").get_to(c.sweeps);
  j.at("wall_seconds").get_to(c.wall_seconds);
  j.at("within_slack").get_to(c.within_slack);
  j.at("degenerate").get_to(c.degenerate);
  j.at("reduced_n").get_to(c.reduced_n);
}

void to_json(json& j, const PipelineReport& r) {
  json screening = json::array();
  for (const auto& s : r.screening) screening.push_back({{"original_n", s.original_n}, {"reduced_n", s.reduced_n}});
  j = json{{"num_docs", r.num_docs},          {"num_words", r.num_words},   {"working_set", r.working_set},
           {"lambda_floor", r.lambda_floor},  {"components", r.components}, {"screening", screening},
           {"warnings", r.warnings}};
}

void from_json(const json& j, PipelineReport& r) {
  j.at("num_docs").get_to(r.num_docs);
  j.at("num_words").get_to(r.num_words);
  j.at("working_set").get_to(r.working_set);
  j.at("lambda_floor").get_to(r.lambda_floor);
  j.at("components").get_to(r.components);
  r.screening.clear();
  for (const auto& s : j.at("screening"))
    r.screening.push_back({s.at("original_n").get<std::uint64_t>(), s.at("reduced_n").get<std::uint64_t>()});
  j.at("warnings").get_to(r.warnings);
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

FeatureStats load_or_compute_stats(const BagOfWordsCorpus& corpus, const std::optional<std::filesystem::path>& cache_dir,
                                   std::size_t threads, bool* from_cache) {
  if (from_cache) *from_cache = false;
  if (!cache_dir) return compute_variances(corpus, {threads, {}});
  const std::uint64_t hash = corpus.encoding() == CorpusEncoding::kBinary ? corpus.source_hash()
                                                                          : content_hash(corpus.path());
  std::filesystem::create_directories(*cache_dir);
  const auto path = *cache_dir / ("stats-" + hex64(hash) + ".txt");
  if (std::filesystem::exists(path)) {
    if (auto cached = read_stats_cache(path, hash)) {
      if (cached->num_features == corpus.num_words() && cached->num_docs == corpus.num_docs()) {
        if (from_cache) *from_cache = true;
        return std::move(*cached);
      }
    }
  }
  FeatureStats stats = compute_variances(corpus, {threads, {}});
  write_stats_cache(stats, hash, path);
  return stats;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void run_rounds(const CovarianceMatrix& full, const PipelineOptions& options, const Vocabulary* vocab,
                std::uint64_t original_n, PipelineReport& report) {
  SearchOptions search = options.search;
  search.threads = options.threads;
  search.lambda_floor = std::max(search.lambda_floor, report.lambda_floor);

  std::vector<FeatureId> removed;
  for (std::size_t round = 0; round < options.components; ++round) {
    const CovarianceMatrix sigma = full.without(removed);
    if (sigma.order() == 0 || !(sigma.diagonal().maxCoeff() > search.lambda_floor)) {
      report.warnings.push_back("dictionary exhausted after " + std::to_string(round) + " of " +
                                std::to_string(options.components) + " components");
      break;
    }
    const auto started = std::chrono::steady_clock::now();
    const SearchResult found = search_lambda(sigma, options.cardinality, options.solver, search);
    const double elapsed = seconds_since(started);
    if (found.component.cardinality == 0) {
      report.warnings.push_back("round " + std::to_string(round + 1) + " produced an empty component");
      break;
    }

    ReportComponent out;
    out.support = found.component.support;
    out.weights = found.component.weights;
    for (auto id : out.support) out.tokens.push_back(vocab ? vocab->token(id) : std::to_string(id));
    out.explained_variance = found.component.explained_variance;
    out.lambda = found.lambda;
    out.phi = found.component.phi_estimate;
    out.sweeps = found.sweeps;
    out.wall_seconds = options.solver.record_timing ? elapsed : 0.0;
    out.within_slack = found.within_slack;
    out.degenerate = found.component.degenerate;
    // Screening at the accepted lambda, against the full dictionary.
    out.reduced_n = static_cast<std::uint64_t>(found.reduced_n);
    if (!found.within_slack)
      report.warnings.push_back("component " + std::to_string(round + 1) + " has cardinality " +
                                std::to_string(out.support.size()) + ", outside the target slack");
    report.screening.push_back({original_n - removed.size(), out.reduced_n});
    removed.insert(removed.end(), out.support.begin(), out.support.end());
    report.components.push_back(std::move(out));
  }
}

}  // namespace

PipelineReport run_components(const std::filesystem::path& docword, const PipelineOptions& options) {
  options.solver.validate();
  if (options.components < 1 || options.cardinality < 1)
    throw InfeasibleError("components and cardinality must be at least 1");
  if (options.working_set < 1) throw InfeasibleError("working set must hold at least one feature");

  BagOfWordsCorpus corpus = parse_docword(docword);
  std::optional<Vocabulary> vocab;
  if (options.vocab) vocab = load_vocab(*options.vocab, corpus.num_words());

  const FeatureStats stats = load_or_compute_stats(corpus, options.cache_dir, options.threads);

  // The Gram pass reads the binary triple cache when one is available.
  if (options.cache_dir && corpus.encoding() == CorpusEncoding::kText) {
    const std::uint64_t hash = content_hash(corpus.path());
    const auto triples = *options.cache_dir / ("triples-" + hex64(hash) + ".bin");
    bool usable = false;
    if (std::filesystem::exists(triples)) {
      try {
        const BagOfWordsCorpus cached = parse_docword(triples);
        usable = cached.encoding() == CorpusEncoding::kBinary && cached.source_hash() == hash &&
                 cached.num_docs() == corpus.num_docs() && cached.num_words() == corpus.num_words() &&
                 cached.nnz() == corpus.nnz();
      } catch (const FormatError&) {
        usable = false;
      }
    }
    if (!usable) write_triple_cache(corpus, hash, triples);
    corpus = parse_docword(triples);
  }

  PipelineReport report;
  report.num_docs = stats.num_docs;
  report.num_words = stats.num_features;

  std::vector<FeatureId> kept;
  for (auto id : stats.sorted_order) {
    if (kept.size() == options.working_set) break;
    if (!(stats.variance_of(id) > 0.0)) break;
    kept.push_back(id);
  }
  if (kept.empty()) throw InfeasibleError("every feature has zero variance");
  report.working_set = kept.size();
  report.lambda_floor = lambda_for_size(stats, kept.size());

  const CovarianceMatrix sigma =
      gram_accumulate(corpus, kept, stats, {options.threads, std::max<std::uint64_t>(options.working_set, 1)});
  run_rounds(sigma, options, vocab ? &*vocab : nullptr, stats.num_features, report);
  return report;
}

PipelineReport run_components(const CovarianceMatrix& sigma, const PipelineOptions& options, const Vocabulary* vocab) {
  options.solver.validate();
  if (options.components < 1 || options.cardinality < 1)
    throw InfeasibleError("components and cardinality must be at least 1");
  PipelineReport report;
  report.num_docs = sigma.sample_count();
  report.num_words = static_cast<std::uint64_t>(sigma.order());
  report.working_set = report.num_words;
  run_rounds(sigma, options, vocab, report.num_words, report);
  return report;
}

void write_report_table(const PipelineReport& report, std::ostream& os) {
  // Wall times are only known when timing was recorded.
  const bool timed = std::any_of(report.components.begin(), report.components.end(),
                                 [](const ReportComponent& c) { return c.wall_seconds > 0.0; });
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-4s %-12s %-6s %-5s %-10s ", "#", "lambda", "sweeps", "card", "reduced_n");
  os << buf;
  if (timed) {
    std::snprintf(buf, sizeof buf, "%-9s ", "seconds");
    os << buf;
  }
  os << "tokens\n";
  for (std::size_t k = 0; k < report.components.size(); ++k) {
    const auto& c = report.components[k];
    std::string tokens;
    for (const auto& t : c.tokens) tokens += (tokens.empty() ? "" : " ") + t;
    std::snprintf(buf, sizeof buf, "%-4zu %-12.6g %-6d %-5zu %-10llu ", k + 1, c.lambda, c.sweeps, c.support.size(),
                  static_cast<unsigned long long>(c.reduced_n));
    os << buf;
    if (timed) {
      std::snprintf(buf, sizeof buf, "%-9.3f ", c.wall_seconds);
      os << buf;
    }
    os << tokens << '\n';
  }
  for (const auto& w : report.warnings) os << "warning: " << w << '\n';
}

void write_variance_csv(const FeatureStats& stats, std::ostream& os) {
  char buf[96];
  os << "rank,feature_id,variance\n";
  for (std::size_t r = 0; r < stats.sorted_order.size(); ++r) {
    const FeatureId id = stats.sorted_order[r];
    std::snprintf(buf, sizeof buf, "%zu,%u,%.17g\n", r + 1, id, stats.variance_of(id));
    os << buf;
  }
}

}  // namespace sparsepca
