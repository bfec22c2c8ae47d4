#include "sparsepca/topics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <string>

#include "sparsepca/errors.hpp"

namespace sparsepca {

PlantedTopics write_planted_topics(const PlantedTopicsSpec& spec, const std::filesystem::path& docword) {
  const std::size_t planted_words = spec.topic_means.size() * spec.words_per_topic;
  if (spec.num_docs < 1 || spec.num_words < 1) throw InfeasibleError("planted topics: D and W must be positive");
  if (planted_words >= spec.num_words)
    throw InfeasibleError("planted topics: the dictionary is too small for the planted words");
  if (!(spec.activity > 0.0 && spec.activity <= 1.0)) throw InfeasibleError("planted topics: activity must be in (0, 1]");
  if (spec.background_words < 0.0) throw InfeasibleError("planted topics: background_words must be nonnegative");

  std::mt19937_64 rng(spec.seed);
  std::vector<FeatureId> ids(spec.num_words);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<FeatureId>(i + 1);
  // Partial Fisher-Yates picks the planted words.
  for (std::size_t i = 0; i < planted_words; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, ids.size() - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  PlantedTopics out;
  std::vector<bool> is_planted(spec.num_words + 1, false);
  for (std::size_t t = 0; t < spec.topic_means.size(); ++t) {
    std::vector<FeatureId> topic(ids.begin() + static_cast<std::ptrdiff_t>(t * spec.words_per_topic),
                                 ids.begin() + static_cast<std::ptrdiff_t>((t + 1) * spec.words_per_topic));
    std::sort(topic.begin(), topic.end());
    for (auto w : topic) is_planted[w] = true;
    out.topics.push_back(std::move(topic));
  }
  std::vector<FeatureId> background;
  for (FeatureId w = 1; w <= spec.num_words; ++w)
    if (!is_planted[w]) background.push_back(w);

  const auto tmp = docword.string() + ".body";
  std::FILE* body = std::fopen(tmp.c_str(), "wb");
  if (!body) throw FormatError("cannot write " + tmp);
  std::bernoulli_distribution active(spec.activity);
  std::poisson_distribution<int> n_background(spec.background_words > 0.0 ? spec.background_words : 1.0);
  std::uniform_int_distribution<std::size_t> any_background(0, background.size() - 1);
  std::map<FeatureId, std::uint32_t> doc;
  for (std::uint64_t d = 1; d <= spec.num_docs; ++d) {
    doc.clear();
    for (std::size_t t = 0; t < out.topics.size(); ++t) {
      if (!active(rng)) continue;
      std::poisson_distribution<int> count(spec.topic_means[t]);
      for (auto w : out.topics[t])
        if (const int c = count(rng); c > 0) doc[w] = static_cast<std::uint32_t>(c);
    }
    const int extra = spec.background_words > 0.0 ? n_background(rng) : 0;
    for (int k = 0; k < extra; ++k) doc[background[any_background(rng)]] = 1;
    for (const auto& [w, c] : doc) std::fprintf(body, "%llu %u %u\n", static_cast<unsigned long long>(d), w, c);
    out.nnz += doc.size();
  }
  std::fclose(body);

  std::ofstream os(docword, std::ios::binary);
  if (!os) throw FormatError("cannot write " + docword.string());
  os << spec.num_docs << '\n' << spec.num_words << '\n' << out.nnz << '\n';
  std::ifstream is(tmp, std::ios::binary);
  os << is.rdbuf();
  is.close();
  os.close();
  std::filesystem::remove(tmp);
  if (!os) throw FormatError("write failed: " + docword.string());
  return out;
}

void write_topics_vocab(const PlantedTopicsSpec& spec, const PlantedTopics& planted,
                        const std::filesystem::path& vocab) {
  std::vector<std::string> tokens(spec.num_words);
  for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i] = "w" + std::to_string(i + 1);
  for (std::size_t t = 0; t < planted.topics.size(); ++t)
    for (std::size_t k = 0; k < planted.topics[t].size(); ++k)
      tokens[planted.topics[t][k] - 1] = "topic" + std::to_string(t + 1) + "_" + std::to_string(k + 1);
  std::ofstream os(vocab);
  if (!os) throw FormatError("cannot write " + vocab.string());
  for (const auto& tok : tokens) os << tok << '\n';
}

}  // namespace sparsepca
