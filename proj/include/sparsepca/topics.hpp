#pragma once

// Synthetic bag-of-words corpora with planted topics.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sparsepca/types.hpp"

namespace sparsepca {

struct PlantedTopicsSpec {
  std::uint64_t num_docs = 10000;
  std::uint64_t num_words = 2000;
  std::size_t words_per_topic = 5;
  /// Poisson mean of a topic word in a document where the topic is active;
  /// one entry per topic.
  std::vector<double> topic_means{8.0, 7.0, 6.0, 5.0, 4.0};
  /// Probability that a topic is active in a document.
  double activity = 0.3;
  /// Expected number of distinct background words per document, count 1 each.
  double background_words = 20.0;
  std::uint64_t seed = 1;
};

struct PlantedTopics {
  /// Word ids of each topic, ascending; topics in the order of topic_means.
  std::vector<std::vector<FeatureId>> topics;
  std::uint64_t nnz = 0;
};

/// Writes a UCI docword file. Topic words are drawn without replacement from
/// the dictionary; documents with no entries are omitted from the file but
/// still counted in D. Deterministic per seed.
PlantedTopics write_planted_topics(const PlantedTopicsSpec& spec, const std::filesystem::path& docword);

/// Writes "w<id>" tokens, or "topic<t>_<k>" for planted words.
void write_topics_vocab(const PlantedTopicsSpec& spec, const PlantedTopics& planted,
                        const std::filesystem::path& vocab);

}  // namespace sparsepca
