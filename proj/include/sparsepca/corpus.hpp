#pragma once

// Streaming access to UCI bag-of-words corpora.
//
// A docword file is three header lines (D, W, NNZ) followed by NNZ triples
// "docID wordID count", 1-based, grouped by non-decreasing docID. The same
// logical content can be compiled into a binary triple cache, which
// `parse_docword` recognises by its magic bytes.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "sparsepca/errors.hpp"
#include "sparsepca/types.hpp"

namespace sparsepca {

enum class CorpusEncoding { kText, kBinary };

class BagOfWordsCorpus {
 public:
  BagOfWordsCorpus() = default;

  const std::filesystem::path& path() const { return path_; }
  std::uint64_t num_docs() const { return num_docs_; }
  std::uint64_t num_words() const { return num_words_; }
  std::uint64_t nnz() const { return nnz_; }
  CorpusEncoding encoding() const { return encoding_; }
  /// Byte offset of the first triple.
  std::uint64_t data_offset() const { return data_offset_; }
  /// Byte length of the whole file.
  std::uint64_t file_size() const { return file_size_; }
  /// Content hash stored in a binary cache header (0 for text files).
  std::uint64_t source_hash() const { return source_hash_; }

 private:
  friend BagOfWordsCorpus parse_docword(const std::filesystem::path& path);

  std::filesystem::path path_;
  std::uint64_t num_docs_ = 0;
  std::uint64_t num_words_ = 0;
  std::uint64_t nnz_ = 0;
  CorpusEncoding encoding_ = CorpusEncoding::kText;
  std::uint64_t data_offset_ = 0;
  std::uint64_t file_size_ = 0;
  std::uint64_t source_hash_ = 0;
};

struct DocumentEntry {
  FeatureId word = 0;
  std::uint32_t count = 0;
};

/// Called once per document present in the file, in file order.
using DocumentConsumer = std::function<void(DocId, std::span<const DocumentEntry>)>;

struct PassSummary {
  std::uint64_t docs_seen = 0;
  std::uint64_t triples = 0;
  /// Peak number of entries buffered for a single document.
  std::uint64_t max_document_entries = 0;
  DocId first_doc = 0;
  DocId last_doc = 0;

  PassSummary& operator+=(const PassSummary& other);
};

/// Half-open byte range [begin, end) starting at a document boundary.
struct Shard {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
};

/// Reads the header and validates the first record. Throws FormatError
/// (with line number) or RangeError.
BagOfWordsCorpus parse_docword(const std::filesystem::path& path);

/// Streams every document. Throws FormatError when the triple count at EOF
/// differs from the header's NNZ.
PassSummary stream_documents(const BagOfWordsCorpus& corpus, const DocumentConsumer& consume);

/// Splits the data section into at most `count` shards whose boundaries fall
/// between documents. Concatenating the shards covers the whole file.
std::vector<Shard> plan_shards(const BagOfWordsCorpus& corpus, std::size_t count);

/// Streams the documents of one shard. Does not check the global NNZ.
PassSummary stream_shard(const BagOfWordsCorpus& corpus, const Shard& shard,
                         const DocumentConsumer& consume);

/// 64-bit FNV-1a over the file's bytes.
std::uint64_t content_hash(const std::filesystem::path& path);

/// Writes the binary triple cache for `corpus`. Layout (little endian):
///   char[8]  magic "SPCATRI1"
///   u32      version (1)
///   u32      reserved (0)
///   u64      D, W, NNZ
///   u64      content hash of the source text file
///   NNZ x { u32 doc, u32 word, u32 count }
void write_triple_cache(const BagOfWordsCorpus& corpus, std::uint64_t source_hash,
                        const std::filesystem::path& out);

/// Vocabulary, 1-indexed by word id.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {}

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(FeatureId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
};

/// One token per line; throws FormatError if the line count differs from
/// `expected_words` or a token is empty.
Vocabulary load_vocab(const std::filesystem::path& path, std::uint64_t expected_words);

/// Runs one accumulator per shard and merges them in shard order.
///
/// `Acc` must be callable as `acc(DocId, std::span<const DocumentEntry>)` and
/// provide `merge(const Acc&)`. With `threads` > 1 the shards are consumed
/// concurrently; the merge order is fixed so the result only depends on the
/// accumulator's own associativity.
template <typename Acc, typename MakeAcc>
Acc reduce_documents(const BagOfWordsCorpus& corpus, std::size_t threads, MakeAcc make) {
  const auto shards = plan_shards(corpus, std::max<std::size_t>(1, threads));
  std::vector<Acc> partial;
  partial.reserve(shards.size());
  for (std::size_t k = 0; k < shards.size(); ++k) partial.push_back(make());
  std::vector<PassSummary> summaries(shards.size());
  std::vector<std::exception_ptr> errors(shards.size());

  auto run = [&](std::size_t k) {
    try {
      summaries[k] = stream_shard(corpus, shards[k], [&](DocId d, std::span<const DocumentEntry> e) {
        partial[k](d, e);
      });
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  if (shards.size() == 1) {
    run(0);
  } else {
    std::vector<std::jthread> workers;
    for (std::size_t k = 0; k < shards.size(); ++k) workers.emplace_back(run, k);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  PassSummary total;
  for (const auto& s : summaries) {
    if (s.docs_seen > 0 && total.docs_seen > 0 && s.first_doc <= total.last_doc)
      throw FormatError(corpus.path().string() + ": document ids decrease across shard boundary at doc " +
                        std::to_string(s.first_doc));
    total += s;
  }
  if (total.triples != corpus.nnz())
    throw FormatError(corpus.path().string() + ": header declares " + std::to_string(corpus.nnz()) +
                      " triples but " + std::to_string(total.triples) + " were read");
  for (std::size_t k = 1; k < partial.size(); ++k) partial[0].merge(partial[k]);
  return std::move(partial[0]);
}

}  // namespace sparsepca
