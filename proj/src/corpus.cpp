#include "sparsepca/corpus.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <string_view>

namespace sparsepca {

namespace {

constexpr std::array<char, 8> kTripleMagic = {'S', 'P', 'C', 'A', 'T', 'R', 'I', '1'};
constexpr std::uint32_t kTripleVersion = 1;
constexpr std::uint64_t kTripleHeaderBytes = 8 + 4 + 4 + 8 * 4;
constexpr std::uint64_t kTripleRecordBytes = 12;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_or_throw(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw FormatError(path.string() + ": cannot open file");
  return f;
}

void seek_or_throw(std::FILE* f, std::uint64_t offset, const std::filesystem::path& path) {
  if (std::fseek(f, static_cast<long>(offset), SEEK_SET) != 0)
    throw FormatError(path.string() + ": seek failed");
}

// Buffered line reader over a byte range. Memory is bounded by the buffer
// plus the longest line.
class LineReader {
 public:
  LineReader(std::FILE* file, std::uint64_t begin, std::uint64_t end)
      : file_(file), offset_(begin), end_(end), buffer_(1 << 20) {}

  // Next line without its terminator; false once the line would start at or
  // beyond the range end.
  bool next(std::string_view& line) {
    if (offset_ >= end_) return false;
    line_start_ = offset_;
    carry_.clear();
    for (;;) {
      if (head_ == tail_ && !refill()) {
        if (carry_.empty()) return false;
        offset_ += carry_.size();
        line = trim_cr(carry_);
        return true;
      }
      const char* begin = buffer_.data() + head_;
      const char* nl = static_cast<const char*>(std::memchr(begin, '\n', tail_ - head_));
      if (nl) {
        const std::size_t len = static_cast<std::size_t>(nl - begin);
        offset_ += carry_.size() + len + 1;
        if (carry_.empty()) {
          line = trim_cr(std::string_view(begin, len));
        } else {
          carry_.append(begin, len);
          line = trim_cr(carry_);
        }
        head_ += len + 1;
        return true;
      }
      carry_.append(begin, tail_ - head_);
      head_ = tail_;
    }
  }

  std::uint64_t line_start() const { return line_start_; }
  std::uint64_t offset() const { return offset_; }

 private:
  static std::string_view trim_cr(std::string_view s) {
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    return s;
  }

  bool refill() {
    head_ = 0;
    tail_ = std::fread(buffer_.data(), 1, buffer_.size(), file_);
    return tail_ > 0;
  }

  std::FILE* file_;
  std::uint64_t offset_;
  std::uint64_t end_;
  std::uint64_t line_start_ = 0;
  std::vector<char> buffer_;
  std::size_t head_ = 0;
  std::size_t tail_ = 0;
  std::string carry_;
};

// Parses exactly `N` unsigned integers separated by blanks.
template <std::size_t N>
bool parse_uints(std::string_view line, std::array<std::uint64_t, N>& out) {
  const char* p = line.data();
  const char* end = p + line.size();
  for (std::size_t k = 0; k < N; ++k) {
    while (p < end && (*p == ' ' || *p == '\t')) ++p;
    auto [next, ec] = std::from_chars(p, end, out[k]);
    if (ec != std::errc() || next == p) return false;
    p = next;
  }
  while (p < end && (*p == ' ' || *p == '\t')) ++p;
  return p == end;
}

std::string location(const std::filesystem::path& path, std::optional<std::uint64_t> line,
                     std::uint64_t byte) {
  if (line) return path.string() + ":" + std::to_string(*line);
  return path.string() + " (byte " + std::to_string(byte) + ")";
}

struct Triple {
  std::uint64_t doc = 0;
  std::uint64_t word = 0;
  std::uint64_t count = 0;
};

template <typename Where>
void validate_triple(const BagOfWordsCorpus& corpus, const Triple& t, Where&& where) {
  if (t.count < 1) throw FormatError(where() + ": count must be >= 1");
  if (t.doc < 1 || t.doc > corpus.num_docs())
    throw RangeError(where() + ": docID " + std::to_string(t.doc) + " outside [1, " +
                     std::to_string(corpus.num_docs()) + "]");
  if (t.word < 1 || t.word > corpus.num_words())
    throw RangeError(where() + ": wordID " + std::to_string(t.word) + " outside [1, " +
                     std::to_string(corpus.num_words()) + "]");
  if (t.count > UINT32_MAX) throw FormatError(where() + ": count overflows 32 bits");
}

// Groups consecutive triples into documents and forwards them.
class DocumentAssembler {
 public:
  explicit DocumentAssembler(const DocumentConsumer& consume) : consume_(consume) {}

  void push(const Triple& t, auto&& where) {
    if (summary_.triples > 0 && t.doc < current_)
      throw FormatError(where() + ": docID " + std::to_string(t.doc) + " after " +
                        std::to_string(current_) + " (ids must be non-decreasing)");
    if (summary_.triples == 0 || t.doc != current_) {
      flush();
      current_ = static_cast<DocId>(t.doc);
      if (summary_.docs_seen == 0) summary_.first_doc = current_;
    }
    entries_.push_back({static_cast<FeatureId>(t.word), static_cast<std::uint32_t>(t.count)});
    ++summary_.triples;
  }

  PassSummary finish() {
    flush();
    return summary_;
  }

 private:
  void flush() {
    if (entries_.empty()) return;
    summary_.max_document_entries = std::max<std::uint64_t>(summary_.max_document_entries, entries_.size());
    ++summary_.docs_seen;
    summary_.last_doc = current_;
    consume_(current_, entries_);
    entries_.clear();
  }

  const DocumentConsumer& consume_;
  std::vector<DocumentEntry> entries_;
  DocId current_ = 0;
  PassSummary summary_;
};

PassSummary stream_text(const BagOfWordsCorpus& corpus, const Shard& shard, const DocumentConsumer& consume) {
  auto file = open_or_throw(corpus.path());
  seek_or_throw(file.get(), shard.begin, corpus.path());
  LineReader reader(file.get(), shard.begin, shard.end);
  // Line numbers are only known when streaming from the first record.
  std::optional<std::uint64_t> line_no;
  if (shard.begin == corpus.data_offset()) line_no = 3;

  DocumentAssembler assembler(consume);
  std::string_view line;
  std::array<std::uint64_t, 3> v{};
  while (reader.next(line)) {
    if (line_no) ++*line_no;
    const auto where = [&] { return location(corpus.path(), line_no, reader.line_start()); };
    if (line.empty()) {
      // Trailing blank lines are tolerated; anything after them is not.
      std::string_view rest;
      while (reader.next(rest)) {
        if (line_no) ++*line_no;
        if (!rest.empty()) throw FormatError(where() + ": blank line inside data section");
      }
      break;
    }
    if (!parse_uints(line, v)) throw FormatError(where() + ": expected \"docID wordID count\"");
    const Triple t{v[0], v[1], v[2]};
    validate_triple(corpus, t, where);
    assembler.push(t, where);
  }
  return assembler.finish();
}

void read_exact(std::FILE* f, void* dst, std::size_t n, const std::filesystem::path& path) {
  if (std::fread(dst, 1, n, f) != n) throw FormatError(path.string() + ": truncated binary cache");
}

template <typename T>
T load_le(const unsigned char* p) {
  T v = 0;
  for (std::size_t k = 0; k < sizeof(T); ++k) v |= static_cast<T>(p[k]) << (8 * k);
  return v;
}

template <typename T>
void store_le(std::string& out, T v) {
  for (std::size_t k = 0; k < sizeof(T); ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

PassSummary stream_binary(const BagOfWordsCorpus& corpus, const Shard& shard, const DocumentConsumer& consume) {
  auto file = open_or_throw(corpus.path());
  seek_or_throw(file.get(), shard.begin, corpus.path());
  DocumentAssembler assembler(consume);
  std::vector<unsigned char> buf(kTripleRecordBytes * 65536);
  std::uint64_t pos = shard.begin;
  while (pos < shard.end) {
    const std::size_t want = static_cast<std::size_t>(std::min<std::uint64_t>(buf.size(), shard.end - pos));
    read_exact(file.get(), buf.data(), want, corpus.path());
    for (std::size_t off = 0; off < want; off += kTripleRecordBytes) {
      const Triple t{load_le<std::uint32_t>(&buf[off]), load_le<std::uint32_t>(&buf[off + 4]),
                     load_le<std::uint32_t>(&buf[off + 8])};
      const std::uint64_t at = pos + off;
      const auto where = [&] { return location(corpus.path(), std::nullopt, at); };
      validate_triple(corpus, t, where);
      assembler.push(t, where);
    }
    pos += want;
  }
  return assembler.finish();
}

std::uint64_t doc_at_binary(std::FILE* f, std::uint64_t pos, const std::filesystem::path& path) {
  unsigned char rec[kTripleRecordBytes];
  seek_or_throw(f, pos, path);
  read_exact(f, rec, sizeof rec, path);
  return load_le<std::uint32_t>(rec);
}

}  // namespace

PassSummary& PassSummary::operator+=(const PassSummary& other) {
  if (other.docs_seen > 0) {
    if (docs_seen == 0) first_doc = other.first_doc;
    last_doc = other.last_doc;
  }
  docs_seen += other.docs_seen;
  triples += other.triples;
  max_document_entries = std::max(max_document_entries, other.max_document_entries);
  return *this;
}

BagOfWordsCorpus parse_docword(const std::filesystem::path& path) {
  BagOfWordsCorpus corpus;
  corpus.path_ = path;
  std::error_code ec;
  corpus.file_size_ = std::filesystem::file_size(path, ec);
  if (ec) throw FormatError(path.string() + ": cannot open file");
  auto file = open_or_throw(path);

  std::array<char, 8> magic{};
  const std::size_t got = std::fread(magic.data(), 1, magic.size(), file.get());
  if (got == magic.size() && magic == kTripleMagic) {
    unsigned char hdr[kTripleHeaderBytes - 8];
    read_exact(file.get(), hdr, sizeof hdr, path);
    if (load_le<std::uint32_t>(hdr) != kTripleVersion)
      throw FormatError(path.string() + ": unsupported triple cache version");
    corpus.encoding_ = CorpusEncoding::kBinary;
    corpus.num_docs_ = load_le<std::uint64_t>(hdr + 8);
    corpus.num_words_ = load_le<std::uint64_t>(hdr + 16);
    corpus.nnz_ = load_le<std::uint64_t>(hdr + 24);
    corpus.source_hash_ = load_le<std::uint64_t>(hdr + 32);
    corpus.data_offset_ = kTripleHeaderBytes;
    if (corpus.file_size_ != kTripleHeaderBytes + corpus.nnz_ * kTripleRecordBytes)
      throw FormatError(path.string() + ": binary cache size does not match its header");
    if (corpus.num_docs_ == 0 || corpus.num_words_ == 0 || corpus.nnz_ == 0)
      throw FormatError(path.string() + ": header values must be positive");
    return corpus;
  }

  seek_or_throw(file.get(), 0, path);
  LineReader reader(file.get(), 0, corpus.file_size_);
  std::array<std::uint64_t, 1> value{};
  std::array<std::uint64_t, 3> header{};
  std::string_view line;
  for (std::size_t k = 0; k < 3; ++k) {
    const std::string where = path.string() + ":" + std::to_string(k + 1);
    if (!reader.next(line)) throw FormatError(where + ": missing header line");
    if (!parse_uints(line, value)) throw FormatError(where + ": expected a single integer");
    if (value[0] == 0) throw FormatError(where + ": header values must be positive");
    header[k] = value[0];
  }
  corpus.num_docs_ = header[0];
  corpus.num_words_ = header[1];
  corpus.nnz_ = header[2];
  corpus.data_offset_ = reader.offset();

  const std::string where = path.string() + ":4";
  if (!reader.next(line)) throw FormatError(where + ": missing first record");
  std::array<std::uint64_t, 3> v{};
  if (!parse_uints(line, v)) throw FormatError(where + ": expected \"docID wordID count\"");
  validate_triple(corpus, {v[0], v[1], v[2]}, [&] { return where; });
  return corpus;
}

std::vector<Shard> plan_shards(const BagOfWordsCorpus& corpus, std::size_t count) {
  const std::uint64_t begin = corpus.data_offset();
  const std::uint64_t end = corpus.file_size();
  std::vector<std::uint64_t> cuts{begin};
  if (count > 1 && end > begin) {
    auto file = open_or_throw(corpus.path());
    const bool binary = corpus.encoding() == CorpusEncoding::kBinary;
    const std::uint64_t records = (end - begin) / kTripleRecordBytes;
    for (std::size_t k = 1; k < count; ++k) {
      std::uint64_t cut;
      if (binary) {
        std::uint64_t r = records * k / count;
        if (r == 0) continue;
        const std::uint64_t d0 = doc_at_binary(file.get(), begin + (r - 1) * kTripleRecordBytes, corpus.path());
        while (r < records && doc_at_binary(file.get(), begin + r * kTripleRecordBytes, corpus.path()) == d0) ++r;
        cut = begin + r * kTripleRecordBytes;
      } else {
        const std::uint64_t target = begin + (end - begin) * k / count;
        if (target <= begin) continue;
        // Move to the first line starting at or after `target`.
        seek_or_throw(file.get(), target - 1, corpus.path());
        LineReader reader(file.get(), target - 1, end);
        std::string_view line;
        if (!reader.next(line)) continue;
        // Then past every line of the document found there.
        std::optional<std::uint64_t> doc;
        cut = end;
        std::array<std::uint64_t, 3> v{};
        while (reader.next(line)) {
          if (!parse_uints(line, v)) {
            cut = reader.line_start();
            break;
          }
          if (doc && v[0] != *doc) {
            cut = reader.line_start();
            break;
          }
          doc = v[0];
        }
      }
      if (cut > cuts.back() && cut < end) cuts.push_back(cut);
    }
  }
  std::vector<Shard> shards;
  for (std::size_t k = 0; k < cuts.size(); ++k)
    shards.push_back({cuts[k], k + 1 < cuts.size() ? cuts[k + 1] : end});
  return shards;
}

PassSummary stream_shard(const BagOfWordsCorpus& corpus, const Shard& shard, const DocumentConsumer& consume) {
  return corpus.encoding() == CorpusEncoding::kBinary ? stream_binary(corpus, shard, consume)
                                                       : stream_text(corpus, shard, consume);
}

PassSummary stream_documents(const BagOfWordsCorpus& corpus, const DocumentConsumer& consume) {
  const PassSummary summary = stream_shard(corpus, {corpus.data_offset(), corpus.file_size()}, consume);
  if (summary.triples != corpus.nnz())
    throw FormatError(corpus.path().string() + ": header declares " + std::to_string(corpus.nnz()) +
                      " triples but " + std::to_string(summary.triples) + " were read");
  return summary;
}

std::uint64_t content_hash(const std::filesystem::path& path) {
  auto file = open_or_throw(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::vector<unsigned char> buf(1 << 20);
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), file.get())) > 0) {
    for (std::size_t k = 0; k < n; ++k) {
      h ^= buf[k];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

void write_triple_cache(const BagOfWordsCorpus& corpus, std::uint64_t source_hash,
                        const std::filesystem::path& out) {
  const auto tmp = std::filesystem::path(out.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError(tmp.string() + ": cannot write triple cache");
    std::string header(kTripleMagic.begin(), kTripleMagic.end());
    store_le<std::uint32_t>(header, kTripleVersion);
    store_le<std::uint32_t>(header, 0);
    store_le<std::uint64_t>(header, corpus.num_docs());
    store_le<std::uint64_t>(header, corpus.num_words());
    store_le<std::uint64_t>(header, corpus.nnz());
    store_le<std::uint64_t>(header, source_hash);
    os.write(header.data(), static_cast<std::streamsize>(header.size()));

    std::string chunk;
    stream_documents(corpus, [&](DocId doc, std::span<const DocumentEntry> entries) {
      for (const auto& e : entries) {
        store_le<std::uint32_t>(chunk, doc);
        store_le<std::uint32_t>(chunk, e.word);
        store_le<std::uint32_t>(chunk, e.count);
      }
      if (chunk.size() >= (1u << 20)) {
        os.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
        chunk.clear();
      }
    });
    os.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
    if (!os) throw FormatError(tmp.string() + ": write failed");
  }
  std::filesystem::rename(tmp, out);
}

const std::string& Vocabulary::token(FeatureId id) const {
  if (id < 1 || id > tokens_.size())
    throw RangeError("word id " + std::to_string(id) + " outside vocabulary of size " +
                     std::to_string(tokens_.size()));
  return tokens_[id - 1];
}

Vocabulary load_vocab(const std::filesystem::path& path, std::uint64_t expected_words) {
  std::ifstream is(path);
  if (!is) throw FormatError(path.string() + ": cannot open vocabulary");
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      // Allow a trailing blank line only.
      if (is.peek() == std::char_traits<char>::eof()) break;
      throw FormatError(path.string() + ":" + std::to_string(tokens.size() + 1) + ": empty token");
    }
    tokens.push_back(line);
  }
  if (tokens.size() != expected_words)
    throw FormatError(path.string() + ": vocabulary has " + std::to_string(tokens.size()) +
                      " tokens but the corpus declares W=" + std::to_string(expected_words));
  return Vocabulary(std::move(tokens));
}

}  // namespace sparsepca
