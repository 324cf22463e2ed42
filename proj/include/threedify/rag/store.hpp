#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "threedify/common/canonical.hpp"

namespace threedify::rag {

inline constexpr std::size_t kEmbeddingDim = 64;
inline constexpr std::string_view kIndexSchema = "ragindex/1";

using Embedding = std::vector<double>;

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Embedding embed(std::string_view text) const = 0;
  virtual std::string name() const = 0;
};

/// Lowercased ASCII alphanumeric runs, each adding 1 at FNV-1a-64(token) mod
/// 64, then L2-normalized. Text without tokens maps to the zero vector.
class HashEmbedder final : public Embedder {
 public:
  Embedding embed(std::string_view text) const override;
  std::string name() const override { return "fnv1a64-mod64"; }
};

std::vector<std::string> tokenize(std::string_view text);

/// dot(a, b) / sqrt(dot(a, a) * dot(b, b)), 0 when either side is zero.
double cosine(const Embedding& a, const Embedding& b);

/// Half-open byte range.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  friend bool operator==(const Span&, const Span&) = default;
};

/// Paragraphs (text between blank lines) with surrounding whitespace trimmed.
std::vector<Span> paragraph_spans(std::string_view text);
/// Sentences end after '.', '!' or '?' followed by whitespace or the end.
std::vector<Span> sentence_spans(std::string_view text, Span within);

/// Greedy packing of units into spans of at most max_chars (measured from the
/// first unit's begin to the last unit's end). Units longer than max_chars
/// are first cut at sentence boundaries, then hard-split.
std::vector<Span> split_parents(std::string_view text, std::size_t parent_max_chars);
std::vector<Span> split_children(std::string_view text, Span parent, std::size_t child_max_chars);

struct ChunkConfig {
  std::size_t parent_max_chars = 1200;
  std::size_t child_max_chars = 200;
};

struct ParentChunk {
  std::string id;
  std::string doc_id;
  std::string text;
  Span span;
};

struct ChildChunk {
  std::string id;
  std::string parent_id;
  std::string text;
  Span span;  // within the document
  Embedding embedding;
};

struct RetrievalHit {
  ParentChunk parent;
  double score = 0.0;
  std::string best_child_id;
};

struct IngestStats {
  std::size_t documents = 0;
  std::size_t parents = 0;
  std::size_t children = 0;
  std::string str() const;
};

class RagError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Immutable once built; queries are read-only and may run concurrently.
class Index {
 public:
  explicit Index(ChunkConfig config = {}, std::shared_ptr<const Embedder> embedder = nullptr);

  /// Adds one document. An empty or whitespace-only document adds nothing.
  IngestStats ingest(const std::string& doc_id, std::string_view text);

  /// Top-k parents by best child cosine, ordered by (score desc, parent id asc).
  std::vector<RetrievalHit> query(std::string_view text, std::size_t k) const;

  const std::vector<ParentChunk>& parents() const { return parents_; }
  const std::vector<ChildChunk>& children() const { return children_; }
  const ChunkConfig& config() const { return config_; }
  const Embedder& embedder() const { return *embedder_; }
  IngestStats stats() const;

  json to_json() const;
  static Index from_json(const json& document);
  /// Writes to a temporary sibling and renames over `path`.
  void save(const std::filesystem::path& path) const;
  static Index load(const std::filesystem::path& path);

 private:
  ChunkConfig config_;
  std::shared_ptr<const Embedder> embedder_;
  std::vector<ParentChunk> parents_;
  std::vector<ChildChunk> children_;
  std::vector<std::size_t> child_parent_;  // index into parents_
  std::vector<std::string> doc_ids_;
};

/// Holds the live index; re-ingest builds a fresh Index and swaps it in.
class IndexHolder {
 public:
  std::shared_ptr<const Index> get() const;
  void replace(std::shared_ptr<const Index> next);

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const Index> current_ = std::make_shared<const Index>();
};

/// Plain-text hit list used as the retrieval node's output.
std::string format_hits(const std::vector<RetrievalHit>& hits);

/// Ingests every regular file under `root` (sorted by relative path, which
/// becomes the doc id); `root` may also be a single file.
Index ingest_path(const std::filesystem::path& root, ChunkConfig config);

}  // namespace threedify::rag
