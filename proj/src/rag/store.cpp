#include "threedify/rag/store.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

namespace threedify::rag {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_alnum(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

Span trim(std::string_view text, Span s) {
  while (s.begin < s.end && is_space(text[s.begin])) ++s.begin;
  while (s.end > s.begin && is_space(text[s.end - 1])) --s.end;
  return s;
}

bool utf8_continuation(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }

void hard_split(std::string_view text, Span s, std::size_t max, std::vector<Span>& out) {
  std::size_t pos = s.begin;
  while (pos < s.end) {
    std::size_t end = std::min(s.end, pos + max);
    while (end < s.end && end > pos && utf8_continuation(text[end])) --end;
    if (end == pos) {
      end = pos + 1;
      while (end < s.end && utf8_continuation(text[end])) ++end;
    }
    const auto piece = trim(text, {pos, end});
    if (piece.size() > 0) out.push_back(piece);
    pos = end;
  }
}

/// Sentences of `s`, with overlong sentences hard-split, all within max.
std::vector<Span> bounded_units(std::string_view text, Span s, std::size_t max) {
  std::vector<Span> units;
  for (const auto& sentence : sentence_spans(text, s)) {
    if (sentence.size() <= max) {
      units.push_back(sentence);
    } else {
      hard_split(text, sentence, max, units);
    }
  }
  return units;
}

std::vector<Span> pack(const std::vector<Span>& units, std::size_t max) {
  std::vector<Span> groups;
  for (const auto& u : units) {
    if (!groups.empty() && u.end - groups.back().begin <= max) {
      groups.back().end = u.end;
    } else {
      groups.push_back(u);
    }
  }
  return groups;
}

std::string padded(std::size_t n, int width) {
  auto s = std::to_string(n);
  if (static_cast<int>(s.size()) < width) s.insert(0, width - s.size(), '0');
  return s;
}

json span_json(Span s) { return json::array({s.begin, s.end}); }
Span span_from(const json& j) { return {j.at(0).get<std::size_t>(), j.at(1).get<std::size_t>()}; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (is_alnum(c)) {
      current += static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Embedding HashEmbedder::embed(std::string_view text) const {
  Embedding v(kEmbeddingDim, 0.0);
  for (const auto& token : tokenize(text)) v[fnv1a_64(token) % kEmbeddingDim] += 1.0;
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

double cosine(const Embedding& a, const Embedding& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

std::vector<Span> paragraph_spans(std::string_view text) {
  std::vector<Span> paragraphs;
  std::optional<Span> current;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    const std::size_t line_end = nl == std::string_view::npos ? text.size() : nl;
    const auto line = trim(text, {pos, line_end});
    if (line.size() == 0) {
      if (current) paragraphs.push_back(trim(text, *current));
      current.reset();
    } else if (current) {
      current->end = line_end;
    } else {
      current = Span{pos, line_end};
    }
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
  }
  if (current) paragraphs.push_back(trim(text, *current));
  return paragraphs;
}

std::vector<Span> sentence_spans(std::string_view text, Span within) {
  std::vector<Span> sentences;
  std::size_t start = within.begin;
  for (std::size_t i = within.begin; i < within.end; ++i) {
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == within.end || is_space(text[i + 1]))) {
      const auto s = trim(text, {start, i + 1});
      if (s.size() > 0) sentences.push_back(s);
      start = i + 1;
    }
  }
  const auto rest = trim(text, {start, within.end});
  if (rest.size() > 0) sentences.push_back(rest);
  return sentences;
}

std::vector<Span> split_parents(std::string_view text, std::size_t parent_max_chars) {
  std::vector<Span> units;
  for (const auto& p : paragraph_spans(text)) {
    if (p.size() <= parent_max_chars) {
      units.push_back(p);
    } else {
      for (const auto& piece : pack(bounded_units(text, p, parent_max_chars), parent_max_chars)) units.push_back(piece);
    }
  }
  return pack(units, parent_max_chars);
}

std::vector<Span> split_children(std::string_view text, Span parent, std::size_t child_max_chars) {
  return pack(bounded_units(text, parent, child_max_chars), child_max_chars);
}

std::string IngestStats::str() const {
  return "documents=" + std::to_string(documents) + " parents=" + std::to_string(parents) +
         " children=" + std::to_string(children);
}

Index::Index(ChunkConfig config, std::shared_ptr<const Embedder> embedder)
    : config_(config), embedder_(embedder ? std::move(embedder) : std::make_shared<const HashEmbedder>()) {
  if (config_.child_max_chars == 0 || config_.parent_max_chars <= config_.child_max_chars) {
    throw RagError("chunk sizes need parent_max_chars > child_max_chars > 0");
  }
}

IngestStats Index::ingest(const std::string& doc_id, std::string_view text) {
  if (std::find(doc_ids_.begin(), doc_ids_.end(), doc_id) != doc_ids_.end()) {
    throw RagError("document '" + doc_id + "' already ingested");
  }
  doc_ids_.push_back(doc_id);
  IngestStats stats{1, 0, 0};
  for (const auto& ps : split_parents(text, config_.parent_max_chars)) {
    ParentChunk parent{doc_id + "#p" + padded(stats.parents, 6), doc_id, std::string(text.substr(ps.begin, ps.size())),
                       ps};
    std::size_t child_no = 0;
    for (const auto& cs : split_children(text, ps, config_.child_max_chars)) {
      ChildChunk child;
      child.id = parent.id + ".c" + padded(child_no++, 4);
      child.parent_id = parent.id;
      child.text = std::string(text.substr(cs.begin, cs.size()));
      child.span = cs;
      child.embedding = embedder_->embed(child.text);
      children_.push_back(std::move(child));
      child_parent_.push_back(parents_.size());
      ++stats.children;
    }
    parents_.push_back(std::move(parent));
    ++stats.parents;
  }
  return stats;
}

IngestStats Index::stats() const { return {doc_ids_.size(), parents_.size(), children_.size()}; }

std::vector<RetrievalHit> Index::query(std::string_view text, std::size_t k) const {
  if (k == 0) throw RagError("k must be at least 1");
  if (parents_.empty()) return {};
  const auto q = embedder_->embed(text);
  std::vector<double> best(parents_.size(), -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> best_child(parents_.size(), 0);
  for (std::size_t c = 0; c < children_.size(); ++c) {
    const double score = cosine(q, children_[c].embedding);
    const auto p = child_parent_[c];
    if (score > best[p]) {
      best[p] = score;
      best_child[p] = c;
    }
  }
  std::vector<std::size_t> order;
  for (std::size_t p = 0; p < parents_.size(); ++p) {
    if (best[p] > -std::numeric_limits<double>::infinity()) order.push_back(p);
  }
  const auto take = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (best[a] != best[b]) return best[a] > best[b];
                      return parents_[a].id < parents_[b].id;
                    });
  std::vector<RetrievalHit> hits;
  for (std::size_t i = 0; i < take; ++i) {
    const auto p = order[i];
    hits.push_back({parents_[p], best[p], children_[best_child[p]].id});
  }
  return hits;
}

json Index::to_json() const {
  json parents = json::array();
  for (const auto& p : parents_) {
    parents.push_back({{"id", p.id}, {"doc_id", p.doc_id}, {"text", p.text}, {"span", span_json(p.span)}});
  }
  json children = json::array();
  for (const auto& c : children_) {
    children.push_back({{"id", c.id},
                        {"parent_id", c.parent_id},
                        {"text", c.text},
                        {"span", span_json(c.span)},
                        {"embedding", c.embedding}});
  }
  return {{"schema", kIndexSchema},
          {"embedder", embedder_->name()},
          {"dimension", kEmbeddingDim},
          {"config", {{"parent_max_chars", config_.parent_max_chars}, {"child_max_chars", config_.child_max_chars}}},
          {"documents", doc_ids_},
          {"parents", std::move(parents)},
          {"children", std::move(children)}};
}

Index Index::from_json(const json& doc) {
  try {
    if (doc.at("schema") != kIndexSchema) {
      throw RagError("unsupported index schema " + doc.at("schema").dump());
    }
    Index index({doc.at("config").at("parent_max_chars").get<std::size_t>(),
                 doc.at("config").at("child_max_chars").get<std::size_t>()});
    if (doc.at("embedder") != index.embedder_->name() || doc.at("dimension") != kEmbeddingDim) {
      throw RagError("index was built with a different embedder");
    }
    index.doc_ids_ = doc.at("documents").get<std::vector<std::string>>();
    std::map<std::string, std::size_t> parent_index;
    for (const auto& p : doc.at("parents")) {
      parent_index[p.at("id")] = index.parents_.size();
      index.parents_.push_back({p.at("id"), p.at("doc_id"), p.at("text"), span_from(p.at("span"))});
    }
    for (const auto& c : doc.at("children")) {
      ChildChunk child{c.at("id"), c.at("parent_id"), c.at("text"), span_from(c.at("span")),
                       c.at("embedding").get<Embedding>()};
      auto it = parent_index.find(child.parent_id);
      if (it == parent_index.end()) throw RagError("child '" + child.id + "' has no parent");
      if (child.embedding.size() != kEmbeddingDim) throw RagError("child '" + child.id + "' has a bad embedding");
      index.child_parent_.push_back(it->second);
      index.children_.push_back(std::move(child));
    }
    return index;
  } catch (const json::exception& e) {
    throw RagError(std::string("malformed index: ") + e.what());
  }
}

void Index::save(const std::filesystem::path& path) const {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw RagError("cannot write " + tmp.string());
    out << to_json().dump() << '\n';
    if (!out) throw RagError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Index Index::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RagError("cannot read " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw RagError(std::string("malformed index: ") + e.what());
  }
}

std::shared_ptr<const Index> IndexHolder::get() const {
  std::lock_guard lock(mu_);
  return current_;
}

void IndexHolder::replace(std::shared_ptr<const Index> next) {
  std::lock_guard lock(mu_);
  current_ = std::move(next);
}

std::string format_hits(const std::vector<RetrievalHit>& hits) {
  std::string out;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (i) out += "\n\n";
    out += "[" + std::to_string(i + 1) + "] " + hits[i].parent.id + " (score " + format_number(hits[i].score) +
           ")\n" + hits[i].parent.text;
  }
  return out;
}

Index ingest_path(const std::filesystem::path& root, ChunkConfig config) {
  namespace fs = std::filesystem;
  std::vector<std::pair<std::string, fs::path>> files;
  if (fs::is_regular_file(root)) {
    files.emplace_back(root.filename().generic_string(), root);
  } else if (fs::is_directory(root)) {
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (!entry.is_regular_file()) continue;
      const auto ext = entry.path().extension();
      if (ext != ".md" && ext != ".txt") continue;
      files.emplace_back(fs::relative(entry.path(), root).generic_string(), entry.path());
    }
  } else {
    throw RagError("no such file or directory: " + root.string());
  }
  std::sort(files.begin(), files.end());
  Index index(config);
  for (const auto& [id, path] : files) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    index.ingest(id, buffer.str());
  }
  return index;
}

}  // namespace threedify::rag
