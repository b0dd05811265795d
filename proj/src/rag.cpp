#include "scopecomp/rag.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <thread>

namespace scopecomp {

static_assert(std::endian::native == std::endian::little,
              "index serialization assumes a little-endian host");

// ---------------------------------------------------------------------------
// Embedders

EmbeddingVector Embedder::embed(const std::string& text) {
  auto out = embed_batch({text});
  if (out.size() != 1) throw EmbeddingServiceUnavailable("embedder returned no vector");
  return std::move(out.front());
}

std::vector<std::string> Embedder::take_diagnostics() {
  std::lock_guard lock(diag_mu_);
  return std::exchange(diagnostics_, {});
}

void Embedder::note(std::string message) {
  std::lock_guard lock(diag_mu_);
  diagnostics_.push_back(std::move(message));
}

std::string HashingEmbedder::id() const {
  return "builtin-ngram" + std::to_string(kNgram) + "-d" + std::to_string(dim_);
}

EmbeddingVector HashingEmbedder::embed_one(std::string_view text) {
  EmbeddingVector v;
  v.values.assign(dim_, 0.0f);
  v.embedder_id = id();

  std::string collapsed;
  collapsed.reserve(text.size());
  bool in_space = false;
  for (char c : text) {
    bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (space) {
      if (!in_space) collapsed += ' ';
      in_space = true;
    } else {
      collapsed += c;
      in_space = false;
    }
  }
  if (collapsed.empty()) {
    note("empty text embedded as the zero vector");
    return v;
  }

  auto bump = [&](std::string_view gram) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (unsigned char c : gram) {
      h ^= c;
      h *= 1099511628211ull;
    }
    v.values[h % dim_] += 1.0f;
  };
  if (collapsed.size() < kNgram) {
    bump(collapsed);
  } else {
    for (std::size_t i = 0; i + kNgram <= collapsed.size(); ++i) {
      bump(std::string_view(collapsed).substr(i, kNgram));
    }
  }

  double sq = 0;
  for (float x : v.values) sq += static_cast<double>(x) * x;
  double norm = std::sqrt(sq);
  for (float& x : v.values) x = static_cast<float>(x / norm);
  v.normalized = true;
  return v;
}

std::vector<EmbeddingVector> HashingEmbedder::embed_batch(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

RemoteEmbedder::RemoteEmbedder(std::string url) : RemoteEmbedder(std::move(url), Options{}) {}

RemoteEmbedder::RemoteEmbedder(std::string url, Options opts)
    : url_(std::move(url)),
      endpoint_(Endpoint::parse(url_)),
      opts_(std::move(opts)),
      dim_(opts_.expected_dimension) {
  if (opts_.batch_size == 0) opts_.batch_size = 1;
  if (opts_.max_in_flight == 0) opts_.max_in_flight = 1;
}

std::vector<EmbeddingVector> RemoteEmbedder::request(const std::vector<std::string>& texts) {
  Json reply;
  try {
    reply = post_json(endpoint_, "/embed", Json{{"texts", texts}}, opts_.timeout, opts_.client);
  } catch (const ClientError& e) {
    throw EmbeddingServiceUnavailable(e.what());
  }
  if (!reply.is_object() || !reply.contains("vectors") || !reply["vectors"].is_array()) {
    throw EmbeddingServiceUnavailable("embedding response lacks a 'vectors' array");
  }
  const auto& vectors = reply["vectors"];
  if (vectors.size() != texts.size()) {
    throw EmbeddingServiceUnavailable("embedding service returned " +
                                      std::to_string(vectors.size()) + " vectors for " +
                                      std::to_string(texts.size()) + " texts");
  }
  std::size_t reported = reply.value("dim", std::size_t{0});
  {
    std::lock_guard lock(dim_mu_);
    if (dim_ == 0) dim_ = reported != 0 ? reported : (vectors.empty() ? 0 : vectors[0].size());
    if (reported != 0 && reported != dim_) {
      throw DimensionMismatch("embedding service reports dim " + std::to_string(reported) +
                              ", expected " + std::to_string(dim_));
    }
  }
  std::vector<EmbeddingVector> out;
  out.reserve(vectors.size());
  for (const auto& row : vectors) {
    if (!row.is_array() || row.size() != dim_) {
      throw DimensionMismatch("embedding of length " + std::to_string(row.size()) +
                              ", expected " + std::to_string(dim_));
    }
    EmbeddingVector v;
    v.embedder_id = id();
    v.values = row.get<std::vector<float>>();
    double sq = 0;
    for (float x : v.values) sq += static_cast<double>(x) * x;
    v.normalized = std::abs(std::sqrt(sq) - 1.0) <= 1e-5;
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(const std::vector<std::string>& texts) {
  const std::size_t n_chunks = (texts.size() + opts_.batch_size - 1) / opts_.batch_size;
  std::vector<std::vector<EmbeddingVector>> chunks(n_chunks);
  std::vector<std::exception_ptr> errors(n_chunks);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t c = next++; c < n_chunks; c = next++) {
      auto begin = texts.begin() + static_cast<std::ptrdiff_t>(c * opts_.batch_size);
      auto end = texts.begin() +
                 static_cast<std::ptrdiff_t>(std::min(texts.size(), (c + 1) * opts_.batch_size));
      try {
        chunks[c] = request(std::vector<std::string>(begin, end));
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(opts_.max_in_flight, n_chunks); ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (auto& chunk : chunks) std::move(chunk.begin(), chunk.end(), std::back_inserter(out));
  return out;
}

std::unique_ptr<Embedder> make_embedder(std::string_view spec) {
  if (spec == "builtin") return std::make_unique<HashingEmbedder>();
  if (spec.rfind("remote:", 0) == 0) {
    return std::make_unique<RemoteEmbedder>(std::string(spec.substr(7)));
  }
  throw std::invalid_argument("embedder must be 'builtin' or 'remote:<url>', got '" +
                              std::string(spec) + "'");
}

std::unique_ptr<Embedder> embedder_for_index(const std::string& embedder_id) {
  if (embedder_id.rfind("remote:", 0) == 0) return make_embedder(embedder_id);
  const std::string prefix = "builtin-ngram" + std::to_string(HashingEmbedder::kNgram) + "-d";
  if (embedder_id.rfind(prefix, 0) == 0) {
    std::size_t dim = 0;
    auto digits = std::string_view(embedder_id).substr(prefix.size());
    auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), dim);
    if (ec == std::errc() && end == digits.data() + digits.size() && dim > 0) {
      return std::make_unique<HashingEmbedder>(dim);
    }
  }
  throw std::invalid_argument("index was built with an unknown embedder: " + embedder_id);
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("cosine of vectors with dims " + std::to_string(a.size()) + " and " +
                            std::to_string(b.size()));
  }
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Index

void VectorIndex::add(std::string pair_id, const EmbeddingVector& key, std::string value) {
  if (key.values.size() != dim_) {
    throw DimensionMismatch("key for " + pair_id + " has dim " + std::to_string(key.values.size()) +
                            ", index has " + std::to_string(dim_));
  }
  if (by_id_.contains(pair_id)) throw std::invalid_argument("duplicate pair_id " + pair_id);
  double sq = 0;
  for (float x : key.values) sq += static_cast<double>(x) * x;
  by_id_.emplace(pair_id, ids_.size());
  ids_.push_back(std::move(pair_id));
  keys_.insert(keys_.end(), key.values.begin(), key.values.end());
  norms_.push_back(std::sqrt(sq));
  values_.push_back(std::move(value));
}

const std::string* VectorIndex::value_of(std::string_view pair_id) const {
  auto it = by_id_.find(std::string(pair_id));
  return it == by_id_.end() ? nullptr : &values_[it->second];
}

namespace {

constexpr char kMagic[8] = {'S', 'C', 'I', 'D', 'X', '\0', '\0', '\1'};
constexpr std::uint32_t kIndexVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_str(std::string& out, std::string_view s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_str() {
    auto len = get<std::uint32_t>();
    need(len);
    std::string s(bytes_.substr(pos_, len));
    pos_ += len;
    return s;
  }
  std::string_view raw(std::size_t len) {
    need(len);
    auto v = bytes_.substr(pos_, len);
    pos_ += len;
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t len) const {
    if (bytes_.size() - pos_ < len) throw std::runtime_error("truncated index file");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string VectorIndex::serialize() const {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kIndexVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
  put<std::uint64_t>(out, ids_.size());
  put_str(out, embedder_id_);
  for (const auto& id : ids_) put_str(out, id);
  out.append(reinterpret_cast<const char*>(keys_.data()), keys_.size() * sizeof(float));
  for (const auto& v : values_) put_str(out, v);
  return out;
}

VectorIndex VectorIndex::deserialize(std::string_view bytes) {
  Reader r(bytes);
  if (r.raw(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) {
    throw std::runtime_error("not a vector index file");
  }
  auto version = r.get<std::uint32_t>();
  if (version != kIndexVersion) {
    throw std::runtime_error("unsupported index version " + std::to_string(version));
  }
  auto dim = r.get<std::uint32_t>();
  auto count = r.get<std::uint64_t>();
  VectorIndex index(dim, r.get_str());
  std::vector<std::string> ids(count);
  for (auto& id : ids) id = r.get_str();
  auto raw_keys = r.raw(count * dim * sizeof(float));
  EmbeddingVector key;
  key.values.resize(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::memcpy(key.values.data(), raw_keys.data() + i * dim * sizeof(float), dim * sizeof(float));
    index.add(std::move(ids[i]), key, r.get_str());
  }
  if (!r.done()) throw std::runtime_error("trailing bytes in index file");
  return index;
}

void VectorIndex::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
  return deserialize(read_file(path));
}

VectorIndex index_build(const std::vector<CompletionPair>& pairs, Embedder& embedder) {
  std::vector<std::string> queries;
  queries.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.kind != PairKind::kPrimary) {
      throw std::invalid_argument("index_build accepts primary pairs only; got " + p.pair_id);
    }
    if (p.query.empty()) throw std::invalid_argument("empty query for pair " + p.pair_id);
    queries.push_back(p.query);
  }
  std::vector<EmbeddingVector> keys;
  try {
    keys = embedder.embed_batch(queries);
  } catch (const std::exception& e) {
    // Re-embed one by one to name the offending pair.
    for (const auto& p : pairs) {
      try {
        embedder.embed(p.query);
      } catch (const std::exception& inner) {
        throw EmbeddingServiceUnavailable("embedding pair " + p.pair_id + ": " + inner.what());
      }
    }
    throw;
  }

  std::size_t dim = embedder.dimension();
  if (dim == 0 && !keys.empty()) dim = keys.front().values.size();
  VectorIndex index(dim, embedder.id());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    index.add(pairs[i].pair_id, keys[i], std::string(pairs[i].label_without_eot()));
  }
  return index;
}

KnnResult knn_search(const VectorIndex& index, const EmbeddingVector& query, std::size_t n) {
  if (query.values.size() != index.dimension()) {
    throw DimensionMismatch("query has dim " + std::to_string(query.values.size()) +
                            ", index has " + std::to_string(index.dimension()));
  }
  if (!query.embedder_id.empty() && query.embedder_id != index.embedder_id()) {
    throw std::invalid_argument("query embedded with '" + query.embedder_id +
                                "' but index was built with '" + index.embedder_id() + "'");
  }
  if (n == 0) throw std::invalid_argument("knn_search needs n >= 1");

  const std::size_t dim = index.dimension();
  double qsq = 0;
  for (float x : query.values) qsq += static_cast<double>(x) * x;
  const double qnorm = std::sqrt(qsq);

  KnnResult all;
  all.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    double sim = 0.0;
    double knorm = index.key_norm(i);
    if (qnorm != 0 && knorm != 0) {
      auto key = index.key(i);
      double dot = 0;
      for (std::size_t d = 0; d < dim; ++d) dot += static_cast<double>(query.values[d]) * key[d];
      sim = std::clamp(dot / (qnorm * knorm), -1.0, 1.0);
    }
    all.push_back({index.pair_id(i), sim});
  }
  auto better = [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.pair_id < b.pair_id;
  };
  const std::size_t k = std::min(n, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), better);
  all.resize(k);
  return all;
}

std::string frame_example(std::size_t rank, std::string_view value) {
  std::string block = "/* retrieved example " + std::to_string(rank) + " */\n";
  block += value;
  block += '\n';
  return block;
}

AugmentedPrompt augment_query(std::string_view query, const KnnResult& neighbors,
                              const VectorIndex& index, std::size_t n_used,
                              std::size_t budget_bytes) {
  AugmentedPrompt out;
  if (n_used > neighbors.size()) {
    out.diagnostics.push_back("requested " + std::to_string(n_used) + " neighbors, have " +
                              std::to_string(neighbors.size()));
    n_used = neighbors.size();
  }

  // blocks[0] is rank 1 (most similar); it sits next to the query.
  std::vector<std::string> blocks;
  for (std::size_t r = 0; r < n_used; ++r) {
    const std::string* value = index.value_of(neighbors[r].pair_id);
    if (value == nullptr) {
      out.diagnostics.push_back("neighbor " + neighbors[r].pair_id + " missing from index");
      continue;
    }
    blocks.push_back(frame_example(r + 1, *value));
  }

  std::size_t total = query.size();
  for (const auto& b : blocks) total += b.size();
  std::size_t keep = blocks.size();
  while (keep > 0 && total > budget_bytes) {
    total -= blocks[keep - 1].size();
    --keep;
  }
  if (keep < blocks.size()) {
    out.diagnostics.push_back("dropped " + std::to_string(blocks.size() - keep) +
                              " retrieved example(s) to fit " + std::to_string(budget_bytes) +
                              " bytes");
  }
  if (query.size() > budget_bytes) {
    out.diagnostics.push_back("query alone exceeds the prompt budget; sent unaugmented");
  }

  for (std::size_t i = keep; i > 0; --i) out.prompt += blocks[i - 1];
  out.prompt += query;
  out.neighbors_used = keep;
  return out;
}

}  // namespace scopecomp
