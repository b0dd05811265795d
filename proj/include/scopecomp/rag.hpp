#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "scopecomp/client.hpp"
#include "scopecomp/pairs.hpp"

namespace scopecomp {

class EmbeddingServiceUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EmbeddingVector {
  std::vector<float> values;
  bool normalized = false;
  std::string embedder_id;  // producer; empty for hand-built vectors
};

class Embedder {
 public:
  virtual ~Embedder() = default;

  virtual std::string id() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) = 0;

  EmbeddingVector embed(const std::string& text);

  /// Messages about degenerate inputs (e.g. empty text) since the last call.
  std::vector<std::string> take_diagnostics();

 protected:
  void note(std::string message);

 private:
  std::mutex diag_mu_;
  std::vector<std::string> diagnostics_;
};

/// Offline embedder: counts of hashed byte trigrams over whitespace-collapsed
/// text, L2-normalized. A pure function of the text.
class HashingEmbedder : public Embedder {
 public:
  static constexpr std::size_t kDefaultDimension = 384;
  static constexpr std::size_t kNgram = 3;

  explicit HashingEmbedder(std::size_t dimension = kDefaultDimension) : dim_(dimension) {}

  std::string id() const override;
  std::size_t dimension() const override { return dim_; }
  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;

  EmbeddingVector embed_one(std::string_view text);

 private:
  std::size_t dim_;
};

/// Embedding service client:
///   POST /embed {"texts": [...]} -> {"vectors": [[...]...], "dim": D}
class RemoteEmbedder : public Embedder {
 public:
  struct Options {
    std::size_t expected_dimension = 0;  // 0: accept whatever the service reports first
    std::size_t batch_size = 32;
    std::size_t max_in_flight = 8;
    std::chrono::milliseconds timeout{60'000};
    ClientOptions client;
  };

  explicit RemoteEmbedder(std::string url);
  RemoteEmbedder(std::string url, Options opts);

  std::string id() const override { return "remote:" + url_; }
  std::size_t dimension() const override { return dim_; }
  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;

 private:
  std::vector<EmbeddingVector> request(const std::vector<std::string>& texts);

  std::string url_;
  Endpoint endpoint_;
  Options opts_;
  std::size_t dim_;
  std::mutex dim_mu_;
};

/// "builtin" or "remote:<url>".
std::unique_ptr<Embedder> make_embedder(std::string_view spec);

/// Recreates the embedder named by a VectorIndex's embedder_id, so queries
/// are embedded the same way as the keys.
std::unique_ptr<Embedder> embedder_for_index(const std::string& embedder_id);

/// Cosine similarity accumulated in double; 0.0 if either vector is zero.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

class VectorIndex {
 public:
  VectorIndex() = default;
  VectorIndex(std::size_t dimension, std::string embedder_id)
      : dim_(dimension), embedder_id_(std::move(embedder_id)) {}

  /// Throws DimensionMismatch or std::invalid_argument on a duplicate pair_id.
  void add(std::string pair_id, const EmbeddingVector& key, std::string value);

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  std::size_t dimension() const { return dim_; }
  const std::string& embedder_id() const { return embedder_id_; }

  const std::string& pair_id(std::size_t i) const { return ids_[i]; }
  const std::string& value(std::size_t i) const { return values_[i]; }
  std::span<const float> key(std::size_t i) const {
    return {keys_.data() + i * dim_, dim_};
  }
  double key_norm(std::size_t i) const { return norms_[i]; }
  /// nullptr when absent.
  const std::string* value_of(std::string_view pair_id) const;

  // Binary layout, little-endian:
  //   "SCIDX\0\0\1" | u32 version | u32 dim | u64 count | u32 len + embedder_id
  //   count x (u32 len + pair_id)
  //   count x dim float32 keys, row-major
  //   count x (u32 len + UTF-8 value)
  std::string serialize() const;
  static VectorIndex deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static VectorIndex load(const std::filesystem::path& path);

 private:
  std::size_t dim_ = 0;
  std::string embedder_id_;
  std::vector<std::string> ids_;
  std::vector<float> keys_;
  std::vector<double> norms_;
  std::vector<std::string> values_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// Keys are embed(query); values are labels with the eot token stripped.
/// Throws std::invalid_argument for non-primary pairs or empty queries.
VectorIndex index_build(const std::vector<CompletionPair>& pairs, Embedder& embedder);

struct Neighbor {
  std::string pair_id;
  double similarity = 0;

  bool operator==(const Neighbor&) const = default;
};
using KnnResult = std::vector<Neighbor>;

/// Exact top-n by cosine similarity over every entry; ties by pair_id.
KnnResult knn_search(const VectorIndex& index, const EmbeddingVector& query, std::size_t n);

struct AugmentedPrompt {
  std::string prompt;
  std::size_t neighbors_used = 0;
  std::vector<std::string> diagnostics;
};

std::string frame_example(std::size_t rank, std::string_view value);

/// Retrieved values framed as block comments, least similar first, then the
/// query verbatim. Whole blocks are dropped from the front to fit
/// budget_bytes; the query is never cut.
AugmentedPrompt augment_query(std::string_view query, const KnnResult& neighbors,
                              const VectorIndex& index, std::size_t n_used,
                              std::size_t budget_bytes);

}  // namespace scopecomp
