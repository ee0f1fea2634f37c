#pragma once

#include "poolforge/core.hpp"
#include "poolforge/geometry.hpp"

#include <Eigen/Core>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace poolforge {

// A text embedder. Implementations must be deterministic per text and safe
// for concurrent use.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string id() const = 0;
    virtual int dim() const = 0;
    // One row per input text; rows need not be normalized yet.
    virtual Eigen::MatrixXd embed(const std::vector<std::string>& texts) = 0;
};

// Offline stand-in: each text maps to a seeded pseudo-random direction,
// stable across runs and processes. Identical texts share a vector.
class MockEmbedder : public Embedder {
public:
    explicit MockEmbedder(int dim = 64, std::uint64_t seed = 0);
    std::string id() const override;
    int dim() const override { return dim_; }
    Eigen::MatrixXd embed(const std::vector<std::string>& texts) override;

private:
    int dim_;
    std::uint64_t seed_;
};

struct HttpEmbedderConfig {
    std::string base_url;          // e.g. http://localhost:8089
    std::string path = "/v1/embeddings";
    std::string model;             // embedder identifier sent to the service
    std::string api_key_env;       // env var holding the bearer token, if any
    int timeout_seconds = 120;
    int batch_size = 64;
};

// Minimal embeddings-API client: POST {"model", "input": [...]} and read
// data[i].embedding.
class HttpEmbedder : public Embedder {
public:
    explicit HttpEmbedder(HttpEmbedderConfig config);
    ~HttpEmbedder() override;
    std::string id() const override;
    int dim() const override { return dim_; } // 0 until the first call
    Eigen::MatrixXd embed(const std::vector<std::string>& texts) override;

private:
    HttpEmbedderConfig config_;
    int dim_ = 0;
};

// Disk cache keyed by (embedder id, text hash): one little-endian double
// vector per file plus a JSON sidecar with the embedder id and dimension.
class EmbeddingCache {
public:
    explicit EmbeddingCache(std::string root_dir);

    std::optional<Eigen::VectorXd> lookup(const std::string& embedder_id,
                                          const std::string& text_hash, int expected_dim) const;
    void store(const std::string& embedder_id, const std::string& text_hash,
               const Eigen::Ref<const Eigen::VectorXd>& vec);

    const std::string& root() const { return root_dir_; }

private:
    std::string dir_for(const std::string& embedder_id) const;
    std::string root_dir_;
};

// One L2-normalized row per slot, in slot order. Cached texts skip the
// embedder; everything embedded here is written back to the cache.
EmbeddingSet embed_pool(const Pool& pool, Embedder& embedder, EmbeddingCache* cache = nullptr);

// Persist / load a pool's embedding matrix (binary rows + JSON sidecar).
void save_embeddings(const std::string& path_prefix, const EmbeddingSet& e,
                     const std::vector<std::string>& text_hashes);
EmbeddingSet load_embeddings(const std::string& path_prefix);

} // namespace poolforge
