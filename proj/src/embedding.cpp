#include "poolforge/embedding.hpp"

#include "poolforge/hashing.hpp"
#include "poolforge/rng.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace poolforge {

namespace fs = std::filesystem;
using nlohmann::json;

MockEmbedder::MockEmbedder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim < 2) throw Error("mock embedder: dimension must be >= 2");
}

std::string MockEmbedder::id() const {
    return "mock-d" + std::to_string(dim_) + "-s" + std::to_string(seed_);
}

Eigen::MatrixXd MockEmbedder::embed(const std::vector<std::string>& texts) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(texts.size()), dim_);
    for (size_t i = 0; i < texts.size(); ++i) {
        Rng rng(mix64(seed_, fnv1a64(texts[i])));
        for (int d = 0; d < dim_; ++d) out(static_cast<Eigen::Index>(i), d) = rng.gaussian();
    }
    return out;
}

EmbeddingCache::EmbeddingCache(std::string root_dir) : root_dir_(std::move(root_dir)) {
    fs::create_directories(root_dir_);
}

std::string EmbeddingCache::dir_for(const std::string& embedder_id) const {
    std::string safe = embedder_id;
    for (char& c : safe) {
        if (c == '/' || c == '\\' || c == ':' || c == ' ') c = '-';
    }
    return root_dir_ + "/" + safe;
}

std::optional<Eigen::VectorXd> EmbeddingCache::lookup(const std::string& embedder_id,
                                                      const std::string& text_hash,
                                                      int expected_dim) const {
    const std::string path = dir_for(embedder_id) + "/" + text_hash + ".vec";
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::streamoff>(in.tellg());
    in.seekg(0);
    if (bytes % static_cast<std::streamoff>(sizeof(double)) != 0) {
        throw Error("embedding cache: corrupt entry " + path);
    }
    const auto dim = static_cast<Eigen::Index>(bytes / static_cast<std::streamoff>(sizeof(double)));
    if (expected_dim > 0 && dim != expected_dim) {
        throw Error("embedding cache: entry " + path + " has dim " + std::to_string(dim) +
                    ", expected " + std::to_string(expected_dim));
    }
    Eigen::VectorXd v(dim);
    in.read(reinterpret_cast<char*>(v.data()), bytes);
    if (!in) throw Error("embedding cache: short read on " + path);
    return v;
}

void EmbeddingCache::store(const std::string& embedder_id, const std::string& text_hash,
                           const Eigen::Ref<const Eigen::VectorXd>& vec) {
    const std::string dir = dir_for(embedder_id);
    fs::create_directories(dir);
    const std::string meta_path = dir + "/meta.json";
    if (!fs::exists(meta_path)) {
        json meta{{"embedder_id", embedder_id}, {"dim", vec.size()}};
        std::ofstream m(meta_path);
        m << meta.dump(2) << "\n";
    }
    const std::string path = dir + "/" + text_hash + ".vec";
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        out.write(reinterpret_cast<const char*>(vec.data()),
                  static_cast<std::streamsize>(sizeof(double)) * vec.size());
        if (!out) throw Error("embedding cache: write failed for " + tmp);
    }
    fs::rename(tmp, path);
}

EmbeddingSet embed_pool(const Pool& pool, Embedder& embedder, EmbeddingCache* cache) {
    const int n = pool.n();
    if (n < 1) throw Error("embed_pool: empty pool");

    std::vector<std::string> texts(static_cast<size_t>(n));
    for (const auto& rec : pool.records) texts[static_cast<size_t>(rec.slot)] = rec.text;

    EmbeddingSet set;
    set.source_id = embedder.id();

    std::vector<int> missing;
    Eigen::MatrixXd vectors;
    const int dim_hint = embedder.dim();
    if (dim_hint > 0) vectors.resize(n, dim_hint);

    if (cache != nullptr) {
        for (int i = 0; i < n; ++i) {
            auto hit = cache->lookup(set.source_id, text_hash(texts[static_cast<size_t>(i)]), dim_hint);
            if (hit) {
                if (vectors.size() == 0) vectors.resize(n, hit->size());
                if (hit->size() != vectors.cols()) {
                    throw Error("embed_pool: cache dimension mismatch");
                }
                vectors.row(i) = hit->transpose();
            } else {
                missing.push_back(i);
            }
        }
    } else {
        missing.resize(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) missing[static_cast<size_t>(i)] = i;
    }

    if (!missing.empty()) {
        std::vector<std::string> batch;
        batch.reserve(missing.size());
        for (int i : missing) batch.push_back(texts[static_cast<size_t>(i)]);
        Eigen::MatrixXd fresh = embedder.embed(batch);
        if (fresh.rows() != static_cast<Eigen::Index>(missing.size())) {
            throw Error("embed_pool: embedder returned wrong row count");
        }
        if (vectors.size() == 0) vectors.resize(n, fresh.cols());
        if (fresh.cols() != vectors.cols()) throw Error("embed_pool: embedder dimension mismatch");
        for (size_t k = 0; k < missing.size(); ++k) {
            vectors.row(missing[k]) = fresh.row(static_cast<Eigen::Index>(k));
            if (cache != nullptr) {
                cache->store(set.source_id, text_hash(batch[k]),
                             fresh.row(static_cast<Eigen::Index>(k)).transpose());
            }
        }
    }

    l2_normalize_rows(vectors);
    set.vectors = std::move(vectors);
    return set;
}

void save_embeddings(const std::string& path_prefix, const EmbeddingSet& e,
                     const std::vector<std::string>& text_hashes) {
    {
        std::ofstream out(path_prefix + ".bin", std::ios::binary);
        // Row-major on disk so rows stream in slot order.
        for (Eigen::Index i = 0; i < e.vectors.rows(); ++i) {
            Eigen::VectorXd row = e.vectors.row(i);
            out.write(reinterpret_cast<const char*>(row.data()),
                      static_cast<std::streamsize>(sizeof(double)) * row.size());
        }
        if (!out) throw Error("save_embeddings: write failed for " + path_prefix + ".bin");
    }
    json meta{{"embedder_id", e.source_id},
              {"n", e.vectors.rows()},
              {"dim", e.vectors.cols()},
              {"text_hashes", text_hashes}};
    std::ofstream m(path_prefix + ".json");
    m << meta.dump(2) << "\n";
    if (!m) throw Error("save_embeddings: write failed for " + path_prefix + ".json");
}

EmbeddingSet load_embeddings(const std::string& path_prefix) {
    std::ifstream metain(path_prefix + ".json");
    if (!metain) throw Error("load_embeddings: missing " + path_prefix + ".json");
    json meta = json::parse(metain);
    const auto n = meta.at("n").get<Eigen::Index>();
    const auto dim = meta.at("dim").get<Eigen::Index>();

    EmbeddingSet e;
    e.source_id = meta.at("embedder_id").get<std::string>();
    e.vectors.resize(n, dim);
    std::ifstream in(path_prefix + ".bin", std::ios::binary);
    if (!in) throw Error("load_embeddings: missing " + path_prefix + ".bin");
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd row(dim);
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(sizeof(double)) * dim);
        e.vectors.row(i) = row.transpose();
    }
    if (!in) throw Error("load_embeddings: short read on " + path_prefix + ".bin");
    return e;
}

} // namespace poolforge
