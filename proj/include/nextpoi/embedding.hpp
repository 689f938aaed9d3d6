#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace nextpoi {

struct EmbeddingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Turns a text rendering of a trajectory into a fixed-dimension vector.
/// Implementations must be deterministic for a given text.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual int dimension() const = 0;
    virtual std::string name() const = 0;
    /// Throws EmbeddingError on failure.
    virtual std::vector<double> embed(const std::string& text) = 0;
};

/// Deterministic test provider: folds text tokens into a fixed-dimension
/// vector via FNV-1a bucketing. Tokens are maximal alphanumeric runs; each
/// token adds 1 + (hash>>32 & 0xff)/256 to bucket hash % dim, so identical
/// texts always map to identical vectors. An optional simulated per-call
/// cost models an expensive encoder for benchmarks.
class HashEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HashEmbeddingProvider(int dim = 64, int simulate_cost_ms = 0);

    int dimension() const override { return dim_; }
    std::string name() const override { return "hash"; }
    std::vector<double> embed(const std::string& text) override;

private:
    int dim_;
    int simulate_cost_ms_;
};

/// OpenAI-compatible embeddings endpoint: POST {endpoint}/embeddings with
/// {"model": ..., "input": text}. `endpoint` is a base URL ending in /v1.
/// `dimension` > 0 is enforced against responses; 0 locks to the first
/// response's dimension.
class RemoteEmbeddingProvider : public EmbeddingProvider {
public:
    RemoteEmbeddingProvider(std::string endpoint, std::string model, std::string api_key_env,
                            int dimension = 0, int timeout_seconds = 60);

    int dimension() const override { return dimension_.load(); }
    std::string name() const override { return "remote:" + model_; }
    std::vector<double> embed(const std::string& text) override;

private:
    std::string endpoint_;
    std::string model_;
    std::string api_key_env_;
    std::atomic<int> dimension_;
    int timeout_seconds_;
};

/// Per-run cache keyed by trajectory id: each trajectory is embedded at most
/// once. Read-mostly; concurrent readers, single writer per key.
class EmbeddingCache {
public:
    using Vector = std::shared_ptr<const std::vector<double>>;

    /// Returns the cached vector or computes and stores it.
    Vector get_or_compute(int64_t trajectory_id, const std::string& text,
                          EmbeddingProvider& provider);

    size_t hits() const { return hits_.load(); }
    size_t misses() const { return misses_.load(); }
    size_t size() const;
    void clear();

private:
    mutable std::shared_mutex mu_;
    std::unordered_map<int64_t, Vector> map_;
    std::atomic<size_t> hits_{0};
    std::atomic<size_t> misses_{0};
};

}  // namespace nextpoi
