#include "nextpoi/embedding.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "http_util.hpp"

namespace nextpoi {

using nlohmann::json;

namespace {

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

HashEmbeddingProvider::HashEmbeddingProvider(int dim, int simulate_cost_ms)
    : dim_(dim), simulate_cost_ms_(simulate_cost_ms) {
    if (dim <= 0) throw std::invalid_argument("HashEmbeddingProvider: dimension must be positive");
}

std::vector<double> HashEmbeddingProvider::embed(const std::string& text) {
    if (simulate_cost_ms_ > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(simulate_cost_ms_));
    std::vector<double> vec(static_cast<size_t>(dim_), 0.0);
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        const uint64_t h = fnv1a64(token);
        vec[h % static_cast<uint64_t>(dim_)] +=
            1.0 + static_cast<double>((h >> 32) & 0xff) / 256.0;
        token.clear();
    };
    for (const char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            token.push_back(c);
        } else {
            flush();
        }
    }
    flush();
    return vec;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(std::string endpoint, std::string model,
                                                 std::string api_key_env, int dimension,
                                                 int timeout_seconds)
    : endpoint_(std::move(endpoint)),
      model_(std::move(model)),
      api_key_env_(std::move(api_key_env)),
      dimension_(dimension),
      timeout_seconds_(timeout_seconds) {
    if (endpoint_.empty() || model_.empty())
        throw std::invalid_argument("RemoteEmbeddingProvider: endpoint and model are required");
}

std::vector<double> RemoteEmbeddingProvider::embed(const std::string& text) {
    const auto url = detail::split_url(endpoint_);
    httplib::Client client(url.base);
    client.set_connection_timeout(timeout_seconds_);
    client.set_read_timeout(timeout_seconds_);

    httplib::Headers headers;
    const std::string key = detail::api_key_from_env(api_key_env_);
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

    const json body{{"model", model_}, {"input", text}};
    auto res = client.Post(url.prefix + "/embeddings", headers, body.dump(), "application/json");
    if (!res) throw EmbeddingError("embeddings request failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw EmbeddingError("embeddings request returned HTTP " + std::to_string(res->status));

    std::vector<double> vec;
    try {
        const json parsed = json::parse(res->body);
        vec = parsed.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw EmbeddingError(std::string("malformed embeddings response: ") + e.what());
    }
    for (const double x : vec) {
        if (!std::isfinite(x)) throw EmbeddingError("embeddings response contains non-finite value");
    }

    int declared = dimension_.load();
    if (declared == 0) {
        dimension_.compare_exchange_strong(declared, static_cast<int>(vec.size()));
        declared = dimension_.load();
    }
    if (static_cast<int>(vec.size()) != declared)
        throw EmbeddingError("provider returned dimension " + std::to_string(vec.size()) +
                             ", declared " + std::to_string(declared));
    return vec;
}

EmbeddingCache::Vector EmbeddingCache::get_or_compute(int64_t trajectory_id,
                                                      const std::string& text,
                                                      EmbeddingProvider& provider) {
    {
        std::shared_lock lock(mu_);
        auto it = map_.find(trajectory_id);
        if (it != map_.end()) {
            hits_.fetch_add(1);
            return it->second;
        }
    }
    // Compute outside the lock; first writer wins on a race.
    auto vec = std::make_shared<const std::vector<double>>(provider.embed(text));
    std::unique_lock lock(mu_);
    auto [it, inserted] = map_.emplace(trajectory_id, std::move(vec));
    if (inserted) {
        misses_.fetch_add(1);
    } else {
        hits_.fetch_add(1);
    }
    return it->second;
}

size_t EmbeddingCache::size() const {
    std::shared_lock lock(mu_);
    return map_.size();
}

void EmbeddingCache::clear() {
    std::unique_lock lock(mu_);
    map_.clear();
    hits_.store(0);
    misses_.store(0);
}

}  // namespace nextpoi
