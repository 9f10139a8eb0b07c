#pragma once

#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace mcqdiff {

/// An HTTP embeddings endpoint returning one fixed-dimension vector per input.
struct EmbeddingEndpoint {
    std::string name;
    std::string base_url;
    std::string model_id;
    std::string api_key_env;
    int dimension = 768;
};

EmbeddingEndpoint embedding_endpoint_from_json_text(const std::string& text);

/// Fetches embeddings with a JSONL cache keyed by (endpoint, sha256(text)),
/// so each unique text costs at most one HTTP call across runs.
class EmbeddingClient {
public:
    /// Empty cache_path keeps the cache in memory only.
    EmbeddingClient(EmbeddingEndpoint endpoint, std::string cache_path);

    const EmbeddingEndpoint& endpoint() const { return endpoint_; }
    std::vector<double> fetch(const std::string& text);

private:
    EmbeddingEndpoint endpoint_;
    std::string cache_path_;
    std::mutex mutex_;
    std::map<std::string, std::vector<double>> cache_;  // sha256(text) -> vector
};

}  // namespace mcqdiff
