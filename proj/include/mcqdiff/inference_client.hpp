#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace mcqdiff {

/// An HTTP inference endpoint speaking the open completions schema.
/// top_k must be at least twice the number of choices probed so that
/// letter-token variants fit in the returned alternatives.
struct ModelEndpoint {
    std::string name;
    std::string base_url;
    std::string model_id;
    std::string api_key_env;  // env var holding the bearer token, may be empty
    int top_k = 20;
    int max_inflight = 4;
    int timeout_ms = 30000;
    std::string api = "completions";  // "completions" or "chat"
};

ModelEndpoint model_endpoint_from_json_text(const std::string& text);
std::vector<ModelEndpoint> model_endpoints_from_json_text(const std::string& text);

struct FirstTokenDistribution {
    std::map<char, double> letter_probs;  // per-letter max over token variants
    std::string raw_digest;               // sha256 of the response body
    int top_k_returned = 0;
};

/// The six surface forms that may denote one answer letter:
/// "A", "a", " A", " a", "A ", "a ".
std::vector<std::string> letter_variants(char letter);

/// Reduces a first-token top-k list to per-letter probabilities: max of
/// exp(logprob) over each letter's variants, 0 when absent, clamped to [0,1].
std::map<char, double> letter_probs_from_top_logprobs(
    const std::vector<std::pair<std::string, double>>& top,
    const std::vector<char>& letters);

/// One completion request asking for a single token with top-k logprobs.
/// Retries transient failures, then throws EndpointError naming the endpoint.
FirstTokenDistribution query_first_token_distribution(const ModelEndpoint& endpoint,
                                                      const std::string& prompt,
                                                      const std::vector<char>& letters);

}  // namespace mcqdiff
