#include "mcqdiff/inference_client.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "mcqdiff/errors.hpp"
#include "mcqdiff/util.hpp"

using nlohmann::json;

namespace mcqdiff {

namespace {

ModelEndpoint endpoint_from_json(const json& j) {
    ModelEndpoint e;
    e.name = j.at("name").get<std::string>();
    e.base_url = j.at("base_url").get<std::string>();
    e.model_id = j.at("model_id").get<std::string>();
    if (j.contains("api_key_env")) e.api_key_env = j.at("api_key_env").get<std::string>();
    if (j.contains("top_k")) e.top_k = j.at("top_k").get<int>();
    if (j.contains("max_inflight")) e.max_inflight = j.at("max_inflight").get<int>();
    if (j.contains("timeout_ms")) e.timeout_ms = j.at("timeout_ms").get<int>();
    if (j.contains("api")) e.api = j.at("api").get<std::string>();
    if (e.max_inflight < 1)
        throw ValidationError("endpoint '" + e.name + "': max_inflight must be >= 1");
    if (e.api != "completions" && e.api != "chat")
        throw ValidationError("endpoint '" + e.name + "': api must be 'completions' or 'chat'");
    return e;
}

// splits "http://host:port/prefix" into client base and path prefix
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    auto scheme_end = base_url.find("://");
    size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = base_url.find('/', host_start);
    if (path_start == std::string::npos) return {base_url, ""};
    std::string prefix = base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, path_start), prefix};
}

struct ParsedLogprobs {
    std::vector<std::pair<std::string, double>> top;
    bool found = false;
};

ParsedLogprobs parse_completions_logprobs(const json& body) {
    ParsedLogprobs out;
    if (!body.contains("choices") || body["choices"].empty()) return out;
    const json& choice = body["choices"][0];
    if (!choice.contains("logprobs") || choice["logprobs"].is_null()) return out;
    const json& lp = choice["logprobs"];
    if (!lp.contains("top_logprobs") || lp["top_logprobs"].empty()) return out;
    const json& first = lp["top_logprobs"][0];
    if (!first.is_object()) return out;
    for (const auto& [token, logprob] : first.items())
        out.top.emplace_back(token, logprob.get<double>());
    out.found = true;
    return out;
}

ParsedLogprobs parse_chat_logprobs(const json& body) {
    ParsedLogprobs out;
    if (!body.contains("choices") || body["choices"].empty()) return out;
    const json& choice = body["choices"][0];
    if (!choice.contains("logprobs") || choice["logprobs"].is_null()) return out;
    const json& lp = choice["logprobs"];
    if (!lp.contains("content") || lp["content"].empty()) return out;
    const json& first = lp["content"][0];
    if (!first.contains("top_logprobs")) return out;
    for (const auto& entry : first["top_logprobs"])
        out.top.emplace_back(entry.at("token").get<std::string>(),
                             entry.at("logprob").get<double>());
    out.found = true;
    return out;
}

void warn_top_k_once(const std::string& endpoint_name, int got, int asked) {
    static std::mutex mu;
    static std::set<std::string> warned;
    std::lock_guard<std::mutex> lock(mu);
    if (warned.insert(endpoint_name).second) {
        std::cerr << "warning: endpoint '" << endpoint_name << "' returned " << got
                  << " top logprobs, " << asked << " requested; proceeding\n";
    }
}

}  // namespace

ModelEndpoint model_endpoint_from_json_text(const std::string& text) {
    try {
        return endpoint_from_json(json::parse(text));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed endpoint config: ") + e.what());
    }
}

std::vector<ModelEndpoint> model_endpoints_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed endpoints config: ") + e.what());
    }
    if (!j.is_array()) throw ValidationError("endpoints config must be a JSON list");
    std::vector<ModelEndpoint> out;
    std::set<std::string> names;
    for (const auto& entry : j) {
        out.push_back(endpoint_from_json(entry));
        if (!names.insert(out.back().name).second)
            throw ValidationError("duplicate endpoint name: " + out.back().name);
    }
    return out;
}

std::vector<std::string> letter_variants(char letter) {
    std::string up(1, letter);
    std::string low(1, static_cast<char>(letter - 'A' + 'a'));
    return {up, low, " " + up, " " + low, up + " ", low + " "};
}

std::map<char, double> letter_probs_from_top_logprobs(
    const std::vector<std::pair<std::string, double>>& top,
    const std::vector<char>& letters) {
    std::map<char, double> out;
    for (char letter : letters) {
        double best = 0.0;
        for (const auto& variant : letter_variants(letter)) {
            for (const auto& [token, logprob] : top) {
                if (token == variant) best = std::max(best, std::exp(logprob));
            }
        }
        out[letter] = std::clamp(best, 0.0, 1.0);
    }
    return out;
}

FirstTokenDistribution query_first_token_distribution(const ModelEndpoint& endpoint,
                                                      const std::string& prompt,
                                                      const std::vector<char>& letters) {
    const bool chat = endpoint.api == "chat";
    json req;
    req["model"] = endpoint.model_id;
    req["max_tokens"] = 1;
    req["temperature"] = 0;
    if (chat) {
        req["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
        req["logprobs"] = true;
        req["top_logprobs"] = endpoint.top_k;
    } else {
        req["prompt"] = prompt;
        req["logprobs"] = endpoint.top_k;
    }
    const std::string body = req.dump();

    auto [client_base, prefix] = split_base_url(endpoint.base_url);
    const std::string path =
        prefix + (chat ? "/v1/chat/completions" : "/v1/completions");

    httplib::Client client(client_base);
    client.set_connection_timeout(endpoint.timeout_ms / 1000,
                                  (endpoint.timeout_ms % 1000) * 1000);
    client.set_read_timeout(endpoint.timeout_ms / 1000, (endpoint.timeout_ms % 1000) * 1000);
    httplib::Headers headers;
    if (!endpoint.api_key_env.empty()) {
        if (const char* key = std::getenv(endpoint.api_key_env.c_str()))
            headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    constexpr int kAttempts = 3;
    std::string last_error;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(100 * attempt));
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500 || res->status == 429) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw EndpointError("endpoint '" + endpoint.name + "': HTTP " +
                                std::to_string(res->status) + ": " + res->body);

        json parsed;
        try {
            parsed = json::parse(res->body);
        } catch (const json::exception& e) {
            throw EndpointError("endpoint '" + endpoint.name +
                                "': invalid JSON response: " + e.what());
        }
        ParsedLogprobs lp =
            chat ? parse_chat_logprobs(parsed) : parse_completions_logprobs(parsed);
        if (!lp.found)
            throw EndpointError("endpoint '" + endpoint.name +
                                "' does not expose first-token logprobs (unsupported endpoint)");
        if (static_cast<int>(lp.top.size()) < endpoint.top_k)
            warn_top_k_once(endpoint.name, static_cast<int>(lp.top.size()), endpoint.top_k);

        FirstTokenDistribution out;
        out.letter_probs = letter_probs_from_top_logprobs(lp.top, letters);
        out.raw_digest = sha256_hex(res->body);
        out.top_k_returned = static_cast<int>(lp.top.size());
        return out;
    }
    throw EndpointError("endpoint '" + endpoint.name + "' failed after " +
                        std::to_string(kAttempts) + " attempts: " + last_error);
}

}  // namespace mcqdiff
