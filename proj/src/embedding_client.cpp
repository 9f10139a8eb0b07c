#include "mcqdiff/embedding_client.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "mcqdiff/errors.hpp"
#include "mcqdiff/util.hpp"

using nlohmann::json;

namespace mcqdiff {

EmbeddingEndpoint embedding_endpoint_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed embedding endpoint config: ") + e.what());
    }
    EmbeddingEndpoint e;
    e.name = j.at("name").get<std::string>();
    e.base_url = j.at("base_url").get<std::string>();
    e.model_id = j.at("model_id").get<std::string>();
    if (j.contains("api_key_env")) e.api_key_env = j.at("api_key_env").get<std::string>();
    if (j.contains("dimension")) e.dimension = j.at("dimension").get<int>();
    if (e.dimension <= 0)
        throw ValidationError("embedding endpoint '" + e.name + "': dimension must be > 0");
    return e;
}

EmbeddingClient::EmbeddingClient(EmbeddingEndpoint endpoint, std::string cache_path)
    : endpoint_(std::move(endpoint)), cache_path_(std::move(cache_path)) {
    if (!cache_path_.empty() && file_exists(cache_path_)) {
        std::istringstream in(read_file(cache_path_));
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                json j = json::parse(line);
                if (j.at("endpoint").get<std::string>() != endpoint_.name) continue;
                std::vector<double> v;
                for (const auto& x : j.at("vector")) v.push_back(x.get<double>());
                cache_[j.at("sha256").get<std::string>()] = std::move(v);
            } catch (const json::exception& e) {
                throw ValidationError(cache_path_ + ":" + std::to_string(line_no) +
                                      ": malformed embedding cache line: " + e.what());
            }
        }
    }
}

std::vector<double> EmbeddingClient::fetch(const std::string& text) {
    if (text.empty()) throw ValidationError("cannot embed empty text");
    const std::string key = sha256_hex(text);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }

    json req;
    req["model"] = endpoint_.model_id;
    req["input"] = json::array({text});

    httplib::Client client(endpoint_.base_url);
    client.set_read_timeout(60, 0);
    httplib::Headers headers;
    if (!endpoint_.api_key_env.empty()) {
        if (const char* k = std::getenv(endpoint_.api_key_env.c_str()))
            headers.emplace("Authorization", std::string("Bearer ") + k);
    }

    constexpr int kAttempts = 3;
    std::string last_error;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(100 * attempt));
        auto res = client.Post("/v1/embeddings", headers, req.dump(), "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500 || res->status == 429) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw EndpointError("embedding endpoint '" + endpoint_.name + "': HTTP " +
                                std::to_string(res->status) + ": " + res->body);
        json body;
        try {
            body = json::parse(res->body);
        } catch (const json::exception& e) {
            throw EndpointError("embedding endpoint '" + endpoint_.name +
                                "': invalid JSON response: " + e.what());
        }
        if (!body.contains("data") || body["data"].empty() ||
            !body["data"][0].contains("embedding"))
            throw EndpointError("embedding endpoint '" + endpoint_.name +
                                "': response lacks data[0].embedding");
        std::vector<double> v;
        for (const auto& x : body["data"][0]["embedding"]) v.push_back(x.get<double>());
        if (static_cast<int>(v.size()) != endpoint_.dimension)
            throw EndpointError("embedding endpoint '" + endpoint_.name +
                                "': dimension mismatch, got " + std::to_string(v.size()) +
                                ", declared " + std::to_string(endpoint_.dimension));

        std::lock_guard<std::mutex> lock(mutex_);
        if (!cache_path_.empty()) {
            json line;
            line["endpoint"] = endpoint_.name;
            line["sha256"] = key;
            line["vector"] = v;
            std::ofstream out(cache_path_, std::ios::app | std::ios::binary);
            if (!out) throw ValidationError("cannot append to embedding cache: " + cache_path_);
            out << line.dump() << '\n';
        }
        cache_[key] = v;
        return v;
    }
    throw EndpointError("embedding endpoint '" + endpoint_.name + "' failed after " +
                        std::to_string(kAttempts) + " attempts: " + last_error);
}

}  // namespace mcqdiff
