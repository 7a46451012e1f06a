// SPDX-License-Identifier: Apache-2.0
#include <chrono>

#include <httplib.h>

#include "mrag/backends.hpp"

namespace mrag {

namespace {

struct SplitUrl {
    std::string host;    // scheme://host[:port]
    std::string prefix;  // path prefix without trailing slash, may be empty
};

SplitUrl split_base_url(const std::string& base_url) {
    auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::bad_input, "base_url needs a scheme: " + base_url);
    }
    auto path_start = base_url.find('/', scheme_end + 3);
    SplitUrl split;
    if (path_start == std::string::npos) {
        split.host = base_url;
    } else {
        split.host = base_url.substr(0, path_start);
        split.prefix = base_url.substr(path_start);
        while (!split.prefix.empty() && split.prefix.back() == '/') split.prefix.pop_back();
    }
    return split;
}

httplib::Headers auth_headers(const HttpEndpointConfig& config) {
    httplib::Headers headers;
    if (!config.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config.api_key);
    }
    return headers;
}

// One POST attempt; transport failures map to BACKEND_UNREACHABLE, non-2xx
// statuses to BACKEND_REFUSED.
nlohmann::json post_json(const HttpEndpointConfig& config, const std::string& path,
                         const nlohmann::json& body, double* latency_seconds) {
    SplitUrl url = split_base_url(config.base_url);
    httplib::Client client(url.host);
    auto timeout = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::duration<double>(config.timeout_seconds));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    auto start = std::chrono::steady_clock::now();
    httplib::Result res =
        client.Post(url.prefix + path, auth_headers(config), body.dump(), "application/json");
    *latency_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (!res) {
        throw Error(ErrorCode::backend_unreachable,
                    config.base_url + path + ": " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw Error(ErrorCode::backend_refused, config.base_url + path + ": status " +
                                                    std::to_string(res->status) + " " +
                                                    res->body.substr(0, 200));
    }
    nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) {
        throw Error(ErrorCode::backend_refused, config.base_url + path + ": non-JSON response");
    }
    return parsed;
}

nlohmann::json message_to_wire(const ChatMessage& msg) {
    nlohmann::json wire;
    wire["role"] = msg.role;
    if (msg.parts.size() == 1 && msg.parts[0].kind == MessagePart::Kind::text) {
        wire["content"] = msg.parts[0].value;
        return wire;
    }
    nlohmann::json parts = nlohmann::json::array();
    for (const auto& part : msg.parts) {
        if (part.kind == MessagePart::Kind::text) {
            parts.push_back({{"type", "text"}, {"text", part.value}});
        } else {
            parts.push_back({{"type", "image_url"}, {"image_url", {{"url", part.value}}}});
        }
    }
    wire["content"] = std::move(parts);
    return wire;
}

}  // namespace

HttpModelBackend::HttpModelBackend(HttpEndpointConfig config) : config_(std::move(config)) {}

ModelResponse HttpModelBackend::chat(const ModelRequest& request) {
    validate_request(request);
    nlohmann::json body;
    body["model"] = config_.model;
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_output_tokens;
    body["messages"] = nlohmann::json::array();
    for (const auto& msg : request.messages) body["messages"].push_back(message_to_wire(msg));

    return with_retry(config_.retry, [&] {
        double latency = 0.0;
        nlohmann::json reply = post_json(config_, "/chat/completions", body, &latency);
        if (!reply.contains("choices") || !reply["choices"].is_array() ||
            reply["choices"].empty() || !reply["choices"][0].contains("message") ||
            !reply["choices"][0]["message"].value("content", nlohmann::json()).is_string()) {
            throw Error(ErrorCode::backend_refused,
                        config_.base_url + ": malformed chat completion response");
        }
        ModelResponse out;
        out.text = reply["choices"][0]["message"]["content"].get<std::string>();
        out.latency_seconds = latency;
        out.backend_id = "http:" + config_.model;
        return out;
    });
}

HttpSearchBackend::HttpSearchBackend(HttpEndpointConfig config) : config_(std::move(config)) {}

SearchResponse HttpSearchBackend::search(ToolKind kind, const std::string& query, int top_k) {
    if (top_k < 1) throw std::invalid_argument("top_k must be >= 1");
    if (query.empty()) throw std::invalid_argument("search query must be non-empty");
    nlohmann::json body;
    body["tool"] = tool_kind_name(kind);
    body["query"] = query;
    body["top_k"] = top_k;

    return with_retry(config_.retry, [&] {
        double latency = 0.0;
        nlohmann::json reply = post_json(config_, "/search", body, &latency);
        if (!reply.contains("results") || !reply["results"].is_array()) {
            throw Error(ErrorCode::backend_refused,
                        config_.base_url + ": malformed search response");
        }
        SearchResponse out;
        out.latency_seconds = latency;
        out.backend_id = "http:" + config_.base_url;
        for (const auto& item : reply["results"]) {
            if (out.results.size() == static_cast<std::size_t>(top_k)) break;
            RetrievedContext ctx;
            ctx.source_tool = tool_kind_name(kind);
            ctx.title = item.value("title", "");
            ctx.snippet = item.value("snippet", "");
            ctx.image_ref = item.value("image", "");
            ctx.rank = static_cast<int>(out.results.size()) + 1;
            out.results.push_back(std::move(ctx));
        }
        return out;
    });
}

}  // namespace mrag
