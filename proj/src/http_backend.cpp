#include <cmath>
#include <cstdlib>
#include <semaphore>

#include <httplib.h>
#include <json.hpp>

#include "factdnf/backend.hpp"
#include "factdnf/errors.hpp"

namespace factdnf {

using nlohmann::json;

struct HttpBackend::Impl {
    explicit Impl(int limit) : slots(limit) {}
    std::counting_semaphore<1024> slots;
};

HttpBackend::HttpBackend(const BackendConfig& config) : config_(config) {
    apply_environment(config_);
    if (config_.endpoint.empty()) throw ConfigError("backend endpoint not set (--endpoint or FACTDNF_ENDPOINT)");
    if (config_.endpoint.rfind("http://", 0) != 0)
        throw ConfigError("endpoint must be an http:// address: " + config_.endpoint);
    if (config_.kind == BackendKind::Closed && config_.sample_budget < 1)
        throw ConfigError("closed backends need a sample budget m >= 1");
    impl_ = std::make_unique<Impl>(std::clamp(config_.max_in_flight, 1, 1024));
}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::post(const std::string& path, const std::string& body, const std::string& qid) {
    impl_->slots.acquire();
    struct Release {
        Impl* impl;
        ~Release() { impl->slots.release(); }
    } release{impl_.get()};

    httplib::Client client(config_.endpoint);
    const auto secs = config_.timeout.count() / 1000;
    const auto usecs = (config_.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (const char* key = std::getenv("FACTDNF_API_KEY")) headers.emplace("Authorization", std::string("Bearer ") + key);

    // One retry on transport failure.
    for (int attempt = 0; attempt < 2; ++attempt) {
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            if (attempt == 0) continue;
            throw BackendError("transport failure talking to " + config_.endpoint + ": " +
                                   httplib::to_string(res.error()),
                               qid, true);
        }
        if (res->status != 200)
            throw BackendError("backend returned HTTP " + std::to_string(res->status), qid);
        return res->body;
    }
    throw BackendError("unreachable", qid, true);
}

YesNoEvidence HttpBackend::query_yes_no(std::string_view question) {
    if (question.empty()) throw ValueError("empty question");
    const auto qid = question_id(question);
    json req{{"question", question},
             {"suffix", config_.answer_suffix},
             {"mode", config_.kind == BackendKind::Open ? "logits" : "samples"},
             {"model", config_.model}};
    if (config_.kind == BackendKind::Closed) req["m"] = config_.sample_budget;
    if (config_.temperature) req["temperature"] = *config_.temperature;

    const auto body = post("/v1/yes_no", req.dump(), qid);
    json reply;
    try {
        reply = json::parse(body);
    } catch (const json::exception&) {
        throw ProtocolError("unparseable reply for question " + qid);
    }

    if (config_.kind == BackendKind::Open) {
        const auto yes = reply.find("v_yes");
        const auto no = reply.find("v_no");
        if (yes == reply.end() || no == reply.end() || !yes->is_number() || !no->is_number())
            throw ProtocolError("reply for question " + qid + " lacks v_yes/v_no scores");
        OpenLogits out{yes->get<double>(), no->get<double>()};
        if (!std::isfinite(out.v_yes) || !std::isfinite(out.v_no))
            throw ProtocolError("non-finite token scores for question " + qid);
        return out;
    }

    const auto samples = reply.find("samples");
    if (samples == reply.end() || !samples->is_array())
        throw ProtocolError("reply for question " + qid + " lacks samples");
    std::vector<std::string> tokens;
    for (const auto& s : *samples) {
        if (!s.is_string()) throw ProtocolError("non-string sample for question " + qid);
        tokens.push_back(s.get<std::string>());
    }
    if (tokens.size() != static_cast<std::size_t>(config_.sample_budget))
        throw ProtocolError("expected " + std::to_string(config_.sample_budget) + " samples, got " +
                            std::to_string(tokens.size()));
    return count_yes_no(tokens);
}

std::string HttpBackend::complete(std::string_view prompt) {
    const auto qid = question_id(prompt);
    json req{{"prompt", prompt}, {"model", config_.model}};
    if (config_.temperature) req["temperature"] = *config_.temperature;
    const auto body = post("/v1/complete", req.dump(), qid);
    try {
        const auto reply = json::parse(body);
        return reply.at("text").get<std::string>();
    } catch (const json::exception&) {
        throw ProtocolError("completion reply for " + qid + " lacks text");
    }
}

std::vector<double> HttpBackend::embed(std::string_view text) {
    const auto qid = question_id(text);
    json req{{"text", text}, {"model", config_.model}};
    const auto body = post("/v1/embed", req.dump(), qid);
    try {
        const auto reply = json::parse(body);
        return reply.at("embedding").get<std::vector<double>>();
    } catch (const json::exception&) {
        throw ProtocolError("embedding reply for " + qid + " lacks embedding");
    }
}

}  // namespace factdnf
