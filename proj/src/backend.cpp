#include "factdnf/backend.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "factdnf/digest.hpp"
#include "factdnf/errors.hpp"
#include "factdnf/rng.hpp"

namespace factdnf {

using nlohmann::json;

std::string_view to_string(BackendKind kind) {
    switch (kind) {
        case BackendKind::Open: return "open";
        case BackendKind::Closed: return "closed";
        case BackendKind::Mock: return "mock";
    }
    return "mock";
}

BackendKind parse_backend_kind(std::string_view name) {
    if (name == "open") return BackendKind::Open;
    if (name == "closed") return BackendKind::Closed;
    if (name == "mock") return BackendKind::Mock;
    throw ConfigError("unknown backend kind '" + std::string(name) + "'");
}

std::string question_id(std::string_view question) { return digest_hex(question); }

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string format_claims(const std::vector<std::string>& claims) {
    if (claims.empty()) return std::string(kNotApplicableReply);
    std::string out;
    for (const auto& c : claims) out += "CLAIM: " + c + "\n";
    return out;
}

}  // namespace

ClosedCounts count_yes_no(const std::vector<std::string>& samples) {
    ClosedCounts counts;
    for (const auto& s : samples) {
        const auto token = lower(trim(s));
        if (token == "yes") ++counts.m_yes;
        else if (token == "no") ++counts.m_no;
    }
    return counts;
}

std::string claim_prompt(std::string_view message) {
    std::string prompt =
        "To verify the MESSAGE, what are the critical claims related to this message we need to "
        "verify? Please use the following format to answer. If there are no important claims, "
        "answer “not applicable”.\n"
        "\n"
        "MESSAGE:\n"
        "CLAIM:\n"
        "CLAIM:\n"
        "\n"
        "MESSAGE: $MESSAGE$.";
    const auto pos = prompt.find("$MESSAGE$");
    prompt.replace(pos, 9, message);
    return prompt;
}

std::vector<std::string> parse_claims(std::string_view reply) {
    auto bare = lower(trim(reply));
    while (!bare.empty() && (bare.back() == '.' || bare.back() == '"')) bare.pop_back();
    if (!bare.empty() && bare.front() == '"') bare.erase(bare.begin());
    if (bare == "not applicable" || bare == "“not applicable”") return {};

    std::vector<std::string> claims;
    bool saw_marker = false;
    std::size_t pos = 0;
    while (pos <= reply.size()) {
        auto end = reply.find('\n', pos);
        if (end == std::string_view::npos) end = reply.size();
        const auto line = trim(reply.substr(pos, end - pos));
        if (line.rfind("CLAIM:", 0) == 0) {
            saw_marker = true;
            auto claim = trim(std::string_view(line).substr(6));
            if (!claim.empty() && lower(claim) != "not applicable") claims.push_back(std::move(claim));
        }
        pos = end + 1;
    }
    if (!saw_marker) throw ProtocolError("claim reply has no CLAIM: lines");
    return claims;
}

std::vector<std::string> extract_claims(std::string_view text, Backend& backend) {
    if (trim(text).empty()) throw ValueError("cannot extract claims from empty text");
    return parse_claims(backend.complete(claim_prompt(text)));
}

// ---------------------------------------------------------------------------
// Mock backend

MockBackend::MockBackend(const BackendConfig& config) : config_(config) {
    if (config_.fixture_path.empty()) throw ConfigError("mock backend needs a fixture path");
    std::ifstream in(config_.fixture_path);
    if (!in) throw ConfigError("cannot open fixture " + config_.fixture_path);

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const std::string where = config_.fixture_path + ":" + std::to_string(lineno) + ": ";
        try {
            const auto j = json::parse(line);
            Entry entry;
            const auto& a = j.at("answer");
            if (a.is_string()) {
                entry.replies.push_back(a.get<std::string>());
            } else if (a.contains("v_yes") || a.contains("v_no")) {
                entry.evidence = OpenLogits{a.at("v_yes").get<double>(), a.at("v_no").get<double>()};
            } else if (a.contains("m_yes") || a.contains("m_no")) {
                const auto y = a.at("m_yes").get<std::int64_t>();
                const auto n = a.at("m_no").get<std::int64_t>();
                if (y < 0 || n < 0) throw ConfigError(where + "negative counts");
                entry.evidence = ClosedCounts{y, n};
            } else if (a.contains("samples")) {
                entry.evidence = count_yes_no(a.at("samples").get<std::vector<std::string>>());
            } else if (a.contains("claims")) {
                entry.replies.push_back(format_claims(a.at("claims").get<std::vector<std::string>>()));
            } else if (a.contains("reply")) {
                entry.replies.push_back(a.at("reply").get<std::string>());
            } else if (a.contains("replies")) {
                entry.replies = a.at("replies").get<std::vector<std::string>>();
                if (entry.replies.empty()) throw ConfigError(where + "empty replies list");
            } else {
                throw ConfigError(where + "unrecognized answer shape");
            }

            if (j.contains("question")) {
                by_text_[j.at("question").get<std::string>()] = std::move(entry);
            } else if (j.contains("question_hash")) {
                by_hash_[lower(j.at("question_hash").get<std::string>())] = std::move(entry);
            } else {
                throw ConfigError(where + "record needs question or question_hash");
            }
        } catch (const json::exception& e) {
            throw ConfigError(where + e.what());
        }
    }
}

const MockBackend::Entry* MockBackend::find(std::string_view key) const {
    if (auto it = by_text_.find(key); it != by_text_.end()) return &it->second;
    if (!by_hash_.empty()) {
        if (auto it = by_hash_.find(question_id(key)); it != by_hash_.end()) return &it->second;
    }
    return nullptr;
}

YesNoEvidence MockBackend::query_yes_no(std::string_view question) {
    if (trim(question).empty()) throw ValueError("empty question");
    if (const auto* e = find(question)) {
        if (!e->evidence) throw ProtocolError("fixture entry for " + question_id(question) + " has no yes/no answer");
        return *e->evidence;
    }
    {
        std::lock_guard lock(mutex_);
        ++unlisted_;
    }
    const std::uint64_t h = splitmix64(config_.seed ^ fnv1a(question));
    if (config_.default_answer == "unknown") return ClosedCounts{0, 0};
    if (config_.default_answer == "logits") {
        const double yes = static_cast<double>(h >> 11) * 0x1.0p-53;
        const double no = static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-53;
        return OpenLogits{8.0 * yes - 4.0, 8.0 * no - 4.0};
    }
    const auto m = static_cast<std::uint64_t>(std::max(config_.sample_budget, 1));
    const auto yes = static_cast<std::int64_t>(h % (m + 1));
    return ClosedCounts{yes, static_cast<std::int64_t>(m) - yes};
}

std::string MockBackend::complete(std::string_view prompt) {
    const auto* e = find(prompt);
    std::lock_guard lock(mutex_);
    if (!e) {
        ++unlisted_;
        return std::string(kNotApplicableReply);
    }
    if (e->replies.empty()) throw ProtocolError("fixture entry for " + question_id(prompt) + " has no reply");
    auto& cursor = reply_cursor_[std::string(prompt)];
    const auto& reply = e->replies[cursor % e->replies.size()];
    ++cursor;
    return reply;
}

std::size_t MockBackend::unlisted_count() const {
    std::lock_guard lock(mutex_);
    return unlisted_;
}

// ---------------------------------------------------------------------------

void apply_environment(BackendConfig& config) {
    if (config.endpoint.empty()) {
        if (const char* v = std::getenv("FACTDNF_ENDPOINT")) config.endpoint = v;
    }
    if (config.model.empty()) {
        if (const char* v = std::getenv("FACTDNF_MODEL")) config.model = v;
    }
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
    if (config.verbalizer != std::vector<std::string>{"Yes", "No"})
        throw ConfigError("only the Yes/No verbalizer is supported");
    if (config.kind == BackendKind::Mock) return std::make_unique<MockBackend>(config);
    if (config.kind == BackendKind::Closed && config.sample_budget < 1)
        throw ConfigError("closed backends need a sample budget m >= 1");
    return std::make_unique<HttpBackend>(config);
}

}  // namespace factdnf
