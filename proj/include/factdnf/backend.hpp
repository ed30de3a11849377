#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace factdnf {

// Pre-normalization scores of the affirmative and negative answer tokens.
struct OpenLogits {
    double v_yes = 0.0;
    double v_no = 0.0;
    bool operator==(const OpenLogits&) const = default;
};

// Counts of "yes"/"no" first tokens over m decoded samples.
struct ClosedCounts {
    std::int64_t m_yes = 0;
    std::int64_t m_no = 0;
    bool operator==(const ClosedCounts&) const = default;
};

using YesNoEvidence = std::variant<OpenLogits, ClosedCounts>;

enum class BackendKind { Open, Closed, Mock };

std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view name);

inline constexpr std::string_view kAnswerSuffix = "Yes or No? Response:";
inline constexpr std::string_view kNotApplicableReply = "not applicable";

struct BackendConfig {
    BackendKind kind = BackendKind::Mock;
    std::string endpoint;
    std::string model;
    int sample_budget = 10;
    std::chrono::milliseconds timeout{30000};
    std::string answer_suffix{kAnswerSuffix};
    // Deployer-chosen decoding temperature for sampled answers; unset lets the
    // server decide.
    std::optional<double> temperature;
    int max_in_flight = 4;
    // Mock only: fixture path and the seed for unlisted questions.
    std::string fixture_path;
    std::uint64_t seed = 0;
    // Mock only: how unlisted questions are answered ("counts", "logits", "unknown").
    std::string default_answer = "counts";
    // Reserved hook for verbalizer/prompt ensembles; only the Yes/No pair is
    // implemented, anything else is rejected at construction.
    std::vector<std::string> verbalizer{"Yes", "No"};
};

// Stable identifier for a question used in errors, fixtures, and logs.
std::string question_id(std::string_view question);

class Backend {
public:
    virtual ~Backend() = default;
    virtual BackendKind kind() const = 0;
    virtual YesNoEvidence query_yes_no(std::string_view question) = 0;
    // Free-form generation for claim extraction and template proposals.
    virtual std::string complete(std::string_view prompt) = 0;
};

// Answers everything from a fixture file, falling back to a seeded hash rule.
// Never touches the network.
class MockBackend final : public Backend {
public:
    explicit MockBackend(const BackendConfig& config);

    BackendKind kind() const override { return BackendKind::Mock; }
    YesNoEvidence query_yes_no(std::string_view question) override;
    std::string complete(std::string_view prompt) override;

    // Number of fixture lookups that missed and used the hash rule.
    std::size_t unlisted_count() const;

private:
    struct Entry {
        std::optional<YesNoEvidence> evidence;
        std::vector<std::string> replies;
    };
    const Entry* find(std::string_view key) const;

    BackendConfig config_;
    std::map<std::string, Entry, std::less<>> by_text_;
    std::map<std::string, Entry, std::less<>> by_hash_;
    mutable std::mutex mutex_;
    std::map<std::string, std::size_t, std::less<>> reply_cursor_;
    std::size_t unlisted_ = 0;
};

// Client for an answer server speaking the JSON request/reply protocol:
//   POST /v1/yes_no   {question, suffix, mode, model, m?, temperature?}
//       -> {v_yes, v_no} | {samples: [first tokens]}
//   POST /v1/complete {prompt, model} -> {text}
//   POST /v1/embed    {text, model} -> {embedding: [..]}
class HttpBackend final : public Backend {
public:
    explicit HttpBackend(const BackendConfig& config);
    ~HttpBackend() override;

    BackendKind kind() const override { return config_.kind; }
    YesNoEvidence query_yes_no(std::string_view question) override;
    std::string complete(std::string_view prompt) override;
    std::vector<double> embed(std::string_view text);

private:
    std::string post(const std::string& path, const std::string& body, const std::string& qid);

    struct Impl;
    BackendConfig config_;
    std::unique_ptr<Impl> impl_;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& config);

// Reads FACTDNF_ENDPOINT / FACTDNF_MODEL when the config leaves them empty.
void apply_environment(BackendConfig& config);

// Parses a decoded-samples reply into counts. Matching is exact and
// case-insensitive after trimming; other tokens are ignored.
ClosedCounts count_yes_no(const std::vector<std::string>& samples);

// Claim extraction prompt with the message substituted.
std::string claim_prompt(std::string_view message);
std::vector<std::string> parse_claims(std::string_view reply);
std::vector<std::string> extract_claims(std::string_view text, Backend& backend);

}  // namespace factdnf
