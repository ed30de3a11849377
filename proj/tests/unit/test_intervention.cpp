#include <doctest.h>

#include <cmath>
#include <deque>

#include <json.hpp>

#include "factdnf/errors.hpp"
#include "factdnf/intervention.hpp"
#include "factdnf/rng.hpp"
#include "scratch.hpp"

using namespace factdnf;
using nlohmann::json;

namespace {

// Replies to completion prompts from a fixed script, in order.
class ScriptedBackend final : public Backend {
public:
    explicit ScriptedBackend(std::deque<std::string> replies) : replies_(std::move(replies)) {}
    BackendKind kind() const override { return BackendKind::Mock; }
    YesNoEvidence query_yes_no(std::string_view) override { return ClosedCounts{}; }
    std::string complete(std::string_view prompt) override {
        prompts.emplace_back(prompt);
        auto r = replies_.front();
        replies_.pop_front();
        return r;
    }
    std::vector<std::string> prompts;

private:
    std::deque<std::string> replies_;
};

QuestionTemplate message_template(int id, std::string question) {
    QuestionTemplate t;
    t.id = id;
    t.text = "Message: {message}. " + question;
    t.slots = {"message"};
    t.slot_sources = {SlotSource::NewsText};
    t.semantics = "semantics " + std::to_string(id);
    return t;
}

ReviewDecision accept(std::size_t i, std::string semantics) {
    ReviewDecision d;
    d.candidate = i;
    d.accept = true;
    d.slots = {{"message", SlotSource::NewsText}};
    d.semantics = std::move(semantics);
    return d;
}

std::string random_text(Rng& rng) {
    static const char* words[] = {"the", "message", "is", "true", "bias", "Source", "claims", "42", "a", "fake"};
    std::string s;
    const auto n = rng.below(6);
    for (std::uint64_t i = 0; i < n; ++i) {
        s += words[rng.below(10)];
        s += rng.below(3) == 0 ? ", " : " ";
    }
    return s;
}

}  // namespace

TEST_SUITE("intervention") {
    TEST_CASE("tagged questions parse in order") {
        CHECK(parse_tagged_questions("<s>Q?</s><s>R?</s>") == std::vector<std::string>{"Q?", "R?"});
        CHECK(parse_tagged_questions("intro <s> A? </s> junk <s></s> <s>B?").size() == 1);
        CHECK(parse_tagged_questions("none").empty());
    }

    TEST_CASE("prompt asks for tagged questions") {
        CHECK(intervention_prompt().find("<s> and </s> tags") != std::string::npos);
    }

    TEST_CASE("token cosine by hand") {
        CHECK(token_cosine("is it true", "Is it FALSE?") == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
        CHECK(token_cosine("who paid", "is it true") == 0.0);
        CHECK(token_cosine("a a b", "a b") == doctest::Approx(3.0 / std::sqrt(10.0)).epsilon(1e-15));
        CHECK(token_cosine("Same words", "same, words") == 1.0);
    }

    TEST_CASE("similarity is symmetric, bounded and reflexive") {
        Rng rng(31);
        for (int i = 0; i < 2000; ++i) {
            const auto a = random_text(rng), b = random_text(rng);
            const double s = token_cosine(a, b);
            CHECK(s >= 0.0);
            CHECK(s <= 1.0);
            CHECK(s == token_cosine(b, a));
            if (!a.empty()) CHECK(token_cosine(a, a) == 1.0);
        }
    }

    TEST_CASE("least similar proposal is added each iteration") {
        ScriptedBackend b({"<s>Is it false?</s><s>Who paid for it?</s>", "<s>Who paid for it?</s><s>Is it old?</s>"});
        const auto added = generate_candidates(b, {"Is it true?"}, 2, token_cosine);
        REQUIRE(added.size() == 2);
        CHECK(added[0].text == "Who paid for it?");
        CHECK(added[0].iteration == 1);
        // Only "it" is shared: 1 / sqrt(3 * 4), against 2/3 for "Is it false?".
        const double it_overlap = 1.0 / std::sqrt(12.0);
        CHECK(added[0].mean_similarity == doctest::Approx(it_overlap).epsilon(1e-12));
        // Against {"Is it true?", "Who paid for it?"}: the repeat scores
        // (it_overlap + 1) / 2, "Is it old?" scores (2/3 + it_overlap) / 2.
        CHECK(added[1].text == "Is it old?");
        CHECK(added[1].mean_similarity == doctest::Approx((2.0 / 3.0 + it_overlap) / 2.0).epsilon(1e-12));
        for (const auto& c : added) CHECK(c.status == ReviewStatus::Pending);
        CHECK(b.prompts.size() == 2);
        CHECK(b.prompts[0] == intervention_prompt());
    }

    TEST_CASE("a copy of an existing template is never chosen over an alternative") {
        ScriptedBackend b({"<s>Is it true?</s><s>Is it really true?</s>"});
        const auto added = generate_candidates(b, {"Is it true?"}, 1, token_cosine);
        REQUIRE(added.size() == 1);
        CHECK(added[0].text == "Is it really true?");
    }

    TEST_CASE("a single proposal with one iteration is returned pending") {
        ScriptedBackend b({"<s>Does the message exhibit bias?</s>"});
        const auto added = generate_candidates(b, {"Is it true?"}, 1, token_cosine);
        REQUIRE(added.size() == 1);
        CHECK(added[0].text == "Does the message exhibit bias?");
        CHECK(added[0].status == ReviewStatus::Pending);
    }

    TEST_CASE("the running set grows by at most one per iteration") {
        ScriptedBackend b({"<s>A?</s><s>B?</s>", "no tags", "<s>A?</s>", "<s>C?</s><s>D?</s><s>E?</s>"});
        std::ostringstream log;
        const auto added = generate_candidates(b, {"Existing?"}, 4, token_cosine, &log);
        // A? is picked twice but recorded once; the empty reply adds nothing.
        REQUIRE(added.size() == 2);
        CHECK(added[0].text == "A?");
        CHECK(added[1].text == "C?");
        CHECK(added[1].iteration == 4);
        CHECK(log.str().find("iteration 2: no tagged questions") != std::string::npos);
        CHECK_THROWS_AS(generate_candidates(b, {}, 0, token_cosine), ConfigError);
    }

    TEST_CASE("accepting a bias question creates a unary predicate") {
        std::vector<CandidateTemplate> cands{{"Does the message exhibit bias?", 1, 0.1, ReviewStatus::Pending}};
        const std::vector<QuestionTemplate> existing{message_template(1, "Is it true?"),
                                                     message_template(8, "Is it old?")};
        const auto out = review(cands, {accept(0, "The message exhibits bias")}, existing);
        REQUIRE(out.accepted.size() == 1);
        const auto& t = out.accepted[0];
        CHECK(t.id == 9);
        CHECK(t.arity() == 1);
        CHECK(t.text == "Message: {message}. Does the message exhibit bias?");
        CHECK_NOTHROW(validate(t));
        CHECK(cands[0].status == ReviewStatus::Accepted);
        CHECK(existing[0].text == "Message: {message}. Is it true?");
    }

    TEST_CASE("rejecting everything leaves the template file unchanged") {
        const auto dir = scratch::dir("intervention-reject");
        const auto path = (dir / "t.jsonl").string();
        save_templates(path, {message_template(1, "Is it true?")});
        const auto before = scratch::read(path);
        std::vector<CandidateTemplate> cands{{"A?", 1, 0.0, ReviewStatus::Pending}, {"B?", 2, 0.0, ReviewStatus::Pending}};
        ReviewDecision r0, r1;
        r0.candidate = 0;
        r1.candidate = 1;
        const auto out = review(cands, {r0, r1}, load_templates(path));
        append_templates(path, out.accepted);
        CHECK(out.accepted.empty());
        CHECK(out.rejected == std::vector<std::size_t>{0, 1});
        CHECK(scratch::read(path) == before);
        CHECK(cands[1].status == ReviewStatus::Rejected);
    }

    TEST_CASE("duplicate acceptance is a validation error") {
        const std::vector<QuestionTemplate> existing{message_template(1, "Is it true?")};
        std::vector<CandidateTemplate> same{{"Is it true?", 1, 1.0, ReviewStatus::Pending}};
        CHECK_THROWS_AS(review(same, {accept(0, "dup")}, existing), ValidationError);
        CHECK(same[0].status == ReviewStatus::Pending);
        std::vector<CandidateTemplate> twice{{"X?", 1, 0.0, ReviewStatus::Pending}, {"x?", 2, 0.0, ReviewStatus::Pending}};
        CHECK_THROWS_AS(review(twice, {accept(0, "x"), accept(1, "x")}, existing), ValidationError);
        std::vector<CandidateTemplate> one{{"Y?", 1, 0.0, ReviewStatus::Pending}};
        CHECK_THROWS_AS(review(one, {accept(0, "y"), accept(0, "y")}, existing), ValidationError);
    }

    TEST_CASE("acceptance needs slots and semantics") {
        std::vector<CandidateTemplate> c{{"Z?", 1, 0.0, ReviewStatus::Pending}};
        auto d = accept(0, "");
        CHECK_THROWS_AS(review(c, {d}, {}), ValidationError);
        d = accept(0, "z");
        d.slots.clear();
        CHECK_THROWS_AS(review(c, {d}, {}), ValidationError);
        CHECK_THROWS_AS(review(c, {accept(3, "z")}, {}), ValidationError);
    }

    TEST_CASE("accepted templates append after existing lines") {
        const auto dir = scratch::dir("intervention-append");
        const auto path = (dir / "t.jsonl").string();
        save_templates(path, {message_template(1, "Is it true?")});
        const auto before = scratch::read(path);
        std::vector<CandidateTemplate> c{{"Does the message exhibit bias?", 1, 0.0, ReviewStatus::Pending}};
        append_templates(path, review(c, {accept(0, "The message exhibits bias")}, load_templates(path)).accepted);
        const auto after = scratch::read(path);
        CHECK(after.substr(0, before.size()) == before);
        CHECK(load_templates(path).size() == 2);
    }

    TEST_CASE("candidate and decision files round trip") {
        const auto dir = scratch::dir("intervention-files");
        std::vector<CandidateTemplate> c{{"A?", 1, 0.25, ReviewStatus::Pending}, {"B?", 2, 0.5, ReviewStatus::Rejected}};
        save_candidates((dir / "c.jsonl").string(), c);
        const auto back = load_candidates((dir / "c.jsonl").string());
        REQUIRE(back.size() == 2);
        CHECK(back[1].text == "B?");
        CHECK(back[1].status == ReviewStatus::Rejected);
        CHECK(back[0].mean_similarity == 0.25);
        scratch::write(dir / "d.jsonl",
                       json{{"candidate", 0},
                            {"decision", "accept"},
                            {"slots", {{{"name", "message"}, {"source", "news_text"}}}},
                            {"semantics", "s"}}
                               .dump() +
                           "\n" + json{{"candidate", 1}, {"decision", "reject"}}.dump() + "\n");
        const auto ds = load_decisions((dir / "d.jsonl").string());
        REQUIRE(ds.size() == 2);
        CHECK(ds[0].accept);
        CHECK(ds[0].slots[0].source == SlotSource::NewsText);
        CHECK_FALSE(ds[1].accept);
        scratch::write(dir / "bad.jsonl", json{{"candidate", 0}, {"decision", "maybe"}}.dump() + "\n");
        CHECK_THROWS_AS(load_decisions((dir / "bad.jsonl").string()), ValidationError);
    }

    TEST_CASE("placeholders are stripped for comparison") {
        CHECK(comparable_text(message_template(1, "Is it true?")) == "Message: . Is it true?");
    }
}
