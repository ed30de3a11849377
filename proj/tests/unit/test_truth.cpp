#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "factdnf/digest.hpp"
#include "factdnf/errors.hpp"
#include "factdnf/rng.hpp"
#include "factdnf/truth.hpp"
#include "scratch.hpp"

using namespace factdnf;
using nlohmann::json;

namespace {

// Direct long-double evaluation of 2 e^y / (e^n + e^y) - 1; exp stays finite
// up to about 11356 in extended precision.
double logits_oracle(double y, double n) {
    const long double ey = std::exp(static_cast<long double>(y));
    const long double en = std::exp(static_cast<long double>(n));
    return static_cast<double>(2.0L * ey / (en + ey) - 1.0L);
}

std::vector<QuestionTemplate> three_templates() {
    QuestionTemplate q1;
    q1.id = 1;
    q1.text = "Background Information: {background}. Statement: {statement}. Is the statement true?";
    q1.slots = {"background", "statement"};
    q1.slot_sources = {SlotSource::Evidence, SlotSource::Claim};
    q1.max_groundings = 3;
    QuestionTemplate q3;
    q3.id = 3;
    q3.text = "Message: {message}. Did the message contain adequate background information?";
    q3.slots = {"message"};
    q3.slot_sources = {SlotSource::NewsText};
    q3.max_groundings = 1;
    QuestionTemplate q7;
    q7.id = 7;
    q7.text = "Publisher Reputation: {reputation}. Improper?";
    q7.slots = {"reputation"};
    q7.slot_sources = {SlotSource::PublisherHistory};
    q7.max_groundings = 2;
    return {q1, q3, q7};
}

NewsSample two_claim_sample() {
    NewsSample s;
    s.id = "n1";
    s.text = "A message.";
    s.label = "true";
    s.evidence = std::vector<std::string>{"Some evidence."};
    s.claims = std::vector<std::string>{"claim a", "claim b"};
    s.publisher_history = "history";
    return s;
}

// Every question of the sample answered unanimously yes with m samples.
std::filesystem::path unanimous_fixture(const std::filesystem::path& dir, const NewsSample& s,
                                        const std::vector<QuestionTemplate>& templates, int m) {
    std::string text;
    for (const auto& t : templates)
        for (const auto& a : enumerate_groundings(s, t))
            text += json{{"question", a.question}, {"answer", {{"m_yes", m}, {"m_no", 0}}}}.dump() + "\n";
    scratch::write(dir / "fixture.jsonl", text);
    return dir / "fixture.jsonl";
}

}  // namespace

TEST_SUITE("truth") {
    TEST_CASE("logit examples") {
        CHECK(truth_from_logits(0.7, 0.7).mu() == 0.0);
        CHECK(truth_from_logits(std::log(3.0), 0.0).mu() == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(std::abs(truth_from_logits(1000.0, 0.0).mu() - 1.0) <= 1e-12);
        CHECK(std::abs(truth_from_logits(0.0, 1000.0).mu() + 1.0) <= 1e-12);
    }

    TEST_CASE("count examples") {
        CHECK(truth_from_samples(7, 3).mu() == doctest::Approx(0.4).epsilon(1e-12));
        CHECK(truth_from_samples(0, 0).mu() == 0.0);
        CHECK(truth_from_samples(0, 0).is_unknown());
        CHECK(truth_from_samples(5, 5).mu() == 0.0);
        CHECK_THROWS_AS(truth_from_samples(-1, 2), ValueError);
    }

    TEST_CASE("non-finite logits are rejected") {
        CHECK_THROWS_AS(truth_from_logits(NAN, 0.0), ValueError);
        CHECK_THROWS_AS(truth_from_logits(INFINITY, 0.0), ValueError);
        CHECK_THROWS_AS(TruthValue(1.5), ValueError);
    }

    TEST_CASE("logits agree with the direct formula") {
        Rng rng(11);
        for (int i = 0; i < 2000; ++i) {
            const double y = rng.uniform(-50.0, 50.0), n = rng.uniform(-50.0, 50.0);
            CHECK(truth_from_logits(y, n).mu() == doctest::Approx(logits_oracle(y, n)).epsilon(1e-12));
        }
    }

    TEST_CASE("antisymmetry, range and monotonicity") {
        Rng rng(12);
        for (int i = 0; i < 2000; ++i) {
            const double y = rng.uniform(-1e4, 1e4), n = rng.uniform(-1e4, 1e4);
            const double mu = truth_from_logits(y, n).mu();
            CHECK(mu >= -1.0);
            CHECK(mu <= 1.0);
            CHECK(mu == -truth_from_logits(n, y).mu());
            const auto a = static_cast<std::int64_t>(rng.below(100)), b = static_cast<std::int64_t>(rng.below(100));
            CHECK(truth_from_samples(a, b).mu() == -truth_from_samples(b, a).mu());
        }
        for (int i = 0; i < 500; ++i) {
            const double n = rng.uniform(-5.0, 5.0), y = rng.uniform(-5.0, 5.0);
            CHECK(truth_from_logits(y + 0.01, n).mu() > truth_from_logits(y, n).mu());
        }
    }

    TEST_CASE("padding with zeros") {
        const std::vector<Predicate> preds{{1, 1, "", 3}};
        const auto v = assemble_vector({{TruthValue(0.4)}}, preds, 0);
        CHECK(v.values == std::vector<double>{0.4, 0.0, 0.0});
        CHECK(v.groups == std::vector<AtomGroup>{{1, 0, 3}});
    }

    TEST_CASE("oversized groups keep a seeded subset in original order") {
        const std::vector<Predicate> preds{{1, 1, "", 2}};
        const std::vector<TruthValue> vals{TruthValue(0.1), TruthValue(0.2), TruthValue(0.3), TruthValue(0.4)};
        const auto a = assemble_vector({vals}, preds, 99);
        const auto b = assemble_vector({vals}, preds, 99);
        CHECK(a.values == b.values);
        REQUIRE(a.values.size() == 2);
        CHECK(a.values[0] < a.values[1]);
        std::set<std::vector<double>> subsets;
        for (std::uint64_t seed = 0; seed < 200; ++seed) subsets.insert(assemble_vector({vals}, preds, seed).values);
        CHECK(subsets.size() == 6);
    }

    TEST_CASE("all predicates empty gives the zero vector") {
        const std::vector<Predicate> preds{{1, 1, "", 2}, {2, 1, "", 3}};
        const auto v = assemble_vector({{}, {}}, preds, 5);
        CHECK(v.values == std::vector<double>(5, 0.0));
    }

    TEST_CASE("groups partition the vector") {
        const std::vector<Predicate> preds{{1, 1, "", 2}, {2, 1, "", 1}, {5, 1, "", 4}};
        const auto g = groups_for(preds);
        std::size_t next = 0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            CHECK(g[i].begin == next);
            CHECK(g[i].size == static_cast<std::size_t>(preds[i].max_groundings));
            next += g[i].size;
        }
    }

    TEST_CASE("unanimous answers fill slots with ones and pad the rest") {
        const auto dir = scratch::dir("truth-unanimous");
        const auto templates = three_templates();
        const auto s = two_claim_sample();
        BackendConfig cfg;
        cfg.fixture_path = unanimous_fixture(dir, s, templates, 10).string();
        MockBackend backend(cfg);
        AtomCache cache;
        EvaluationStats stats;
        const auto v = evaluate_sample(s, templates, &backend, cache, 1, &stats);
        // Q1 has 1 x 2 groundings in 3 slots; Q3 one of one; Q7 one of two.
        CHECK(v.values == std::vector<double>{1, 1, 0, 1, 1, 0});
        CHECK(stats.atoms == 4);
        CHECK(stats.backend_queries == 4);
        CHECK(backend.unlisted_count() == 0);
    }

    TEST_CASE("warm cache answers with the backend offline") {
        const auto dir = scratch::dir("truth-cache");
        const auto templates = three_templates();
        const auto s = two_claim_sample();
        BackendConfig cfg;
        cfg.fixture_path = unanimous_fixture(dir, s, templates, 10).string();
        cfg.seed = 3;
        MockBackend backend(cfg);
        AtomVector first;
        {
            AtomCache cache((dir / "cache.jsonl").string());
            first = evaluate_sample(s, templates, &backend, cache, 8);
        }
        AtomCache reloaded((dir / "cache.jsonl").string());
        CHECK(reloaded.size() == 4);
        CHECK(count_uncached(s, templates, reloaded) == 0);
        EvaluationStats stats;
        const auto second = evaluate_sample(s, templates, nullptr, reloaded, 8, &stats);
        CHECK(second.values == first.values);
        CHECK(stats.cache_hits == 4);
        CHECK(stats.backend_queries == 0);
    }

    TEST_CASE("missing cache entry without a backend is an unreachable failure") {
        AtomCache cache;
        try {
            evaluate_sample(two_claim_sample(), three_templates(), nullptr, cache, 0);
            FAIL("expected BackendError");
        } catch (const BackendError& e) {
            CHECK(e.unreachable());
        }
        CHECK(count_uncached(two_claim_sample(), three_templates(), cache) == 4);
    }

    TEST_CASE("corrupt cache line names its line number") {
        const auto dir = scratch::dir("truth-corrupt");
        const std::string q = "Q?";
        const std::string good = json{{"sample_id", "a"},
                                      {"template_id", 1},
                                      {"grounding_digest", digest_hex(q)},
                                      {"question", q},
                                      {"mu", 0.5}}
                                     .dump();
        scratch::write(dir / "cache.jsonl", good + "\n" + good + "\n{not json\n");
        try {
            AtomCache cache((dir / "cache.jsonl").string());
            FAIL("expected CacheError");
        } catch (const CacheError& e) {
            CHECK(e.line() == 3);
            CHECK(std::string(e.what()).find(":3:") != std::string::npos);
        }
    }

    TEST_CASE("cache detects a digest that does not match its question") {
        const auto dir = scratch::dir("truth-digest");
        scratch::write(dir / "cache.jsonl", json{{"sample_id", "a"},
                                                 {"template_id", 1},
                                                 {"grounding_digest", digest_hex("other")},
                                                 {"question", "Q?"},
                                                 {"mu", 0.5}}
                                                    .dump() +
                                                "\n");
        CHECK_THROWS_AS(AtomCache((dir / "cache.jsonl").string()), CacheError);
    }

    TEST_CASE("deferred writes land sorted on flush") {
        const auto dir = scratch::dir("truth-defer");
        const auto path = (dir / "cache.jsonl").string();
        {
            AtomCache cache(path);
            cache.defer_writes();
            cache.put("b", 1, "q1", TruthValue(0.1));
            cache.put("a", 2, "q2", TruthValue(0.2));
            cache.put("a", 1, "q3", TruthValue(0.3));
            cache.put("a", 1, "q0", TruthValue(0.4));
            CHECK(scratch::read(path).empty());
            cache.flush();
        }
        std::vector<std::string> order;
        std::istringstream in(scratch::read(path));
        for (std::string line; std::getline(in, line);) order.push_back(json::parse(line)["question"]);
        CHECK(order == std::vector<std::string>{"q3", "q0", "q2", "q1"});
    }

    TEST_CASE("re-running with the same seed is byte-identical") {
        const auto dir = scratch::dir("truth-rerun");
        auto templates = three_templates();
        templates[0].max_groundings = 1;
        auto s = two_claim_sample();
        s.evidence = std::vector<std::string>{"e1", "e2", "e3"};
        BackendConfig cfg;
        cfg.fixture_path = unanimous_fixture(dir, s, templates, 4).string();
        MockBackend backend(cfg);
        AtomCache c1, c2;
        CHECK(evaluate_sample(s, templates, &backend, c1, 77).values ==
              evaluate_sample(s, templates, &backend, c2, 77).values);
    }
}
