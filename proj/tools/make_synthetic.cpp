// Writes the bundled synthetic dataset: news records, a mock-backend fixture
// whose answers follow a planted rule, and a training config.
//
//   make_synthetic <templates.jsonl> <out dir> [samples] [seed]

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "factdnf/backend.hpp"
#include "factdnf/logic.hpp"
#include "factdnf/rng.hpp"

using nlohmann::json;
using namespace factdnf;

namespace {

const std::array<const char*, 12> kSubjects{"The city council", "A regional hospital", "The transport agency",
                                            "A local school board", "The state treasury", "A farming cooperative",
                                            "The harbor authority", "A university lab", "The water utility",
                                            "A county court", "The parks department", "A housing charity"};
const std::array<const char*, 10> kVerbs{"approved", "rejected", "announced", "postponed", "expanded",
                                         "audited", "cut", "doubled", "reviewed", "published"};
const std::array<const char*, 10> kObjects{"the annual budget", "a bridge repair plan", "new bus routes",
                                           "a vaccination drive", "teacher salaries", "a drought relief fund",
                                           "port fees", "a climate study", "water prices", "its spending records"};

template <typename A>
const char* pick(Rng& rng, const A& arr) {
    return arr[rng.below(arr.size())];
}

// Answer counts out of 10 samples for a grounding with the given truth.
json counts(Rng& rng, bool truth) {
    const auto strong = static_cast<std::int64_t>(7 + rng.below(4));
    const auto weak = static_cast<std::int64_t>(rng.below(11 - strong));
    return truth ? json{{"m_yes", strong}, {"m_no", weak}} : json{{"m_yes", weak}, {"m_no", strong}};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::cerr << "usage: make_synthetic <templates.jsonl> <out dir> [samples] [seed]\n";
        return 2;
    }
    const auto templates = load_templates(argv[1]);
    const std::filesystem::path out_dir = argv[2];
    const std::size_t n = argc > 3 ? std::stoul(argv[3]) : 2000;
    const std::uint64_t seed = argc > 4 ? std::stoull(argv[4]) : 2024;
    std::filesystem::create_directories(out_dir);

    Rng rng(seed);
    constexpr int kPublishers = 20;
    std::vector<bool> publisher_improper(kPublishers);
    for (auto&& p : publisher_improper) p = rng.below(3) == 0;

    std::map<std::string, json> fixture;
    std::ofstream data(out_dir / "dataset.jsonl", std::ios::binary);
    for (std::size_t i = 0; i < n; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "syn-%04zu", i);
        NewsSample s;
        s.id = id;
        s.text = std::string(pick(rng, kSubjects)) + " " + pick(rng, kVerbs) + " " + pick(rng, kObjects) +
                 " on day " + std::to_string(1 + rng.below(365)) + ", report " + std::to_string(i) + ".";
        const std::size_t evidence = 1 + rng.below(3);
        const std::size_t claims = 1 + rng.below(2);
        s.evidence.emplace();
        for (std::size_t k = 0; k < evidence; ++k)
            s.evidence->push_back("Record " + std::to_string(i) + "-" + std::to_string(k) + ": " +
                                  pick(rng, kSubjects) + " " + pick(rng, kVerbs) + " " + pick(rng, kObjects) + ".");
        s.claims.emplace();
        for (std::size_t k = 0; k < claims; ++k)
            s.claims->push_back("Claim " + std::to_string(i) + "-" + std::to_string(k) + ": " + pick(rng, kSubjects) +
                                " " + pick(rng, kVerbs) + " " + pick(rng, kObjects));
        const int publisher = static_cast<int>(rng.below(kPublishers + 2));
        if (publisher < kPublishers) s.publisher_history = "Outlet " + std::to_string(publisher) + " track record";

        // Hidden predicate values, keyed by template id.
        std::map<int, bool> truth;
        for (const auto& t : templates) truth[t.id] = rng.below(2) == 1;
        if (publisher < kPublishers) truth[7] = publisher_improper[publisher];
        // true iff (P2 and not P6) or (P4 and not P5)
        const bool label = (truth[2] && !truth[6]) || (truth[4] && !truth[5]);
        s.label = label ? "true" : "false";

        for (const auto& t : templates) {
            for (const auto& atom : enumerate_groundings(s, t)) {
                const auto key = question_id(atom.question);
                if (fixture.count(key)) continue;
                const bool not_applicable = atom.question.find(kNotApplicable) != std::string::npos;
                fixture[key] = not_applicable ? json{{"m_yes", 0}, {"m_no", 0}} : counts(rng, truth[t.id]);
            }
        }

        json j{{"id", s.id}, {"text", s.text}, {"label", s.label}, {"evidence", *s.evidence}, {"claims", *s.claims}};
        if (s.publisher_history) j["publisher_history"] = *s.publisher_history;
        data << j.dump() << '\n';
    }

    std::ofstream fx(out_dir / "fixture.jsonl", std::ios::binary);
    for (const auto& [hash, answer] : fixture) fx << json{{"question_hash", hash}, {"answer", answer}}.dump() << '\n';

    std::ofstream cfg(out_dir / "train_config.json", std::ios::binary);
    cfg << json{{"learning_rate", 0.001}, {"epochs", 30},          {"batch_size", 64},
                {"conjunctions", 10},     {"weight_decay", 0.0001}, {"anneal_epochs", 15}}
               .dump(1)
        << '\n';
    std::cout << n << " samples, " << fixture.size() << " fixture answers\n";
    return 0;
}
