#include "factdnf/intervention.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "factdnf/errors.hpp"

namespace factdnf {

using nlohmann::json;

namespace {

std::map<std::string, int> token_counts(std::string_view s) {
    std::map<std::string, int> counts;
    std::string cur;
    for (char ch : s) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            ++counts[cur];
            cur.clear();
        }
    }
    if (!cur.empty()) ++counts[cur];
    return counts;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

}  // namespace

double token_cosine(std::string_view a, std::string_view b) {
    const auto ca = token_counts(a);
    const auto cb = token_counts(b);
    if (ca.empty() || cb.empty()) return (!a.empty() && a == b) ? 1.0 : 0.0;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [tok, n] : ca) {
        na += double(n) * n;
        if (auto it = cb.find(tok); it != cb.end()) dot += double(n) * it->second;
    }
    for (const auto& [_, n] : cb) nb += double(n) * n;
    if (ca == cb) return 1.0;
    return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
}

SimilarityFn embedding_similarity(HttpBackend& backend) {
    return [&backend](std::string_view a, std::string_view b) {
        if (!a.empty() && a == b) return 1.0;
        const auto ea = backend.embed(a);
        const auto eb = backend.embed(b);
        if (ea.size() != eb.size() || ea.empty()) throw ProtocolError("embedding dimensions disagree");
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t i = 0; i < ea.size(); ++i) {
            dot += ea[i] * eb[i];
            na += ea[i] * ea[i];
            nb += eb[i] * eb[i];
        }
        if (na == 0.0 || nb == 0.0) return 0.0;
        return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
    };
}

std::string intervention_prompt() {
    return "Write some questions that can be used to determine whether a news report is misinformation. The "
           "questions should be answerable by large language models in a close-book situation without requiring "
           "additional information. Please format each question using the <s> and </s> tags, such as <s>A "
           "question</s>.";
}

std::vector<std::string> parse_tagged_questions(std::string_view reply) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const auto open = reply.find("<s>", pos);
        if (open == std::string_view::npos) break;
        const auto close = reply.find("</s>", open + 3);
        if (close == std::string_view::npos) break;
        auto q = trim(reply.substr(open + 3, close - open - 3));
        if (!q.empty()) out.push_back(std::move(q));
        pos = close + 4;
    }
    return out;
}

std::string comparable_text(const QuestionTemplate& tmpl) {
    std::string out;
    std::size_t pos = 0;
    const std::string_view text = tmpl.text;
    while (pos < text.size()) {
        const auto open = text.find('{', pos);
        const auto close = open == std::string_view::npos ? open : text.find('}', open);
        if (close == std::string_view::npos) break;
        out.append(text.substr(pos, open - pos));
        pos = close + 1;
    }
    out.append(text.substr(std::min(pos, text.size())));
    return out;
}

std::vector<CandidateTemplate> generate_candidates(Backend& backend, const std::vector<std::string>& existing,
                                                   int iterations, const SimilarityFn& similarity,
                                                   std::ostream* log) {
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    std::vector<std::string> running = existing;
    std::vector<CandidateTemplate> added;
    const std::set<std::string> original(existing.begin(), existing.end());
    const auto prompt = intervention_prompt();

    for (int t = 1; t <= iterations; ++t) {
        const auto proposals = parse_tagged_questions(backend.complete(prompt));
        if (proposals.empty()) {
            if (log) *log << "iteration " << t << ": no tagged questions in reply\n";
            continue;
        }
        std::size_t best = 0;
        double best_score = 0.0;
        for (std::size_t i = 0; i < proposals.size(); ++i) {
            double total = 0.0;
            for (const auto& q : running) total += similarity(proposals[i], q);
            const double mean = running.empty() ? 0.0 : total / static_cast<double>(running.size());
            if (i == 0 || mean < best_score) {
                best = i;
                best_score = mean;
            }
        }
        if (log) *log << "iteration " << t << ": selected \"" << proposals[best] << "\" (mean similarity " << best_score << ")\n";
        running.push_back(proposals[best]);
        if (!original.count(proposals[best]) &&
            std::none_of(added.begin(), added.end(), [&](const auto& c) { return c.text == proposals[best]; }))
            added.push_back(CandidateTemplate{proposals[best], t, best_score, ReviewStatus::Pending});
    }
    return added;
}

// ---------------------------------------------------------------------------

namespace {

std::string slot_label(SlotSource source) {
    switch (source) {
        case SlotSource::NewsText: return "Message";
        case SlotSource::Claim: return "Statement";
        case SlotSource::Evidence: return "Background Information";
        case SlotSource::PublisherHistory: return "Publisher Reputation";
    }
    return "Message";
}

std::string lower_text(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

ReviewOutcome review(std::vector<CandidateTemplate>& candidates, const std::vector<ReviewDecision>& decisions,
                     const std::vector<QuestionTemplate>& existing) {
    int next_id = 0;
    std::set<std::string> seen;
    for (const auto& t : existing) {
        next_id = std::max(next_id, t.id);
        seen.insert(lower_text(t.text));
        seen.insert(lower_text(trim(comparable_text(t))));
    }
    ++next_id;

    ReviewOutcome outcome;
    std::set<std::size_t> decided;
    for (const auto& d : decisions) {
        if (d.candidate >= candidates.size())
            throw ValidationError("decision references unknown candidate " + std::to_string(d.candidate));
        if (candidates[d.candidate].status != ReviewStatus::Pending || !decided.insert(d.candidate).second)
            throw ValidationError("candidate " + std::to_string(d.candidate) + " is not pending");
        if (!d.accept) {
            outcome.rejected.push_back(d.candidate);
            continue;
        }
        const auto& cand = candidates[d.candidate];
        if (trim(cand.text).empty()) throw ValidationError("cannot accept an empty candidate");
        if (d.slots.empty())
            throw ValidationError("accepting candidate " + std::to_string(d.candidate) + " needs slot annotations");
        if (trim(d.semantics).empty())
            throw ValidationError("accepting candidate " + std::to_string(d.candidate) + " needs predicate semantics");

        QuestionTemplate t;
        t.id = next_id++;
        if (!d.text.empty()) {
            t.text = d.text;
        } else {
            for (const auto& slot : d.slots) t.text += slot_label(slot.source) + ": {" + slot.name + "}. ";
            t.text += trim(cand.text);
        }
        for (const auto& slot : d.slots) {
            t.slots.push_back(slot.name);
            t.slot_sources.push_back(slot.source);
        }
        t.semantics = d.semantics;
        t.negated_semantics = d.negated_semantics;
        t.max_groundings = d.max_groundings;
        validate(t);

        if (!seen.insert(lower_text(t.text)).second || !seen.insert(lower_text(trim(cand.text))).second)
            throw ValidationError("candidate " + std::to_string(d.candidate) + " duplicates an existing template");
        outcome.accepted.push_back(std::move(t));
    }

    for (const auto& d : decisions) candidates[d.candidate].status = d.accept ? ReviewStatus::Accepted : ReviewStatus::Rejected;
    return outcome;
}

void append_templates(const std::string& path, const std::vector<QuestionTemplate>& templates) {
    if (templates.empty()) return;
    std::string prior;
    {
        std::ifstream in(path, std::ios::binary);
        if (in) prior.assign(std::istreambuf_iterator<char>(in), {});
    }
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw ConfigError("cannot append to template file " + path);
    if (!prior.empty() && prior.back() != '\n') out << '\n';
    for (const auto& t : templates) out << to_json_line(t) << '\n';
}

namespace {

std::string_view status_name(ReviewStatus s) {
    switch (s) {
        case ReviewStatus::Pending: return "pending";
        case ReviewStatus::Accepted: return "accepted";
        case ReviewStatus::Rejected: return "rejected";
    }
    return "pending";
}

ReviewStatus parse_status(const std::string& s) {
    if (s == "pending") return ReviewStatus::Pending;
    if (s == "accepted") return ReviewStatus::Accepted;
    if (s == "rejected") return ReviewStatus::Rejected;
    throw ValidationError("unknown review status " + s);
}

}  // namespace

void save_candidates(const std::string& path, const std::vector<CandidateTemplate>& candidates) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write candidates " + path);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        out << json{{"index", i},
                    {"text", c.text},
                    {"iteration", c.iteration},
                    {"mean_similarity", c.mean_similarity},
                    {"status", status_name(c.status)}}
                   .dump()
            << '\n';
    }
}

std::vector<CandidateTemplate> load_candidates(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read candidates " + path);
    std::vector<CandidateTemplate> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        try {
            const auto j = json::parse(line);
            out.push_back(CandidateTemplate{j.at("text").get<std::string>(), j.value("iteration", 0),
                                            j.value("mean_similarity", 0.0),
                                            parse_status(j.value("status", std::string("pending")))});
        } catch (const json::exception& e) {
            throw ValidationError("bad candidate record: " + std::string(e.what()));
        }
    }
    return out;
}

std::vector<ReviewDecision> load_decisions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read decisions " + path);
    std::vector<ReviewDecision> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        try {
            const auto j = json::parse(line);
            ReviewDecision d;
            d.candidate = j.at("candidate").get<std::size_t>();
            const auto decision = j.at("decision").get<std::string>();
            if (decision != "accept" && decision != "reject")
                throw ValidationError("decision must be accept or reject");
            d.accept = decision == "accept";
            for (const auto& s : j.value("slots", json::array()))
                d.slots.push_back(SlotAnnotation{s.at("name").get<std::string>(),
                                                 parse_slot_source(s.at("source").get<std::string>())});
            d.semantics = j.value("semantics", std::string{});
            d.negated_semantics = j.value("negated_semantics", std::string{});
            d.max_groundings = j.value("max_groundings", 1);
            d.text = j.value("text", std::string{});
            out.push_back(std::move(d));
        } catch (const json::exception& e) {
            throw ValidationError("bad decision record: " + std::string(e.what()));
        }
    }
    return out;
}

}  // namespace factdnf
