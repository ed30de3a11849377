#include "factdnf/logic.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "factdnf/errors.hpp"

namespace factdnf {

using nlohmann::json;

std::string_view to_string(SlotSource source) {
    switch (source) {
        case SlotSource::NewsText: return "news_text";
        case SlotSource::Claim: return "claim";
        case SlotSource::Evidence: return "evidence";
        case SlotSource::PublisherHistory: return "publisher_history";
    }
    return "news_text";
}

SlotSource parse_slot_source(std::string_view name) {
    if (name == "news_text") return SlotSource::NewsText;
    if (name == "claim") return SlotSource::Claim;
    if (name == "evidence") return SlotSource::Evidence;
    if (name == "publisher_history") return SlotSource::PublisherHistory;
    throw ValidationError("unknown slot source '" + std::string(name) + "'");
}

std::vector<std::string> placeholders_in(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while ((pos = text.find('{', pos)) != std::string_view::npos) {
        const auto close = text.find('}', pos + 1);
        if (close == std::string_view::npos) break;
        out.emplace_back(text.substr(pos + 1, close - pos - 1));
        pos = close + 1;
    }
    return out;
}

void validate(const QuestionTemplate& tmpl) {
    const std::string where = "template " + std::to_string(tmpl.id) + ": ";
    if (tmpl.text.empty()) throw ValidationError(where + "empty text");
    if (tmpl.slots.empty()) throw ValidationError(where + "no slots");
    if (tmpl.slot_sources.size() != tmpl.slots.size())
        throw ValidationError(where + "slot_sources length differs from slots");
    if (tmpl.max_groundings < 1) throw ValidationError(where + "max_groundings must be >= 1");

    std::set<std::string> declared(tmpl.slots.begin(), tmpl.slots.end());
    if (declared.size() != tmpl.slots.size()) throw ValidationError(where + "duplicate slot name");

    auto found = placeholders_in(tmpl.text);
    std::set<std::string> used(found.begin(), found.end());
    if (used.size() != found.size()) throw ValidationError(where + "placeholder repeated in text");
    if (used != declared) throw ValidationError(where + "placeholders and slots disagree");
}

Predicate predicate_of(const QuestionTemplate& tmpl) {
    return Predicate{tmpl.id, tmpl.arity(), tmpl.semantics, tmpl.max_groundings};
}

std::vector<Predicate> predicates_of(const std::vector<QuestionTemplate>& templates) {
    std::vector<Predicate> out;
    out.reserve(templates.size());
    for (const auto& t : templates) out.push_back(predicate_of(t));
    return out;
}

std::string render_question(const QuestionTemplate& tmpl, const std::vector<std::string>& grounding) {
    if (tmpl.slots.empty()) throw GroundingError("template has no slots to ground");
    if (grounding.size() != tmpl.slots.size()) {
        throw GroundingError("template " + std::to_string(tmpl.id) + " expects " +
                             std::to_string(tmpl.slots.size()) + " values, got " +
                             std::to_string(grounding.size()));
    }
    for (std::size_t i = 0; i < grounding.size(); ++i) {
        if (grounding[i].empty())
            throw GroundingError("empty value for slot '" + tmpl.slots[i] + "'");
    }

    // Single left-to-right pass so slot values are never re-scanned.
    std::string out;
    out.reserve(tmpl.text.size() + 64);
    std::size_t pos = 0;
    const std::string_view text = tmpl.text;
    while (pos < text.size()) {
        const auto open = text.find('{', pos);
        if (open == std::string_view::npos) break;
        const auto close = text.find('}', open + 1);
        if (close == std::string_view::npos) break;
        const auto name = text.substr(open + 1, close - open - 1);
        const auto it = std::find(tmpl.slots.begin(), tmpl.slots.end(), name);
        out.append(text.substr(pos, open - pos));
        if (it == tmpl.slots.end()) {
            out.append(text.substr(open, close - open + 1));
        } else {
            out.append(grounding[static_cast<std::size_t>(it - tmpl.slots.begin())]);
        }
        pos = close + 1;
    }
    out.append(text.substr(pos));
    return out;
}

namespace {

std::vector<std::string> candidates_for(const NewsSample& sample, SlotSource source) {
    auto or_sentinel = [](const std::optional<std::vector<std::string>>& values) {
        if (values && !values->empty()) return *values;
        return std::vector<std::string>{std::string(kNotApplicable)};
    };
    switch (source) {
        case SlotSource::NewsText: return {sample.text};
        case SlotSource::Claim: return or_sentinel(sample.claims);
        case SlotSource::Evidence: return or_sentinel(sample.evidence);
        case SlotSource::PublisherHistory:
            if (sample.publisher_history && !sample.publisher_history->empty())
                return {*sample.publisher_history};
            return {std::string(kNotApplicable)};
    }
    return {};
}

}  // namespace

std::vector<LogicAtom> enumerate_groundings(const NewsSample& sample, const QuestionTemplate& tmpl) {
    std::vector<std::vector<std::string>> candidates;
    candidates.reserve(tmpl.slot_sources.size());
    std::size_t total = 1;
    for (auto source : tmpl.slot_sources) {
        candidates.push_back(candidates_for(sample, source));
        total *= candidates.back().size();
    }

    std::vector<LogicAtom> atoms;
    atoms.reserve(total);
    std::vector<std::size_t> odometer(candidates.size(), 0);
    for (std::size_t n = 0; n < total; ++n) {
        LogicAtom atom;
        atom.predicate_id = tmpl.id;
        for (std::size_t s = 0; s < candidates.size(); ++s)
            atom.grounding.push_back(candidates[s][odometer[s]]);
        atom.question = render_question(tmpl, atom.grounding);
        atoms.push_back(std::move(atom));

        for (std::size_t s = candidates.size(); s-- > 0;) {
            if (++odometer[s] < candidates[s].size()) break;
            odometer[s] = 0;
        }
    }
    return atoms;
}

std::string to_json_line(const QuestionTemplate& tmpl) {
    json j;
    j["id"] = tmpl.id;
    j["text"] = tmpl.text;
    j["slots"] = tmpl.slots;
    std::vector<std::string> sources;
    for (auto s : tmpl.slot_sources) sources.emplace_back(to_string(s));
    j["slot_sources"] = sources;
    j["semantics"] = tmpl.semantics;
    if (!tmpl.negated_semantics.empty()) j["negated_semantics"] = tmpl.negated_semantics;
    j["max_groundings"] = tmpl.max_groundings;
    return j.dump();
}

QuestionTemplate template_from_json_line(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed template record: ") + e.what());
    }
    try {
        QuestionTemplate t;
        t.id = j.at("id").get<int>();
        t.text = j.at("text").get<std::string>();
        t.slots = j.at("slots").get<std::vector<std::string>>();
        for (const auto& s : j.at("slot_sources")) t.slot_sources.push_back(parse_slot_source(s.get<std::string>()));
        t.semantics = j.value("semantics", std::string{});
        t.negated_semantics = j.value("negated_semantics", std::string{});
        t.max_groundings = j.value("max_groundings", 1);
        validate(t);
        return t;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("template record missing field: ") + e.what());
    }
}

std::vector<QuestionTemplate> load_templates(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open template file " + path);
    std::vector<QuestionTemplate> out;
    std::set<int> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        try {
            out.push_back(template_from_json_line(line));
        } catch (const ValidationError& e) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!ids.insert(out.back().id).second)
            throw ValidationError(path + ":" + std::to_string(lineno) + ": duplicate template id");
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return out;
}

void save_templates(const std::string& path, const std::vector<QuestionTemplate>& templates) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write template file " + path);
    for (const auto& t : templates) out << to_json_line(t) << '\n';
}

}  // namespace factdnf
