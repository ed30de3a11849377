#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace factdnf {

// Where a template slot takes its candidate values from.
enum class SlotSource { NewsText, Claim, Evidence, PublisherHistory };

std::string_view to_string(SlotSource source);
SlotSource parse_slot_source(std::string_view name);

// Bound when a slot's source is absent from the sample.
inline constexpr std::string_view kNotApplicable = "not applicable";

struct NewsSample {
    std::string id;
    std::string text;
    std::string label;
    std::optional<std::vector<std::string>> evidence;
    std::optional<std::string> publisher_history;
    std::optional<std::vector<std::string>> claims;
};

// A Yes/No question with named `{placeholder}` slots. Each template is read
// as a predicate whose arity is its slot count; the predicate id equals the
// template id.
struct QuestionTemplate {
    int id = 0;
    std::string text;
    std::vector<std::string> slots;
    std::vector<SlotSource> slot_sources;
    std::string semantics;
    // Optional explicit negated reading used by the rule gloss.
    std::string negated_semantics;
    int max_groundings = 1;

    std::size_t arity() const { return slots.size(); }
};

struct Predicate {
    int id = 0;
    std::size_t arity = 1;
    std::string semantics;
    int max_groundings = 1;
};

struct LogicAtom {
    int predicate_id = 0;
    std::vector<std::string> grounding;
    std::string question;
};

// Placeholder names in order of appearance.
std::vector<std::string> placeholders_in(std::string_view text);

// Throws ValidationError when the template violates its invariants.
void validate(const QuestionTemplate& tmpl);

Predicate predicate_of(const QuestionTemplate& tmpl);
std::vector<Predicate> predicates_of(const std::vector<QuestionTemplate>& templates);

std::string render_question(const QuestionTemplate& tmpl, const std::vector<std::string>& grounding);

// Cartesian product of the slots' candidate values; the last slot varies
// fastest.
std::vector<LogicAtom> enumerate_groundings(const NewsSample& sample, const QuestionTemplate& tmpl);

// Line-delimited JSON template store.
std::vector<QuestionTemplate> load_templates(const std::string& path);
void save_templates(const std::string& path, const std::vector<QuestionTemplate>& templates);
std::string to_json_line(const QuestionTemplate& tmpl);
QuestionTemplate template_from_json_line(std::string_view line);

}  // namespace factdnf
