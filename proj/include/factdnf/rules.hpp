#pragma once

#include <map>
#include <string>
#include <vector>

#include "factdnf/dnf.hpp"
#include "factdnf/trainer.hpp"

namespace factdnf {

// In a conjunction `index` is a predicate id; in a label clause it is a
// conjunction index.
struct Literal {
    int index = 0;
    bool negated = false;
    bool operator==(const Literal&) const = default;
};

struct RuleSet {
    std::vector<std::string> labels;
    std::map<std::size_t, std::vector<Literal>> conjunctions;
    // Parallel to `labels`.
    std::vector<std::vector<Literal>> label_clauses;

    // Conjunction literals plus clause terms.
    std::size_t size() const;
    bool empty() const { return size() == 0; }
    bool operator==(const RuleSet&) const = default;
};

// Literal iff |w| > weight_threshold, negated iff w < 0.
RuleSet extract_rules(const DnfModel& model, double weight_threshold);

// Three-valued reading of a rule set over boolean predicate values: +1 true,
// -1 false, 0 unknown (a conjunction or clause with no literals).
int evaluate_conjunction(const RuleSet& rules, std::size_t conj, const std::map<int, bool>& assignment);
int evaluate_clause(const RuleSet& rules, std::size_t label, const std::map<int, bool>& assignment);
// Label with the highest clause value, lowest index on ties.
std::size_t decide(const RuleSet& rules, const std::map<int, bool>& assignment);

struct PruneConfig {
    double epsilon = 0.005;
    double weight_threshold = 1e-4;
    void validate() const;
};

struct PruneResult {
    DnfModel model;
    RuleSet rules;
    double initial_accuracy = 0.0;
    double final_accuracy = 0.0;
    // Removals accepted under the accuracy-drop test.
    std::size_t steps = 0;
    std::size_t iterations = 0;
    std::size_t initial_rule_size = 0;
};

// Greedy pruning until the extracted rule size stops changing. A weight is
// removed (set to exactly 0) when the validation accuracy drop is below
// epsilon; candidates are tried in ascending |w| order, index order on ties.
PruneResult prune(const DnfModel& model, const std::vector<Example>& val_set, const PruneConfig& config);

enum class LayerKind { Conjunctive, Disjunctive };

struct AuditRecord {
    LayerKind layer = LayerKind::Conjunctive;
    std::size_t layer_index = 0;
    std::size_t target_index = 0;
    double old_value = 0.0;
    double new_value = 0.0;
    std::string timestamp;
    std::string note;
};

std::string to_json_line(const AuditRecord& record);

// Append-only JSONL log of manual weight edits.
class AuditLog {
public:
    explicit AuditLog(std::string path) : path_(std::move(path)) {}
    void append(const AuditRecord& record) const;
    std::vector<AuditRecord> read() const;

private:
    std::string path_;
};

// Position of a predicate inside a conjunctive layer's weights.
std::size_t conj_target_for_predicate(const DnfModel& model, int predicate_id);

AuditRecord intervene_weight(DnfModel& model, LayerKind layer, std::size_t layer_index, std::size_t target_index,
                             double new_value, std::string note = {}, const AuditLog* log = nullptr);

struct PredicateText {
    std::string semantics;
    std::string negated;
};

std::string negate_semantics(const std::string& semantics);

// Formula lines (conjunctions ascending, then labels in label order) followed
// by a plain-language reading.
std::string render_rules(const RuleSet& rules, const std::map<int, PredicateText>& predicates);

}  // namespace factdnf
