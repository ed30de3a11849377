#include "factdnf/rules.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "factdnf/errors.hpp"

namespace factdnf {

using nlohmann::json;

std::size_t RuleSet::size() const {
    std::size_t n = 0;
    for (const auto& [_, lits] : conjunctions) n += lits.size();
    for (const auto& clause : label_clauses) n += clause.size();
    return n;
}

RuleSet extract_rules(const DnfModel& model, double weight_threshold) {
    RuleSet rules;
    rules.labels = model.labels;
    for (std::size_t c = 0; c < model.conj_layers.size(); ++c) {
        std::vector<Literal> lits;
        const auto& w = model.conj_layers[c].weights;
        for (std::size_t i = 0; i < w.size(); ++i)
            if (std::abs(w[i]) > weight_threshold) lits.push_back(Literal{model.grouping[i].predicate_id, w[i] < 0.0});
        if (!lits.empty()) rules.conjunctions[c] = std::move(lits);
    }
    for (const auto& layer : model.disj_layers) {
        auto& clause = rules.label_clauses.emplace_back();
        for (std::size_t c = 0; c < layer.weights.size(); ++c) {
            if (std::abs(layer.weights[c]) <= weight_threshold) continue;
            clause.push_back(Literal{static_cast<int>(c), layer.weights[c] < 0.0});
            rules.conjunctions.try_emplace(c);
        }
    }
    return rules;
}

int evaluate_conjunction(const RuleSet& rules, std::size_t conj, const std::map<int, bool>& assignment) {
    const auto it = rules.conjunctions.find(conj);
    if (it == rules.conjunctions.end() || it->second.empty()) return 0;
    for (const auto& lit : it->second) {
        const auto value = assignment.find(lit.index);
        if (value == assignment.end()) throw ValueError("assignment lacks predicate " + std::to_string(lit.index));
        if (value->second == lit.negated) return -1;
    }
    return 1;
}

int evaluate_clause(const RuleSet& rules, std::size_t label, const std::map<int, bool>& assignment) {
    const auto& clause = rules.label_clauses.at(label);
    if (clause.empty()) return 0;
    int best = -1;
    for (const auto& term : clause) {
        int v = evaluate_conjunction(rules, static_cast<std::size_t>(term.index), assignment);
        if (term.negated) v = -v;
        best = std::max(best, v);
    }
    return best;
}

std::size_t decide(const RuleSet& rules, const std::map<int, bool>& assignment) {
    std::size_t best = 0;
    int best_value = evaluate_clause(rules, 0, assignment);
    for (std::size_t l = 1; l < rules.label_clauses.size(); ++l) {
        const int v = evaluate_clause(rules, l, assignment);
        if (v > best_value) {
            best = l;
            best_value = v;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------

void PruneConfig::validate() const {
    if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");
    if (!(weight_threshold > 0.0)) throw ConfigError("weight threshold must be positive");
}

namespace {

class Pruner {
public:
    Pruner(DnfModel& model, const std::vector<Example>& val, const PruneConfig& config)
        : model_(model), val_(val), config_(config), acc_(accuracy(model, val)) {}

    double accuracy_now() const { return acc_; }
    std::size_t steps() const { return steps_; }

    // Drop test: below epsilon, or no loss at all (so epsilon = 0 still
    // removes weights with zero impact).
    bool try_remove(double& weight) {
        if (std::abs(weight) <= config_.weight_threshold) return false;
        const double old = weight;
        weight = 0.0;
        const double next = accuracy(model_, val_);
        const double drop = acc_ - next;
        if (drop < config_.epsilon || drop <= 0.0) {
            acc_ = next;
            ++steps_;
            return true;
        }
        weight = old;
        return false;
    }

    void prune_disjunctions() {
        std::vector<double*> candidates;
        for (auto& layer : model_.disj_layers)
            for (auto& w : layer.weights) candidates.push_back(&w);
        prune_in_order(candidates);
    }

    void prune_conjunction_inputs() {
        std::vector<double*> candidates;
        for (std::size_t c = 0; c < model_.conj_layers.size(); ++c) {
            if (!used(c)) continue;
            for (auto& w : model_.conj_layers[c].weights) candidates.push_back(&w);
        }
        prune_in_order(candidates);
    }

    void drop_unused_conjunctions() {
        for (std::size_t c = 0; c < model_.conj_layers.size(); ++c) {
            if (used(c)) continue;
            for (auto& w : model_.conj_layers[c].weights) w = 0.0;
        }
        acc_ = accuracy(model_, val_);
    }

    void drop_terms_on_empty_conjunctions() {
        for (std::size_t c = 0; c < model_.conj_layers.size(); ++c) {
            const auto& w = model_.conj_layers[c].weights;
            const bool empty = std::none_of(w.begin(), w.end(),
                                            [&](double x) { return std::abs(x) > config_.weight_threshold; });
            if (!empty) continue;
            for (auto& layer : model_.disj_layers) layer.weights[c] = 0.0;
        }
        acc_ = accuracy(model_, val_);
    }

private:
    bool used(std::size_t c) const {
        return std::any_of(model_.disj_layers.begin(), model_.disj_layers.end(), [&](const auto& layer) {
            return std::abs(layer.weights[c]) > config_.weight_threshold;
        });
    }

    void prune_in_order(std::vector<double*>& candidates) {
        // stable_sort keeps index order among equal magnitudes.
        std::stable_sort(candidates.begin(), candidates.end(),
                         [](const double* a, const double* b) { return std::abs(*a) < std::abs(*b); });
        for (double* w : candidates) try_remove(*w);
    }

    DnfModel& model_;
    const std::vector<Example>& val_;
    PruneConfig config_;
    double acc_;
    std::size_t steps_ = 0;
};

}  // namespace

PruneResult prune(const DnfModel& model, const std::vector<Example>& val_set, const PruneConfig& config) {
    config.validate();
    if (val_set.empty()) throw DataError("pruning needs a non-empty validation split");

    PruneResult result{model, {}, 0.0, 0.0, 0, 0, 0};
    Pruner pruner(result.model, val_set, config);
    result.initial_accuracy = pruner.accuracy_now();
    result.initial_rule_size = extract_rules(model, config.weight_threshold).size();

    while (true) {
        const auto before = extract_rules(result.model, config.weight_threshold).size();
        pruner.prune_disjunctions();
        pruner.drop_unused_conjunctions();
        pruner.prune_conjunction_inputs();
        pruner.drop_terms_on_empty_conjunctions();
        pruner.prune_disjunctions();
        ++result.iterations;
        const auto after = extract_rules(result.model, config.weight_threshold).size();
        if (after == before) break;
    }
    result.final_accuracy = pruner.accuracy_now();
    result.steps = pruner.steps();
    result.rules = extract_rules(result.model, config.weight_threshold);
    return result;
}

// ---------------------------------------------------------------------------

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

std::string to_json_line(const AuditRecord& r) {
    json j{{"layer", r.layer == LayerKind::Conjunctive ? "conj" : "disj"},
           {"layer_index", r.layer_index},
           {"target_index", r.target_index},
           {"old_value", r.old_value},
           {"new_value", r.new_value},
           {"timestamp", r.timestamp},
           {"note", r.note}};
    return j.dump();
}

void AuditLog::append(const AuditRecord& record) const {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw ConfigError("cannot append to audit log " + path_);
    out << to_json_line(record) << '\n';
}

std::vector<AuditRecord> AuditLog::read() const {
    std::vector<AuditRecord> out;
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = json::parse(line);
        AuditRecord r;
        r.layer = j.at("layer").get<std::string>() == "conj" ? LayerKind::Conjunctive : LayerKind::Disjunctive;
        r.layer_index = j.at("layer_index").get<std::size_t>();
        r.target_index = j.at("target_index").get<std::size_t>();
        r.old_value = j.at("old_value").get<double>();
        r.new_value = j.at("new_value").get<double>();
        r.timestamp = j.at("timestamp").get<std::string>();
        r.note = j.value("note", std::string{});
        out.push_back(std::move(r));
    }
    return out;
}

std::size_t conj_target_for_predicate(const DnfModel& model, int predicate_id) {
    for (std::size_t i = 0; i < model.grouping.size(); ++i)
        if (model.grouping[i].predicate_id == predicate_id) return i;
    throw ValueError("model has no predicate P_" + std::to_string(predicate_id));
}

AuditRecord intervene_weight(DnfModel& model, LayerKind layer, std::size_t layer_index, std::size_t target_index,
                             double new_value, std::string note, const AuditLog* log) {
    auto& layers = layer == LayerKind::Conjunctive ? model.conj_layers : model.disj_layers;
    if (layer_index >= layers.size()) throw ValueError("layer index " + std::to_string(layer_index) + " out of range");
    auto& weights = layers[layer_index].weights;
    if (target_index >= weights.size())
        throw ValueError("target index " + std::to_string(target_index) + " out of range");
    if (!std::isfinite(new_value)) throw ValueError("weights must be finite");

    AuditRecord record{layer, layer_index, target_index, weights[target_index], new_value, utc_now(), std::move(note)};
    weights[target_index] = new_value;
    if (log) log->append(record);
    return record;
}

// ---------------------------------------------------------------------------

std::string negate_semantics(const std::string& semantics) {
    static const std::pair<const char*, const char*> rewrites[] = {
        {" is ", " is not "},         {" are ", " are not "},         {" has been ", " has not been "},
        {" has ", " does not have "}, {" contains ", " does not contain "}, {" exhibits ", " does not exhibit "},
    };
    for (const auto& [from, to] : rewrites) {
        const auto pos = semantics.find(from);
        if (pos != std::string::npos)
            return semantics.substr(0, pos) + to + semantics.substr(pos + std::string(from).size());
    }
    return "it is not the case that " + semantics;
}

namespace {

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string lower_first(std::string s) {
    if (!s.empty() && s[0] >= 'A' && s[0] <= 'Z') s[0] = static_cast<char>(s[0] - 'A' + 'a');
    while (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

std::string literal_formula(const Literal& lit, const char* prefix) {
    return std::string(lit.negated ? "¬" : "") + prefix + std::to_string(lit.index);
}

std::string literal_gloss(const Literal& lit, const std::map<int, PredicateText>& predicates) {
    const auto it = predicates.find(lit.index);
    const std::string name = "P_" + std::to_string(lit.index);
    if (it == predicates.end() || it->second.semantics.empty())
        return name + (lit.negated ? " does not hold" : " holds");
    const auto& text = it->second;
    if (!lit.negated) return lower_first(text.semantics);
    return lower_first(text.negated.empty() ? negate_semantics(text.semantics) : text.negated);
}

}  // namespace

std::string render_rules(const RuleSet& rules, const std::map<int, PredicateText>& predicates) {
    if (rules.empty()) return "No rules survive: every weight is at or below the threshold.\n";

    std::string out;
    for (const auto& [c, lits] : rules.conjunctions) {
        std::vector<std::string> parts;
        for (const auto& lit : lits) parts.push_back(literal_formula(lit, "P_"));
        out += "conj_" + std::to_string(c) + " = " + (parts.empty() ? "(empty)" : join(parts, " ∧ ")) + "\n";
    }
    for (std::size_t l = 0; l < rules.labels.size(); ++l) {
        std::vector<std::string> parts;
        for (const auto& term : rules.label_clauses[l]) parts.push_back(literal_formula(term, "conj_"));
        out += "P_" + rules.labels[l] + " = " + (parts.empty() ? "(no rule)" : join(parts, " ∨ ")) + "\n";
    }

    out += "\nIn words:\n";
    std::map<std::size_t, std::vector<std::string>> conj_gloss;
    for (const auto& [c, lits] : rules.conjunctions) {
        std::vector<std::string> parts;
        for (const auto& lit : lits) parts.push_back(literal_gloss(lit, predicates));
        conj_gloss[c] = parts;
        if (!parts.empty()) out += "conj_" + std::to_string(c) + ": " + join(parts, " and ") + ".\n";
    }
    for (std::size_t l = 0; l < rules.labels.size(); ++l) {
        const auto& clause = rules.label_clauses[l];
        if (clause.empty()) continue;
        std::vector<std::string> terms;
        for (const auto& term : clause) {
            const auto& parts = conj_gloss[static_cast<std::size_t>(term.index)];
            if (parts.empty()) {
                terms.push_back("conj_" + std::to_string(term.index) + (term.negated ? " is false" : " is true"));
            } else if (parts.size() == 1) {
                const auto& lit = rules.conjunctions.at(static_cast<std::size_t>(term.index)).front();
                terms.push_back(literal_gloss(Literal{lit.index, lit.negated != term.negated}, predicates));
            } else {
                const auto body = join(parts, " and ");
                terms.push_back(term.negated ? "not (" + body + ")" : (clause.size() > 1 ? "(" + body + ")" : body));
            }
        }
        out += "The news is " + rules.labels[l] + " when " + join(terms, " or ") + ".\n";
    }
    return out;
}

}  // namespace factdnf
