#include <doctest.h>

#include <functional>
#include <set>

#include "factdnf/errors.hpp"
#include "factdnf/rules.hpp"
#include "planted.hpp"
#include "scratch.hpp"

using namespace factdnf;

namespace {

std::vector<AtomGroup> single_groups(int n) {
    std::vector<AtomGroup> g;
    for (int i = 0; i < n; ++i) g.push_back({i + 1, static_cast<std::size_t>(i), 1});
    return g;
}

DnfModel zero_model(int predicates, std::size_t conjunctions, std::vector<std::string> labels = {"true", "false"}) {
    auto m = make_model(std::move(labels), single_groups(predicates), conjunctions, 0, {}, 0.0);
    set_delta(m, 1.0);
    return m;
}

// The GossipCop-style rule table over eight predicates and fifty conjunctions.
DnfModel table_model() {
    auto m = zero_model(8, 50);
    auto& c34 = m.conj_layers[34].weights;
    c34[1] = -1.0;
    c34[2] = 1.0;
    c34[5] = 1.0;
    c34[7] = 1.0;
    auto& c43 = m.conj_layers[43].weights;
    c43[2] = 1.0;
    c43[5] = 1.0;
    c43[7] = 1.0;
    m.conj_layers[27].weights[3] = -1.0;
    m.disj_layers[0].weights[34] = -0.7;
    m.disj_layers[0].weights[43] = -0.9;
    m.disj_layers[1].weights[27] = 1.2;
    return m;
}

std::vector<Example> all_assignments(int predicates, const std::function<std::size_t(unsigned)>& label) {
    std::vector<Example> out;
    for (unsigned bits = 0; bits < (1u << predicates); ++bits) {
        Example e;
        e.id = std::to_string(bits);
        for (int i = 0; i < predicates; ++i) e.atoms.push_back((bits >> i) & 1u ? 1.0 : -1.0);
        e.label = label(bits);
        out.push_back(e);
    }
    return out;
}

std::map<int, PredicateText> table_semantics() {
    return {{2, {"Given the background information, the message is true", ""}},
            {3, {"The message contains adequate background information", ""}},
            {4, {"The background information in the message is accurate and objective", ""}},
            {6, {"The message has an improper intention", ""}},
            {8, {"The statement is consistent with the background information", ""}}};
}

}  // namespace

TEST_SUITE("rules") {
    TEST_CASE("sign and threshold decide literals") {
        auto m = zero_model(3, 1);
        m.conj_layers[0].weights = {0.9, -0.8, 1e-6};
        m.disj_layers[0].weights = {1.0};
        const auto r = extract_rules(m, 1e-4);
        CHECK(r.conjunctions.at(0) == std::vector<Literal>{{1, false}, {2, true}});
        CHECK(r.label_clauses[0] == std::vector<Literal>{{0, false}});
        CHECK(r.label_clauses[1].empty());
    }

    TEST_CASE("negative disjunctive weight negates the conjunction") {
        const auto r = extract_rules(table_model(), 1e-4);
        CHECK(r.label_clauses[0] == std::vector<Literal>{{34, true}, {43, true}});
        CHECK(r.label_clauses[1] == std::vector<Literal>{{27, false}});
    }

    TEST_CASE("all-zero model has no rules") {
        const auto r = extract_rules(zero_model(4, 5), 1e-4);
        CHECK(r.empty());
        CHECK(r.size() == 0);
        CHECK(r.conjunctions.empty());
    }

    TEST_CASE("referenced conjunctions always exist") {
        auto m = zero_model(2, 3);
        m.disj_layers[1].weights[2] = 0.5;
        const auto r = extract_rules(m, 1e-4);
        CHECK(r.conjunctions.count(2) == 1);
        CHECK(r.conjunctions.at(2).empty());
    }

    TEST_CASE("three-valued decision") {
        const auto r = extract_rules(table_model(), 1e-4);
        std::map<int, bool> a;
        for (int i = 1; i <= 8; ++i) a[i] = true;
        // conj_34 false (P2 true), so P_true holds.
        CHECK(evaluate_clause(r, 0, a) == 1);
        CHECK(evaluate_clause(r, 1, a) == -1);
        CHECK(decide(r, a) == 0);
        a[2] = false;
        a[4] = false;
        // Both conjunctions true: P_true false; P4 false: P_false true.
        CHECK(evaluate_clause(r, 0, a) == -1);
        CHECK(decide(r, a) == 1);
        RuleSet empty;
        empty.labels = {"a", "b"};
        empty.label_clauses = {{}, {}};
        CHECK(decide(empty, a) == 0);
    }

    TEST_CASE("table-shaped rules render in the table line format") {
        const auto text = render_rules(extract_rules(table_model(), 1e-4), table_semantics());
        const std::string expected_formulas =
            "conj_27 = ¬P_4\n"
            "conj_34 = ¬P_2 ∧ P_3 ∧ P_6 ∧ P_8\n"
            "conj_43 = P_3 ∧ P_6 ∧ P_8\n"
            "P_true = ¬conj_34 ∨ ¬conj_43\n"
            "P_false = conj_27\n";
        CHECK(text.substr(0, expected_formulas.size()) == expected_formulas);
        CHECK(text.find("The news is false when the background information in the message is not accurate and "
                        "objective.") != std::string::npos);
        CHECK(render_rules(extract_rules(table_model(), 1e-4), table_semantics()) == text);
    }

    TEST_CASE("empty rule set renders a notice") {
        const auto text = render_rules(extract_rules(zero_model(2, 2), 1e-4), {});
        CHECK(text.find("No rules survive") == 0);
    }

    TEST_CASE("negated gloss") {
        CHECK(negate_semantics("The background information in the message is accurate and objective") ==
              "The background information in the message is not accurate and objective");
        CHECK(negate_semantics("The message contains adequate background information") ==
              "The message does not contain adequate background information");
        CHECK(negate_semantics("it rains") == "it is not the case that it rains");
    }

    TEST_CASE("explicit negated semantics wins") {
        auto m = zero_model(1, 1);
        m.conj_layers[0].weights = {-1.0};
        m.disj_layers[0].weights = {1.0};
        const auto text = render_rules(extract_rules(m, 1e-4), {{1, {"Sky is blue", "the sky is grey"}}});
        CHECK(text.find("The news is true when the sky is grey.") != std::string::npos);
    }

    TEST_CASE("duplicate conjunction is pruned without loss") {
        auto m = zero_model(2, 2);
        m.conj_layers[0].weights = {1.0, 0.0};
        m.conj_layers[1].weights = {1.0, 0.0};
        m.disj_layers[0].weights = {1.0, 1.0};
        m.disj_layers[1].weights = {-1.0, -1.0};
        const auto val = all_assignments(2, [](unsigned bits) { return (bits & 1u) ? 0u : 1u; });
        REQUIRE(accuracy(m, val) == 1.0);
        const auto r = prune(m, val, PruneConfig{});
        CHECK(r.initial_accuracy - r.final_accuracy < 0.005);
        CHECK(accuracy(r.model, val) == r.final_accuracy);
        std::set<int> used;
        for (const auto& clause : r.rules.label_clauses)
            for (const auto& t : clause) used.insert(t.index);
        CHECK(used.size() == 1);
        CHECK(r.rules.size() < r.initial_rule_size);
    }

    TEST_CASE("zero epsilon removes only weights without impact") {
        auto m = zero_model(3, 2);
        m.conj_layers[0].weights = {1.0, 0.0, 0.3};
        m.conj_layers[1].weights = {0.0, 0.8, 0.0};
        m.disj_layers[0].weights = {1.0, 0.2};
        m.disj_layers[1].weights = {-1.0, 0.0};
        const auto val = all_assignments(3, [](unsigned bits) { return (bits & 1u) ? 0u : 1u; });
        const auto r = prune(m, val, PruneConfig{0.0, 1e-4});
        CHECK(r.final_accuracy >= r.initial_accuracy);
        CHECK(accuracy(r.model, val) == r.final_accuracy);
    }

    TEST_CASE("pruning contract on a trained model") {
        const auto rule = planted::two_term_rule();
        const auto tr = planted::examples(planted::make_samples(rule, 400, 21, "t"));
        const auto va = planted::examples(planted::make_samples(rule, 100, 22, "v"));
        TrainConfig cfg;
        cfg.epochs = 8;
        cfg.anneal_epochs = 4;
        cfg.conjunctions = 6;
        cfg.learning_rate = 0.01;
        cfg.seed = 3;
        const auto trained = train(tr, va, planted::labels(), planted::grouping(), cfg);
        const PruneConfig pc;
        const auto r = prune(trained.model, va, pc);
        CHECK(r.initial_accuracy == accuracy(trained.model, va));
        CHECK(r.final_accuracy >= r.initial_accuracy - static_cast<double>(r.steps) * pc.epsilon - 1e-12);
        CHECK(r.rules.size() <= r.initial_rule_size);
        CHECK(r.iterations >= 1);
        const auto again = prune(r.model, va, pc);
        CHECK(again.steps == 0);
        CHECK(model_to_json(again.model) == model_to_json(r.model));
        CHECK(again.rules == r.rules);
    }

    TEST_CASE("prune configuration checks") {
        CHECK_THROWS_AS(PruneConfig({-1.0, 1e-4}).validate(), ConfigError);
        CHECK_THROWS_AS(PruneConfig({0.005, 0.0}).validate(), ConfigError);
        CHECK_THROWS_AS(prune(zero_model(1, 1), {}, PruneConfig{}), DataError);
    }

    TEST_CASE("zeroing a literal removes exactly that literal") {
        auto m = table_model();
        const auto before = extract_rules(m, 1e-4);
        const auto target = conj_target_for_predicate(m, 3);
        const auto rec = intervene_weight(m, LayerKind::Conjunctive, 34, target, 0.0, "drop P_3");
        CHECK(rec.old_value == 1.0);
        const auto after = extract_rules(m, 1e-4);
        CHECK(after.conjunctions.at(34) == std::vector<Literal>{{2, true}, {6, false}, {8, false}});
        auto expected = before;
        auto& lits = expected.conjunctions.at(34);
        lits.erase(std::find(lits.begin(), lits.end(), Literal{3, false}));
        CHECK(after == expected);
        CHECK(after.size() + 1 == before.size());
    }

    TEST_CASE("set then restore round-trips bit-exactly") {
        auto m = table_model();
        m.conj_layers[34].weights[2] = 0.123456789123456789;
        const auto original = model_to_json(m);
        const auto rec = intervene_weight(m, LayerKind::Conjunctive, 34, 2, 0.0);
        CHECK(model_to_json(m) != original);
        intervene_weight(m, LayerKind::Conjunctive, 34, 2, rec.old_value);
        CHECK(model_to_json(m) == original);
    }

    TEST_CASE("edits persist through the checkpoint and the audit log") {
        const auto dir = scratch::dir("rules-audit");
        auto m = table_model();
        const AuditLog log((dir / "audit.jsonl").string());
        intervene_weight(m, LayerKind::Disjunctive, 1, 27, 0.5, "halve", &log);
        save_model(m, (dir / "m.json").string());
        const auto back = load_model((dir / "m.json").string());
        CHECK(back.disj_layers[1].weights[27] == 0.5);
        const auto records = log.read();
        REQUIRE(records.size() == 1);
        CHECK(records[0].layer == LayerKind::Disjunctive);
        CHECK(records[0].old_value == 1.2);
        CHECK(records[0].new_value == 0.5);
        CHECK(records[0].note == "halve");
        CHECK(records[0].timestamp.size() == 20);
    }

    TEST_CASE("intervention bounds are checked") {
        auto m = table_model();
        CHECK_THROWS_AS(intervene_weight(m, LayerKind::Conjunctive, 50, 0, 0.0), ValueError);
        CHECK_THROWS_AS(intervene_weight(m, LayerKind::Conjunctive, 0, 8, 0.0), ValueError);
        CHECK_THROWS_AS(intervene_weight(m, LayerKind::Disjunctive, 0, 0, NAN), ValueError);
        CHECK_THROWS_AS(conj_target_for_predicate(m, 9), ValueError);
    }
}
