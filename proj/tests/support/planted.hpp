#pragma once

// Planted-DNF synthetic data and brute-force oracles shared by the unit and
// acceptance suites.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "factdnf/rng.hpp"
#include "factdnf/rules.hpp"
#include "factdnf/trainer.hpp"

namespace planted {

struct Term {
    // Predicate ids; negative entries mean a negated literal on -id.
    std::vector<int> literals;
};

struct Rule {
    std::vector<Term> terms;

    bool holds(const std::map<int, bool>& assignment) const;
};

// Predicates 1..8; odd ids have a single grounding, even ids four.
inline std::vector<factdnf::AtomGroup> grouping() {
    std::vector<factdnf::AtomGroup> g;
    std::size_t begin = 0;
    for (int id = 1; id <= 8; ++id) {
        const std::size_t m = id % 2 == 0 ? 4 : 1;
        g.push_back({id, begin, m});
        begin += m;
    }
    return g;
}

inline const std::vector<std::string>& labels() {
    static const std::vector<std::string> l{"true", "false"};
    return l;
}

// (P2 and not P3) or (P5 and P8)
inline Rule two_term_rule() { return Rule{{Term{{2, -3}}, Term{{5, 8}}}}; }

inline bool term_holds(const Term& term, const std::map<int, bool>& assignment) {
    for (int lit : term.literals) {
        const bool v = assignment.at(lit < 0 ? -lit : lit);
        if (lit < 0 ? v : !v) return false;
    }
    return true;
}

struct Sample {
    std::map<int, bool> assignment;
    factdnf::Example example;
};

inline std::map<int, bool> assignment_from_bits(unsigned bits) {
    std::map<int, bool> a;
    for (int id = 1; id <= 8; ++id) a[id] = (bits >> (id - 1)) & 1u;
    return a;
}

inline factdnf::Example encode(const std::map<int, bool>& assignment, std::size_t label, std::string id) {
    factdnf::Example e;
    e.id = std::move(id);
    e.label = label;
    for (const auto& g : grouping())
        for (std::size_t k = 0; k < g.size; ++k) e.atoms.push_back(assignment.at(g.predicate_id) ? 1.0 : -1.0);
    return e;
}

// Noiseless: predicate values uniform over 2^8 and every grounding of a
// predicate carries its truth value exactly (mu = +-1).
inline std::vector<Sample> make_samples(const Rule& rule, std::size_t n, std::uint64_t seed,
                                        const std::string& prefix) {
    factdnf::Rng rng(seed);
    std::vector<Sample> out;
    for (std::size_t i = 0; i < n; ++i) {
        Sample s;
        s.assignment = assignment_from_bits(static_cast<unsigned>(rng.below(256)));
        s.example = encode(s.assignment, rule.holds(s.assignment) ? 0 : 1, prefix + std::to_string(i));
        out.push_back(std::move(s));
    }
    return out;
}

// Balanced classes where every positive satisfies all disjuncts at once, so
// each disjunct is redundant support for the others. Negatives are uniform
// over the assignments the rule rejects.
inline std::vector<Sample> make_redundant_samples(const Rule& rule, std::size_t n, std::uint64_t seed,
                                                  const std::string& prefix) {
    factdnf::Rng rng(seed);
    std::vector<Sample> out;
    for (std::size_t i = 0; i < n; ++i) {
        const bool positive = rng.uniform() < 0.5;
        Sample s;
        while (true) {
            s.assignment = assignment_from_bits(static_cast<unsigned>(rng.below(256)));
            bool all = true;
            for (const auto& t : rule.terms) all = all && term_holds(t, s.assignment);
            if (positive ? all : !rule.holds(s.assignment)) break;
        }
        s.example = encode(s.assignment, positive ? 0 : 1, prefix + std::to_string(i));
        out.push_back(std::move(s));
    }
    return out;
}

inline bool Rule::holds(const std::map<int, bool>& assignment) const {
    for (const auto& t : terms)
        if (term_holds(t, assignment)) return true;
    return false;
}

inline std::vector<factdnf::Example> examples(const std::vector<Sample>& samples) {
    std::vector<factdnf::Example> out;
    for (const auto& s : samples) out.push_back(s.example);
    return out;
}

// Negates each atom independently with the given probability.
inline std::vector<factdnf::Example> flip_atoms(std::vector<factdnf::Example> data, double rate,
                                                std::uint64_t seed) {
    factdnf::Rng rng(seed);
    for (auto& e : data)
        for (auto& x : e.atoms)
            if (rng.uniform() < rate) x = -x;
    return data;
}

// Predicate truth read off noisy atoms: the sign of the grounding sum.
inline std::map<int, bool> read_assignment(const factdnf::Example& e) {
    std::map<int, bool> a;
    for (const auto& g : grouping()) {
        double sum = 0.0;
        for (std::size_t k = 0; k < g.size; ++k) sum += e.atoms[g.begin + k];
        a[g.predicate_id] = sum > 0.0;
    }
    return a;
}

inline double oracle_accuracy(const Rule& rule, const std::vector<factdnf::Example>& data) {
    std::size_t hit = 0;
    for (const auto& e : data) hit += (rule.holds(read_assignment(e)) ? 0u : 1u) == e.label;
    return data.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(data.size());
}

// Exhaustive check over all 2^8 predicate assignments.
inline bool equivalent(const factdnf::RuleSet& rules, const Rule& rule) {
    for (unsigned bits = 0; bits < 256; ++bits) {
        const auto a = assignment_from_bits(bits);
        if (factdnf::decide(rules, a) != (rule.holds(a) ? 0u : 1u)) return false;
    }
    return true;
}

}  // namespace planted
