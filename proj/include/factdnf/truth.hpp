#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

#include "factdnf/backend.hpp"
#include "factdnf/logic.hpp"

namespace factdnf {

// Truth value in [-1, 1]: negative is false, positive is true, zero unknown.
class TruthValue {
public:
    constexpr TruthValue() = default;
    explicit TruthValue(double mu);

    constexpr double mu() const { return mu_; }
    bool is_true() const { return mu_ > 0.0; }
    bool is_false() const { return mu_ < 0.0; }
    bool is_unknown() const { return mu_ == 0.0; }

private:
    double mu_ = 0.0;
};

TruthValue truth_from_logits(double v_yes, double v_no);
TruthValue truth_from_samples(std::int64_t m_yes, std::int64_t m_no);
TruthValue truth_from_evidence(const YesNoEvidence& evidence);

// Consecutive entries of an atom vector owned by one predicate.
struct AtomGroup {
    int predicate_id = 0;
    std::size_t begin = 0;
    std::size_t size = 0;
    bool operator==(const AtomGroup&) const = default;
};

std::vector<AtomGroup> groups_for(const std::vector<Predicate>& predicates);

struct AtomVector {
    std::vector<double> values;
    std::vector<AtomGroup> groups;

    std::size_t size() const { return values.size(); }
};

// Fixes predicate i to exactly M_i entries: a seeded uniform M_i-subset (kept
// in original order) when there are more, zero padding when there are fewer.
AtomVector assemble_vector(const std::vector<std::vector<TruthValue>>& per_predicate,
                           const std::vector<Predicate>& predicates, std::uint64_t seed);

// Persistent map (sample id, template id, question digest) -> truth value.
// The file is append-only JSONL; each record also stores the rendered
// question so digest collisions are detected instead of silently reused.
class AtomCache {
public:
    AtomCache() = default;
    // Loads existing records; a missing file starts empty. Corrupt lines throw
    // CacheError carrying the 1-based line number.
    explicit AtomCache(std::string path);

    std::optional<TruthValue> get(const std::string& sample_id, int template_id, const std::string& question) const;
    void put(const std::string& sample_id, int template_id, const std::string& question, TruthValue value);

    std::size_t size() const;
    const std::string& path() const { return path_; }

    // Holds new records in memory until flush(), which appends them ordered
    // by (sample id, template id, insertion order within that pair). With
    // one thread per sample the file contents do not depend on scheduling.
    void defer_writes() { deferred_ = true; }
    void flush();

private:
    struct Pending {
        std::string sample_id;
        int template_id;
        std::size_t order;
        std::string line;
    };
    void append_lines(const std::vector<std::string>& lines) const;

    struct Record {
        std::string question;
        double mu;
    };
    using Key = std::tuple<std::string, int, std::string>;

    std::string path_;
    mutable std::shared_mutex mutex_;
    std::map<Key, Record> records_;
    bool deferred_ = false;
    std::vector<Pending> pending_;
    std::map<std::pair<std::string, int>, std::size_t> pending_order_;
};

struct EvaluationStats {
    std::size_t atoms = 0;
    std::size_t cache_hits = 0;
    std::size_t backend_queries = 0;
    std::size_t unknown = 0;

    EvaluationStats& operator+=(const EvaluationStats& o) {
        atoms += o.atoms;
        cache_hits += o.cache_hits;
        backend_queries += o.backend_queries;
        unknown += o.unknown;
        return *this;
    }
};

// Enumerates, answers (cache first), converts, and assembles one sample.
// `backend` may be null when every atom is cached.
AtomVector evaluate_sample(const NewsSample& sample, const std::vector<QuestionTemplate>& templates,
                           Backend* backend, AtomCache& cache, std::uint64_t seed,
                           EvaluationStats* stats = nullptr);

// Questions of a sample that the cache cannot answer.
std::size_t count_uncached(const NewsSample& sample, const std::vector<QuestionTemplate>& templates,
                           const AtomCache& cache);

}  // namespace factdnf
