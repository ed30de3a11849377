#include "factdnf/truth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>

#include <json.hpp>

#include "factdnf/digest.hpp"
#include "factdnf/errors.hpp"
#include "factdnf/rng.hpp"

namespace factdnf {

using nlohmann::json;

TruthValue::TruthValue(double mu) : mu_(mu) {
    if (!(mu >= -1.0 && mu <= 1.0)) throw ValueError("truth value outside [-1, 1]: " + std::to_string(mu));
}

TruthValue truth_from_logits(double v_yes, double v_no) {
    if (!std::isfinite(v_yes) || !std::isfinite(v_no)) throw ValueError("non-finite logits");
    // 2 e^y / (e^n + e^y) - 1 == tanh((y - n) / 2), evaluated on the max-shifted form.
    const double m = std::max(v_yes, v_no);
    const double ey = std::exp(v_yes - m);
    const double en = std::exp(v_no - m);
    const double mu = (ey - en) / (ey + en);
    return TruthValue(std::clamp(mu, -1.0, 1.0));
}

TruthValue truth_from_samples(std::int64_t m_yes, std::int64_t m_no) {
    if (m_yes < 0 || m_no < 0) throw ValueError("negative sample counts");
    const auto total = m_yes + m_no;
    if (total == 0) return TruthValue(0.0);
    return TruthValue(static_cast<double>(m_yes - m_no) / static_cast<double>(total));
}

TruthValue truth_from_evidence(const YesNoEvidence& evidence) {
    if (const auto* open = std::get_if<OpenLogits>(&evidence)) return truth_from_logits(open->v_yes, open->v_no);
    const auto& closed = std::get<ClosedCounts>(evidence);
    return truth_from_samples(closed.m_yes, closed.m_no);
}

std::vector<AtomGroup> groups_for(const std::vector<Predicate>& predicates) {
    std::vector<AtomGroup> groups;
    std::size_t offset = 0;
    for (const auto& p : predicates) {
        const auto m = static_cast<std::size_t>(p.max_groundings);
        groups.push_back(AtomGroup{p.id, offset, m});
        offset += m;
    }
    return groups;
}

AtomVector assemble_vector(const std::vector<std::vector<TruthValue>>& per_predicate,
                           const std::vector<Predicate>& predicates, std::uint64_t seed) {
    if (per_predicate.size() != predicates.size())
        throw ShapeError("one value list per predicate expected");
    AtomVector out;
    out.groups = groups_for(predicates);
    out.values.assign(out.groups.empty() ? 0 : out.groups.back().begin + out.groups.back().size, 0.0);

    for (std::size_t i = 0; i < predicates.size(); ++i) {
        const auto& values = per_predicate[i];
        const auto& group = out.groups[i];
        if (values.size() <= group.size) {
            for (std::size_t k = 0; k < values.size(); ++k) out.values[group.begin + k] = values[k].mu();
            continue;
        }
        std::vector<std::size_t> idx(values.size());
        std::iota(idx.begin(), idx.end(), 0);
        Rng rng(mix_seed(seed, "assemble", static_cast<std::uint64_t>(predicates[i].id)));
        // Partial Fisher-Yates: the first `size` slots become a uniform subset.
        for (std::size_t k = 0; k < group.size; ++k) {
            std::swap(idx[k], idx[k + rng.below(idx.size() - k)]);
        }
        std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(group.size));
        for (std::size_t k = 0; k < group.size; ++k) out.values[group.begin + k] = values[idx[k]].mu();
    }
    return out;
}

// ---------------------------------------------------------------------------

AtomCache::AtomCache(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = json::parse(line);
            const auto sample = j.at("sample_id").get<std::string>();
            const auto tmpl = j.at("template_id").get<int>();
            const auto digest = j.at("grounding_digest").get<std::string>();
            const auto question = j.at("question").get<std::string>();
            const auto mu = j.at("mu").get<double>();
            if (!(mu >= -1.0 && mu <= 1.0)) throw CacheError("mu out of range", lineno);
            if (digest_hex(question) != digest) throw CacheError("digest does not match question", lineno);
            records_[Key{sample, tmpl, digest}] = Record{question, mu};
        } catch (const json::exception& e) {
            throw CacheError(path_ + ":" + std::to_string(lineno) + ": corrupt cache record (" + e.what() + ")",
                             lineno);
        } catch (const CacheError& e) {
            throw CacheError(path_ + ":" + std::to_string(lineno) + ": corrupt cache record (" + e.what() + ")",
                             lineno);
        }
    }
}

std::optional<TruthValue> AtomCache::get(const std::string& sample_id, int template_id,
                                         const std::string& question) const {
    std::shared_lock lock(mutex_);
    const auto it = records_.find(Key{sample_id, template_id, digest_hex(question)});
    if (it == records_.end()) return std::nullopt;
    if (it->second.question != question)
        throw CacheError("digest collision for sample " + sample_id + " template " + std::to_string(template_id), 0);
    return TruthValue(it->second.mu);
}

void AtomCache::put(const std::string& sample_id, int template_id, const std::string& question, TruthValue value) {
    const auto digest = digest_hex(question);
    std::unique_lock lock(mutex_);
    auto [it, inserted] = records_.try_emplace(Key{sample_id, template_id, digest}, Record{question, value.mu()});
    if (!inserted) {
        if (it->second.question != question)
            throw CacheError("digest collision for sample " + sample_id, 0);
        if (it->second.mu == value.mu()) return;
        it->second.mu = value.mu();
    }
    if (path_.empty()) return;
    json j{{"sample_id", sample_id},
           {"template_id", template_id},
           {"grounding_digest", digest},
           {"question", question},
           {"mu", value.mu()}};
    if (deferred_) {
        auto& order = pending_order_[{sample_id, template_id}];
        pending_.push_back(Pending{sample_id, template_id, order++, j.dump()});
        return;
    }
    append_lines({j.dump()});
}

void AtomCache::append_lines(const std::vector<std::string>& lines) const {
    if (lines.empty()) return;
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw ConfigError("cannot append to cache " + path_);
    for (const auto& l : lines) out << l << '\n';
}

void AtomCache::flush() {
    std::unique_lock lock(mutex_);
    std::sort(pending_.begin(), pending_.end(), [](const Pending& a, const Pending& b) {
        return std::tie(a.sample_id, a.template_id, a.order) < std::tie(b.sample_id, b.template_id, b.order);
    });
    std::vector<std::string> lines;
    for (auto& p : pending_) lines.push_back(std::move(p.line));
    pending_.clear();
    pending_order_.clear();
    append_lines(lines);
}

std::size_t AtomCache::size() const {
    std::shared_lock lock(mutex_);
    return records_.size();
}

// ---------------------------------------------------------------------------

AtomVector evaluate_sample(const NewsSample& sample, const std::vector<QuestionTemplate>& templates,
                           Backend* backend, AtomCache& cache, std::uint64_t seed, EvaluationStats* stats) {
    EvaluationStats local;
    std::vector<std::vector<TruthValue>> per_predicate;
    per_predicate.reserve(templates.size());
    for (const auto& tmpl : templates) {
        auto& values = per_predicate.emplace_back();
        for (const auto& atom : enumerate_groundings(sample, tmpl)) {
            ++local.atoms;
            TruthValue tv;
            if (auto hit = cache.get(sample.id, tmpl.id, atom.question)) {
                ++local.cache_hits;
                tv = *hit;
            } else {
                if (backend == nullptr)
                    throw BackendError("no backend available for uncached atom of sample " + sample.id,
                                       question_id(atom.question), true);
                try {
                    tv = truth_from_evidence(backend->query_yes_no(atom.question));
                } catch (const BackendError& e) {
                    throw BackendError(std::string(e.what()) + " (sample " + sample.id + ")", e.question_id(),
                                       e.unreachable());
                }
                ++local.backend_queries;
                cache.put(sample.id, tmpl.id, atom.question, tv);
            }
            if (tv.is_unknown()) ++local.unknown;
            values.push_back(tv);
        }
    }
    if (stats) *stats += local;
    return assemble_vector(per_predicate, predicates_of(templates), mix_seed(seed, sample.id));
}

std::size_t count_uncached(const NewsSample& sample, const std::vector<QuestionTemplate>& templates,
                           const AtomCache& cache) {
    std::size_t missing = 0;
    for (const auto& tmpl : templates)
        for (const auto& atom : enumerate_groundings(sample, tmpl))
            if (!cache.get(sample.id, tmpl.id, atom.question)) ++missing;
    return missing;
}

}  // namespace factdnf
