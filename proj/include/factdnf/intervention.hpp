#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "factdnf/backend.hpp"
#include "factdnf/logic.hpp"

namespace factdnf {

// Symmetric score in [0, 1] with score(a, a) = 1 for non-empty a.
using SimilarityFn = std::function<double(std::string_view, std::string_view)>;

// Cosine similarity of lowercased alphanumeric token-count vectors.
double token_cosine(std::string_view a, std::string_view b);

// Cosine of backend embeddings, clipped at 0.
SimilarityFn embedding_similarity(HttpBackend& backend);

std::string intervention_prompt();

// Questions wrapped in <s>...</s>, in reply order.
std::vector<std::string> parse_tagged_questions(std::string_view reply);

enum class ReviewStatus { Pending, Accepted, Rejected };

struct CandidateTemplate {
    std::string text;
    int iteration = 0;
    double mean_similarity = 0.0;
    ReviewStatus status = ReviewStatus::Pending;
};

// Template text as plain question wording: placeholders removed.
std::string comparable_text(const QuestionTemplate& tmpl);

// Each iteration asks the backend for questions, scores each by its mean
// similarity to the running set, and adds the least similar one. Returns the
// additions (running set minus the existing set), all pending.
std::vector<CandidateTemplate> generate_candidates(Backend& backend, const std::vector<std::string>& existing,
                                                   int iterations, const SimilarityFn& similarity,
                                                   std::ostream* log = nullptr);

struct SlotAnnotation {
    std::string name;
    SlotSource source = SlotSource::NewsText;
};

struct ReviewDecision {
    std::size_t candidate = 0;
    bool accept = false;
    // Required when accepting.
    std::vector<SlotAnnotation> slots;
    std::string semantics;
    std::string negated_semantics;
    int max_groundings = 1;
    // Refined template text with {placeholders}; derived from the candidate
    // when empty.
    std::string text;
};

struct ReviewOutcome {
    std::vector<QuestionTemplate> accepted;
    std::vector<std::size_t> rejected;
};

// Validates every decision, then marks candidates and returns the new
// templates with fresh ids after the existing ones. Existing templates are
// never modified.
ReviewOutcome review(std::vector<CandidateTemplate>& candidates, const std::vector<ReviewDecision>& decisions,
                     const std::vector<QuestionTemplate>& existing);

// Appends accepted templates to a template file, preserving existing lines.
void append_templates(const std::string& path, const std::vector<QuestionTemplate>& templates);

std::vector<CandidateTemplate> load_candidates(const std::string& path);
void save_candidates(const std::string& path, const std::vector<CandidateTemplate>& candidates);
std::vector<ReviewDecision> load_decisions(const std::string& path);

}  // namespace factdnf
