#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "factdnf/logic.hpp"

namespace factdnf {

enum class Split { Train, Validation, Test };

inline constexpr std::array<Split, 3> kSplits{Split::Train, Split::Validation, Split::Test};

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

// Raw label -> canonical label; a raw label mapped to nullopt is dropped.
struct LabelMap {
    std::vector<std::string> labels;
    std::map<std::string, std::optional<std::string>> mapping;
    // When set, labels not present in `mapping` pass through unchanged; the
    // label set is then taken from the data.
    bool identity = false;

    static LabelMap liar_binary(bool half_true_as_true = false, bool half_true_as_false = false);
    static LabelMap liar_six();
    static LabelMap identity_map();
    static LabelMap from_json(const std::string& text);

    std::optional<std::string> apply(const std::string& raw) const;
};

struct Dataset {
    std::string name;
    std::vector<NewsSample> samples;
    std::vector<std::string> labels;
    // Id lists kept in ascending id order.
    std::map<Split, std::vector<std::string>> splits;

    const NewsSample& sample(const std::string& id) const;
    std::vector<const NewsSample*> split_samples(Split split) const;
    std::size_t label_index(const std::string& label) const;
    bool has_splits() const;
    void validate() const;
};

struct LiarColumns {
    int id = 0;
    int label = 1;
    int text = 2;
    int speaker = 4;
    // Credit-history count columns: barely-true, false, half-true,
    // mostly-true, pants-on-fire.
    std::array<int, 5> history{8, 9, 10, 11, 12};
    // Evidence/justification column when present (LIAR-PLUS style), -1 otherwise.
    int evidence = -1;
};

struct LoadOptions {
    LabelMap label_map = LabelMap::identity_map();
    LiarColumns columns;
    // Drops samples whose text has more words than this.
    std::optional<std::size_t> max_words;
    // Used when the input declares no splits.
    std::array<double, 3> ratios{0.7, 0.1, 0.2};
    std::uint64_t seed = 0;
};

enum class DatasetFormat { LiarTsv, GenericJsonl };
DatasetFormat parse_format(std::string_view name);

// liar-tsv accepts a single file or a directory holding train.tsv, valid.tsv
// and test.tsv (declared splits). generic-jsonl records may carry a "split"
// field; splits are synthesized when no record does.
Dataset load_dataset(const std::string& path, DatasetFormat format, const LoadOptions& options = {});

// Seeded shuffle then contiguous cut. Sizes use largest remainders: floor each
// share, then hand leftover samples to the largest fractional parts.
Dataset split(Dataset dataset, const std::array<double, 3>& ratios, std::uint64_t seed);
std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratios);

std::string to_jsonl(const Dataset& dataset);
void save_dataset(const Dataset& dataset, const std::string& path);

// Throws DataError when any id used for training belongs to the test split.
void audit_no_test_leak(const Dataset& dataset, const std::vector<std::string>& used_ids);

std::size_t word_count(std::string_view text);

}  // namespace factdnf
