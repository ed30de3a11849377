#include "factdnf/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "factdnf/errors.hpp"
#include "factdnf/rng.hpp"

namespace factdnf {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "train";
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::Train;
    if (name == "validation" || name == "valid" || name == "val") return Split::Validation;
    if (name == "test") return Split::Test;
    throw DataError("unknown split '" + std::string(name) + "'");
}

LabelMap LabelMap::liar_binary(bool half_true_as_true, bool half_true_as_false) {
    LabelMap m;
    m.labels = {"true", "false"};
    m.mapping = {{"true", "true"},       {"mostly-true", "true"}, {"barely-true", "false"},
                 {"false", "false"},     {"pants-fire", "false"}, {"half-true", std::nullopt}};
    if (half_true_as_true) m.mapping["half-true"] = "true";
    if (half_true_as_false) m.mapping["half-true"] = "false";
    return m;
}

LabelMap LabelMap::liar_six() {
    LabelMap m;
    m.labels = {"true", "mostly-true", "half-true", "barely-true", "false", "pants-fire"};
    for (const auto& l : m.labels) m.mapping[l] = l;
    return m;
}

LabelMap LabelMap::identity_map() {
    LabelMap m;
    m.identity = true;
    return m;
}

// {"labels": [...], "map": {"raw": "canonical" | null}}
LabelMap LabelMap::from_json(const std::string& text) {
    try {
        const auto j = json::parse(text);
        LabelMap m;
        m.labels = j.at("labels").get<std::vector<std::string>>();
        for (const auto& [raw, target] : j.at("map").items()) {
            if (target.is_null()) {
                m.mapping[raw] = std::nullopt;
            } else {
                const auto t = target.get<std::string>();
                if (std::find(m.labels.begin(), m.labels.end(), t) == m.labels.end())
                    throw ConfigError("label map target '" + t + "' is not in labels");
                m.mapping[raw] = t;
            }
        }
        return m;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad label map: ") + e.what());
    }
}

std::optional<std::string> LabelMap::apply(const std::string& raw) const {
    if (auto it = mapping.find(raw); it != mapping.end()) return it->second;
    if (identity) return raw;
    throw DataError("unmapped label '" + raw + "'");
}

const NewsSample& Dataset::sample(const std::string& id) const {
    for (const auto& s : samples)
        if (s.id == id) return s;
    throw DataError("no sample with id " + id);
}

std::vector<const NewsSample*> Dataset::split_samples(Split which) const {
    std::map<std::string, const NewsSample*> by_id;
    for (const auto& s : samples) by_id[s.id] = &s;
    std::vector<const NewsSample*> out;
    const auto it = splits.find(which);
    if (it == splits.end()) return out;
    for (const auto& id : it->second) out.push_back(by_id.at(id));
    return out;
}

std::size_t Dataset::label_index(const std::string& label) const {
    const auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw DataError("label '" + label + "' not in label set");
    return static_cast<std::size_t>(it - labels.begin());
}

bool Dataset::has_splits() const {
    return std::any_of(splits.begin(), splits.end(), [](const auto& kv) { return !kv.second.empty(); });
}

void Dataset::validate() const {
    std::set<std::string> ids;
    for (const auto& s : samples) {
        if (s.text.empty()) throw DataError("sample " + s.id + " has empty text");
        if (!ids.insert(s.id).second) throw DataError("duplicate sample id " + s.id);
        label_index(s.label);
    }
    std::set<std::string> assigned;
    for (const auto& [split, list] : splits)
        for (const auto& id : list) {
            if (!ids.count(id)) throw DataError("split references unknown id " + id);
            if (!assigned.insert(id).second) throw DataError("id " + id + " appears in two splits");
        }
}

DatasetFormat parse_format(std::string_view name) {
    if (name == "liar-tsv") return DatasetFormat::LiarTsv;
    if (name == "generic-jsonl") return DatasetFormat::GenericJsonl;
    throw ConfigError("unknown dataset format '" + std::string(name) + "'");
}

std::size_t word_count(std::string_view text) {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = std::isspace(static_cast<unsigned char>(c));
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

namespace {

struct RawRecord {
    NewsSample sample;
    std::string raw_label;
    std::optional<Split> split;
};

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, '\t')) out.push_back(cur);
    if (!line.empty() && line.back() == '\t') out.emplace_back();
    return out;
}

std::vector<RawRecord> read_liar_file(const std::string& path, const LiarColumns& cols, std::optional<Split> split) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path);
    std::vector<RawRecord> out;
    std::string line;
    std::size_t lineno = 0;
    auto col = [&](const std::vector<std::string>& f, int i) -> std::string {
        if (i < 0) return {};
        if (static_cast<std::size_t>(i) >= f.size())
            throw DataError(path + ":" + std::to_string(lineno) + ": missing column " + std::to_string(i));
        return f[static_cast<std::size_t>(i)];
    };
    static const char* kHistoryNames[] = {"barely-true", "false", "half-true", "mostly-true", "pants-fire"};
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_tabs(line);
        RawRecord r;
        r.sample.id = col(f, cols.id);
        r.raw_label = col(f, cols.label);
        r.sample.text = col(f, cols.text);
        r.split = split;
        if (cols.evidence >= 0 && static_cast<std::size_t>(cols.evidence) < f.size() && !f[cols.evidence].empty())
            r.sample.evidence = std::vector<std::string>{f[cols.evidence]};
        if (cols.speaker >= 0 && static_cast<std::size_t>(cols.speaker) < f.size() && !f[cols.speaker].empty()) {
            std::string history = "speaker " + f[cols.speaker];
            bool have_counts = true;
            for (int c : cols.history) have_counts = have_counts && c >= 0 && static_cast<std::size_t>(c) < f.size();
            if (have_counts) {
                history += "; prior ratings:";
                for (std::size_t k = 0; k < 5; ++k)
                    history += std::string(k ? "," : "") + " " + kHistoryNames[k] + " " + f[cols.history[k]];
            }
            r.sample.publisher_history = history;
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<RawRecord> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path);
    std::vector<RawRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = json::parse(line);
            RawRecord r;
            r.sample.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
            r.sample.text = j.at("text").get<std::string>();
            r.raw_label = j.at("label").get<std::string>();
            if (j.contains("evidence") && !j["evidence"].is_null())
                r.sample.evidence = j["evidence"].get<std::vector<std::string>>();
            if (j.contains("publisher_history") && !j["publisher_history"].is_null())
                r.sample.publisher_history = j["publisher_history"].get<std::string>();
            if (j.contains("claims") && !j["claims"].is_null())
                r.sample.claims = j["claims"].get<std::vector<std::string>>();
            if (j.contains("split") && !j["split"].is_null()) r.split = parse_split(j["split"].get<std::string>());
            out.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace

Dataset load_dataset(const std::string& path, DatasetFormat format, const LoadOptions& options) {
    std::vector<RawRecord> raw;
    if (format == DatasetFormat::LiarTsv) {
        if (fs::is_directory(path)) {
            const std::pair<const char*, Split> parts[] = {
                {"train.tsv", Split::Train}, {"valid.tsv", Split::Validation}, {"test.tsv", Split::Test}};
            for (const auto& [file, s] : parts) {
                auto part = read_liar_file((fs::path(path) / file).string(), options.columns, s);
                raw.insert(raw.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
            }
        } else {
            raw = read_liar_file(path, options.columns, std::nullopt);
        }
    } else {
        raw = read_jsonl(path);
    }

    Dataset ds;
    ds.name = fs::path(path).filename().string();
    std::set<std::string> unmapped;
    std::set<std::string> seen_labels;
    bool declared = false;
    for (auto& r : raw) {
        std::optional<std::string> label;
        try {
            label = options.label_map.apply(r.raw_label);
        } catch (const DataError&) {
            unmapped.insert(r.raw_label);
            continue;
        }
        if (!label) continue;
        if (options.max_words && word_count(r.sample.text) > *options.max_words) continue;
        r.sample.label = *label;
        seen_labels.insert(*label);
        if (r.split) {
            declared = true;
            ds.splits[*r.split].push_back(r.sample.id);
        }
        ds.samples.push_back(std::move(r.sample));
    }
    if (!unmapped.empty()) {
        std::string list;
        for (const auto& l : unmapped) list += (list.empty() ? "" : ", ") + l;
        throw DataError("labels not covered by the label map: " + list);
    }
    ds.labels = options.label_map.identity && options.label_map.labels.empty()
                    ? std::vector<std::string>(seen_labels.begin(), seen_labels.end())
                    : options.label_map.labels;

    if (!declared) {
        ds = split(std::move(ds), options.ratios, options.seed);
    } else {
        // Records without a split field in a file that declares splits are
        // training data.
        std::set<std::string> assigned;
        for (const auto& [_, ids] : ds.splits) assigned.insert(ids.begin(), ids.end());
        for (const auto& s : ds.samples)
            if (!assigned.count(s.id)) ds.splits[Split::Train].push_back(s.id);
        for (auto& [_, ids] : ds.splits) std::sort(ids.begin(), ids.end());
    }
    for (auto s : kSplits)
        if (ds.splits[s].empty()) throw DataError(std::string(to_string(s)) + " split is empty");
    ds.validate();
    return ds;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratios) {
    double total = 0.0;
    for (double r : ratios) {
        if (!(r > 0.0)) throw DataError("split ratios must be positive");
        total += r;
    }
    if (std::abs(total - 1.0) > 1e-9) throw DataError("split ratios must sum to 1");
    if (n < ratios.size()) throw DataError("fewer samples than splits");

    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> frac{};
    std::size_t used = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        const double exact = static_cast<double>(n) * ratios[k];
        // Round away representation error (e.g. 10 * 0.7) before flooring.
        const double snapped = std::abs(exact - std::round(exact)) < 1e-9 ? std::round(exact) : exact;
        sizes[k] = static_cast<std::size_t>(std::floor(snapped));
        frac[k] = snapped - std::floor(snapped);
        used += sizes[k];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return frac[a] > frac[b]; });
    for (std::size_t i = 0; used < n; ++i, ++used) ++sizes[order[i % 3]];
    for (auto s : sizes)
        if (s == 0) throw DataError("split would leave an empty partition");
    return sizes;
}

Dataset split(Dataset dataset, const std::array<double, 3>& ratios, std::uint64_t seed) {
    const auto sizes = split_sizes(dataset.samples.size(), ratios);
    std::vector<std::string> ids;
    for (const auto& s : dataset.samples) ids.push_back(s.id);
    Rng rng(mix_seed(seed, "split"));
    rng.shuffle(std::span<std::string>(ids));
    dataset.splits.clear();
    std::size_t pos = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        auto& part = dataset.splits[kSplits[k]];
        part.assign(ids.begin() + static_cast<std::ptrdiff_t>(pos),
                    ids.begin() + static_cast<std::ptrdiff_t>(pos + sizes[k]));
        std::sort(part.begin(), part.end());
        pos += sizes[k];
    }
    return dataset;
}

std::string to_jsonl(const Dataset& dataset) {
    std::map<std::string, Split> split_of;
    for (const auto& [s, ids] : dataset.splits)
        for (const auto& id : ids) split_of[id] = s;
    std::ostringstream out;
    for (const auto& s : dataset.samples) {
        json j{{"id", s.id}, {"text", s.text}, {"label", s.label}};
        if (s.evidence) j["evidence"] = *s.evidence;
        if (s.publisher_history) j["publisher_history"] = *s.publisher_history;
        if (s.claims) j["claims"] = *s.claims;
        if (auto it = split_of.find(s.id); it != split_of.end()) j["split"] = to_string(it->second);
        out << j.dump() << '\n';
    }
    return out.str();
}

void save_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << to_jsonl(dataset);
}

void audit_no_test_leak(const Dataset& dataset, const std::vector<std::string>& used_ids) {
    const auto it = dataset.splits.find(Split::Test);
    if (it == dataset.splits.end()) return;
    const std::set<std::string> test(it->second.begin(), it->second.end());
    for (const auto& id : used_ids)
        if (test.count(id)) throw DataError("test sample " + id + " used in a training artifact");
}

}  // namespace factdnf
