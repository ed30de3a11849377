#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "artifacts.hpp"
#include "factdnf/backend.hpp"
#include "factdnf/data.hpp"
#include "factdnf/digest.hpp"
#include "factdnf/errors.hpp"
#include "factdnf/intervention.hpp"
#include "factdnf/rules.hpp"
#include "factdnf/trainer.hpp"
#include "factdnf/truth.hpp"

namespace factdnf::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class MissingInput : public Error {
    using Error::Error;
};

// Backend unreachable while the cache still lacks answers.
class IncompleteCache : public Error {
public:
    IncompleteCache(const std::string& what, std::size_t missing) : Error(what), missing_(missing) {}
    std::size_t missing() const { return missing_; }

private:
    std::size_t missing_;
};

void require_file(const std::string& path, const std::string& what) {
    if (path.empty() || !fs::exists(path)) throw MissingInput(what + " not found: " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInput("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << text;
}

std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::vector<QuestionTemplate> load_all_templates(const std::vector<std::string>& paths) {
    std::vector<QuestionTemplate> all;
    std::set<int> ids;
    for (const auto& p : paths) {
        require_file(p, "template file");
        for (auto& t : load_templates(p)) {
            if (!ids.insert(t.id).second)
                throw ValidationError("template id " + std::to_string(t.id) + " defined twice (" + p + ")");
            all.push_back(std::move(t));
        }
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return all;
}

std::map<int, PredicateText> predicate_texts(const std::vector<QuestionTemplate>& templates) {
    std::map<int, PredicateText> out;
    for (const auto& t : templates) out[t.id] = PredicateText{t.semantics, t.negated_semantics};
    return out;
}

// ---------------------------------------------------------------------------
// Backend flags

struct BackendFlags {
    std::string kind = "mock";
    std::string endpoint;
    std::string fixture;
    std::string model;
    std::string config;
    int sample_budget = 10;
    std::optional<double> temperature;
    std::string default_answer = "counts";

    void add_to(CLI::App* app) {
        app->add_option("--backend", kind, "Answer source: mock, open, closed or none")
            ->check(CLI::IsMember({"mock", "open", "closed", "none"}));
        app->add_option("--endpoint", endpoint, "Answer server base URL (open/closed)");
        app->add_option("--fixture", fixture, "Mock fixture file");
        app->add_option("--model", model, "Model name sent to the answer server");
        app->add_option("--backend-config", config, "JSON file with backend settings");
        app->add_option("--sample-budget", sample_budget, "Decoded samples per question (closed)");
        app->add_option("--temperature", temperature, "Decoding temperature (closed)");
        app->add_option("--default-answer", default_answer, "Mock answers for unlisted questions")
            ->check(CLI::IsMember({"counts", "logits", "unknown"}));
    }

    BackendConfig resolve(std::uint64_t seed) const {
        BackendConfig c;
        if (kind != "none") c.kind = parse_backend_kind(kind);
        c.endpoint = endpoint;
        c.fixture_path = fixture;
        c.model = model;
        c.sample_budget = sample_budget;
        c.temperature = temperature;
        c.default_answer = default_answer;
        c.seed = seed;
        if (!config.empty()) {
            require_file(config, "backend config");
            try {
                const auto j = json::parse(read_text(config));
                if (j.contains("endpoint") && c.endpoint.empty()) c.endpoint = j["endpoint"].get<std::string>();
                if (j.contains("model") && c.model.empty()) c.model = j["model"].get<std::string>();
                if (j.contains("sample_budget")) c.sample_budget = j["sample_budget"].get<int>();
                if (j.contains("temperature")) c.temperature = j["temperature"].get<double>();
                if (j.contains("timeout_ms")) c.timeout = std::chrono::milliseconds(j["timeout_ms"].get<long>());
                if (j.contains("max_in_flight")) c.max_in_flight = j["max_in_flight"].get<int>();
                if (j.contains("answer_suffix")) c.answer_suffix = j["answer_suffix"].get<std::string>();
                if (j.contains("verbalizer")) c.verbalizer = j["verbalizer"].get<std::vector<std::string>>();
            } catch (const json::exception& e) {
                throw ConfigError("bad backend config " + config + ": " + e.what());
            }
        }
        apply_environment(c);
        return c;
    }

    std::unique_ptr<Backend> make(std::uint64_t seed) const {
        if (kind == "none") return nullptr;
        auto c = resolve(seed);
        if (c.kind == BackendKind::Mock) require_file(c.fixture_path, "mock fixture");
        return make_backend(c);
    }

    std::string describe() const {
        if (kind == "mock") return "mock";
        if (kind == "none") return "none";
        return kind + (model.empty() ? "" : ":" + model);
    }
};

// ---------------------------------------------------------------------------
// Dataset flags

struct DatasetFlags {
    std::string path;
    std::string format = "generic-jsonl";
    std::string label_map;
    std::string half_true = "drop";
    std::optional<std::size_t> max_words;
    std::vector<double> ratios{0.7, 0.1, 0.2};
    std::string columns;

    void add_to(CLI::App* app) {
        app->add_option("--dataset", path, "Dataset file (or LIAR directory)")->required();
        app->add_option("--format", format, "liar-tsv or generic-jsonl")
            ->check(CLI::IsMember({"liar-tsv", "generic-jsonl"}));
        app->add_option("--label-map", label_map, "identity, liar-binary, liar-six, or a JSON map file");
        app->add_option("--half-true", half_true, "Binary LIAR: drop half-true or map it to true/false")
            ->check(CLI::IsMember({"drop", "true", "false"}));
        app->add_option("--max-words", max_words, "Drop samples with more words than this");
        app->add_option("--ratios", ratios, "Train/validation/test ratios when the data declares no splits")
            ->expected(3);
        app->add_option("--columns", columns, "JSON object overriding liar-tsv column positions");
    }

    LabelMap label_map_for(DatasetFormat f) const {
        const std::string name = label_map.empty() ? (f == DatasetFormat::LiarTsv ? "liar-binary" : "identity")
                                                   : label_map;
        if (name == "identity") return LabelMap::identity_map();
        if (name == "liar-binary") return LabelMap::liar_binary(half_true == "true", half_true == "false");
        if (name == "liar-six") return LabelMap::liar_six();
        require_file(name, "label map");
        return LabelMap::from_json(read_text(name));
    }

    Dataset load(std::uint64_t seed) const {
        if (!fs::exists(path)) throw MissingInput("dataset not found: " + path);
        const auto f = parse_format(format);
        LoadOptions o;
        o.label_map = label_map_for(f);
        o.max_words = max_words;
        o.seed = seed;
        std::copy(ratios.begin(), ratios.end(), o.ratios.begin());
        if (!columns.empty()) {
            try {
                const auto j = json::parse(columns);
                o.columns.id = j.value("id", o.columns.id);
                o.columns.label = j.value("label", o.columns.label);
                o.columns.text = j.value("text", o.columns.text);
                o.columns.speaker = j.value("speaker", o.columns.speaker);
                o.columns.evidence = j.value("evidence", o.columns.evidence);
                if (j.contains("history")) {
                    const auto h = j["history"].get<std::vector<int>>();
                    if (h.size() != 5) throw ConfigError("history needs five column positions");
                    std::copy(h.begin(), h.end(), o.columns.history.begin());
                }
            } catch (const json::exception& e) {
                throw ConfigError(std::string("bad --columns: ") + e.what());
            }
        }
        return load_dataset(path, f, o);
    }

    std::string digest() const {
        if (fs::is_directory(path)) {
            std::string all;
            for (const char* name : {"train.tsv", "valid.tsv", "test.tsv"}) {
                const auto p = (fs::path(path) / name).string();
                all += fs::exists(p) ? file_digest(p) : std::string("-");
            }
            return digest_hex(all);
        }
        return file_digest(path);
    }
};

// ---------------------------------------------------------------------------
// Claims sidecar: extracted claims survive offline reruns.

class ClaimStore {
public:
    explicit ClaimStore(std::string path) : path_(std::move(path)) {
        std::ifstream in(path_);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            try {
                const auto j = json::parse(line);
                records_[j.at("sample_id").get<std::string>()] = {j.at("text_digest").get<std::string>(),
                                                                  j.at("claims").get<std::vector<std::string>>()};
            } catch (const json::exception& e) {
                throw CacheError(path_ + ":" + std::to_string(lineno) + ": corrupt claims record", lineno);
            }
        }
    }

    std::optional<std::vector<std::string>> get(const NewsSample& s) const {
        const auto it = records_.find(s.id);
        if (it == records_.end() || it->second.first != digest_hex(s.text)) return std::nullopt;
        return it->second.second;
    }

    void put(const NewsSample& s, const std::vector<std::string>& claims) {
        records_[s.id] = {digest_hex(s.text), claims};
        std::ofstream out(path_, std::ios::app | std::ios::binary);
        if (!out) throw ConfigError("cannot append to " + path_);
        out << json{{"sample_id", s.id}, {"text_digest", digest_hex(s.text)}, {"claims", claims}}.dump() << '\n';
    }

private:
    std::string path_;
    std::map<std::string, std::pair<std::string, std::vector<std::string>>> records_;
};

// ---------------------------------------------------------------------------
// atoms

struct AtomsFlags {
    DatasetFlags dataset;
    BackendFlags backend;
    std::vector<std::string> templates;
    std::string cache;
    std::string out;
    std::uint64_t seed = 0;
    int parallel = 1;
    bool extract_claims = false;
};

std::size_t total_uncached(const std::vector<NewsSample>& samples, const std::vector<QuestionTemplate>& templates,
                           const AtomCache& cache) {
    std::size_t n = 0;
    for (const auto& s : samples) n += count_uncached(s, templates, cache);
    return n;
}

int cmd_atoms(const AtomsFlags& f, std::ostream& out) {
    const auto started = timestamp_now();
    const auto templates = load_all_templates(f.templates);
    const auto predicates = predicates_of(templates);
    Dataset ds = f.dataset.load(f.seed);
    AtomCache cache(f.cache);
    cache.defer_writes();
    auto backend = f.backend.make(f.seed);

    if (f.extract_claims) {
        ClaimStore claims(f.cache + ".claims.jsonl");
        std::size_t missing = 0;
        std::vector<std::string> ids;
        for (auto& s : ds.samples) {
            if (s.claims) continue;
            if (auto hit = claims.get(s)) {
                s.claims = *hit;
            } else {
                ids.push_back(s.id);
                ++missing;
            }
        }
        if (missing > 0 && !backend)
            throw IncompleteCache("no backend for claim extraction", missing);
        std::sort(ids.begin(), ids.end());
        for (const auto& id : ids) {
            auto& s = const_cast<NewsSample&>(ds.sample(id));
            try {
                s.claims = extract_claims(s.text, *backend);
            } catch (const BackendError& e) {
                if (e.unreachable()) throw IncompleteCache(e.what(), missing);
                throw;
            }
            claims.put(s, *s.claims);
        }
    }

    // Evaluate in sample-id order; each worker owns whole samples so cache
    // flush ordering is scheduling-independent.
    std::vector<const NewsSample*> order;
    for (const auto& s : ds.samples) order.push_back(&s);
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->id < b->id; });
    std::vector<AtomVector> vectors(order.size());
    std::vector<EvaluationStats> stats(order.size());
    std::vector<std::exception_ptr> errors(order.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < order.size(); i = next++) {
            try {
                vectors[i] = evaluate_sample(*order[i], templates, backend.get(), cache, f.seed, &stats[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int threads = std::max(1, std::min<int>(f.parallel, static_cast<int>(order.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    cache.flush();
    for (const auto& e : errors) {
        if (!e) continue;
        try {
            std::rethrow_exception(e);
        } catch (const BackendError& be) {
            if (be.unreachable())
                throw IncompleteCache(be.what(), total_uncached(ds.samples, templates, cache));
            throw;
        }
    }

    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < order.size(); ++i) index[order[i]->id] = i;

    fs::create_directories(f.out);
    RunManifest manifest;
    manifest.command = "atoms";
    EvaluationStats total;
    for (auto split : kSplits) {
        VectorFile vf;
        vf.split = std::string(to_string(split));
        vf.labels = ds.labels;
        vf.predicates = predicates;
        EvaluationStats part;
        auto ids = ds.splits.at(split);
        std::sort(ids.begin(), ids.end());
        for (const auto& id : ids) {
            const auto i = index.at(id);
            vf.examples.push_back(Example{id, vectors[i].values, ds.label_index(order[i]->label)});
            part += stats[i];
        }
        total += part;
        const auto path = vectors_path(f.out, split);
        write_vectors(path, vf);
        manifest.artifacts.push_back({fs::relative(path, f.out).generic_string(), ""});
        out << "split " << vf.split << ": samples " << ids.size() << ", atoms " << part.atoms << ", answered "
            << part.atoms - part.unknown << ", unknown " << part.unknown << '\n';
    }
    out << "total: atoms " << total.atoms << ", answered " << total.atoms - total.unknown << ", unknown "
        << total.unknown << ", cache hits " << total.cache_hits << ", backend queries " << total.backend_queries
        << '\n';

    json cfg{{"templates", json::array()},
             {"backend", f.backend.describe()},
             {"sample_budget", f.backend.sample_budget},
             {"default_answer", f.backend.default_answer},
             {"format", f.dataset.format},
             {"label_map", f.dataset.label_map},
             {"half_true", f.dataset.half_true},
             {"ratios", f.dataset.ratios},
             {"extract_claims", f.extract_claims}};
    for (const auto& t : templates) cfg["templates"].push_back(to_json_line(t));
    if (f.dataset.max_words) cfg["max_words"] = *f.dataset.max_words;
    if (!f.backend.fixture.empty()) cfg["fixture"] = file_digest(f.backend.fixture);
    manifest.config_digest = digest_hex(cfg.dump());
    manifest.seed = f.seed;
    manifest.dataset_digest = f.dataset.digest();
    manifest.backend = f.backend.describe();
    manifest.started = started;
    manifest.finished = timestamp_now();
    manifest.write(f.out);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train / eval / prune helpers

struct Loaded {
    VectorFile train, validation, test;
    std::map<std::string, std::string> manifests;
};

VectorFile load_split(const std::string& dir, Split split) {
    const auto path = vectors_path(dir, split);
    require_file(path, std::string(to_string(split)) + " vectors");
    return read_vectors(path);
}

void check_compatible(const VectorFile& a, const VectorFile& b) {
    if (a.labels != b.labels) throw ShapeError("vector files disagree on the label set");
    if (a.grouping() != b.grouping()) throw ShapeError("vector files disagree on the predicate layout");
}

void check_model_matches(const DnfModel& model, const VectorFile& v) {
    if (model.labels != v.labels) throw ShapeError("checkpoint labels do not match the vectors");
    if (model.grouping != v.grouping())
        throw ShapeError("checkpoint predicate layout (" + std::to_string(model.input_size()) +
                         " inputs) does not match the vectors (" +
                         std::to_string(v.grouping().empty() ? 0 : v.grouping().back().begin + v.grouping().back().size) +
                         " inputs)");
}

void check_no_leak(const std::vector<const VectorFile*>& used, const std::string& dir) {
    const auto test_path = vectors_path(dir, Split::Test);
    if (!fs::exists(test_path)) return;
    std::set<std::string> test_ids;
    for (const auto& e : read_vectors(test_path).examples) test_ids.insert(e.id);
    for (const auto* v : used)
        for (const auto& e : v->examples)
            if (test_ids.count(e.id)) throw DataError("test sample " + e.id + " appears in " + v->split + " vectors");
}

DnfModel load_checkpoint(const std::string& path) {
    require_file(path, "checkpoint");
    verify_manifests(fs::path(path).parent_path().empty() ? "." : fs::path(path).parent_path().string());
    return load_model(path);
}

// ---------------------------------------------------------------------------
// train

struct TrainFlags {
    std::string vectors;
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    bool grid = false;
    int parallel = 1;
    std::vector<int> grid_c;
    std::vector<double> grid_wd;
};

int cmd_train(const TrainFlags& f, std::ostream& out) {
    const auto started = timestamp_now();
    auto manifests = verify_manifests(f.vectors);
    const auto train_v = load_split(f.vectors, Split::Train);
    const auto val_v = load_split(f.vectors, Split::Validation);
    check_compatible(train_v, val_v);
    check_no_leak({&train_v, &val_v}, f.vectors);

    TrainConfig cfg;
    if (!f.config.empty()) {
        require_file(f.config, "training config");
        cfg = TrainConfig::from_json(read_text(f.config));
    }
    cfg.seed = f.seed;
    cfg.validate();

    fs::create_directories(f.out);
    RunManifest manifest;
    manifest.command = "train";
    TrainResult result;
    if (f.grid) {
        GridSpec spec;
        if (!f.grid_c.empty()) spec.conjunctions = f.grid_c;
        if (!f.grid_wd.empty()) spec.weight_decays = f.grid_wd;
        auto g = grid_search(train_v.examples, val_v.examples, train_v.labels, train_v.grouping(), cfg, spec,
                             f.parallel);
        json cells = json::array();
        for (const auto& c : g.cells) {
            out << "grid C=" << c.conjunctions << " weight_decay=" << c.weight_decay << " epoch=" << c.selected_epoch
                << " val_acc=" << fmt4(c.val_accuracy) << " val_f1=" << fmt4(c.val_macro_f1) << '\n';
            cells.push_back({{"conjunctions", c.conjunctions},
                             {"weight_decay", c.weight_decay},
                             {"selected_epoch", c.selected_epoch},
                             {"val_accuracy", c.val_accuracy},
                             {"val_macro_f1", c.val_macro_f1}});
        }
        out << "selected C=" << g.best_config.conjunctions << " weight_decay=" << g.best_config.weight_decay << '\n';
        write_text((fs::path(f.out) / "grid.json").string(), cells.dump(1) + "\n");
        manifest.artifacts.push_back({"grid.json", ""});
        cfg = g.best_config;
        result = std::move(g.best);
    } else {
        result = train(train_v.examples, val_v.examples, train_v.labels, train_v.grouping(), cfg, &out);
    }
    out << "selected epoch " << result.report.selected_epoch << ": val_acc=" << fmt4(result.report.val_accuracy)
        << " val_f1=" << fmt4(result.report.val_macro_f1) << " train_acc=" << fmt4(result.report.train_accuracy)
        << '\n';

    save_model(result.model, (fs::path(f.out) / "model.json").string());
    write_text((fs::path(f.out) / "train_report.json").string(), result.report.to_json());
    write_text((fs::path(f.out) / "train_config.json").string(), json::parse(cfg.to_json()).dump(1) + "\n");
    for (const char* name : {"model.json", "train_report.json", "train_config.json"})
        manifest.artifacts.push_back({name, ""});
    std::sort(manifest.artifacts.begin(), manifest.artifacts.end(),
              [](const auto& a, const auto& b) { return a.path < b.path; });
    manifest.config_digest = cfg.digest();
    manifest.seed = f.seed;
    manifest.inputs = manifests;
    if (const auto it = manifests.find("atoms.manifest.json"); it != manifests.end())
        manifest.dataset_digest = RunManifest::read((fs::path(f.vectors) / it->first).string()).dataset_digest;
    manifest.backend = "-";
    manifest.started = started;
    manifest.finished = timestamp_now();
    manifest.write(f.out);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalFlags {
    std::string vectors;
    std::string model;
    std::string split = "test";
};

int cmd_eval(const EvalFlags& f, std::ostream& out) {
    verify_manifests(f.vectors);
    const auto model = load_checkpoint(f.model);
    const auto split = parse_split(f.split);
    const auto v = load_split(f.vectors, split);
    check_model_matches(model, v);
    const auto m = evaluate(model, v.examples);
    out << "split=" << to_string(split) << " samples=" << v.examples.size() << " accuracy=" << fmt4(m.accuracy)
        << " macro_f1=" << fmt4(m.macro_f1) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// rules

struct RulesFlags {
    std::string model;
    std::vector<std::string> templates;
    double weight_threshold = 1e-4;
    std::string out;
};

int cmd_rules(const RulesFlags& f, std::ostream& out) {
    const auto model = load_checkpoint(f.model);
    const auto templates = load_all_templates(f.templates);
    const auto report = render_rules(extract_rules(model, f.weight_threshold), predicate_texts(templates));
    if (f.out.empty()) {
        out << report;
    } else {
        write_text(f.out, report);
        out << "rules: " << extract_rules(model, f.weight_threshold).size() << " literals\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// prune

struct PruneFlags {
    std::string vectors;
    std::string model;
    std::vector<std::string> templates;
    double epsilon = 0.005;
    double weight_threshold = 1e-4;
    std::string out;
};

int cmd_prune(const PruneFlags& f, std::ostream& out) {
    const auto started = timestamp_now();
    auto inputs = verify_manifests(f.vectors);
    const auto model = load_checkpoint(f.model);
    const auto val = load_split(f.vectors, Split::Validation);
    check_model_matches(model, val);
    const auto templates = load_all_templates(f.templates);

    PruneConfig cfg{f.epsilon, f.weight_threshold};
    cfg.validate();
    const auto r = prune(model, val.examples, cfg);

    std::ostringstream summary;
    summary << "validation accuracy before: " << fmt4(r.initial_accuracy) << '\n'
            << "validation accuracy after: " << fmt4(r.final_accuracy) << '\n'
            << "accepted removals: " << r.steps << '\n'
            << "iterations: " << r.iterations << '\n'
            << "rule size before: " << r.initial_rule_size << '\n'
            << "rule size after: " << r.rules.size() << '\n';
    out << summary.str();

    fs::create_directories(f.out);
    save_model(r.model, (fs::path(f.out) / "model.json").string());
    write_text((fs::path(f.out) / "prune_report.txt").string(),
               summary.str() + "\n" + render_rules(r.rules, predicate_texts(templates)));
    RunManifest manifest;
    manifest.command = "prune";
    manifest.artifacts = {{"model.json", ""}, {"prune_report.txt", ""}};
    manifest.config_digest = digest_hex(json{{"epsilon", f.epsilon}, {"weight_threshold", f.weight_threshold}}.dump());
    manifest.inputs = inputs;
    manifest.inputs["checkpoint"] = file_digest(f.model);
    manifest.backend = "-";
    manifest.started = started;
    manifest.finished = timestamp_now();
    manifest.write(f.out);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// intervene

struct GenerateFlags {
    BackendFlags backend;
    std::vector<std::string> templates;
    int iterations = 0;
    std::string similarity = "token";
    std::string out;
    std::uint64_t seed = 0;
};

int cmd_generate(const GenerateFlags& f, std::ostream& out) {
    const auto templates = load_all_templates(f.templates);
    std::vector<std::string> existing;
    for (const auto& t : templates) existing.push_back(comparable_text(t));
    auto backend = f.backend.make(f.seed);
    if (!backend) throw MissingInput("generation needs a backend");
    SimilarityFn sim = token_cosine;
    if (f.similarity == "embedding") {
        auto* http = dynamic_cast<HttpBackend*>(backend.get());
        if (!http) throw ConfigError("embedding similarity needs an open or closed backend");
        sim = embedding_similarity(*http);
    }
    const auto candidates = generate_candidates(*backend, existing, f.iterations, sim, &out);
    save_candidates(f.out, candidates);
    out << candidates.size() << " candidate(s) pending review\n";
    return kExitOk;
}

struct ReviewFlags {
    std::string candidates;
    std::string decisions;
    std::string target;
    std::vector<std::string> templates;
};

std::vector<ReviewDecision> prompt_decisions(const std::vector<CandidateTemplate>& candidates, std::istream& in,
                                             std::ostream& out) {
    std::vector<ReviewDecision> decisions;
    auto ask = [&](const std::string& q) {
        out << q << std::flush;
        std::string line;
        if (!std::getline(in, line)) line.clear();
        return line;
    };
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i].status != ReviewStatus::Pending) continue;
        out << "[" << i << "] " << candidates[i].text << " (mean similarity " << fmt4(candidates[i].mean_similarity)
            << ")\n";
        ReviewDecision d;
        d.candidate = i;
        const auto a = ask("accept? [y/N] ");
        d.accept = !a.empty() && (a[0] == 'y' || a[0] == 'Y');
        if (d.accept) {
            std::stringstream slots(ask("slots (name=source, comma separated): "));
            std::string item;
            while (std::getline(slots, item, ',')) {
                const auto eq = item.find('=');
                if (eq == std::string::npos) throw ValidationError("slot annotation needs name=source: " + item);
                auto trim = [](std::string s) {
                    s.erase(0, s.find_first_not_of(" \t"));
                    s.erase(s.find_last_not_of(" \t") + 1);
                    return s;
                };
                d.slots.push_back({trim(item.substr(0, eq)), parse_slot_source(trim(item.substr(eq + 1)))});
            }
            d.semantics = ask("semantics: ");
            d.negated_semantics = ask("negated semantics (optional): ");
            d.text = ask("template text (blank derives it): ");
        }
        decisions.push_back(std::move(d));
    }
    return decisions;
}

int cmd_review(const ReviewFlags& f, std::istream& in, std::ostream& out) {
    require_file(f.candidates, "candidates file");
    auto candidates = load_candidates(f.candidates);
    auto files = f.templates;
    if (fs::exists(f.target) && std::find(files.begin(), files.end(), f.target) == files.end())
        files.push_back(f.target);
    const auto existing = load_all_templates(files);
    std::vector<ReviewDecision> decisions;
    if (!f.decisions.empty()) {
        require_file(f.decisions, "decisions file");
        decisions = load_decisions(f.decisions);
    } else {
        decisions = prompt_decisions(candidates, in, out);
    }
    const auto outcome = review(candidates, decisions, existing);
    append_templates(f.target, outcome.accepted);
    save_candidates(f.candidates, candidates);
    for (const auto& t : outcome.accepted) out << "accepted Q" << t.id << ": " << t.text << '\n';
    out << outcome.accepted.size() << " accepted, " << outcome.rejected.size() << " rejected\n";
    return kExitOk;
}

struct WeightFlags {
    std::string model;
    std::string out;
    std::string layer = "conj";
    std::size_t layer_index = 0;
    std::optional<std::size_t> target;
    std::optional<int> predicate;
    double value = 0.0;
    std::string note;
    std::string audit;
};

int cmd_weight(const WeightFlags& f, std::ostream& out) {
    require_file(f.model, "checkpoint");
    auto model = load_model(f.model);
    const auto kind = f.layer == "conj" ? LayerKind::Conjunctive : LayerKind::Disjunctive;
    std::size_t target = 0;
    if (f.predicate) {
        if (kind != LayerKind::Conjunctive) throw ValueError("--predicate only applies to conjunctive layers");
        target = conj_target_for_predicate(model, *f.predicate);
    } else if (f.target) {
        target = *f.target;
    } else {
        throw ConfigError("give --target or --predicate");
    }
    const auto audit_path = f.audit.empty() ? f.out + ".audit.jsonl" : f.audit;
    AuditLog log(audit_path);
    const auto rec = intervene_weight(model, kind, f.layer_index, target, f.value, f.note, &log);
    save_model(model, f.out);
    out << to_json_line(rec) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------

int report(std::ostream& err, int code, const std::string& msg) {
    err << "error: " << msg << '\n';
    return code;
}

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Neural-symbolic misinformation verification toolkit"};
    app.name("factdnf");
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "Seed for every random draw")->capture_default_str();

    AtomsFlags atoms;
    auto* a = app.add_subcommand("atoms", "Answer logic atoms and write per-split vectors");
    atoms.dataset.add_to(a);
    atoms.backend.add_to(a);
    a->add_option("--templates", atoms.templates, "Template file(s)")->required();
    a->add_option("--cache", atoms.cache, "Atom cache file")->required();
    a->add_option("--out", atoms.out, "Output directory")->required();
    a->add_option("--parallel", atoms.parallel, "Concurrent samples")->check(CLI::PositiveNumber);
    a->add_flag("--extract-claims", atoms.extract_claims, "Extract claims for samples without them");
    a->add_option("--seed", seed, "Seed for every random draw");

    TrainFlags trainf;
    auto* t = app.add_subcommand("train", "Train the DNF model");
    t->add_option("--vectors", trainf.vectors, "Directory written by atoms")->required();
    t->add_option("--config", trainf.config, "Training config JSON");
    t->add_option("--out", trainf.out, "Output directory")->required();
    t->add_flag("--grid", trainf.grid, "Search conjunction count and weight decay");
    t->add_option("--grid-conjunctions", trainf.grid_c, "Override the conjunction grid");
    t->add_option("--grid-weight-decay", trainf.grid_wd, "Override the weight decay grid");
    t->add_option("--parallel", trainf.parallel, "Concurrent grid cells")->check(CLI::PositiveNumber);
    t->add_option("--seed", seed, "Seed for every random draw");

    EvalFlags evalf;
    auto* e = app.add_subcommand("eval", "Report accuracy and macro-F1 on a split");
    e->add_option("--vectors", evalf.vectors, "Directory written by atoms")->required();
    e->add_option("--model", evalf.model, "Checkpoint")->required();
    e->add_option("--split", evalf.split, "train, validation or test");

    RulesFlags rulesf;
    auto* r = app.add_subcommand("rules", "Render the rules of a checkpoint");
    r->add_option("--model", rulesf.model, "Checkpoint")->required();
    r->add_option("--templates", rulesf.templates, "Template file(s) for predicate wording");
    r->add_option("--weight-threshold", rulesf.weight_threshold, "Literal threshold on |w|");
    r->add_option("--out", rulesf.out, "Report file (stdout when omitted)");

    PruneFlags prunef;
    auto* p = app.add_subcommand("prune", "Prune a checkpoint against validation accuracy");
    p->add_option("--vectors", prunef.vectors, "Directory written by atoms")->required();
    p->add_option("--model", prunef.model, "Checkpoint")->required();
    p->add_option("--templates", prunef.templates, "Template file(s) for predicate wording");
    p->add_option("--epsilon", prunef.epsilon, "Largest accepted validation accuracy drop");
    p->add_option("--weight-threshold", prunef.weight_threshold, "Literal threshold on |w|");
    p->add_option("--out", prunef.out, "Output directory")->required();

    auto* iv = app.add_subcommand("intervene", "Template generation, review, and weight edits");
    iv->require_subcommand(1);
    GenerateFlags genf;
    auto* g = iv->add_subcommand("generate", "Propose new question templates");
    genf.backend.add_to(g);
    g->add_option("--templates", genf.templates, "Existing template file(s)")->required();
    g->add_option("--iterations", genf.iterations, "Generation rounds")->required()->check(CLI::PositiveNumber);
    g->add_option("--similarity", genf.similarity, "token or embedding")
        ->check(CLI::IsMember({"token", "embedding"}));
    g->add_option("--out", genf.out, "Candidates file")->required();
    g->add_option("--seed", seed, "Seed for every random draw");
    ReviewFlags reviewf;
    auto* rv = iv->add_subcommand("review", "Accept or reject candidates");
    rv->add_option("--candidates", reviewf.candidates, "Candidates file")->required();
    rv->add_option("--decisions", reviewf.decisions, "Decisions file (prompts when omitted)");
    rv->add_option("--target", reviewf.target, "Template file receiving accepted templates")->required();
    rv->add_option("--templates", reviewf.templates, "Other template files sharing the id space");
    WeightFlags weightf;
    auto* w = iv->add_subcommand("weight", "Set one model weight");
    w->add_option("--model", weightf.model, "Checkpoint")->required();
    w->add_option("--out", weightf.out, "Edited checkpoint")->required();
    w->add_option("--layer", weightf.layer, "conj or disj")->check(CLI::IsMember({"conj", "disj"}));
    w->add_option("--index", weightf.layer_index, "Layer index (conjunction or label)");
    w->add_option("--target", weightf.target, "Weight index inside the layer");
    w->add_option("--predicate", weightf.predicate, "Predicate id (conjunctive layers)");
    w->add_option("--value", weightf.value, "New weight")->required();
    w->add_option("--note", weightf.note, "Audit note");
    w->add_option("--audit", weightf.audit, "Audit log (default: <out>.audit.jsonl)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& pe) {
        return app.exit(pe, out, err);
    }

    try {
        if (a->parsed()) {
            atoms.seed = seed;
            return cmd_atoms(atoms, out);
        }
        if (t->parsed()) {
            trainf.seed = seed;
            return cmd_train(trainf, out);
        }
        if (e->parsed()) return cmd_eval(evalf, out);
        if (r->parsed()) return cmd_rules(rulesf, out);
        if (p->parsed()) return cmd_prune(prunef, out);
        if (g->parsed()) {
            genf.seed = seed;
            return cmd_generate(genf, out);
        }
        if (rv->parsed()) return cmd_review(reviewf, in, out);
        if (w->parsed()) return cmd_weight(weightf, out);
    } catch (const IncompleteCache& ic) {
        return report(err, kExitMissingInput,
                      "backend unreachable; " + std::to_string(ic.missing()) + " question(s) missing from the cache (" +
                          ic.what() + ")");
    } catch (const MissingInput& mi) {
        return report(err, kExitMissingInput, mi.what());
    } catch (const CacheError& ce) {
        return report(err, kExitCorruptInput, std::string(ce.what()));
    } catch (const BackendError& be) {
        return report(err, kExitBackend, std::string(be.what()) + " [question " + be.question_id() + "]");
    } catch (const ProtocolError& pe) {
        return report(err, kExitBackend, pe.what());
    } catch (const ShapeError& se) {
        return report(err, kExitMismatch, se.what());
    } catch (const ConfigError& ce) {
        return report(err, kExitMismatch, ce.what());
    } catch (const ValueError& ve) {
        return report(err, kExitMismatch, ve.what());
    } catch (const DataError& de) {
        return report(err, kExitCorruptInput, de.what());
    } catch (const ValidationError& ve) {
        return report(err, kExitCorruptInput, ve.what());
    } catch (const GroundingError& ge) {
        return report(err, kExitCorruptInput, ge.what());
    } catch (const std::exception& ex) {
        return report(err, kExitFailure, ex.what());
    }
    return kExitFailure;
}

}  // namespace factdnf::cli
