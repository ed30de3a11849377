#include <fstream>
#include <sstream>

#include <json.hpp>

#include "factdnf/dnf.hpp"
#include "factdnf/errors.hpp"

namespace factdnf {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "factdnf-model";
constexpr int kVersion = 1;

json bias_to_json(const BiasMode& bias) {
    if (bias.kind == BiasMode::Kind::Max) return "max";
    return json{{"constant", bias.constant}};
}

BiasMode bias_from_json(const json& j) {
    if (j.is_string() && j.get<std::string>() == "max") return BiasMode::max();
    if (j.is_object() && j.contains("constant")) return BiasMode::fixed(j.at("constant").get<double>());
    throw ConfigError("unrecognized bias_mode in checkpoint");
}

}  // namespace

std::string model_to_json(const DnfModel& model) {
    json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["labels"] = model.labels;
    json preds = json::array();
    for (const auto& g : model.grouping) preds.push_back({{"id", g.predicate_id}, {"max_groundings", g.size}});
    j["predicates"] = preds;
    j["conjunctions"] = model.conj_layers.size();
    j["bias_mode"] = bias_to_json(model.bias);
    j["delta"] = model.delta;
    json conj = json::array();
    for (const auto& l : model.conj_layers) conj.push_back(l.weights);
    json disj = json::array();
    for (const auto& l : model.disj_layers) disj.push_back(l.weights);
    j["conj_weights"] = conj;
    j["disj_weights"] = disj;
    j["config_digest"] = model.config_digest;
    // nlohmann serializes doubles with a round-trip exact representation.
    return j.dump(1) + "\n";
}

DnfModel model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != kFormat) throw ConfigError("not a factdnf model checkpoint");
        if (j.at("version").get<int>() != kVersion) throw ConfigError("unsupported checkpoint version");

        DnfModel model;
        model.labels = j.at("labels").get<std::vector<std::string>>();
        std::size_t offset = 0;
        std::vector<std::size_t> conj_groups;
        for (const auto& p : j.at("predicates")) {
            const auto size = p.at("max_groundings").get<std::size_t>();
            model.grouping.push_back(AtomGroup{p.at("id").get<int>(), offset, size});
            conj_groups.push_back(size);
            offset += size;
        }
        model.bias = bias_from_json(j.at("bias_mode"));
        model.config_digest = j.value("config_digest", std::string{});
        const auto conjunctions = j.at("conjunctions").get<std::size_t>();

        const auto& conj = j.at("conj_weights");
        const auto& disj = j.at("disj_weights");
        if (conj.size() != conjunctions || disj.size() != model.labels.size())
            throw ShapeError("checkpoint layer counts disagree with its header");
        const std::vector<std::size_t> disj_groups(conjunctions, 1);
        for (const auto& row : conj)
            model.conj_layers.push_back(
                make_layer(LayerMode::Conjunctive, row.get<std::vector<double>>(), conj_groups, 0.0, model.bias));
        for (const auto& row : disj)
            model.disj_layers.push_back(
                make_layer(LayerMode::Disjunctive, row.get<std::vector<double>>(), disj_groups, 0.0, model.bias));
        set_delta(model, j.at("delta").get<double>());
        return model;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("checkpoint missing field: ") + e.what());
    }
}

void save_model(const DnfModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw ConfigError("cannot write checkpoint " + path);
    out << model_to_json(model);
}

DnfModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read checkpoint " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

}  // namespace factdnf
