#include "factdnf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "factdnf/digest.hpp"
#include "factdnf/errors.hpp"
#include "factdnf/rng.hpp"

namespace factdnf {

using nlohmann::json;

double accuracy(const DnfModel& model, const std::vector<Example>& data) {
    if (data.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& ex : data) hits += predict(model, ex.atoms) == ex.label;
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

double macro_f1(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                std::size_t num_labels) {
    if (truth.size() != predicted.size()) throw ShapeError("truth and prediction lengths differ");
    if (num_labels == 0) return 0.0;
    std::vector<std::size_t> tp(num_labels), fp(num_labels), fn(num_labels);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == predicted[i]) {
            ++tp[truth[i]];
        } else {
            ++fp[predicted[i]];
            ++fn[truth[i]];
        }
    }
    double total = 0.0;
    for (std::size_t c = 0; c < num_labels; ++c) {
        const auto denom = 2 * tp[c] + fp[c] + fn[c];
        if (denom > 0) total += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
    }
    return total / static_cast<double>(num_labels);
}

Metrics evaluate(const DnfModel& model, const std::vector<Example>& data) {
    std::vector<std::size_t> truth, predicted;
    truth.reserve(data.size());
    predicted.reserve(data.size());
    std::size_t hits = 0;
    for (const auto& ex : data) {
        truth.push_back(ex.label);
        predicted.push_back(predict(model, ex.atoms));
        hits += predicted.back() == ex.label;
    }
    Metrics m;
    m.accuracy = data.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(data.size());
    m.macro_f1 = macro_f1(truth, predicted, model.labels.size());
    return m;
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (epochs < 1) throw ConfigError("epochs must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (conjunctions < 1) throw ConfigError("conjunctions must be positive");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
    if (anneal_epochs < 1 || anneal_epochs > epochs) throw ConfigError("anneal_epochs must lie in [1, epochs]");
    if (fixed_delta && !(*fixed_delta >= 0.0 && *fixed_delta <= 1.0))
        throw ConfigError("fixed_delta must lie in [0, 1]");
}

std::string TrainConfig::to_json() const {
    json j{{"learning_rate", learning_rate}, {"epochs", epochs},           {"batch_size", batch_size},
           {"conjunctions", conjunctions},   {"weight_decay", weight_decay}, {"anneal_epochs", anneal_epochs},
           {"seed", seed},                   {"init_scale", init_scale}};
    if (bias.kind == BiasMode::Kind::Constant) j["bias_constant"] = bias.constant;
    if (fixed_delta) j["fixed_delta"] = *fixed_delta;
    return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    TrainConfig c;
    try {
        const auto j = json::parse(text);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.conjunctions = j.value("conjunctions", c.conjunctions);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.anneal_epochs = j.value("anneal_epochs", c.anneal_epochs);
        c.seed = j.value("seed", c.seed);
        c.init_scale = j.value("init_scale", c.init_scale);
        if (j.contains("bias_constant")) c.bias = BiasMode::fixed(j.at("bias_constant").get<double>());
        if (j.contains("fixed_delta")) c.fixed_delta = j.at("fixed_delta").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad training config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string TrainConfig::digest() const { return digest_hex(to_json()); }

std::string TrainReport::to_json() const {
    json rows = json::array();
    for (const auto& e : epochs)
        rows.push_back({{"epoch", e.epoch},
                        {"delta", e.delta},
                        {"train_loss", e.train_loss},
                        {"val_accuracy", e.val_accuracy},
                        {"val_macro_f1", e.val_macro_f1}});
    json j{{"epochs", rows},
           {"selected_epoch", selected_epoch},
           {"train_accuracy", train_accuracy},
           {"val_accuracy", val_accuracy},
           {"val_macro_f1", val_macro_f1}};
    return j.dump(1) + "\n";
}

// ---------------------------------------------------------------------------

double loss(std::span<const double> z, std::size_t label) { return cross_entropy(z, label); }

double batch_loss(const std::vector<std::vector<double>>& zs, const std::vector<std::size_t>& labels) {
    if (zs.size() != labels.size() || zs.empty()) throw ValueError("batch loss needs matching, non-empty inputs");
    double total = 0.0;
    for (std::size_t i = 0; i < zs.size(); ++i) total += loss(zs[i], labels[i]);
    return total / static_cast<double>(zs.size());
}

namespace {

constexpr double kAnnealResidual = 0.005;

double anneal_rate(int anneal_epochs) {
    double r = std::pow(kAnnealResidual, 1.0 / anneal_epochs);
    while (1.0 - std::pow(r, anneal_epochs) < 1.0 - kAnnealResidual) r = std::nextafter(r, 0.0);
    return r;
}

struct Adam {
    explicit Adam(const DnfModel& model) : m(Gradients::zeros_like(model)), v(Gradients::zeros_like(model)) {}

    void step(DnfModel& model, const Gradients& g, double lr, double weight_decay) {
        ++t;
        const double c1 = 1.0 - std::pow(kBeta1, t);
        const double c2 = 1.0 - std::pow(kBeta2, t);
        auto update = [&](std::vector<double>& w, const std::vector<double>& gr, std::vector<double>& mm,
                          std::vector<double>& vv) {
            for (std::size_t i = 0; i < w.size(); ++i) {
                w[i] -= lr * weight_decay * w[i];
                mm[i] = kBeta1 * mm[i] + (1.0 - kBeta1) * gr[i];
                vv[i] = kBeta2 * vv[i] + (1.0 - kBeta2) * gr[i] * gr[i];
                w[i] -= lr * (mm[i] / c1) / (std::sqrt(vv[i] / c2) + kEps);
            }
        };
        for (std::size_t c = 0; c < model.conj_layers.size(); ++c)
            update(model.conj_layers[c].weights, g.conj[c], m.conj[c], v.conj[c]);
        for (std::size_t l = 0; l < model.disj_layers.size(); ++l)
            update(model.disj_layers[l].weights, g.disj[l], m.disj[l], v.disj[l]);
    }

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;
    Gradients m, v;
    int t = 0;
};

void check_examples(const std::vector<Example>& set, std::size_t width, std::size_t labels, const char* name) {
    if (set.empty()) throw DataError(std::string(name) + " split is empty");
    for (const auto& ex : set) {
        if (ex.atoms.size() != width)
            throw ShapeError(std::string(name) + " example " + ex.id + " has " + std::to_string(ex.atoms.size()) +
                             " atoms, expected " + std::to_string(width));
        if (ex.label >= labels) throw DataError(std::string(name) + " example " + ex.id + " has a bad label");
    }
}

}  // namespace

double delta_schedule(int epoch, const TrainConfig& config) {
    if (epoch < 1) throw ValueError("epochs are 1-based");
    if (epoch > config.anneal_epochs) return 1.0;
    return 1.0 - std::pow(anneal_rate(config.anneal_epochs), epoch);
}

std::string progress_line(const EpochStats& s, int epochs) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch %d/%d delta=%.6f loss=%.6f val_acc=%.4f val_f1=%.4f", s.epoch, epochs,
                  s.delta, s.train_loss, s.val_accuracy, s.val_macro_f1);
    return buf;
}

TrainResult train(const std::vector<Example>& train_set, const std::vector<Example>& val_set,
                  const std::vector<std::string>& labels, const std::vector<AtomGroup>& grouping,
                  const TrainConfig& config, std::ostream* progress) {
    config.validate();
    DnfModel model = make_model(labels, grouping, static_cast<std::size_t>(config.conjunctions), config.seed,
                                config.bias, config.init_scale);
    model.config_digest = config.digest();
    check_examples(train_set, model.input_size(), labels.size(), "train");
    check_examples(val_set, model.input_size(), labels.size(), "validation");

    Adam adam(model);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    const auto batch = static_cast<std::size_t>(config.batch_size);

    TrainResult best{model, {}};
    double best_acc = -1.0;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const double d = config.fixed_delta ? *config.fixed_delta : delta_schedule(epoch, config);
        set_delta(model, d);
        Rng rng(mix_seed(config.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
        rng.shuffle(std::span<std::size_t>(order));

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const auto end = std::min(order.size(), start + batch);
            auto grads = Gradients::zeros_like(model);
            for (std::size_t i = start; i < end; ++i) {
                const auto& ex = train_set[order[i]];
                accumulate_gradients(model, ex.atoms, ex.label, grads);
            }
            if (!std::isfinite(grads.loss)) {
                std::ostringstream msg;
                msg << "non-finite loss at epoch " << epoch << ", batch starting " << start << " (delta " << d
                    << ")";
                throw TrainingError(msg.str());
            }
            epoch_loss += grads.loss;
            grads.scale(1.0 / static_cast<double>(end - start));
            adam.step(model, grads, config.learning_rate, config.weight_decay);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.delta = d;
        stats.train_loss = epoch_loss / static_cast<double>(train_set.size());
        const auto val = evaluate(model, val_set);
        stats.val_accuracy = val.accuracy;
        stats.val_macro_f1 = val.macro_f1;
        best.report.epochs.push_back(stats);
        if (progress) *progress << progress_line(stats, config.epochs) << '\n';

        if (val.accuracy > best_acc) {
            best_acc = val.accuracy;
            best.model = model;
            best.report.selected_epoch = epoch;
            best.report.val_accuracy = val.accuracy;
            best.report.val_macro_f1 = val.macro_f1;
        }
    }
    best.report.train_accuracy = accuracy(best.model, train_set);
    return best;
}

GridResult grid_search(const std::vector<Example>& train_set, const std::vector<Example>& val_set,
                       const std::vector<std::string>& labels, const std::vector<AtomGroup>& grouping,
                       const TrainConfig& base, const GridSpec& grid, int parallel) {
    if (grid.conjunctions.empty() || grid.weight_decays.empty()) throw ConfigError("empty hyperparameter grid");

    std::vector<TrainConfig> configs;
    for (int c : grid.conjunctions)
        for (double wd : grid.weight_decays) {
            TrainConfig cfg = base;
            cfg.conjunctions = c;
            cfg.weight_decay = wd;
            configs.push_back(cfg);
        }

    std::vector<std::optional<TrainResult>> results(configs.size());
    const auto workers = static_cast<std::size_t>(std::max(parallel, 1));
    for (std::size_t start = 0; start < configs.size(); start += workers) {
        std::vector<std::future<TrainResult>> jobs;
        const auto end = std::min(configs.size(), start + workers);
        for (std::size_t i = start; i < end; ++i)
            jobs.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred, [&, i] {
                return train(train_set, val_set, labels, grouping, configs[i]);
            }));
        for (std::size_t i = start; i < end; ++i) results[i] = jobs[i - start].get();
    }

    GridResult out;
    std::size_t best = 0;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const auto& r = *results[i];
        out.cells.push_back(GridCell{configs[i].conjunctions, configs[i].weight_decay, r.report.selected_epoch,
                                     r.report.val_accuracy, r.report.val_macro_f1});
        if (i == 0) continue;
        const auto& cur = out.cells[i];
        const auto& inc = out.cells[best];
        const bool better = cur.val_accuracy > inc.val_accuracy ||
                            (cur.val_accuracy == inc.val_accuracy &&
                             (cur.conjunctions < inc.conjunctions ||
                              (cur.conjunctions == inc.conjunctions && cur.weight_decay > inc.weight_decay)));
        if (better) best = i;
    }
    out.best_config = configs[best];
    out.best = std::move(*results[best]);
    return out;
}

}  // namespace factdnf
