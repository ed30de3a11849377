#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "factdnf/dnf.hpp"

namespace factdnf {

struct Example {
    std::string id;
    std::vector<double> atoms;
    std::size_t label = 0;
};

struct Metrics {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
};

double accuracy(const DnfModel& model, const std::vector<Example>& data);
// Unweighted mean of per-class F1 over every label; a class whose F1 is 0/0
// contributes 0.
double macro_f1(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                std::size_t num_labels);
Metrics evaluate(const DnfModel& model, const std::vector<Example>& data);

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 30;
    int batch_size = 64;
    int conjunctions = 10;
    double weight_decay = 1e-4;
    int anneal_epochs = 15;
    std::uint64_t seed = 0;
    double init_scale = 0.1;
    BiasMode bias;
    // Holds delta at this value for every epoch instead of annealing.
    std::optional<double> fixed_delta;

    void validate() const;
    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
    std::string digest() const;
};

struct EpochStats {
    int epoch = 0;
    double delta = 0.0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
    double val_macro_f1 = 0.0;

    bool operator==(const EpochStats&) const = default;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    int selected_epoch = 0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    double val_macro_f1 = 0.0;

    bool operator==(const TrainReport&) const = default;
    std::string to_json() const;
};

struct TrainResult {
    DnfModel model;
    TrainReport report;
};

double loss(std::span<const double> z, std::size_t label);
double batch_loss(const std::vector<std::vector<double>>& zs, const std::vector<std::size_t>& labels);

// Gate value for a 1-based epoch: 1 - r^epoch with r fixed so that the value
// reaches at least 0.995 at `anneal_epochs`, and exactly 1 afterwards.
double delta_schedule(int epoch, const TrainConfig& config);

// One formatted progress line per epoch.
std::string progress_line(const EpochStats& stats, int epochs);

// Adam (beta1 0.9, beta2 0.999, eps 1e-8) with decoupled weight decay over
// seeded shuffled mini-batches. Returns the checkpoint with the highest
// validation accuracy (earliest on ties).
TrainResult train(const std::vector<Example>& train_set, const std::vector<Example>& val_set,
                  const std::vector<std::string>& labels, const std::vector<AtomGroup>& grouping,
                  const TrainConfig& config, std::ostream* progress = nullptr);

struct GridSpec {
    std::vector<int> conjunctions{10, 20, 30, 40, 50};
    std::vector<double> weight_decays{1e-3, 5e-4, 1e-4};
};

struct GridCell {
    int conjunctions = 0;
    double weight_decay = 0.0;
    int selected_epoch = 0;
    double val_accuracy = 0.0;
    double val_macro_f1 = 0.0;
};

struct GridResult {
    TrainConfig best_config;
    TrainResult best;
    std::vector<GridCell> cells;
};

// Full sweep; picks the highest validation accuracy, ties going to the
// smaller C and then the larger weight decay. Cells run on up to `parallel`
// threads; results are merged in grid order.
GridResult grid_search(const std::vector<Example>& train_set, const std::vector<Example>& val_set,
                       const std::vector<std::string>& labels, const std::vector<AtomGroup>& grouping,
                       const TrainConfig& base, const GridSpec& grid, int parallel = 1);

}  // namespace factdnf
