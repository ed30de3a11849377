#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "factdnf/truth.hpp"

namespace factdnf {

enum class LayerMode { Conjunctive, Disjunctive };

// How the gate bias b is obtained: the largest |w x| term (default) or a
// fixed constant.
struct BiasMode {
    enum class Kind { Max, Constant };
    Kind kind = Kind::Max;
    double constant = 0.0;

    static BiasMode max() { return {}; }
    static BiasMode fixed(double c) { return {Kind::Constant, c}; }
    bool operator==(const BiasMode&) const = default;
};

// Weighted tanh unit with gate bias
//   y = tanh(sum_k w_g(k) x_k + delta * (b - sum_k |w_g(k) x_k|)).
// Inputs are split into consecutive groups; all inputs of group g share
// weight w_g.
struct SemiSymbolicLayer {
    LayerMode mode = LayerMode::Conjunctive;
    std::vector<double> weights;
    std::vector<std::size_t> group_sizes;
    double delta = 0.0;
    BiasMode bias;

    std::size_t input_size() const;
};

SemiSymbolicLayer make_layer(LayerMode mode, std::vector<double> weights, std::vector<std::size_t> group_sizes,
                             double delta = 0.0, BiasMode bias = {});

double layer_forward(const SemiSymbolicLayer& layer, std::span<const double> inputs);

// Accumulates dL/dw into `weight_grad` and dL/dx into `input_grad` (either may
// be empty to skip) given dL/dy. Returns y.
double layer_backward(const SemiSymbolicLayer& layer, std::span<const double> inputs, double output_grad,
                      std::span<double> weight_grad, std::span<double> input_grad);

// C conjunctive layers over the predicate-grouped atom vector, feeding one
// disjunctive layer per label.
struct DnfModel {
    std::vector<std::string> labels;
    std::vector<AtomGroup> grouping;
    std::vector<SemiSymbolicLayer> conj_layers;
    std::vector<SemiSymbolicLayer> disj_layers;
    // Scheduler value d in [0, 1]; conj layers run at +d, disj layers at -d.
    double delta = 0.0;
    BiasMode bias;
    std::string config_digest;

    std::size_t conjunctions() const { return conj_layers.size(); }
    std::size_t predicates() const { return grouping.size(); }
    std::size_t input_size() const;
};

// Weights drawn uniformly from [-init_scale, init_scale].
DnfModel make_model(std::vector<std::string> labels, std::vector<AtomGroup> grouping, std::size_t conjunctions,
                    std::uint64_t seed, BiasMode bias = {}, double init_scale = 0.1);

void set_delta(DnfModel& model, double delta);

struct ForwardTrace {
    std::vector<double> conj_outputs;
    std::vector<double> disj_outputs;
    std::vector<double> z;
};

ForwardTrace forward(const DnfModel& model, std::span<const double> atoms);

std::vector<double> softmax(std::span<const double> logits);

// Argmax of z, lowest index on ties.
std::size_t predict(const DnfModel& model, std::span<const double> atoms);

// Same shapes as the model's weights.
struct Gradients {
    std::vector<std::vector<double>> conj;
    std::vector<std::vector<double>> disj;
    double loss = 0.0;

    static Gradients zeros_like(const DnfModel& model);
    void scale(double factor);
};

// Cross-entropy loss and its exact gradient; accumulates into `out`.
void accumulate_gradients(const DnfModel& model, std::span<const double> atoms, std::size_t label, Gradients& out);
Gradients gradients(const DnfModel& model, std::span<const double> atoms, std::size_t label);

double cross_entropy(std::span<const double> z, std::size_t label);

// Checkpoint (JSON). Weights round-trip bit-exactly.
void save_model(const DnfModel& model, const std::string& path);
DnfModel load_model(const std::string& path);
std::string model_to_json(const DnfModel& model);
DnfModel model_from_json(const std::string& text);

}  // namespace factdnf
