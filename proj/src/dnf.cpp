#include "factdnf/dnf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "factdnf/errors.hpp"
#include "factdnf/rng.hpp"

namespace factdnf {

namespace {

// Subgradient convention: d|x|/dx = 0 at x = 0.
double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

std::size_t SemiSymbolicLayer::input_size() const {
    return std::accumulate(group_sizes.begin(), group_sizes.end(), std::size_t{0});
}

SemiSymbolicLayer make_layer(LayerMode mode, std::vector<double> weights, std::vector<std::size_t> group_sizes,
                             double delta, BiasMode bias) {
    if (weights.size() != group_sizes.size()) throw ShapeError("one weight per input group expected");
    if (!(delta >= -1.0 && delta <= 1.0)) throw ValueError("delta outside [-1, 1]");
    return SemiSymbolicLayer{mode, std::move(weights), std::move(group_sizes), delta, bias};
}

double layer_forward(const SemiSymbolicLayer& layer, std::span<const double> inputs) {
    if (inputs.size() != layer.input_size())
        throw ShapeError("layer expects " + std::to_string(layer.input_size()) + " inputs, got " +
                         std::to_string(inputs.size()));
    double s = 0.0, a = 0.0, b = 0.0;
    std::size_t k = 0;
    for (std::size_t g = 0; g < layer.group_sizes.size(); ++g) {
        const double w = layer.weights[g];
        for (std::size_t j = 0; j < layer.group_sizes[g]; ++j, ++k) {
            const double t = w * inputs[k];
            s += t;
            a += std::abs(t);
            b = std::max(b, std::abs(t));
        }
    }
    if (layer.bias.kind == BiasMode::Kind::Constant) b = layer.bias.constant;
    return std::tanh(s + layer.delta * (b - a));
}

double layer_backward(const SemiSymbolicLayer& layer, std::span<const double> inputs, double output_grad,
                      std::span<double> weight_grad, std::span<double> input_grad) {
    if (inputs.size() != layer.input_size()) throw ShapeError("layer input size mismatch");
    const bool max_bias = layer.bias.kind == BiasMode::Kind::Max;

    double s = 0.0, a = 0.0, b = 0.0;
    std::size_t argmax = 0;
    std::size_t k = 0;
    for (std::size_t g = 0; g < layer.group_sizes.size(); ++g) {
        const double w = layer.weights[g];
        for (std::size_t j = 0; j < layer.group_sizes[g]; ++j, ++k) {
            const double t = w * inputs[k];
            s += t;
            a += std::abs(t);
            // Strict comparison keeps the first attaining index.
            if (std::abs(t) > b) {
                b = std::abs(t);
                argmax = k;
            }
        }
    }
    if (!max_bias) b = layer.bias.constant;
    const double y = std::tanh(s + layer.delta * (b - a));
    const double du = output_grad * (1.0 - y * y);

    k = 0;
    for (std::size_t g = 0; g < layer.group_sizes.size(); ++g) {
        const double w = layer.weights[g];
        double dw = 0.0;
        for (std::size_t j = 0; j < layer.group_sizes[g]; ++j, ++k) {
            const double x = inputs[k];
            const double sg = sign(w * x);
            // d(s + delta (b - a)) / dt for this term
            double dt = 1.0 - layer.delta * sg;
            if (max_bias && k == argmax) dt += layer.delta * sg;
            dw += dt * x;
            if (!input_grad.empty()) input_grad[k] += du * dt * w;
        }
        if (!weight_grad.empty()) weight_grad[g] += du * dw;
    }
    return y;
}

std::size_t DnfModel::input_size() const {
    return grouping.empty() ? 0 : grouping.back().begin + grouping.back().size;
}

DnfModel make_model(std::vector<std::string> labels, std::vector<AtomGroup> grouping, std::size_t conjunctions,
                    std::uint64_t seed, BiasMode bias, double init_scale) {
    if (labels.empty()) throw ValueError("model needs at least one label");
    if (grouping.empty()) throw ValueError("model needs at least one predicate");
    if (conjunctions == 0) throw ValueError("model needs at least one conjunction");

    DnfModel model;
    model.labels = std::move(labels);
    model.grouping = std::move(grouping);
    model.bias = bias;

    std::vector<std::size_t> conj_groups;
    for (const auto& g : model.grouping) conj_groups.push_back(g.size);
    const std::vector<std::size_t> disj_groups(conjunctions, 1);

    Rng rng(mix_seed(seed, "init"));
    auto draw = [&](std::size_t n) {
        std::vector<double> w(n);
        for (auto& x : w) x = rng.uniform(-init_scale, init_scale);
        return w;
    };
    for (std::size_t c = 0; c < conjunctions; ++c)
        model.conj_layers.push_back(make_layer(LayerMode::Conjunctive, draw(conj_groups.size()), conj_groups, 0.0, bias));
    for (std::size_t l = 0; l < model.labels.size(); ++l)
        model.disj_layers.push_back(make_layer(LayerMode::Disjunctive, draw(conjunctions), disj_groups, 0.0, bias));
    return model;
}

void set_delta(DnfModel& model, double delta) {
    if (!(delta >= -1.0 && delta <= 1.0)) throw ValueError("delta outside [-1, 1]");
    model.delta = delta;
    for (auto& layer : model.conj_layers) layer.delta = delta;
    for (auto& layer : model.disj_layers) layer.delta = -delta;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> z(logits.size());
    const double m = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) total += (z[i] = std::exp(logits[i] - m));
    for (auto& v : z) v /= total;
    return z;
}

ForwardTrace forward(const DnfModel& model, std::span<const double> atoms) {
    if (atoms.size() != model.input_size())
        throw ShapeError("atom vector has " + std::to_string(atoms.size()) + " entries, model expects " +
                         std::to_string(model.input_size()));
    ForwardTrace trace;
    trace.conj_outputs.reserve(model.conj_layers.size());
    for (const auto& layer : model.conj_layers) trace.conj_outputs.push_back(layer_forward(layer, atoms));
    trace.disj_outputs.reserve(model.disj_layers.size());
    for (const auto& layer : model.disj_layers) trace.disj_outputs.push_back(layer_forward(layer, trace.conj_outputs));
    trace.z = softmax(trace.disj_outputs);
    return trace;
}

std::size_t predict(const DnfModel& model, std::span<const double> atoms) {
    const auto trace = forward(model, atoms);
    // Ties resolve to the lowest index; softmax is monotone so the raw
    // disjunction outputs give the same ordering without rounding ties.
    std::size_t best = 0;
    for (std::size_t l = 1; l < trace.disj_outputs.size(); ++l)
        if (trace.disj_outputs[l] > trace.disj_outputs[best]) best = l;
    return best;
}

double cross_entropy(std::span<const double> z, std::size_t label) {
    if (label >= z.size()) throw ValueError("label index " + std::to_string(label) + " out of range");
    return -std::log(z[label]);
}

Gradients Gradients::zeros_like(const DnfModel& model) {
    Gradients g;
    for (const auto& l : model.conj_layers) g.conj.emplace_back(l.weights.size(), 0.0);
    for (const auto& l : model.disj_layers) g.disj.emplace_back(l.weights.size(), 0.0);
    return g;
}

void Gradients::scale(double factor) {
    for (auto& row : conj)
        for (auto& v : row) v *= factor;
    for (auto& row : disj)
        for (auto& v : row) v *= factor;
    loss *= factor;
}

void accumulate_gradients(const DnfModel& model, std::span<const double> atoms, std::size_t label, Gradients& out) {
    if (label >= model.labels.size()) throw ValueError("label index out of range");
    const auto trace = forward(model, atoms);
    out.loss += cross_entropy(trace.z, label);

    std::vector<double> conj_grad(model.conj_layers.size(), 0.0);
    for (std::size_t l = 0; l < model.disj_layers.size(); ++l) {
        const double dz = trace.z[l] - (l == label ? 1.0 : 0.0);
        layer_backward(model.disj_layers[l], trace.conj_outputs, dz, out.disj[l], conj_grad);
    }
    for (std::size_t c = 0; c < model.conj_layers.size(); ++c) {
        if (conj_grad[c] == 0.0) continue;
        layer_backward(model.conj_layers[c], atoms, conj_grad[c], out.conj[c], {});
    }
}

Gradients gradients(const DnfModel& model, std::span<const double> atoms, std::size_t label) {
    auto g = Gradients::zeros_like(model);
    accumulate_gradients(model, atoms, label, g);
    return g;
}

}  // namespace factdnf
