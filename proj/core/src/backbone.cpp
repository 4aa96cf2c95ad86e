#include "protonesy/backbone.hpp"

#include <cmath>
#include <stdexcept>

#include "protonesy/rng.hpp"

namespace protonesy {

std::vector<int> MlpSpec::layer_widths() const {
    std::vector<int> w;
    w.push_back(input_dim);
    for (int h : hidden) w.push_back(h);
    w.push_back(output_dim);
    return w;
}

ParamGrads ParamGrads::zeros_like(const ParamState& params) {
    ParamGrads g;
    g.layers.resize(params.layers.size());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        g.layers[l].weights.assign(params.layers[l].weights.size(), 0.0);
        g.layers[l].bias.assign(params.layers[l].bias.size(), 0.0);
    }
    return g;
}

void ParamGrads::accumulate(const ParamGrads& other, double scale) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        for (std::size_t i = 0; i < layers[l].weights.size(); ++i)
            layers[l].weights[i] += scale * other.layers[l].weights[i];
        for (std::size_t i = 0; i < layers[l].bias.size(); ++i)
            layers[l].bias[i] += scale * other.layers[l].bias[i];
    }
}

void ParamGrads::scale(double factor) {
    for (auto& layer : layers) {
        for (double& v : layer.weights) v *= factor;
        for (double& v : layer.bias) v *= factor;
    }
}

ParamState init_params(const MlpSpec& spec) {
    if (spec.input_dim < 1 || spec.output_dim < 1)
        throw std::invalid_argument("init_params: dimensions must be >= 1");
    for (int h : spec.hidden)
        if (h < 1) throw std::invalid_argument("init_params: hidden widths must be >= 1");

    const std::vector<int> widths = spec.layer_widths();
    ParamState state;
    Rng rng(derive_seed(spec.init_seed, 0x6d6c7000ULL));
    state.layers.resize(static_cast<std::size_t>(spec.num_layers()));
    for (int l = 0; l < spec.num_layers(); ++l) {
        auto& layer = state.layers[static_cast<std::size_t>(l)];
        layer.in = widths[static_cast<std::size_t>(l)];
        layer.out = widths[static_cast<std::size_t>(l) + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.in));
        layer.weights.resize(static_cast<std::size_t>(layer.in) * static_cast<std::size_t>(layer.out));
        for (double& w : layer.weights) w = rng.uniform_real(-limit, limit);
        layer.bias.assign(static_cast<std::size_t>(layer.out), 0.0);
        layer.m_weights.assign(layer.weights.size(), 0.0);
        layer.v_weights.assign(layer.weights.size(), 0.0);
        layer.m_bias.assign(layer.bias.size(), 0.0);
        layer.v_bias.assign(layer.bias.size(), 0.0);
    }
    return state;
}

std::vector<double> forward(const MlpSpec& spec, const ParamState& params,
                            const std::vector<double>& x, ForwardTape* tape) {
    if (static_cast<int>(x.size()) != spec.input_dim)
        throw std::invalid_argument("forward: input dimension mismatch");
    if (tape) {
        tape->inputs.clear();
        tape->preactivations.clear();
    }

    std::vector<double> act = x;
    const int n_layers = spec.num_layers();
    for (int l = 0; l < n_layers; ++l) {
        const auto& layer = params.layers[static_cast<std::size_t>(l)];
        std::vector<double> pre(static_cast<std::size_t>(layer.out));
        for (int o = 0; o < layer.out; ++o) {
            double acc = layer.bias[static_cast<std::size_t>(o)];
            const double* row = layer.weights.data() + static_cast<std::size_t>(o) * layer.in;
            for (int i = 0; i < layer.in; ++i) acc += row[i] * act[static_cast<std::size_t>(i)];
            pre[static_cast<std::size_t>(o)] = acc;
        }
        if (tape) {
            tape->inputs.push_back(std::move(act));
            tape->preactivations.push_back(pre);
        }
        const bool is_output = l == n_layers - 1;
        if (is_output) {
            act = std::move(pre);
        } else {
            act.assign(pre.size(), 0.0);
            for (std::size_t i = 0; i < pre.size(); ++i) act[i] = pre[i] > 0.0 ? pre[i] : 0.0;
        }
    }
    return act;
}

ParamGrads backward(const MlpSpec& spec, const ParamState& params, const ForwardTape& tape,
                    const std::vector<double>& grad_z, std::vector<double>* grad_x) {
    const int n_layers = spec.num_layers();
    if (static_cast<int>(tape.inputs.size()) != n_layers ||
        static_cast<int>(tape.preactivations.size()) != n_layers)
        throw std::invalid_argument("backward: tape does not match the spec");
    if (static_cast<int>(grad_z.size()) != spec.output_dim)
        throw std::invalid_argument("backward: grad_z dimension mismatch");

    ParamGrads grads = ParamGrads::zeros_like(params);
    std::vector<double> delta = grad_z;  // gradient w.r.t. the layer's preactivation

    for (int l = n_layers - 1; l >= 0; --l) {
        const auto& layer = params.layers[static_cast<std::size_t>(l)];
        const auto& input = tape.inputs[static_cast<std::size_t>(l)];
        const bool is_output = l == n_layers - 1;
        if (!is_output) {
            const auto& pre = tape.preactivations[static_cast<std::size_t>(l)];
            for (std::size_t o = 0; o < delta.size(); ++o)
                if (pre[o] <= 0.0) delta[o] = 0.0;
        }

        auto& glayer = grads.layers[static_cast<std::size_t>(l)];
        for (int o = 0; o < layer.out; ++o) {
            const double d = delta[static_cast<std::size_t>(o)];
            glayer.bias[static_cast<std::size_t>(o)] += d;
            double* grow = glayer.weights.data() + static_cast<std::size_t>(o) * layer.in;
            for (int i = 0; i < layer.in; ++i) grow[i] += d * input[static_cast<std::size_t>(i)];
        }

        if (l > 0 || grad_x) {
            std::vector<double> prev(static_cast<std::size_t>(layer.in), 0.0);
            for (int o = 0; o < layer.out; ++o) {
                const double d = delta[static_cast<std::size_t>(o)];
                const double* row = layer.weights.data() + static_cast<std::size_t>(o) * layer.in;
                for (int i = 0; i < layer.in; ++i) prev[static_cast<std::size_t>(i)] += d * row[i];
            }
            delta = std::move(prev);
        }
    }
    if (grad_x) *grad_x = delta;
    return grads;
}

namespace {

void adam_update(std::vector<double>& p, std::vector<double>& m, std::vector<double>& v,
                 const std::vector<double>& g, const AdamConfig& cfg, double bc1, double bc2) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (cfg.weight_decay != 0.0) p[i] *= 1.0 - cfg.lr * cfg.weight_decay;
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        p[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
}

}  // namespace

void adam_step(ParamState& params, const ParamGrads& grads, const AdamConfig& cfg) {
    if (grads.layers.size() != params.layers.size())
        throw std::invalid_argument("adam_step: gradient shape mismatch");
    params.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(params.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(params.step));
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& layer = params.layers[l];
        const auto& glayer = grads.layers[l];
        if (glayer.weights.size() != layer.weights.size() || glayer.bias.size() != layer.bias.size())
            throw std::invalid_argument("adam_step: gradient shape mismatch");
        adam_update(layer.weights, layer.m_weights, layer.v_weights, glayer.weights, cfg, bc1, bc2);
        adam_update(layer.bias, layer.m_bias, layer.v_bias, glayer.bias, cfg, bc1, bc2);
    }
}

}  // namespace protonesy
