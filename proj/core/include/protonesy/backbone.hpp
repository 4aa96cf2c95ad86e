#pragma once

#include <cstdint>
#include <vector>

namespace protonesy {

// Feed-forward feature map: affine layers with rectifier on hidden layers,
// identity on the output. All arithmetic in double precision.
struct MlpSpec {
    int input_dim = 0;
    std::vector<int> hidden;  // widths of the hidden layers, possibly empty
    int output_dim = 0;
    std::uint64_t init_seed = 0;

    // input_dim, hidden..., output_dim
    std::vector<int> layer_widths() const;
    int num_layers() const { return static_cast<int>(hidden.size()) + 1; }
};

// Weights/biases plus first and second moment accumulators and the step
// counter of the adaptive-moment optimizer. weights[l] is (out x in),
// row-major.
struct ParamState {
    struct Layer {
        std::vector<double> weights;
        std::vector<double> bias;
        std::vector<double> m_weights, v_weights;
        std::vector<double> m_bias, v_bias;
        int in = 0, out = 0;
    };
    std::vector<Layer> layers;
    std::int64_t step = 0;
};

// Per-layer gradient buffers, same shapes as the parameters.
struct ParamGrads {
    struct Layer {
        std::vector<double> weights;
        std::vector<double> bias;
    };
    std::vector<Layer> layers;

    static ParamGrads zeros_like(const ParamState& params);
    void accumulate(const ParamGrads& other, double scale = 1.0);
    void scale(double factor);
};

// Cached activations from one forward pass; suffices for an exact backward.
struct ForwardTape {
    std::vector<std::vector<double>> inputs;           // per layer: the layer's input
    std::vector<std::vector<double>> preactivations;   // per layer: Wx + b
};

// Scaled uniform fan-in initialization, deterministic per spec.init_seed.
ParamState init_params(const MlpSpec& spec);

// Returns the output embedding; fills the tape when provided.
std::vector<double> forward(const MlpSpec& spec, const ParamState& params,
                            const std::vector<double>& x, ForwardTape* tape);

// Exact reverse-mode gradients; the rectifier subgradient at 0 is 0.
// grad_x is optional (pass nullptr to skip).
ParamGrads backward(const MlpSpec& spec, const ParamState& params, const ForwardTape& tape,
                    const std::vector<double>& grad_z, std::vector<double>* grad_x);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled, applied multiplicatively before the update
};

// Bias-corrected adaptive-moment update with decoupled weight decay.
void adam_step(ParamState& params, const ParamGrads& grads, const AdamConfig& cfg);

}  // namespace protonesy
