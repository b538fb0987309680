#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "miovs/dense.hpp"
#include "miovs/random.hpp"
#include "miovs/types.hpp"

namespace miovs {

/// Architecture of the operator network: two branch encoders (flux profile,
/// inlet scalars), one trunk encoder over plane coordinates, element-wise
/// fusion, and three affine output heads of width n_nodes.
struct ModelConfig {
    std::size_t n1 = 100;
    std::size_t n_scalar = 2;
    std::vector<std::size_t> branch_hidden{512, 512, 512};
    std::vector<std::size_t> trunk_hidden{300, 300, 300};
    std::size_t n_nodes = 1733;
    double dropout_rate = 0.2;

    void validate() const;
};

/// Input channels are min-max normalized to [0, 1] with fixed bounds stored
/// in the checkpoint (flux entries against [0, pmax_max], the inlet scalars
/// against their sampling intervals). Outputs are z-scored per quantity with
/// statistics computed on the training split.
struct NormalizationStats {
    std::array<double, 3> input_min{0.0, 536.4, 4.05};
    std::array<double, 3> input_max{660.0, 655.6, 4.95};
    std::array<double, 3> output_mean{0.0, 0.0, 0.0};
    std::array<double, 3> output_std{1.0, 1.0, 1.0};

    void validate() const;  // max > min per channel, std > 0 per quantity
};

/// Fixed input normalization derived from the sampling ranges.
NormalizationStats default_normalization(const SampleRanges& ranges);

struct DenseLayer {
    DenseMatrix weight;        // out x in
    std::vector<double> bias;  // out
};

/// All trainables plus normalization constants. Immutable during evaluation;
/// training owns a single mutable copy.
struct ModelParams {
    ModelConfig config;
    std::vector<DenseLayer> branch1;
    std::vector<DenseLayer> branch2;
    std::vector<DenseLayer> trunk;
    DenseLayer head_T;
    DenseLayer head_v;
    DenseLayer head_k;
    NormalizationStats norm;
};

/// Gradient of the loss with respect to every trainable, mirroring
/// ModelParams layer by layer.
struct Gradients {
    std::vector<DenseLayer> branch1;
    std::vector<DenseLayer> branch2;
    std::vector<DenseLayer> trunk;
    DenseLayer head_T;
    DenseLayer head_v;
    DenseLayer head_k;
};

/// Uniform fan-based weights (bound sqrt(6/(fan_in+fan_out))), zero biases.
/// Draw order: branch1 layers, branch2 layers, trunk layers, then the three
/// heads, weights row-major.
ModelParams init_params(const ModelConfig& config, RandomStream& stream);

Gradients make_gradients(const ModelConfig& config);

std::size_t count_params(const ModelConfig& config);

/// One contiguous trainable block (a weight matrix or a bias vector).
struct ParamSpan {
    double* data;
    std::size_t len;
    bool is_weight;
};

/// Trainable blocks in fixed declared order; the same order is used by the
/// optimizer state and the checkpoint format.
std::vector<ParamSpan> param_spans(ModelParams& params);
std::vector<ParamSpan> param_spans(Gradients& grads);
std::vector<ParamSpan> param_spans(const ModelParams& params);

/// Everything the backward pass needs to reproduce the forward computation:
/// per-layer pre-activations, post-activations (after relu and dropout) and
/// dropout masks, plus the fused vectors. Built only in training mode.
struct ForwardTrace {
    struct Layer {
        std::vector<double> pre;
        std::vector<double> post;
        std::vector<double> mask;  // empty in the no-dropout case is not used;
                                   // masks are always recorded in train mode
    };

    std::vector<double> p_norm;       // n1
    std::vector<double> s_norm;       // 2
    std::vector<Layer> b1;            // hidden layers of branch 1
    std::vector<Layer> b2;            // hidden layers of branch 2
    std::vector<double> phi1;         // N
    std::vector<double> phi2;         // N
    std::vector<double> coords_norm;  // N x 2 row-major
    std::vector<Layer> tr;            // trunk hidden layers, N x width row-major
    std::vector<double> psi;          // N
    std::vector<double> h;            // N, phi1 * phi2 * psi
    std::size_t n_nodes = 0;
};

/// Deterministic forward pass: dropout disabled, no trace. Returns the three
/// head outputs in normalized space.
FieldSnapshot forward_eval(const ModelParams& params, const InputSample& sample,
                           const CenterPlaneMesh& mesh);

/// Training forward pass: inverted dropout after every hidden relu in both
/// branches and the trunk, masks drawn from `stream` (branch1 layers, then
/// branch2, then trunk layers node-major). Fills `trace`.
FieldSnapshot forward_train(const ModelParams& params, const InputSample& sample,
                            const CenterPlaneMesh& mesh, RandomStream& stream,
                            ForwardTrace& trace);

/// Exact reverse-mode gradients through the traced forward pass, given
/// d(loss)/d(head output) for the three quantities. The product rule through
/// h = phi1 * phi2 * psi carries the other two factors into each branch.
void backward_into(const ModelParams& params, const ForwardTrace& trace,
                   const std::vector<double>& grad_T,
                   const std::vector<double>& grad_v,
                   const std::vector<double>& grad_k, Gradients& out);

Gradients backward(const ModelParams& params, const ForwardTrace& trace,
                   const std::vector<double>& grad_T,
                   const std::vector<double>& grad_v,
                   const std::vector<double>& grad_k);

/// Eval forward followed by per-quantity denormalization; returns fields in
/// physical units (K, m/s, m^2/s^2).
FieldSnapshot predict(const ModelParams& params, const InputSample& sample,
                      const CenterPlaneMesh& mesh);

/// y_norm = (y - mean) / std per quantity.
FieldSnapshot normalize_fields(const FieldSnapshot& fields,
                               const NormalizationStats& norm);

/// Inverse of normalize_fields.
FieldSnapshot denormalize_fields(const FieldSnapshot& fields,
                                 const NormalizationStats& norm);

}  // namespace miovs
