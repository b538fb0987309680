#include "miovs/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "miovs/kernels.hpp"
#include "miovs/numerics.hpp"
#include "miovs/parallel.hpp"

namespace miovs {

namespace {

std::vector<std::size_t> chain_dims(std::size_t in,
                                    const std::vector<std::size_t>& hidden,
                                    std::size_t out) {
    std::vector<std::size_t> dims;
    dims.reserve(hidden.size() + 2);
    dims.push_back(in);
    for (std::size_t w : hidden) dims.push_back(w);
    dims.push_back(out);
    return dims;
}

void check_finite(const std::vector<double>& v, const std::string& where) {
    if (!kernels::active().all_finite(v.data(), v.size())) {
        throw std::runtime_error("non-finite activation in " + where);
    }
}

void add_bias_rows(double* data, std::size_t n_rows, const std::vector<double>& bias) {
    const auto& k = kernels::active();
    const std::size_t w = bias.size();
    for (std::size_t i = 0; i < n_rows; ++i) {
        k.axpy(1.0, bias.data(), data + i * w, w);
    }
}

}  // namespace

void ModelConfig::validate() const {
    if (n1 < 1 || n_nodes < 1) {
        throw std::runtime_error("model config: n1 and n_nodes must be >= 1");
    }
    if (n_scalar != 2) {
        throw std::runtime_error(
            "model config: branch 2 encodes the two inlet scalars, n_scalar must be 2");
    }
    for (std::size_t w : branch_hidden) {
        if (w < 1) throw std::runtime_error("model config: zero-width branch layer");
    }
    for (std::size_t w : trunk_hidden) {
        if (w < 1) throw std::runtime_error("model config: zero-width trunk layer");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw std::runtime_error("model config: dropout rate must be in [0, 1)");
    }
}

void NormalizationStats::validate() const {
    for (int c = 0; c < 3; ++c) {
        if (!(input_max[c] > input_min[c])) {
            throw std::runtime_error(
                "normalization: input max must exceed min for channel " +
                std::to_string(c));
        }
        if (!(output_std[c] > 0.0)) {
            throw std::runtime_error(
                "normalization: output std must be positive for quantity " +
                std::to_string(c));
        }
    }
}

NormalizationStats default_normalization(const SampleRanges& ranges) {
    NormalizationStats n;
    // Flux entries range over (0, pmax_max]; the scalars over their intervals.
    n.input_min = {0.0, ranges.tin_min, ranges.vin_min};
    n.input_max = {ranges.pmax_max, ranges.tin_max, ranges.vin_max};
    return n;
}

ModelParams init_params(const ModelConfig& config, RandomStream& stream) {
    config.validate();
    ModelParams p;
    p.config = config;

    auto build_stack = [&stream](const std::vector<std::size_t>& dims) {
        std::vector<DenseLayer> layers;
        layers.reserve(dims.size() - 1);
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            DenseLayer layer;
            layer.weight = init_dense(stream, dims[l + 1], dims[l]);
            layer.bias.assign(dims[l + 1], 0.0);
            layers.push_back(std::move(layer));
        }
        return layers;
    };

    p.branch1 = build_stack(chain_dims(config.n1, config.branch_hidden, config.n_nodes));
    p.branch2 = build_stack(chain_dims(config.n_scalar, config.branch_hidden, config.n_nodes));
    p.trunk = build_stack(chain_dims(2, config.trunk_hidden, 1));
    for (DenseLayer* head : {&p.head_T, &p.head_v, &p.head_k}) {
        head->weight = init_dense(stream, config.n_nodes, config.n_nodes);
        head->bias.assign(config.n_nodes, 0.0);
    }
    return p;
}

Gradients make_gradients(const ModelConfig& config) {
    Gradients g;
    auto build_stack = [](const std::vector<std::size_t>& dims) {
        std::vector<DenseLayer> layers;
        layers.reserve(dims.size() - 1);
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            DenseLayer layer;
            layer.weight = DenseMatrix(dims[l + 1], dims[l]);
            layer.bias.assign(dims[l + 1], 0.0);
            layers.push_back(std::move(layer));
        }
        return layers;
    };
    g.branch1 = build_stack(chain_dims(config.n1, config.branch_hidden, config.n_nodes));
    g.branch2 = build_stack(chain_dims(config.n_scalar, config.branch_hidden, config.n_nodes));
    g.trunk = build_stack(chain_dims(2, config.trunk_hidden, 1));
    for (DenseLayer* head : {&g.head_T, &g.head_v, &g.head_k}) {
        head->weight = DenseMatrix(config.n_nodes, config.n_nodes);
        head->bias.assign(config.n_nodes, 0.0);
    }
    return g;
}

std::size_t count_params(const ModelConfig& config) {
    config.validate();
    auto stack_count = [](const std::vector<std::size_t>& dims) {
        std::size_t total = 0;
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            total += dims[l] * dims[l + 1] + dims[l + 1];
        }
        return total;
    };
    std::size_t total = 0;
    total += stack_count(chain_dims(config.n1, config.branch_hidden, config.n_nodes));
    total += stack_count(chain_dims(config.n_scalar, config.branch_hidden, config.n_nodes));
    total += stack_count(chain_dims(2, config.trunk_hidden, 1));
    total += 3 * (config.n_nodes * config.n_nodes + config.n_nodes);
    return total;
}

namespace {

template <typename Model>
auto spans_impl(Model& m) {
    using Span = ParamSpan;
    std::vector<Span> spans;
    auto push_layer = [&spans](auto& layer) {
        spans.push_back(Span{const_cast<double*>(layer.weight.data.data()),
                             layer.weight.data.size(), true});
        spans.push_back(Span{const_cast<double*>(layer.bias.data()),
                             layer.bias.size(), false});
    };
    for (auto& l : m.branch1) push_layer(l);
    for (auto& l : m.branch2) push_layer(l);
    for (auto& l : m.trunk) push_layer(l);
    push_layer(m.head_T);
    push_layer(m.head_v);
    push_layer(m.head_k);
    return spans;
}

}  // namespace

std::vector<ParamSpan> param_spans(ModelParams& params) { return spans_impl(params); }
std::vector<ParamSpan> param_spans(Gradients& grads) { return spans_impl(grads); }
std::vector<ParamSpan> param_spans(const ModelParams& params) {
    return spans_impl(params);
}

// ---------------------------------------------------------------------------
// forward
// ---------------------------------------------------------------------------

namespace {

struct ForwardContext {
    const ModelParams& params;
    const InputSample& sample;
    const CenterPlaneMesh& mesh;
    RandomStream* stream;  // null in eval mode
    ForwardTrace* trace;   // null in eval mode
};

std::vector<double> normalize_profile(const std::vector<double>& p_rod,
                                      const NormalizationStats& norm) {
    const double lo = norm.input_min[0];
    const double scale = 1.0 / (norm.input_max[0] - lo);
    std::vector<double> out(p_rod.size());
    for (std::size_t i = 0; i < p_rod.size(); ++i) out[i] = (p_rod[i] - lo) * scale;
    return out;
}

std::vector<double> normalize_scalars(double t_in, double v_in,
                                      const NormalizationStats& norm) {
    return {(t_in - norm.input_min[1]) / (norm.input_max[1] - norm.input_min[1]),
            (v_in - norm.input_min[2]) / (norm.input_max[2] - norm.input_min[2])};
}

std::vector<double> normalize_coords(const CenterPlaneMesh& mesh) {
    if (!(mesh.box_hi > mesh.box_lo)) {
        throw std::runtime_error("mesh bounding box is degenerate");
    }
    const double scale = 1.0 / (mesh.box_hi - mesh.box_lo);
    const std::size_t n = mesh.size();
    std::vector<double> out(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        out[2 * i] = (mesh.x[i] - mesh.box_lo) * scale;
        out[2 * i + 1] = (mesh.y[i] - mesh.box_lo) * scale;
    }
    return out;
}

/// Branch forward: hidden layers relu (+ dropout in train mode), linear
/// output layer.
std::vector<double> branch_forward(const std::vector<DenseLayer>& layers,
                                   const std::vector<double>& input, double rate,
                                   RandomStream* stream,
                                   std::vector<ForwardTrace::Layer>* tl,
                                   const std::string& name) {
    const auto& k = kernels::active();
    std::vector<double> a = input;
    if (tl) tl->resize(layers.size() - 1);
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
        std::vector<double> pre = matvec(layers[l].weight, a);
        k.axpy(1.0, layers[l].bias.data(), pre.data(), pre.size());
        check_finite(pre, name + " layer " + std::to_string(l));
        std::vector<double> post(pre.size());
        k.relu(pre.data(), post.data(), pre.size());
        if (stream) {
            std::vector<double> mask = dropout_mask(*stream, post.size(), rate);
            k.mul(mask.data(), post.data(), post.size());
            (*tl)[l].mask = std::move(mask);
        }
        if (tl) {
            (*tl)[l].pre = std::move(pre);
            (*tl)[l].post = post;
        }
        a = std::move(post);
    }
    std::vector<double> out = matvec(layers.back().weight, a);
    k.axpy(1.0, layers.back().bias.data(), out.data(), out.size());
    check_finite(out, name + " output");
    return out;
}

void check_finite_raw(const double* data, std::size_t len,
                      const std::string& where) {
    if (!kernels::active().all_finite(data, len)) {
        throw std::runtime_error("non-finite activation in " + where);
    }
}

/// Trunk forward, batched over the n mesh nodes (activations are n x width,
/// row-major). Equivalent to evaluating the trunk once per node. In training
/// mode the per-layer buffers live in the trace (reused across steps); in
/// eval mode two thread-local scratch buffers are ping-ponged so repeated
/// inference does not churn the allocator.
std::vector<double> trunk_forward(const std::vector<DenseLayer>& layers,
                                  const std::vector<double>& coords, std::size_t n,
                                  double rate, RandomStream* stream,
                                  std::vector<ForwardTrace::Layer>* tl) {
    const auto& k = kernels::active();
    thread_local std::vector<double> scratch_a;
    thread_local std::vector<double> scratch_b;

    const double* cur = coords.data();
    std::size_t cur_w = 2;
    if (tl) tl->resize(layers.size() - 1);
    bool use_a = true;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
        const DenseMatrix& w = layers[l].weight;
        const std::size_t len = n * w.rows;
        std::vector<double>& pre =
            tl ? (*tl)[l].pre : (use_a ? scratch_a : scratch_b);
        pre.resize(len);
        gemm_nt(cur, w.data.data(), pre.data(), n, w.rows, cur_w, true);
        add_bias_rows(pre.data(), n, layers[l].bias);
        check_finite_raw(pre.data(), len, "trunk layer " + std::to_string(l));
        if (tl) {
            ForwardTrace::Layer& layer = (*tl)[l];
            layer.post.resize(len);
            k.relu(pre.data(), layer.post.data(), len);
            layer.mask.resize(len);
            fill_dropout_mask(*stream, layer.mask.data(), len, rate);
            k.mul(layer.mask.data(), layer.post.data(), len);
            cur = layer.post.data();
        } else {
            k.relu(pre.data(), pre.data(), len);
            cur = pre.data();
            use_a = !use_a;
        }
        cur_w = w.rows;
    }
    const DenseMatrix& w = layers.back().weight;  // 1 x cur_w
    std::vector<double> psi(n);
    gemm_nt(cur, w.data.data(), psi.data(), n, 1, cur_w, true);
    const double b = layers.back().bias[0];
    for (double& v : psi) v += b;
    check_finite(psi, "trunk output");
    return psi;
}

void validate_shapes(const ForwardContext& ctx) {
    const ModelConfig& cfg = ctx.params.config;
    cfg.validate();
    ctx.params.norm.validate();
    if (ctx.sample.p_rod.size() != cfg.n1) {
        throw std::runtime_error("forward shape mismatch: sample has " +
                                 std::to_string(ctx.sample.p_rod.size()) +
                                 " flux sensors, model expects " +
                                 std::to_string(cfg.n1));
    }
    if (ctx.mesh.size() != cfg.n_nodes) {
        throw std::runtime_error("forward shape mismatch: mesh has " +
                                 std::to_string(ctx.mesh.size()) +
                                 " nodes, model expects " +
                                 std::to_string(cfg.n_nodes));
    }
}

FieldSnapshot run_forward(const ForwardContext& ctx) {
    validate_shapes(ctx);
    ctx.sample.validate();
    const ModelParams& p = ctx.params;
    const std::size_t n = p.config.n_nodes;
    const double rate = p.config.dropout_rate;
    const auto& k = kernels::active();

    std::vector<double> p_norm = normalize_profile(ctx.sample.p_rod, p.norm);
    std::vector<double> s_norm =
        normalize_scalars(ctx.sample.t_in, ctx.sample.v_in, p.norm);
    std::vector<double> coords = normalize_coords(ctx.mesh);

    ForwardTrace* t = ctx.trace;
    std::vector<double> phi1 =
        branch_forward(p.branch1, p_norm, rate, ctx.stream, t ? &t->b1 : nullptr,
                       "branch1");
    std::vector<double> phi2 =
        branch_forward(p.branch2, s_norm, rate, ctx.stream, t ? &t->b2 : nullptr,
                       "branch2");
    std::vector<double> psi =
        trunk_forward(p.trunk, coords, n, rate, ctx.stream, t ? &t->tr : nullptr);

    std::vector<double> h(n);
    k.mul3(phi1.data(), phi2.data(), psi.data(), h.data(), n);

    FieldSnapshot out;
    out.T.resize(n);
    out.v.resize(n);
    out.k.resize(n);
    matvec_into(p.head_T.weight, h.data(), out.T.data(), true);
    k.axpy(1.0, p.head_T.bias.data(), out.T.data(), n);
    matvec_into(p.head_v.weight, h.data(), out.v.data(), true);
    k.axpy(1.0, p.head_v.bias.data(), out.v.data(), n);
    matvec_into(p.head_k.weight, h.data(), out.k.data(), true);
    k.axpy(1.0, p.head_k.bias.data(), out.k.data(), n);
    check_finite(out.T, "head_T");
    check_finite(out.v, "head_v");
    check_finite(out.k, "head_k");

    if (t) {
        t->p_norm = std::move(p_norm);
        t->s_norm = std::move(s_norm);
        t->coords_norm = std::move(coords);
        t->phi1 = std::move(phi1);
        t->phi2 = std::move(phi2);
        t->psi = std::move(psi);
        t->h = std::move(h);
        t->n_nodes = n;
    }
    return out;
}

}  // namespace

FieldSnapshot forward_eval(const ModelParams& params, const InputSample& sample,
                           const CenterPlaneMesh& mesh) {
    return run_forward({params, sample, mesh, nullptr, nullptr});
}

FieldSnapshot forward_train(const ModelParams& params, const InputSample& sample,
                            const CenterPlaneMesh& mesh, RandomStream& stream,
                            ForwardTrace& trace) {
    return run_forward({params, sample, mesh, &stream, &trace});
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

namespace {

/// Reverse pass through one branch stack. `input0` is the normalized branch
/// input, `dout` the gradient at the branch output.
void branch_backward(const std::vector<DenseLayer>& layers,
                     const std::vector<ForwardTrace::Layer>& tl,
                     const std::vector<double>& input0,
                     const std::vector<double>& dout,
                     std::vector<DenseLayer>& grad) {
    const auto& k = kernels::active();
    const std::size_t last = layers.size() - 1;

    const std::vector<double>& last_in = last == 0 ? input0 : tl[last - 1].post;
    DenseMatrix& gw = grad[last].weight;
    for (std::size_t i = 0; i < gw.rows; ++i) {
        k.axpy(dout[i], last_in.data(), gw.row(i), gw.cols);
    }
    k.axpy(1.0, dout.data(), grad[last].bias.data(), dout.size());

    std::vector<double> d = matvec_t(layers[last].weight, dout);
    for (std::size_t l = last; l-- > 0;) {
        // post = relu(pre) * mask, so dpre = d * mask * [pre > 0]
        std::vector<double> dpre(d.size());
        k.relu_grad(tl[l].pre.data(), d.data(), dpre.data(), d.size());
        k.mul(tl[l].mask.data(), dpre.data(), dpre.size());

        const std::vector<double>& in = l == 0 ? input0 : tl[l - 1].post;
        DenseMatrix& gwl = grad[l].weight;
        for (std::size_t i = 0; i < gwl.rows; ++i) {
            k.axpy(dpre[i], in.data(), gwl.row(i), gwl.cols);
        }
        k.axpy(1.0, dpre.data(), grad[l].bias.data(), dpre.size());
        d = matvec_t(layers[l].weight, dpre);
    }
}

/// Reverse pass through the batched trunk.
void trunk_backward(const std::vector<DenseLayer>& layers,
                    const std::vector<ForwardTrace::Layer>& tl,
                    const std::vector<double>& coords, std::size_t n,
                    const std::vector<double>& dpsi,
                    std::vector<DenseLayer>& grad) {
    const auto& k = kernels::active();
    const std::size_t last = layers.size() - 1;
    const std::size_t last_w = layers[last].weight.cols;

    const std::vector<double>& last_in = last == 0 ? coords : tl[last - 1].post;
    // dW_last[0][:] = sum_i dpsi[i] * last_in[i][:]
    for (std::size_t i = 0; i < n; ++i) {
        k.axpy(dpsi[i], last_in.data() + i * last_w, grad[last].weight.row(0),
               last_w);
    }
    double db = 0.0;
    for (std::size_t i = 0; i < n; ++i) db += dpsi[i];
    grad[last].bias[0] += db;

    // d = dpsi outer w_last, shape n x last_w
    std::vector<double> d(n * last_w, 0.0);
    gemm_nn_acc(dpsi.data(), layers[last].weight.data.data(), d.data(), n,
                last_w, 1, true);

    for (std::size_t l = last; l-- > 0;) {
        const std::size_t w_out = layers[l].weight.rows;
        const std::size_t w_in = layers[l].weight.cols;
        std::vector<double> dpre(n * w_out);
        k.relu_grad(tl[l].pre.data(), d.data(), dpre.data(), dpre.size());
        k.mul(tl[l].mask.data(), dpre.data(), dpre.size());

        const std::vector<double>& in = l == 0 ? coords : tl[l - 1].post;
        gemm_tn_acc(dpre.data(), in.data(), grad[l].weight.data.data(), n, w_in,
                    w_out, true);
        for (std::size_t i = 0; i < n; ++i) {
            k.axpy(1.0, dpre.data() + i * w_out, grad[l].bias.data(), w_out);
        }
        if (l > 0) {
            d.assign(n * w_in, 0.0);
            gemm_nn_acc(dpre.data(), layers[l].weight.data.data(), d.data(), n,
                        w_in, w_out, true);
        }
    }
}

}  // namespace

void backward_into(const ModelParams& params, const ForwardTrace& trace,
                   const std::vector<double>& grad_T,
                   const std::vector<double>& grad_v,
                   const std::vector<double>& grad_k, Gradients& out) {
    const std::size_t n = params.config.n_nodes;
    if (trace.n_nodes != n || trace.phi1.size() != n) {
        throw std::runtime_error("backward: trace does not match model shape");
    }
    if (grad_T.size() != n || grad_v.size() != n || grad_k.size() != n) {
        throw std::runtime_error("backward: output gradient length mismatch");
    }
    const auto& k = kernels::active();

    for (ParamSpan s : param_spans(out)) {
        std::fill(s.data, s.data + s.len, 0.0);
    }

    // Heads: y_q = W_q h + b_q.
    std::vector<double> dh(n, 0.0);
    struct HeadRef {
        const DenseLayer* layer;
        DenseLayer* grad;
        const std::vector<double>* g;
    };
    const HeadRef heads[3] = {{&params.head_T, &out.head_T, &grad_T},
                              {&params.head_v, &out.head_v, &grad_v},
                              {&params.head_k, &out.head_k, &grad_k}};
    for (const HeadRef& head : heads) {
        const std::vector<double>& g = *head.g;
        DenseMatrix& gw = head.grad->weight;
        for (std::size_t i = 0; i < n; ++i) {
            k.axpy(g[i], trace.h.data(), gw.row(i), n);
        }
        k.axpy(1.0, g.data(), head.grad->bias.data(), n);
        std::vector<double> contrib = matvec_t(head.layer->weight, g);
        k.axpy(1.0, contrib.data(), dh.data(), n);
    }

    // Product rule through h = phi1 * phi2 * psi.
    std::vector<double> dphi1(n), dphi2(n), dpsi(n);
    k.mul3(dh.data(), trace.phi2.data(), trace.psi.data(), dphi1.data(), n);
    k.mul3(dh.data(), trace.phi1.data(), trace.psi.data(), dphi2.data(), n);
    k.mul3(dh.data(), trace.phi1.data(), trace.phi2.data(), dpsi.data(), n);

    branch_backward(params.branch1, trace.b1, trace.p_norm, dphi1, out.branch1);
    branch_backward(params.branch2, trace.b2, trace.s_norm, dphi2, out.branch2);
    trunk_backward(params.trunk, trace.tr, trace.coords_norm, n, dpsi, out.trunk);
}

Gradients backward(const ModelParams& params, const ForwardTrace& trace,
                   const std::vector<double>& grad_T,
                   const std::vector<double>& grad_v,
                   const std::vector<double>& grad_k) {
    Gradients g = make_gradients(params.config);
    backward_into(params, trace, grad_T, grad_v, grad_k, g);
    return g;
}

// ---------------------------------------------------------------------------
// prediction and normalization
// ---------------------------------------------------------------------------

FieldSnapshot normalize_fields(const FieldSnapshot& fields,
                               const NormalizationStats& norm) {
    FieldSnapshot out;
    const std::vector<double>* src[3] = {&fields.T, &fields.v, &fields.k};
    std::vector<double>* dst[3] = {&out.T, &out.v, &out.k};
    for (int q = 0; q < 3; ++q) {
        const double mean = norm.output_mean[q];
        const double inv_std = 1.0 / norm.output_std[q];
        dst[q]->resize(src[q]->size());
        for (std::size_t i = 0; i < src[q]->size(); ++i) {
            (*dst[q])[i] = ((*src[q])[i] - mean) * inv_std;
        }
    }
    return out;
}

FieldSnapshot denormalize_fields(const FieldSnapshot& fields,
                                 const NormalizationStats& norm) {
    FieldSnapshot out;
    const std::vector<double>* src[3] = {&fields.T, &fields.v, &fields.k};
    std::vector<double>* dst[3] = {&out.T, &out.v, &out.k};
    for (int q = 0; q < 3; ++q) {
        const double mean = norm.output_mean[q];
        const double std = norm.output_std[q];
        dst[q]->resize(src[q]->size());
        for (std::size_t i = 0; i < src[q]->size(); ++i) {
            (*dst[q])[i] = (*src[q])[i] * std + mean;
        }
    }
    return out;
}

FieldSnapshot predict(const ModelParams& params, const InputSample& sample,
                      const CenterPlaneMesh& mesh) {
    return denormalize_fields(forward_eval(params, sample, mesh), params.norm);
}

}  // namespace miovs
