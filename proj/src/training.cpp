#include "miovs/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "miovs/kernels.hpp"

namespace miovs {

namespace {

// Stream derivation tags; children of the run seed, documented here once.
constexpr std::uint64_t kFoldPartitionTag = 1000;
constexpr std::uint64_t kFoldSeedTag = 2000;        // + fold index
constexpr std::uint64_t kFinalSplitTag = 3000;
constexpr std::uint64_t kFinalSeedTag = 3001;
constexpr std::uint64_t kInitTag = 0;
constexpr std::uint64_t kDropoutTag = 1;
constexpr std::uint64_t kShuffleTag = 2;

double mse(const std::vector<double>& pred, const std::vector<double>& target) {
    const std::size_t n = target.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = target[i] - pred[i];
        sum += d * d;
    }
    return sum / static_cast<double>(n);
}

void shuffle_indices(std::vector<std::size_t>& idx, RandomStream& stream) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(stream.next_below(i));
        std::swap(idx[i - 1], idx[j]);
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) {
        throw std::runtime_error("train config: learning rate must be > 0");
    }
    if (!(l2_lambda >= 0.0)) {
        throw std::runtime_error("train config: l2 lambda must be >= 0");
    }
    if (patience < 1) {
        throw std::runtime_error("train config: patience must be >= 1");
    }
    if (k_folds < 2) {
        throw std::runtime_error("train config: k_folds must be >= 2");
    }
    if (batch_size != 1) {
        throw std::runtime_error(
            "train config: the training protocol is per-sample updates, batch_size must be 1");
    }
    if (max_epochs < 1) {
        throw std::runtime_error("train config: max_epochs must be >= 1");
    }
}

AdamState make_adam_state(const ModelConfig& config) {
    AdamState s;
    s.m = make_gradients(config);
    s.v = make_gradients(config);
    return s;
}

LossReport composite_loss(const FieldSnapshot& pred_norm,
                          const FieldSnapshot& target_norm,
                          const ModelParams& params, double lambda) {
    const std::size_t n = target_norm.T.size();
    if (pred_norm.T.size() != n || pred_norm.v.size() != n ||
        pred_norm.k.size() != n || target_norm.v.size() != n ||
        target_norm.k.size() != n) {
        throw std::runtime_error("composite loss: prediction/target length mismatch");
    }
    LossReport r;
    r.mse_T = mse(pred_norm.T, target_norm.T);
    r.mse_v = mse(pred_norm.v, target_norm.v);
    r.mse_k = mse(pred_norm.k, target_norm.k);
    if (lambda != 0.0) {
        const auto& kr = kernels::active();
        double wsum = 0.0;
        for (ParamSpan s : param_spans(params)) {
            if (s.is_weight) wsum += kr.dot(s.data, s.data, s.len);
        }
        r.reg_term = lambda * wsum;
    }
    r.composite = ((r.mse_T + r.mse_v) + r.mse_k) + r.reg_term;
    return r;
}

double relative_l2(const std::vector<double>& pred,
                   const std::vector<double>& target) {
    if (pred.size() != target.size()) {
        throw std::runtime_error("relative_l2: length mismatch");
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double d = target[i] - pred[i];
        num += d * d;
        den += target[i] * target[i];
    }
    if (den == 0.0) {
        throw std::runtime_error("relative_l2: target norm is zero");
    }
    return 100.0 * std::sqrt(num) / std::sqrt(den);
}

void adam_step(AdamState& state, ModelParams& params, const Gradients& grads,
               double learning_rate) {
    auto p_spans = param_spans(params);
    auto g_spans = param_spans(const_cast<Gradients&>(grads));
    auto m_spans = param_spans(state.m);
    auto v_spans = param_spans(state.v);
    if (p_spans.size() != g_spans.size()) {
        throw std::runtime_error("adam: gradient shape mismatch");
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    const auto& k = kernels::active();
    for (std::size_t s = 0; s < p_spans.size(); ++s) {
        if (p_spans[s].len != g_spans[s].len || p_spans[s].len != m_spans[s].len) {
            throw std::runtime_error("adam: span shape mismatch");
        }
        k.adam_update(p_spans[s].data, m_spans[s].data, v_spans[s].data,
                      g_spans[s].data, p_spans[s].len, learning_rate, state.beta1,
                      state.beta2, state.eps, bc1, bc2);
    }
}

QuantitySummary summarize(const std::vector<double>& values) {
    if (values.empty()) {
        throw std::runtime_error("summary of an empty metric list");
    }
    QuantitySummary s;
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double var = 0.0;
    for (double v : values) var += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(var / n);

    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&sorted](double p) {
        const double pos = p * static_cast<double>(sorted.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        if (lo + 1 >= sorted.size()) return sorted.back();
        const double frac = pos - static_cast<double>(lo);
        return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
    };
    s.q25 = quantile(0.25);
    s.q50 = quantile(0.50);
    s.q75 = quantile(0.75);
    return s;
}

NormalizationStats compute_normalization(const Dataset& data,
                                         const std::vector<std::size_t>& train_idx) {
    if (train_idx.empty()) {
        throw std::runtime_error("normalization needs a non-empty training split");
    }
    NormalizationStats norm = default_normalization(data.ranges);
    const std::size_t n_nodes = data.mesh.size();
    const double count = static_cast<double>(train_idx.size() * n_nodes);
    for (int q = 0; q < 3; ++q) {
        double sum = 0.0;
        for (std::size_t idx : train_idx) {
            const std::vector<double>& f =
                q == 0 ? data.fields[idx].T : q == 1 ? data.fields[idx].v
                                                     : data.fields[idx].k;
            sum = std::accumulate(f.begin(), f.end(), sum);
        }
        const double mean = sum / count;
        double var = 0.0;
        for (std::size_t idx : train_idx) {
            const std::vector<double>& f =
                q == 0 ? data.fields[idx].T : q == 1 ? data.fields[idx].v
                                                     : data.fields[idx].k;
            for (double x : f) var += (x - mean) * (x - mean);
        }
        const double std = std::sqrt(var / count);
        norm.output_mean[q] = mean;
        // a constant quantity has zero spread up to rounding noise; fall back
        // to unit scale instead of amplifying that noise
        const double floor = 1e-12 * std::max(1.0, std::abs(mean));
        norm.output_std[q] = std > floor ? std : 1.0;
    }
    return norm;
}

std::vector<std::vector<std::size_t>> partition_folds(std::size_t n,
                                                      std::size_t k,
                                                      RandomStream& stream) {
    if (k < 2 || n < k) {
        throw std::runtime_error("fold partition needs n >= k >= 2");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle_indices(order, stream);

    std::vector<std::vector<std::size_t>> folds(k);
    const std::size_t base = n / k;
    const std::size_t extra = n % k;
    std::size_t at = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t len = base + (f < extra ? 1 : 0);
        folds[f].assign(order.begin() + at, order.begin() + at + len);
        at += len;
    }
    return folds;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_test(
    std::size_t n, double train_fraction, std::uint64_t seed) {
    if (n < 2 || !(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::runtime_error("train/test split needs n >= 2 and a fraction in (0, 1)");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    RandomStream stream(seed);
    shuffle_indices(order, stream);
    const std::size_t n_train =
        static_cast<std::size_t>(static_cast<double>(n) * train_fraction);
    std::vector<std::size_t> train(order.begin(), order.begin() + n_train);
    std::vector<std::size_t> test(order.begin() + n_train, order.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {std::move(train), std::move(test)};
}

TrainResult train_fold(const Dataset& data,
                       const std::vector<std::size_t>& train_idx,
                       const std::vector<std::size_t>& val_idx,
                       const TrainConfig& config, const ModelConfig& model_config,
                       std::uint64_t fold_seed) {
    config.validate();
    if (train_idx.empty() || val_idx.empty()) {
        throw std::runtime_error("train_fold: empty training or validation set");
    }
    if (data.mesh.size() != model_config.n_nodes) {
        throw std::runtime_error("train_fold: dataset mesh does not match model n_nodes");
    }

    const NormalizationStats norm = compute_normalization(data, train_idx);
    const std::size_t n_nodes = data.mesh.size();

    // Normalized targets, aligned with the index lists.
    std::vector<FieldSnapshot> train_targets(train_idx.size());
    for (std::size_t i = 0; i < train_idx.size(); ++i) {
        train_targets[i] = normalize_fields(data.fields[train_idx[i]], norm);
    }
    std::vector<FieldSnapshot> val_targets(val_idx.size());
    for (std::size_t i = 0; i < val_idx.size(); ++i) {
        val_targets[i] = normalize_fields(data.fields[val_idx[i]], norm);
    }

    const RandomStream root(fold_seed);
    RandomStream init_stream = root.derive(kInitTag);
    RandomStream dropout_stream = root.derive(kDropoutTag);
    RandomStream shuffle_stream = root.derive(kShuffleTag);

    ModelParams params = init_params(model_config, init_stream);
    params.norm = norm;
    AdamState adam = make_adam_state(model_config);
    Gradients grads = make_gradients(model_config);
    ForwardTrace trace;

    std::vector<double> grad_T(n_nodes), grad_v(n_nodes), grad_k(n_nodes);
    std::vector<std::size_t> order(train_idx.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    ModelParams best_params = params;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t epochs_without_improvement = 0;
    std::size_t steps = 0;
    const auto& kr = kernels::active();
    const double out_scale = 2.0 / static_cast<double>(n_nodes);

    std::size_t epoch = 0;
    std::string stop_reason = "max_epochs";
    while (epoch < config.max_epochs) {
        ++epoch;
        shuffle_indices(order, shuffle_stream);
        for (std::size_t pos : order) {
            const std::size_t idx = train_idx[pos];
            const FieldSnapshot pred = forward_train(
                params, data.samples[idx], data.mesh, dropout_stream, trace);
            const FieldSnapshot& target = train_targets[pos];
            for (std::size_t i = 0; i < n_nodes; ++i) {
                grad_T[i] = out_scale * (pred.T[i] - target.T[i]);
                grad_v[i] = out_scale * (pred.v[i] - target.v[i]);
                grad_k[i] = out_scale * (pred.k[i] - target.k[i]);
            }
            backward_into(params, trace, grad_T, grad_v, grad_k, grads);
            if (config.l2_lambda != 0.0) {
                // d(lambda * sum w^2)/dw = 2 * lambda * w, weights only
                auto ps = param_spans(params);
                auto gs = param_spans(grads);
                for (std::size_t s = 0; s < ps.size(); ++s) {
                    if (ps[s].is_weight) {
                        kr.axpy(2.0 * config.l2_lambda, ps[s].data, gs[s].data,
                                ps[s].len);
                    }
                }
            }
            adam_step(adam, params, grads, config.learning_rate);
            ++steps;
        }

        double val_loss = 0.0;
        for (std::size_t i = 0; i < val_idx.size(); ++i) {
            const FieldSnapshot pred =
                forward_eval(params, data.samples[val_idx[i]], data.mesh);
            val_loss +=
                composite_loss(pred, val_targets[i], params, config.l2_lambda)
                    .composite;
        }
        val_loss /= static_cast<double>(val_idx.size());
        result.val_history.push_back(val_loss);

        if (val_loss < best_val) {
            best_val = val_loss;
            best_epoch = epoch;
            best_params = params;
            epochs_without_improvement = 0;
        } else {
            ++epochs_without_improvement;
            if (epochs_without_improvement >= config.patience) {
                stop_reason = "early_stop";
                break;
            }
        }
    }

    result.params = std::move(best_params);
    result.best_val_loss = best_val;
    result.best_epoch = best_epoch;
    result.epochs_run = epoch;
    result.steps = steps;
    result.stop_reason = stop_reason;
    return result;
}

CVReport cross_validate(const Dataset& data,
                        const std::vector<std::size_t>& subset,
                        const TrainConfig& config,
                        const ModelConfig& model_config) {
    config.validate();
    if (subset.size() < config.k_folds) {
        throw std::runtime_error("cross-validation: dataset smaller than k_folds");
    }
    const RandomStream root(config.seed);
    RandomStream part_stream = root.derive(kFoldPartitionTag);
    const auto folds =
        partition_folds(subset.size(), config.k_folds, part_stream);

    CVReport report;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<std::size_t> val_idx;
        val_idx.reserve(folds[f].size());
        for (std::size_t pos : folds[f]) val_idx.push_back(subset[pos]);
        std::vector<std::size_t> train_idx;
        train_idx.reserve(subset.size() - folds[f].size());
        for (std::size_t g = 0; g < folds.size(); ++g) {
            if (g == f) continue;
            for (std::size_t pos : folds[g]) train_idx.push_back(subset[pos]);
        }
        const TrainResult r = train_fold(data, train_idx, val_idx, config,
                                         model_config,
                                         root.derive(kFoldSeedTag + f).seed());
        report.fold_val_mse.push_back(r.best_val_loss);
        report.fold_epochs.push_back(r.epochs_run);
        report.fold_stop_reasons.push_back(r.stop_reason);
    }

    const double k = static_cast<double>(report.fold_val_mse.size());
    report.mean_val_mse =
        std::accumulate(report.fold_val_mse.begin(), report.fold_val_mse.end(), 0.0) / k;
    double var = 0.0;
    for (double x : report.fold_val_mse) {
        var += (x - report.mean_val_mse) * (x - report.mean_val_mse);
    }
    report.std_val_mse = std::sqrt(var / k);
    return report;
}

TrainResult train_final(const Dataset& data,
                        const std::vector<std::size_t>& train_idx,
                        const TrainConfig& config,
                        const ModelConfig& model_config) {
    if (train_idx.size() < 2) {
        throw std::runtime_error("final training needs at least 2 samples");
    }
    const RandomStream root(config.seed);
    std::vector<std::size_t> order = train_idx;
    RandomStream split_stream = root.derive(kFinalSplitTag);
    shuffle_indices(order, split_stream);
    const std::size_t n_stop = std::max<std::size_t>(1, order.size() / 10);
    std::vector<std::size_t> stop_idx(order.begin(), order.begin() + n_stop);
    std::vector<std::size_t> fit_idx(order.begin() + n_stop, order.end());
    return train_fold(data, fit_idx, stop_idx, config, model_config,
                      root.derive(kFinalSeedTag).seed());
}

EvalReport evaluate(const ModelParams& params, const Dataset& data,
                    const std::vector<std::size_t>& test_idx) {
    if (test_idx.empty()) {
        throw std::runtime_error("evaluation needs a non-empty test set");
    }
    EvalReport report;
    for (std::size_t idx : test_idx) {
        const FieldSnapshot pred_norm =
            forward_eval(params, data.samples[idx], data.mesh);
        const FieldSnapshot pred_phys = denormalize_fields(pred_norm, params.norm);
        const FieldSnapshot target_norm =
            normalize_fields(data.fields[idx], params.norm);
        const FieldSnapshot& target_phys = data.fields[idx];

        const LossReport loss = composite_loss(pred_norm, target_norm, params, 0.0);
        report.mse_T.push_back(loss.mse_T);
        report.mse_v.push_back(loss.mse_v);
        report.mse_k.push_back(loss.mse_k);
        report.rel_l2_T.push_back(relative_l2(pred_phys.T, target_phys.T));
        report.rel_l2_v.push_back(relative_l2(pred_phys.v, target_phys.v));
        report.rel_l2_k.push_back(relative_l2(pred_phys.k, target_phys.k));
    }
    const std::vector<double>* mses[3] = {&report.mse_T, &report.mse_v,
                                          &report.mse_k};
    const std::vector<double>* rels[3] = {&report.rel_l2_T, &report.rel_l2_v,
                                          &report.rel_l2_k};
    for (int q = 0; q < 3; ++q) {
        report.mse_summary[q] = summarize(*mses[q]);
        report.rel_l2_summary[q] = summarize(*rels[q]);
    }
    return report;
}

}  // namespace miovs
