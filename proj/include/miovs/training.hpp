#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "miovs/model.hpp"
#include "miovs/types.hpp"

namespace miovs {

struct TrainConfig {
    double learning_rate = 0.001;
    double l2_lambda = 1e-8;
    std::size_t max_epochs = 500;
    std::size_t patience = 10;
    std::size_t batch_size = 1;
    std::size_t k_folds = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Per-quantity mean squared errors in normalized space plus the weight
/// penalty. composite = ((mse_T + mse_v) + mse_k) + reg_term, summed in
/// exactly that order.
struct LossReport {
    double mse_T = 0.0;
    double mse_v = 0.0;
    double mse_k = 0.0;
    double reg_term = 0.0;
    double composite = 0.0;
};

/// Adam accumulators mirroring the trainables, with bias correction.
struct AdamState {
    Gradients m;
    Gradients v;
    std::uint64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamState make_adam_state(const ModelConfig& config);

/// Outcome of one training run (a CV fold or the final model): parameters
/// restored from the best-validation epoch, never the last one.
struct TrainResult {
    ModelParams params;
    std::vector<double> val_history;  // composite validation loss per epoch
    double best_val_loss = 0.0;
    std::size_t best_epoch = 0;  // 1-based
    std::size_t epochs_run = 0;
    std::size_t steps = 0;
    std::string stop_reason;  // "early_stop" or "max_epochs"
};

struct CVReport {
    std::vector<double> fold_val_mse;  // best composite validation loss per fold
    double mean_val_mse = 0.0;
    double std_val_mse = 0.0;  // population std over the k folds
    std::vector<std::size_t> fold_epochs;
    std::vector<std::string> fold_stop_reasons;
};

struct QuantitySummary {
    double mean = 0.0;
    double stddev = 0.0;  // population
    double q25 = 0.0;
    double q50 = 0.0;
    double q75 = 0.0;
};

/// Per-sample test metrics: MSE in normalized space, relative L2 in percent
/// on physical fields, ordered by test-sample position.
struct EvalReport {
    std::vector<double> mse_T, mse_v, mse_k;
    std::vector<double> rel_l2_T, rel_l2_v, rel_l2_k;
    QuantitySummary mse_summary[3];
    QuantitySummary rel_l2_summary[3];
};

/// MSE_q = (1/N) sum_i (target_i - pred_i)^2 per quantity;
/// reg = lambda * sum of squared weight-matrix entries (biases excluded).
LossReport composite_loss(const FieldSnapshot& pred_norm,
                          const FieldSnapshot& target_norm,
                          const ModelParams& params, double lambda);

/// 100 * ||target - pred||_2 / ||target||_2. Throws on an all-zero target.
double relative_l2(const std::vector<double>& pred,
                   const std::vector<double>& target);

/// One Adam step with bias correction; the L2 penalty is expected to be
/// already folded into `grads` by the caller (coupled weight decay).
void adam_step(AdamState& state, ModelParams& params, const Gradients& grads,
               double learning_rate);

/// mean / population std / quartiles (25, 50, 75%, linear interpolation).
QuantitySummary summarize(const std::vector<double>& values);

/// Input normalization from the sampling ranges, output z-score statistics
/// from the training samples (std falls back to 1 for a constant quantity).
NormalizationStats compute_normalization(const Dataset& data,
                                         const std::vector<std::size_t>& train_idx);

/// Seeded random partition of [0, n) into k folds whose sizes differ by at
/// most one; disjoint with union [0, n).
std::vector<std::vector<std::size_t>> partition_folds(std::size_t n,
                                                      std::size_t k,
                                                      RandomStream& stream);

/// Seeded shuffle of [0, n), then the first floor(n * train_fraction) indices
/// form the training partition. Both halves are returned sorted.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_test(
    std::size_t n, double train_fraction, std::uint64_t seed);

/// Trains on train_idx with one Adam step per sample (batch size 1), epochs
/// reshuffled from a seeded stream, validating after each epoch with dropout
/// disabled. Stops after `patience` epochs without strict improvement or at
/// max_epochs, restoring the best-epoch parameters.
TrainResult train_fold(const Dataset& data,
                       const std::vector<std::size_t>& train_idx,
                       const std::vector<std::size_t>& val_idx,
                       const TrainConfig& config, const ModelConfig& model_config,
                       std::uint64_t fold_seed);

/// k-fold cross-validation over `subset` (or the whole dataset when empty is
/// not allowed; pass all indices). Returns per-fold best validation losses
/// and their mean +- population std.
CVReport cross_validate(const Dataset& data,
                        const std::vector<std::size_t>& subset,
                        const TrainConfig& config,
                        const ModelConfig& model_config);

/// Final-model protocol: hold out 10% of the training partition (at least
/// one sample) for early stopping, train on the rest.
TrainResult train_final(const Dataset& data,
                        const std::vector<std::size_t>& train_idx,
                        const TrainConfig& config, const ModelConfig& model_config);

/// Per-sample metrics over test_idx in the given order, plus summaries.
EvalReport evaluate(const ModelParams& params, const Dataset& data,
                    const std::vector<std::size_t>& test_idx);

}  // namespace miovs
