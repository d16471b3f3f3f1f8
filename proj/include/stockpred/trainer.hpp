#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stockpred/network.hpp"
#include "stockpred/preprocess.hpp"

namespace stockpred {

struct TrainConfig {
    int max_epochs = 200;
    int batch_size = 8;
    std::optional<int> patience = 50; // absent = early stopping disabled
    double min_delta = 0.0;
    std::uint64_t shuffle_seed = 0;

    // When set, the pipeline mirrors each new best snapshot to disk here;
    // the trainer itself only invokes the sink.
    std::string checkpoint_path;
    std::function<void(int epoch, const NetworkState&)> checkpoint_sink;
};

enum class StopReason { early_stop, max_epochs, diverged };
const char* to_string(StopReason reason);

struct EpochRecord {
    int epoch = 0; // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double train_rmse = 0.0;
    double val_rmse = 0.0;
    double running_train_loss = 0.0; // mean of mini-batch losses seen while updating
};

struct EarlyStopState {
    double best_loss = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int since_improvement = 0;
};

enum class StopDecision { keep_going, new_best, stop };

// new_best iff val_loss < best - min_delta (strict); stop once the
// non-improvement streak reaches patience (patience 0 stops on the first
// non-improving epoch).
StopDecision early_stop_update(EarlyStopState& state, double val_loss, int patience, double min_delta);

struct Metrics {
    double loss = 0.0;
    double rmse = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    int stopped_epoch = 0;
    StopReason stop_reason = StopReason::max_epochs;
    Metrics test_metrics;
    // Config echo so reports are self-describing.
    ModelSpec spec;
    int max_epochs = 0;
    int batch_size = 0;
    std::optional<int> patience;
    double min_delta = 0.0;
    std::uint64_t init_seed = 0;
    std::uint64_t shuffle_seed = 0;
    AdamConfig optimizer;
};

struct TrainOutcome {
    TrainReport report;
    NetworkState best_state;
};

// Per epoch: seeded shuffle of the train windows, mini-batch Adam updates,
// then a dropout-free metrics pass over train and validation. Weights are
// snapshotted whenever validation loss strictly improves; the snapshot from
// the best epoch is returned, not the last. Divergence ends the run with a
// partial history instead of throwing.
TrainOutcome train(const ModelSpec& spec, const SplitDataset& split, const TrainConfig& cfg,
                   std::uint64_t init_seed);

Metrics evaluate(const NetworkState& state, const ModelSpec& spec, const WindowedDataset& ds);

struct PredictionSeries {
    std::vector<int> target_rows;
    Eigen::VectorXd scaled_actual;
    Eigen::VectorXd scaled_predicted;
    Eigen::VectorXd price_actual;
    Eigen::VectorXd price_predicted;
};

PredictionSeries predict_series(const NetworkState& state, const ModelSpec& spec, const WindowedDataset& ds,
                                const ScalerParams& scaler);

// header epoch,train_loss,val_loss,train_rmse,val_rmse; 17-significant-digit values
std::string history_to_csv(const TrainReport& report);

} // namespace stockpred
