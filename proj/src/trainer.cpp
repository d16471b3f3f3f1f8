#include "stockpred/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "stockpred/errors.hpp"
#include "stockpred/ioutil.hpp"
#include "stockpred/prng.hpp"

namespace stockpred {

namespace {

constexpr int kEvalChunk = 512;

// Eval-mode predictions over the whole dataset, chunked with fixed
// boundaries so the summation order (and therefore every reported metric)
// is identical run to run.
Eigen::VectorXd predict_all(const NetworkState& state, const ModelSpec& spec, const WindowedDataset& ds) {
    const int N = ds.size();
    Eigen::VectorXd predictions(N);
    std::vector<int> indices;
    for (int begin = 0; begin < N; begin += kEvalChunk) {
        const int count = std::min(kEvalChunk, N - begin);
        indices.resize(static_cast<std::size_t>(count));
        std::iota(indices.begin(), indices.end(), begin);
        const Batch batch = gather_batch(ds, indices);
        const ForwardResult fwd = forward(state, spec, batch, RunMode::eval);
        predictions.segment(begin, count) = fwd.predictions;
    }
    return predictions;
}

} // namespace

const char* to_string(StopReason reason) {
    switch (reason) {
        case StopReason::early_stop: return "early_stop";
        case StopReason::max_epochs: return "max_epochs";
        case StopReason::diverged: return "diverged";
    }
    return "max_epochs";
}

StopDecision early_stop_update(EarlyStopState& state, double val_loss, int patience, double min_delta) {
    if (val_loss < state.best_loss - min_delta) {
        state.best_loss = val_loss;
        state.since_improvement = 0;
        return StopDecision::new_best;
    }
    state.since_improvement += 1;
    if (state.since_improvement >= std::max(patience, 1)) return StopDecision::stop;
    return StopDecision::keep_going;
}

Metrics evaluate(const NetworkState& state, const ModelSpec& spec, const WindowedDataset& ds) {
    if (ds.size() == 0) fail("EmptyPartition", "cannot evaluate an empty dataset");
    const Eigen::VectorXd predictions = predict_all(state, spec, ds);
    Metrics m;
    m.loss = mse_loss(predictions, ds.targets);
    m.rmse = std::sqrt(m.loss);
    return m;
}

TrainOutcome train(const ModelSpec& spec, const SplitDataset& split, const TrainConfig& cfg,
                   std::uint64_t init_seed) {
    if (cfg.max_epochs < 1) fail("InvalidSpec", "max_epochs must be >= 1");
    if (cfg.batch_size < 1) fail("InvalidSpec", "batch_size must be >= 1");
    if (cfg.patience && *cfg.patience < 0) fail("InvalidSpec", "patience must be >= 0");
    if (split.train.size() == 0) fail("EmptyPartition", "train partition is empty");
    const bool early_stopping = cfg.patience.has_value();
    const bool have_validation = split.validation.size() > 0;
    if (early_stopping && !have_validation) {
        fail("EmptyPartition", "validation partition is empty but early stopping is enabled");
    }

    NetworkState state = init_network(spec, init_seed);
    OptimizerState opt = OptimizerState::create(state);
    SplitMix64 rng(cfg.shuffle_seed);

    TrainOutcome outcome;
    TrainReport& report = outcome.report;
    report.spec = spec;
    report.max_epochs = cfg.max_epochs;
    report.batch_size = cfg.batch_size;
    report.patience = cfg.patience;
    report.min_delta = cfg.min_delta;
    report.init_seed = init_seed;
    report.shuffle_seed = cfg.shuffle_seed;
    report.optimizer = opt.config;
    report.stop_reason = StopReason::max_epochs;

    outcome.best_state = state;
    EarlyStopState stopper;
    const int n_train = split.train.size();
    std::vector<int> order(static_cast<std::size_t>(n_train));
    std::iota(order.begin(), order.end(), 0);

    bool diverged = false;
    for (int epoch = 1; epoch <= cfg.max_epochs && !diverged; ++epoch) {
        shuffle_in_place(order, rng);

        double running_loss_sum = 0.0;
        int batches = 0;
        try {
            for (int begin = 0; begin < n_train; begin += cfg.batch_size) {
                const int count = std::min(cfg.batch_size, n_train - begin);
                const std::vector<int> batch_indices(order.begin() + begin, order.begin() + begin + count);
                const Batch batch = gather_batch(split.train, batch_indices);
                const Eigen::VectorXd targets = gather_targets(split.train, batch_indices);
                const std::uint64_t dropout_seed = rng.next();
                const ForwardResult fwd = forward(state, spec, batch, RunMode::train, dropout_seed);
                running_loss_sum += mse_loss(fwd.predictions, targets);
                ++batches;
                const Gradients grads = backward(state, spec, fwd, targets);
                adam_step(opt, state, grads);
            }

            EpochRecord record;
            record.epoch = epoch;
            record.running_train_loss = batches > 0 ? running_loss_sum / batches : 0.0;
            const Metrics train_metrics = evaluate(state, spec, split.train);
            record.train_loss = train_metrics.loss;
            record.train_rmse = train_metrics.rmse;
            if (have_validation) {
                const Metrics val_metrics = evaluate(state, spec, split.validation);
                record.val_loss = val_metrics.loss;
                record.val_rmse = val_metrics.rmse;
            } else {
                record.val_loss = std::numeric_limits<double>::quiet_NaN();
                record.val_rmse = std::numeric_limits<double>::quiet_NaN();
            }
            report.history.push_back(record);
            report.stopped_epoch = epoch;

            if (early_stopping) {
                const StopDecision decision =
                    early_stop_update(stopper, record.val_loss, *cfg.patience, cfg.min_delta);
                if (decision == StopDecision::new_best) {
                    stopper.best_epoch = epoch;
                    report.best_epoch = epoch;
                    outcome.best_state = state;
                    if (cfg.checkpoint_sink) cfg.checkpoint_sink(epoch, state);
                } else if (decision == StopDecision::stop) {
                    report.stop_reason = StopReason::early_stop;
                    break;
                }
            } else {
                // No validation signal: the latest weights are the keepers.
                report.best_epoch = epoch;
                outcome.best_state = state;
            }
        } catch (const Error& e) {
            if (e.kind() == "NonFiniteActivation" || e.kind() == "NonFiniteGradient") {
                // Partial history: stopped_epoch stays at the last completed epoch.
                diverged = true;
                report.stop_reason = StopReason::diverged;
            } else {
                throw;
            }
        }
    }

    if (split.test.size() > 0 && !diverged) {
        report.test_metrics = evaluate(outcome.best_state, spec, split.test);
    } else {
        report.test_metrics = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    }
    return outcome;
}

PredictionSeries predict_series(const NetworkState& state, const ModelSpec& spec, const WindowedDataset& ds,
                                const ScalerParams& scaler) {
    if (ds.size() == 0) fail("EmptyPartition", "cannot predict on an empty dataset");
    PredictionSeries out;
    out.target_rows = ds.target_rows;
    out.scaled_actual = ds.targets;
    out.scaled_predicted = predict_all(state, spec, ds);
    const int N = ds.size();
    out.price_actual.resize(N);
    out.price_predicted.resize(N);
    for (int k = 0; k < N; ++k) {
        out.price_actual[k] = inverse_target(scaler, out.scaled_actual[k]);
        out.price_predicted[k] = inverse_target(scaler, out.scaled_predicted[k]);
    }
    return out;
}

std::string history_to_csv(const TrainReport& report) {
    std::ostringstream csv;
    csv << "epoch,train_loss,val_loss,train_rmse,val_rmse\n";
    for (const EpochRecord& r : report.history) {
        csv << r.epoch << ',' << format_g17(r.train_loss) << ',' << format_g17(r.val_loss) << ','
            << format_g17(r.train_rmse) << ',' << format_g17(r.val_rmse) << '\n';
    }
    return std::move(csv).str();
}

} // namespace stockpred
