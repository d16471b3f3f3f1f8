#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "stockpred/marketdata.hpp"

namespace stockpred {

// Which OHLCV columns feed the model. "close" must be present: the target is
// always the next-day scaled close.
struct FeatureSelection {
    std::vector<std::string> names;

    static FeatureSelection ohlcv(); // open, close, low, high, volume
    static FeatureSelection cv();    // close, volume
    static FeatureSelection from_flag(const std::string& flag);

    int close_index() const;
    int dim() const { return static_cast<int>(names.size()); }
};

// Per-feature [0,1] min-max affine map, fitted on training rows only.
struct ScalerParams {
    std::vector<std::string> feature_names;
    Eigen::VectorXd min_values;
    Eigen::VectorXd max_values;
    int fit_begin = 0;
    int fit_end = 0; // rows [fit_begin, fit_end) were seen during fit
    int close_index = -1;

    double transform_value(int feature, double v) const {
        return (v - min_values[feature]) / (max_values[feature] - min_values[feature]);
    }
};

struct ScaledSeries {
    Eigen::MatrixXd values; // feature-major: D x L
    std::vector<Date> dates;
    Eigen::VectorXd raw_close;
    int close_index = -1;
};

struct WindowSpec {
    int time_steps = 25;
};

// X[k] covers scaled rows k..k+T-1; y[k] is the scaled close of row k+T.
// Stored step-major (steps[t] is D x N) so mini-batch assembly is a column
// gather per step.
struct WindowedDataset {
    std::vector<Eigen::MatrixXd> steps; // T matrices, each D x N
    Eigen::VectorXd targets;            // N
    std::vector<int> target_rows;       // N raw-series row of each target

    int size() const { return static_cast<int>(targets.size()); }
    int time_steps() const { return static_cast<int>(steps.size()); }
    int input_dim() const { return steps.empty() ? 0 : static_cast<int>(steps.front().rows()); }
};

struct SplitDataset {
    WindowedDataset train;
    WindowedDataset validation;
    WindowedDataset test;
    double test_fraction = 0.0;
    double val_fraction = 0.0;
};

// Min/max over rows [0, train_end) only; later rows never influence the fit.
// Throws DegenerateFeature when a feature is constant on that range.
ScalerParams fit_scaler(const SymbolSeries& series, const FeatureSelection& features, int train_end);

// Values outside the fit range map outside [0,1]; nothing is clipped.
ScaledSeries transform(const ScalerParams& params, const SymbolSeries& series, const FeatureSelection& features);

inline double inverse_target(const ScalerParams& params, double scaled_close) {
    const int c = params.close_index;
    return scaled_close * (params.max_values[c] - params.min_values[c]) + params.min_values[c];
}

WindowedDataset build_windows(const ScaledSeries& scaled, const WindowSpec& spec); // SeriesTooShort if L < T+1

// Chronological: last round(N*test_fraction) windows are test; of the rest,
// the last round(R*val_fraction) are validation. No shuffling. Validation may
// be empty (the trainer decides whether that is acceptable).
SplitDataset split_windows(const WindowedDataset& ds, double test_fraction, double val_fraction);

// Raw row index one past the last row any training window touches (inputs or
// target): the scaler fit boundary that keeps validation/test rows unseen.
int scaler_fit_end(int series_length, int time_steps, double test_fraction, double val_fraction);

// Window-count bookkeeping shared by split_windows and scaler_fit_end.
struct SplitCounts {
    int train = 0;
    int validation = 0;
    int test = 0;
};
SplitCounts split_counts(int n_windows, double test_fraction, double val_fraction);

} // namespace stockpred
