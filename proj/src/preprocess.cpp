#include "stockpred/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "stockpred/errors.hpp"

namespace stockpred {

namespace {

double feature_value(const PriceBar& bar, const std::string& name) {
    if (name == "open") return bar.open;
    if (name == "close") return bar.close;
    if (name == "low") return bar.low;
    if (name == "high") return bar.high;
    if (name == "volume") return bar.volume;
    fail("UnknownFeature", "'" + name + "'");
}

} // namespace

FeatureSelection FeatureSelection::ohlcv() { return {{"open", "close", "low", "high", "volume"}}; }

FeatureSelection FeatureSelection::cv() { return {{"close", "volume"}}; }

FeatureSelection FeatureSelection::from_flag(const std::string& flag) {
    if (flag == "ohlcv") return ohlcv();
    if (flag == "cv") return cv();
    fail("UnknownFeature", "feature set must be 'ohlcv' or 'cv', got '" + flag + "'");
}

int FeatureSelection::close_index() const {
    const auto it = std::find(names.begin(), names.end(), "close");
    if (it == names.end()) fail("UnknownFeature", "feature selection must include 'close'");
    return static_cast<int>(it - names.begin());
}

ScalerParams fit_scaler(const SymbolSeries& series, const FeatureSelection& features, int train_end) {
    const int L = static_cast<int>(series.bars.size());
    if (train_end < 2 || train_end > L) {
        fail("SeriesTooShort", "scaler fit range [0, " + std::to_string(train_end) + ") needs 2.." +
                                   std::to_string(L) + " rows");
    }
    const int D = features.dim();
    ScalerParams params;
    params.feature_names = features.names;
    params.min_values = Eigen::VectorXd::Constant(D, std::numeric_limits<double>::infinity());
    params.max_values = Eigen::VectorXd::Constant(D, -std::numeric_limits<double>::infinity());
    params.fit_begin = 0;
    params.fit_end = train_end;
    params.close_index = features.close_index();

    for (int row = 0; row < train_end; ++row) {
        for (int f = 0; f < D; ++f) {
            const double v = feature_value(series.bars[static_cast<std::size_t>(row)], features.names[static_cast<std::size_t>(f)]);
            params.min_values[f] = std::min(params.min_values[f], v);
            params.max_values[f] = std::max(params.max_values[f], v);
        }
    }
    for (int f = 0; f < D; ++f) {
        if (!(params.max_values[f] > params.min_values[f])) {
            fail("DegenerateFeature", "feature '" + features.names[static_cast<std::size_t>(f)] +
                                          "' is constant on the fit range");
        }
    }
    return params;
}

ScaledSeries transform(const ScalerParams& params, const SymbolSeries& series, const FeatureSelection& features) {
    const int L = static_cast<int>(series.bars.size());
    const int D = features.dim();
    ScaledSeries out;
    out.values.resize(D, L);
    out.dates.reserve(static_cast<std::size_t>(L));
    out.raw_close.resize(L);
    out.close_index = features.close_index();
    for (int row = 0; row < L; ++row) {
        const PriceBar& bar = series.bars[static_cast<std::size_t>(row)];
        out.dates.push_back(bar.date);
        out.raw_close[row] = bar.close;
        for (int f = 0; f < D; ++f) {
            out.values(f, row) = params.transform_value(f, feature_value(bar, features.names[static_cast<std::size_t>(f)]));
        }
    }
    return out;
}

WindowedDataset build_windows(const ScaledSeries& scaled, const WindowSpec& spec) {
    const int T = spec.time_steps;
    const int L = static_cast<int>(scaled.values.cols());
    const int D = static_cast<int>(scaled.values.rows());
    if (T < 1) fail("SeriesTooShort", "time_steps must be >= 1");
    if (L < T + 1) {
        fail("SeriesTooShort",
             "series has " + std::to_string(L) + " rows; need at least T+1 = " + std::to_string(T + 1));
    }
    const int N = L - T;
    WindowedDataset ds;
    ds.steps.reserve(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        ds.steps.push_back(scaled.values.middleCols(t, N)); // column k is raw row k+t
        (void)D;
    }
    ds.targets.resize(N);
    ds.target_rows.resize(static_cast<std::size_t>(N));
    for (int k = 0; k < N; ++k) {
        ds.targets[k] = scaled.values(scaled.close_index, k + T);
        ds.target_rows[static_cast<std::size_t>(k)] = k + T;
    }
    return ds;
}

SplitCounts split_counts(int n_windows, double test_fraction, double val_fraction) {
    SplitCounts c;
    c.test = static_cast<int>(std::lround(n_windows * test_fraction));
    const int remainder = n_windows - c.test;
    c.validation = static_cast<int>(std::lround(remainder * val_fraction));
    c.train = remainder - c.validation;
    return c;
}

namespace {

WindowedDataset slice_windows(const WindowedDataset& ds, int begin, int count) {
    WindowedDataset out;
    out.steps.reserve(ds.steps.size());
    for (const auto& step : ds.steps) out.steps.push_back(step.middleCols(begin, count));
    out.targets = ds.targets.segment(begin, count);
    out.target_rows.assign(ds.target_rows.begin() + begin, ds.target_rows.begin() + begin + count);
    return out;
}

} // namespace

SplitDataset split_windows(const WindowedDataset& ds, double test_fraction, double val_fraction) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) fail("EmptyPartition", "test_fraction must be in (0,1)");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) fail("EmptyPartition", "val_fraction must be in [0,1)");
    const int N = ds.size();
    const SplitCounts c = split_counts(N, test_fraction, val_fraction);
    if (c.test <= 0) fail("EmptyPartition", "test partition is empty");
    if (c.train <= 0) fail("EmptyPartition", "train partition is empty");

    SplitDataset split;
    split.test_fraction = test_fraction;
    split.val_fraction = val_fraction;
    split.train = slice_windows(ds, 0, c.train);
    split.validation = slice_windows(ds, c.train, c.validation);
    split.test = slice_windows(ds, c.train + c.validation, c.test);
    return split;
}

int scaler_fit_end(int series_length, int time_steps, double test_fraction, double val_fraction) {
    const int n_windows = series_length - time_steps;
    const SplitCounts c = split_counts(n_windows, test_fraction, val_fraction);
    // Last training target sits at raw row (train-1) + T.
    return c.train + time_steps;
}

} // namespace stockpred
