#pragma once

#include <string>
#include <vector>

#include "stockpred/marketdata.hpp"
#include "stockpred/trainer.hpp"

namespace stockpred {

// One polyline. x is either dates or plain values; every series in a chart
// must use the same domain kind.
struct ChartSeries {
    std::string label;
    std::vector<Date> x_dates;
    std::vector<double> x_values;
    std::vector<double> y;

    bool uses_dates() const { return !x_dates.empty(); }
    std::size_t points() const { return y.size(); }
};

struct ChartMarker {
    double x = 0.0;
    double y = 0.0;
    std::string label;
};

struct ChartConfig {
    int width = 900;
    int height = 420;
    int margin_left = 70;
    int margin_right = 30;
    int margin_top = 50;
    int margin_bottom = 70;
    std::string title;
    std::string x_label;
    std::string y_label;
};

// Standalone SVG text: axes with snapped ticks, one polyline per series,
// legend, title. Pure function of its inputs; identical input gives
// identical bytes.
std::string render_line_chart(const std::vector<ChartSeries>& series, const ChartConfig& cfg,
                              const std::vector<ChartMarker>& markers = {});

enum class HistoryMetric { loss, rmse };

// Train + validation curves over epochs with a dot on the best epoch.
std::string render_history(const TrainReport& report, HistoryMetric metric);

enum class OverlayUnits { scaled, price };

// Real vs predicted closes on a shared axis, aligned by target date.
std::string render_prediction_overlay(const PredictionSeries& predictions, const std::vector<Date>& target_dates,
                                      OverlayUnits units, const std::string& title);

} // namespace stockpred
