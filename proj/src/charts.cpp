#include "stockpred/charts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "stockpred/errors.hpp"

namespace stockpred {

namespace {

constexpr int kTargetTicks = 6;
const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
constexpr int kPaletteSize = 6;

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string fmt_tick(double v) {
    // Round-number ticks print cleanly with %g; snap tiny residue to zero.
    if (std::fabs(v) < 1e-12) v = 0.0;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::string escape_xml(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char ch : text) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(ch);
        }
    }
    return out;
}

struct Bounds {
    double lo = 0.0;
    double hi = 0.0;
};

// Data bounds padded by 5%; a constant series widens to +-1 around it.
Bounds padded(double lo, double hi) {
    if (lo == hi) return {lo - 1.0, hi + 1.0};
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

double nice_step(double span) {
    const double raw = span / (kTargetTicks - 1);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double norm = raw / mag;
    double snapped = 10.0;
    if (norm < 1.5) {
        snapped = 1.0;
    } else if (norm < 3.0) {
        snapped = 2.0;
    } else if (norm < 7.0) {
        snapped = 5.0;
    }
    return snapped * mag;
}

std::vector<double> value_ticks(const Bounds& b) {
    const double step = nice_step(b.hi - b.lo);
    std::vector<double> ticks;
    double tick = std::ceil(b.lo / step) * step;
    while (tick <= b.hi + 1e-9 * step) {
        ticks.push_back(tick);
        tick += step;
    }
    return ticks;
}

struct LinearScale {
    Bounds domain;
    double out_lo = 0.0;
    double out_hi = 0.0;
    double operator()(double v) const {
        return out_lo + (v - domain.lo) / (domain.hi - domain.lo) * (out_hi - out_lo);
    }
};

} // namespace

std::string render_line_chart(const std::vector<ChartSeries>& series, const ChartConfig& cfg,
                              const std::vector<ChartMarker>& markers) {
    if (series.empty()) fail("EmptySeries", "chart needs at least one series");
    const bool dates = series.front().uses_dates();
    for (const ChartSeries& s : series) {
        if (s.points() == 0) fail("EmptySeries", "series '" + s.label + "' is empty");
        if (s.uses_dates() != dates) fail("MixedDomain", "series mix date and value x domains");
        const std::size_t n_x = dates ? s.x_dates.size() : s.x_values.size();
        if (n_x != s.y.size()) fail("MixedDomain", "series '" + s.label + "' has mismatched x/y lengths");
    }

    // Collect x as doubles (dates become serial day numbers).
    auto x_of = [&](const ChartSeries& s, std::size_t k) {
        return dates ? static_cast<double>(s.x_dates[k].serial()) : s.x_values[k];
    };

    double x_min = x_of(series.front(), 0), x_max = x_min;
    double y_min = series.front().y.front(), y_max = y_min;
    for (const ChartSeries& s : series) {
        for (std::size_t k = 0; k < s.points(); ++k) {
            x_min = std::min(x_min, x_of(s, k));
            x_max = std::max(x_max, x_of(s, k));
            y_min = std::min(y_min, s.y[k]);
            y_max = std::max(y_max, s.y[k]);
        }
    }
    const Bounds xb = padded(x_min, x_max);
    const Bounds yb = padded(y_min, y_max);

    const double plot_left = cfg.margin_left;
    const double plot_right = cfg.width - cfg.margin_right;
    const double plot_top = cfg.margin_top;
    const double plot_bottom = cfg.height - cfg.margin_bottom;
    const LinearScale sx{xb, plot_left, plot_right};
    const LinearScale sy{yb, plot_bottom, plot_top}; // SVG y grows downward

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << cfg.width << "\" height=\"" << cfg.height
        << "\" viewBox=\"0 0 " << cfg.width << " " << cfg.height << "\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"" << cfg.width << "\" height=\"" << cfg.height << "\" fill=\"white\"/>\n";
    if (!cfg.title.empty()) {
        svg << "<text x=\"" << fmt2(cfg.width / 2.0)
            << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">"
            << escape_xml(cfg.title) << "</text>\n";
    }

    // Axes.
    svg << "<line x1=\"" << fmt2(plot_left) << "\" y1=\"" << fmt2(plot_bottom) << "\" x2=\"" << fmt2(plot_right)
        << "\" y2=\"" << fmt2(plot_bottom) << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << fmt2(plot_left) << "\" y1=\"" << fmt2(plot_top) << "\" x2=\"" << fmt2(plot_left)
        << "\" y2=\"" << fmt2(plot_bottom) << "\" stroke=\"black\"/>\n";

    // Y ticks: snapped round numbers.
    for (double tick : value_ticks(yb)) {
        const double py = sy(tick);
        svg << "<line x1=\"" << fmt2(plot_left - 4) << "\" y1=\"" << fmt2(py) << "\" x2=\"" << fmt2(plot_left)
            << "\" y2=\"" << fmt2(py) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << fmt2(plot_left - 8) << "\" y=\"" << fmt2(py + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << fmt_tick(tick)
            << "</text>\n";
    }

    // X ticks: round numbers for value domains, evenly spaced labeled days
    // rotated 45 degrees for date domains.
    if (dates) {
        for (int k = 0; k < kTargetTicks; ++k) {
            const double v = xb.lo + (xb.hi - xb.lo) * k / (kTargetTicks - 1);
            const double px = sx(v);
            const Date d = Date::from_serial(static_cast<long>(std::llround(v)));
            svg << "<line x1=\"" << fmt2(px) << "\" y1=\"" << fmt2(plot_bottom) << "\" x2=\"" << fmt2(px)
                << "\" y2=\"" << fmt2(plot_bottom + 4) << "\" stroke=\"black\"/>\n";
            svg << "<text x=\"" << fmt2(px) << "\" y=\"" << fmt2(plot_bottom + 16)
                << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"start\" transform=\"rotate(45 "
                << fmt2(px) << "," << fmt2(plot_bottom + 16) << ")\">" << d.to_string() << "</text>\n";
        }
    } else {
        for (double tick : value_ticks(xb)) {
            const double px = sx(tick);
            svg << "<line x1=\"" << fmt2(px) << "\" y1=\"" << fmt2(plot_bottom) << "\" x2=\"" << fmt2(px)
                << "\" y2=\"" << fmt2(plot_bottom + 4) << "\" stroke=\"black\"/>\n";
            svg << "<text x=\"" << fmt2(px) << "\" y=\"" << fmt2(plot_bottom + 18)
                << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << fmt_tick(tick)
                << "</text>\n";
        }
    }

    // Axis labels.
    if (!cfg.x_label.empty()) {
        svg << "<text x=\"" << fmt2((plot_left + plot_right) / 2.0) << "\" y=\"" << fmt2(cfg.height - 12.0)
            << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" << escape_xml(cfg.x_label)
            << "</text>\n";
    }
    if (!cfg.y_label.empty()) {
        svg << "<text x=\"16\" y=\"" << fmt2((plot_top + plot_bottom) / 2.0)
            << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16,"
            << fmt2((plot_top + plot_bottom) / 2.0) << ")\">" << escape_xml(cfg.y_label) << "</text>\n";
    }

    // Data polylines.
    for (std::size_t si = 0; si < series.size(); ++si) {
        const ChartSeries& s = series[si];
        svg << "<polyline fill=\"none\" stroke=\"" << kPalette[si % kPaletteSize] << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t k = 0; k < s.points(); ++k) {
            if (k > 0) svg << ' ';
            svg << fmt2(sx(x_of(s, k))) << ',' << fmt2(sy(s.y[k]));
        }
        svg << "\"/>\n";
    }

    // Markers.
    for (const ChartMarker& m : markers) {
        svg << "<circle cx=\"" << fmt2(sx(m.x)) << "\" cy=\"" << fmt2(sy(m.y)) << "\" r=\"4\" fill=\"#d62728\"/>\n";
        if (!m.label.empty()) {
            svg << "<text x=\"" << fmt2(sx(m.x) + 6) << "\" y=\"" << fmt2(sy(m.y) - 6)
                << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape_xml(m.label) << "</text>\n";
        }
    }

    // Legend, top-right inside the plot.
    for (std::size_t si = 0; si < series.size(); ++si) {
        const double ly = plot_top + 14.0 + 16.0 * static_cast<double>(si);
        svg << "<line x1=\"" << fmt2(plot_right - 150) << "\" y1=\"" << fmt2(ly - 4) << "\" x2=\""
            << fmt2(plot_right - 126) << "\" y2=\"" << fmt2(ly - 4) << "\" stroke=\"" << kPalette[si % kPaletteSize]
            << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << fmt2(plot_right - 120) << "\" y=\"" << fmt2(ly)
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape_xml(series[si].label) << "</text>\n";
    }

    svg << "</svg>\n";
    return std::move(svg).str();
}

std::string render_history(const TrainReport& report, HistoryMetric metric) {
    if (report.history.empty()) fail("EmptySeries", "training history is empty");
    const bool rmse_metric = metric == HistoryMetric::rmse;

    ChartSeries train_series, val_series;
    train_series.label = rmse_metric ? "train RMSE" : "train loss";
    val_series.label = rmse_metric ? "validation RMSE" : "validation loss";
    for (const EpochRecord& r : report.history) {
        train_series.x_values.push_back(r.epoch);
        val_series.x_values.push_back(r.epoch);
        train_series.y.push_back(rmse_metric ? r.train_rmse : r.train_loss);
        val_series.y.push_back(rmse_metric ? r.val_rmse : r.val_loss);
    }

    std::vector<ChartMarker> markers;
    if (report.best_epoch >= 1 && report.best_epoch <= static_cast<int>(report.history.size())) {
        const EpochRecord& best = report.history[static_cast<std::size_t>(report.best_epoch - 1)];
        markers.push_back(ChartMarker{static_cast<double>(best.epoch), rmse_metric ? best.val_rmse : best.val_loss,
                                      "best epoch " + std::to_string(best.epoch)});
    }

    ChartConfig cfg;
    cfg.title = rmse_metric ? "Train and validation RMSE by epoch" : "Train and validation loss by epoch";
    cfg.x_label = "epoch";
    cfg.y_label = rmse_metric ? "RMSE" : "MSE loss";
    return render_line_chart({train_series, val_series}, cfg, markers);
}

std::string render_prediction_overlay(const PredictionSeries& predictions, const std::vector<Date>& target_dates,
                                      OverlayUnits units, const std::string& title) {
    const int N = static_cast<int>(predictions.scaled_actual.size());
    if (N == 0) fail("EmptySeries", "no prediction pairs");
    if (static_cast<int>(target_dates.size()) != N) {
        fail("MixedDomain", "prediction pairs and target dates differ in length");
    }
    const bool price = units == OverlayUnits::price;

    ChartSeries real_series, predicted_series;
    real_series.label = "real";
    predicted_series.label = "predicted";
    real_series.x_dates = target_dates;
    predicted_series.x_dates = target_dates;
    for (int k = 0; k < N; ++k) {
        real_series.y.push_back(price ? predictions.price_actual[k] : predictions.scaled_actual[k]);
        predicted_series.y.push_back(price ? predictions.price_predicted[k] : predictions.scaled_predicted[k]);
    }

    ChartConfig cfg;
    cfg.title = title.empty() ? "Predicted vs actual close" : title;
    cfg.x_label = "date";
    cfg.y_label = price ? "close price" : "scaled close";
    return render_line_chart({real_series, predicted_series}, cfg);
}

} // namespace stockpred
