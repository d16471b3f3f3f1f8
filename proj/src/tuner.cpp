#include "stockpred/tuner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

#include "stockpred/errors.hpp"
#include "stockpred/prng.hpp"

namespace stockpred {

namespace {

void check_grid(const GridSpec& grid) {
    if (grid.additional_layer.empty() || grid.neurons.empty() || grid.batch_size.empty() || grid.dropout.empty()) {
        fail("InvalidSpec", "every grid candidate list must be non-empty");
    }
    for (double p : grid.dropout) {
        if (!(p >= 0.0 && p < 1.0)) fail("InvalidSpec", "dropout candidates must be in [0,1)");
    }
    for (int n : grid.neurons) {
        if (n < 1) fail("InvalidSpec", "neuron candidates must be >= 1");
    }
    for (int b : grid.batch_size) {
        if (b < 1) fail("InvalidSpec", "batch size candidates must be >= 1");
    }
}

template <typename T>
std::size_t sorted_position(std::vector<T> values, const T& needle) {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    return static_cast<std::size_t>(std::find(values.begin(), values.end(), needle) - values.begin());
}

std::size_t sorted_count(std::vector<int> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v.size();
}

std::size_t sorted_count(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v.size();
}

std::size_t sorted_count(std::vector<ExtraLayer> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v.size();
}

} // namespace

std::vector<GridCandidate> enumerate_grid(const GridSpec& grid) {
    check_grid(grid);
    std::vector<GridCandidate> candidates;
    candidates.reserve(static_cast<std::size_t>(grid.size()));
    int index = 0;
    for (ExtraLayer layer : grid.additional_layer) {
        for (int n : grid.neurons) {
            for (int b : grid.batch_size) {
                for (double p : grid.dropout) {
                    candidates.push_back(GridCandidate{layer, n, b, p, index++});
                }
            }
        }
    }
    return candidates;
}

std::uint64_t canonical_stream_index(const GridSpec& grid, const GridCandidate& candidate) {
    // Mixed-radix index over the sorted, deduplicated candidate lists, same
    // nesting as enumerate_grid. ExtraLayer's enum order is none<lstm<gru.
    const std::size_t layer_pos = sorted_position(grid.additional_layer, candidate.extra_layer);
    const std::size_t neuron_pos = sorted_position(grid.neurons, candidate.neurons);
    const std::size_t batch_pos = sorted_position(grid.batch_size, candidate.batch_size);
    const std::size_t dropout_pos = sorted_position(grid.dropout, candidate.dropout);
    const std::size_t n_neurons = sorted_count(grid.neurons);
    const std::size_t n_batches = sorted_count(grid.batch_size);
    const std::size_t n_dropouts = sorted_count(grid.dropout);
    return static_cast<std::uint64_t>(((layer_pos * n_neurons + neuron_pos) * n_batches + batch_pos) * n_dropouts +
                                      dropout_pos);
}

double improvement_percent(double baseline_rmse, double tuned_rmse) {
    if (!(baseline_rmse > 0.0)) {
        fail("NonPositiveBaseline", "baseline RMSE must be > 0, got " + std::to_string(baseline_rmse));
    }
    return 100.0 * (baseline_rmse - tuned_rmse) / baseline_rmse;
}

TuneReport grid_search(const GridSpec& grid, const CellRunner& runner, std::uint64_t master_seed, int workers) {
    const std::vector<GridCandidate> candidates = enumerate_grid(grid);
    const int total = static_cast<int>(candidates.size());

    struct Slot {
        ConfigResult result;
        bool diverged = false;
    };
    std::vector<Slot> slots(candidates.size());

    auto run_one = [&](const GridCandidate& candidate, std::uint64_t stream) {
        const std::uint64_t seed = derive_seed(master_seed, stream);
        const CellOutcome outcome = runner(candidate, seed);
        Slot slot;
        slot.result.config = candidate;
        slot.result.val_rmse = outcome.val_rmse;
        slot.result.test_rmse = outcome.test_rmse;
        slot.result.best_epoch = outcome.best_epoch;
        slot.result.stop_reason = outcome.stop_reason;
        slot.result.seed = seed;
        slot.diverged = outcome.stop_reason == StopReason::diverged;
        return slot;
    };

    std::atomic<int> next{0};
    auto worker_loop = [&]() {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= total) break;
            const GridCandidate& candidate = candidates[static_cast<std::size_t>(i)];
            slots[static_cast<std::size_t>(i)] = run_one(candidate, canonical_stream_index(grid, candidate));
        }
    };
    const int n_threads = std::max(1, std::min(workers, total));
    if (n_threads == 1) {
        worker_loop();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker_loop);
        for (auto& th : pool) th.join();
    }

    TuneReport report;
    report.total_configs = total;
    for (const Slot& slot : slots) {
        if (slot.diverged) {
            report.diverged.push_back(slot.result);
        } else {
            report.results.push_back(slot.result);
        }
    }
    if (report.results.empty()) fail("AllConfigsDiverged", "no grid configuration completed training");

    // Minimal validation RMSE; ties go to the earliest enumeration index,
    // which is the order results were collected in.
    report.winner_index = 0;
    for (int i = 1; i < static_cast<int>(report.results.size()); ++i) {
        if (report.results[static_cast<std::size_t>(i)].val_rmse <
            report.results[static_cast<std::size_t>(report.winner_index)].val_rmse) {
            report.winner_index = i;
        }
    }

    // Declared baseline: first enumerated candidate, forced to dropout 0 and
    // no extra layer. Reuse its grid result when that exact cell exists.
    GridCandidate baseline_candidate = candidates.front();
    baseline_candidate.extra_layer = ExtraLayer::none;
    baseline_candidate.dropout = 0.0;
    const auto in_grid = std::find_if(report.results.begin(), report.results.end(), [&](const ConfigResult& r) {
        return r.config.same_values(baseline_candidate);
    });
    if (in_grid != report.results.end()) {
        report.baseline = *in_grid;
    } else {
        const Slot slot = run_one(baseline_candidate, static_cast<std::uint64_t>(total));
        if (slot.diverged) fail("AllConfigsDiverged", "baseline configuration diverged");
        report.baseline = slot.result;
        report.baseline.config.enumeration_index = -1; // not a grid cell
    }

    report.improvement_percent =
        improvement_percent(report.baseline.test_rmse, report.results[static_cast<std::size_t>(report.winner_index)].test_rmse);
    return report;
}

TuneReport grid_search(const GridSpec& grid, const SplitDataset& split, const ModelSpec& base_spec,
                       const TrainConfig& base_cfg, std::uint64_t master_seed, int workers) {
    const CellRunner runner = [&](const GridCandidate& candidate, std::uint64_t seed) {
        ModelSpec spec = base_spec;
        spec.neurons = candidate.neurons;
        spec.extra_layer = candidate.extra_layer;
        spec.dropout = candidate.dropout;
        TrainConfig cfg = base_cfg;
        cfg.batch_size = candidate.batch_size;
        cfg.shuffle_seed = derive_seed(seed, 1);
        cfg.checkpoint_sink = nullptr;
        const TrainOutcome outcome = train(spec, split, cfg, derive_seed(seed, 0));
        CellOutcome cell;
        cell.stop_reason = outcome.report.stop_reason;
        cell.best_epoch = outcome.report.best_epoch;
        if (cell.stop_reason != StopReason::diverged) {
            double best_val = std::numeric_limits<double>::infinity();
            for (const EpochRecord& r : outcome.report.history) best_val = std::min(best_val, r.val_loss);
            cell.val_rmse = std::sqrt(best_val);
            cell.test_rmse = outcome.report.test_metrics.rmse;
        }
        return cell;
    };
    return grid_search(grid, runner, master_seed, workers);
}

std::string reference_improvement_line(double achieved_percent) {
    const double reference = improvement_percent(kReferenceBaselineRmse, kReferenceTunedRmse);
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "improvement over baseline: %.2f%% (reference tuned run: 0.0597 -> 0.0282 = %.2f%%, ~53%%)",
                  achieved_percent, reference);
    return buf;
}

} // namespace stockpred
