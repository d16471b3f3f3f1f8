#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stockpred/preprocess.hpp"

namespace stockpred {

enum class ExtraLayer { none, lstm, gru };

const char* to_string(ExtraLayer layer);
ExtraLayer extra_layer_from_string(const std::string& name);

// Base layer is always an LSTM with `neurons` units; the optional second
// recurrent layer has the same unit count. Head is one linear unit.
struct ModelSpec {
    int neurons = 16;
    ExtraLayer extra_layer = ExtraLayer::none;
    double dropout = 0.2;
    int input_dim = 5;
    int time_steps = 25;
};

// One recurrent layer's weights. Gates are stacked along rows in a fixed
// order: LSTM (i, f, g, o) -> 4H rows, GRU (z, r, n) -> 3H rows.
struct RecurrentParams {
    Eigen::MatrixXd input_kernel;     // [G*H, D_in]
    Eigen::MatrixXd recurrent_kernel; // [G*H, H]
    Eigen::VectorXd bias;             // [G*H]
};

struct DenseParams {
    Eigen::VectorXd weight; // [H]
    double bias = 0.0;
};

struct NetworkState {
    RecurrentParams base;                 // LSTM
    std::optional<RecurrentParams> extra; // LSTM or GRU per spec
    DenseParams head;
};

// Gradients are shape-congruent with the weights by construction.
using Gradients = NetworkState;

// Contiguous spans over every weight array, in a fixed traversal order
// (base kernels/bias, extra kernels/bias, head weight, head bias). The
// optimizer, serializer and finite-difference oracle all walk this.
std::vector<std::pair<double*, Eigen::Index>> param_spans(NetworkState& state);
std::vector<std::pair<const double*, Eigen::Index>> param_spans(const NetworkState& state);

NetworkState zeros_like(const NetworkState& state);

// Uniform Glorot kernels from a splitmix64 stream (fan_in = columns,
// fan_out = rows); biases zero except LSTM forget-gate slices, which start
// at 1. Deterministic per (spec, seed).
NetworkState init_network(const ModelSpec& spec, std::uint64_t seed);

// Mini-batch laid out step-major: steps[t] is D x B, column per sample.
struct Batch {
    std::vector<Eigen::MatrixXd> steps;
    int batch_size() const { return steps.empty() ? 0 : static_cast<int>(steps.front().cols()); }
    int time_steps() const { return static_cast<int>(steps.size()); }
};

Batch gather_batch(const WindowedDataset& ds, const std::vector<int>& indices);
Eigen::VectorXd gather_targets(const WindowedDataset& ds, const std::vector<int>& indices);

enum class RunMode { train, eval };

// Everything the backward pass needs, captured during forward.
struct LayerCache {
    bool is_gru = false;
    std::vector<Eigen::MatrixXd> inputs; // T entries, D_in x B (post upstream dropout)
    std::vector<Eigen::MatrixXd> h;      // T+1 entries, h[0] = 0
    std::vector<Eigen::MatrixXd> c;      // T+1 entries (LSTM only)
    std::vector<Eigen::MatrixXd> gate_i, gate_f, gate_g, gate_o; // LSTM, T entries
    std::vector<Eigen::MatrixXd> gate_z, gate_r, gate_n, reset_h; // GRU, T entries; reset_h = r (.) h_prev
};

struct ForwardCaches {
    LayerCache base;
    std::optional<LayerCache> extra;
    std::vector<Eigen::MatrixXd> base_seq_masks; // per-step dropout on base output (only when extra layer present)
    Eigen::MatrixXd final_mask;                  // dropout on the stack output feeding the head
    Eigen::MatrixXd head_input;                  // H x B after final dropout
};

struct ForwardResult {
    Eigen::VectorXd predictions; // B
    ForwardCaches caches;
};

// Single-step cells, batched column-wise. Exposed for the scalar fixtures
// and reused by the unrolled layer runners.
struct LstmStepResult {
    Eigen::MatrixXd i, f, g, o, c, h;
};
LstmStepResult lstm_cell_forward(const RecurrentParams& p, const Eigen::MatrixXd& x,
                                 const Eigen::MatrixXd& h_prev, const Eigen::MatrixXd& c_prev);

struct GruStepResult {
    Eigen::MatrixXd z, r, n, h, reset_h;
};
GruStepResult gru_cell_forward(const RecurrentParams& p, const Eigen::MatrixXd& x,
                               const Eigen::MatrixXd& h_prev);

// Unrolls the stack from zero initial state. Train mode draws inverted
// dropout masks (survivors scaled by 1/(1-p)) from splitmix64(dropout_seed);
// eval mode is mask-free and bit-reproducible. Throws NonFiniteActivation
// when the pass produces non-finite values.
ForwardResult forward(const NetworkState& state, const ModelSpec& spec, const Batch& batch, RunMode mode,
                      std::uint64_t dropout_seed = 0);

double mse_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& target);
double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& target);

// Exact BPTT gradients of mse_loss w.r.t. every weight array.
Gradients backward(const NetworkState& state, const ModelSpec& spec, const ForwardResult& fwd,
                   const Eigen::VectorXd& target);

// Central-difference oracle: (loss(th+eps) - loss(th-eps)) / 2eps per
// parameter, dropout disabled. O(P) forward passes; small models only.
Gradients numeric_gradient(const NetworkState& state, const ModelSpec& spec, const Batch& batch,
                           const Eigen::VectorXd& target, double epsilon);

struct AdamConfig {
    double alpha = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
};

struct OptimizerState {
    AdamConfig config;
    long step_count = 0;
    NetworkState first_moment;
    NetworkState second_moment;

    static OptimizerState create(const NetworkState& state, AdamConfig config = {});
};

// t += 1; m,v updated with bias correction; theta -= alpha * m_hat / (sqrt(v_hat) + eps).
void adam_step(OptimizerState& opt, NetworkState& state, const Gradients& grads);

} // namespace stockpred
