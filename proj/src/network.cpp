#include "stockpred/network.hpp"

#include <cmath>

#include "stockpred/errors.hpp"
#include "stockpred/prng.hpp"

namespace stockpred {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd sigmoid(const MatrixXd& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

void check_spec(const ModelSpec& spec) {
    if (spec.neurons < 1) fail("InvalidSpec", "neurons must be >= 1");
    if (!(spec.dropout >= 0.0 && spec.dropout < 1.0)) fail("InvalidSpec", "dropout must be in [0,1)");
    if (spec.input_dim < 1) fail("InvalidSpec", "input_dim must be >= 1");
    if (spec.time_steps < 1) fail("InvalidSpec", "time_steps must be >= 1");
}

// Inverted dropout mask: 0 with probability p, else 1/(1-p).
MatrixXd draw_mask(Index rows, Index cols, double p, SplitMix64& rng) {
    MatrixXd mask(rows, cols);
    if (p == 0.0) {
        mask.setOnes();
        return mask;
    }
    const double keep_scale = 1.0 / (1.0 - p);
    double* data = mask.data();
    for (Index k = 0; k < mask.size(); ++k) {
        data[k] = rng.next_double() < p ? 0.0 : keep_scale;
    }
    return mask;
}

LayerCache run_lstm_layer(const RecurrentParams& p, std::vector<MatrixXd> inputs) {
    const Index H = p.recurrent_kernel.cols();
    const Index B = inputs.front().cols();
    const int T = static_cast<int>(inputs.size());

    LayerCache cache;
    cache.is_gru = false;
    cache.inputs = std::move(inputs);
    cache.h.reserve(static_cast<std::size_t>(T) + 1);
    cache.c.reserve(static_cast<std::size_t>(T) + 1);
    cache.h.push_back(MatrixXd::Zero(H, B));
    cache.c.push_back(MatrixXd::Zero(H, B));
    for (int t = 0; t < T; ++t) {
        LstmStepResult step = lstm_cell_forward(p, cache.inputs[static_cast<std::size_t>(t)], cache.h.back(), cache.c.back());
        cache.gate_i.push_back(std::move(step.i));
        cache.gate_f.push_back(std::move(step.f));
        cache.gate_g.push_back(std::move(step.g));
        cache.gate_o.push_back(std::move(step.o));
        cache.c.push_back(std::move(step.c));
        cache.h.push_back(std::move(step.h));
    }
    return cache;
}

LayerCache run_gru_layer(const RecurrentParams& p, std::vector<MatrixXd> inputs) {
    const Index H = p.recurrent_kernel.cols();
    const Index B = inputs.front().cols();
    const int T = static_cast<int>(inputs.size());

    LayerCache cache;
    cache.is_gru = true;
    cache.inputs = std::move(inputs);
    cache.h.reserve(static_cast<std::size_t>(T) + 1);
    cache.h.push_back(MatrixXd::Zero(H, B));
    for (int t = 0; t < T; ++t) {
        GruStepResult step = gru_cell_forward(p, cache.inputs[static_cast<std::size_t>(t)], cache.h.back());
        cache.gate_z.push_back(std::move(step.z));
        cache.gate_r.push_back(std::move(step.r));
        cache.gate_n.push_back(std::move(step.n));
        cache.reset_h.push_back(std::move(step.reset_h));
        cache.h.push_back(std::move(step.h));
    }
    return cache;
}

struct LayerBackwardResult {
    RecurrentParams grads;
    std::vector<MatrixXd> input_grads; // T entries, D_in x B
};

// dh_seq[t] is the loss gradient injected at the layer's step-t output,
// excluding the recurrent path (which this routine carries itself).
LayerBackwardResult lstm_layer_backward(const RecurrentParams& p, const LayerCache& cache,
                                        const std::vector<MatrixXd>& dh_seq) {
    const Index H = p.recurrent_kernel.cols();
    const int T = static_cast<int>(cache.inputs.size());
    const Index B = cache.inputs.front().cols();

    LayerBackwardResult out;
    out.grads.input_kernel = MatrixXd::Zero(p.input_kernel.rows(), p.input_kernel.cols());
    out.grads.recurrent_kernel = MatrixXd::Zero(p.recurrent_kernel.rows(), p.recurrent_kernel.cols());
    out.grads.bias = VectorXd::Zero(p.bias.size());
    out.input_grads.resize(static_cast<std::size_t>(T));

    MatrixXd dh_carry = MatrixXd::Zero(H, B);
    MatrixXd dc_carry = MatrixXd::Zero(H, B);
    MatrixXd pre(4 * H, B);
    for (int t = T - 1; t >= 0; --t) {
        const std::size_t ut = static_cast<std::size_t>(t);
        const MatrixXd& i = cache.gate_i[ut];
        const MatrixXd& f = cache.gate_f[ut];
        const MatrixXd& g = cache.gate_g[ut];
        const MatrixXd& o = cache.gate_o[ut];
        const MatrixXd& c_prev = cache.c[ut];
        const MatrixXd& c_now = cache.c[ut + 1];
        const MatrixXd& h_prev = cache.h[ut];

        const MatrixXd dh = dh_seq[ut] + dh_carry;
        const MatrixXd tanh_c = c_now.array().tanh().matrix();

        MatrixXd dc = dc_carry;
        dc.array() += dh.array() * o.array() * (1.0 - tanh_c.array().square());

        pre.topRows(H) = (dc.array() * g.array() * i.array() * (1.0 - i.array())).matrix();                 // d pre_i
        pre.middleRows(H, H) = (dc.array() * c_prev.array() * f.array() * (1.0 - f.array())).matrix();      // d pre_f
        pre.middleRows(2 * H, H) = (dc.array() * i.array() * (1.0 - g.array().square())).matrix();          // d pre_g
        pre.bottomRows(H) = (dh.array() * tanh_c.array() * o.array() * (1.0 - o.array())).matrix();         // d pre_o

        out.grads.input_kernel.noalias() += pre * cache.inputs[ut].transpose();
        out.grads.recurrent_kernel.noalias() += pre * h_prev.transpose();
        out.grads.bias.noalias() += pre.rowwise().sum();

        out.input_grads[ut].noalias() = p.input_kernel.transpose() * pre;
        dh_carry.noalias() = p.recurrent_kernel.transpose() * pre;
        dc_carry = (dc.array() * f.array()).matrix();
    }
    return out;
}

LayerBackwardResult gru_layer_backward(const RecurrentParams& p, const LayerCache& cache,
                                       const std::vector<MatrixXd>& dh_seq) {
    const Index H = p.recurrent_kernel.cols();
    const int T = static_cast<int>(cache.inputs.size());
    const Index B = cache.inputs.front().cols();

    const auto Uz = p.recurrent_kernel.topRows(H);
    const auto Ur = p.recurrent_kernel.middleRows(H, H);
    const auto Un = p.recurrent_kernel.bottomRows(H);

    LayerBackwardResult out;
    out.grads.input_kernel = MatrixXd::Zero(p.input_kernel.rows(), p.input_kernel.cols());
    out.grads.recurrent_kernel = MatrixXd::Zero(p.recurrent_kernel.rows(), p.recurrent_kernel.cols());
    out.grads.bias = VectorXd::Zero(p.bias.size());
    out.input_grads.resize(static_cast<std::size_t>(T));

    MatrixXd dh_carry = MatrixXd::Zero(H, B);
    for (int t = T - 1; t >= 0; --t) {
        const std::size_t ut = static_cast<std::size_t>(t);
        const MatrixXd& z = cache.gate_z[ut];
        const MatrixXd& r = cache.gate_r[ut];
        const MatrixXd& n = cache.gate_n[ut];
        const MatrixXd& h_prev = cache.h[ut];
        const MatrixXd& rh = cache.reset_h[ut];

        const MatrixXd dh = dh_seq[ut] + dh_carry;

        // h = z (.) h_prev + (1-z) (.) n
        const MatrixXd pre_z = (dh.array() * (h_prev.array() - n.array()) * z.array() * (1.0 - z.array())).matrix();
        const MatrixXd pre_n = (dh.array() * (1.0 - z.array()) * (1.0 - n.array().square())).matrix();
        const MatrixXd un_back = Un.transpose() * pre_n; // gradient reaching r (.) h_prev
        const MatrixXd pre_r = (un_back.array() * h_prev.array() * r.array() * (1.0 - r.array())).matrix();

        out.grads.input_kernel.topRows(H).noalias() += pre_z * cache.inputs[ut].transpose();
        out.grads.input_kernel.middleRows(H, H).noalias() += pre_r * cache.inputs[ut].transpose();
        out.grads.input_kernel.bottomRows(H).noalias() += pre_n * cache.inputs[ut].transpose();
        out.grads.recurrent_kernel.topRows(H).noalias() += pre_z * h_prev.transpose();
        out.grads.recurrent_kernel.middleRows(H, H).noalias() += pre_r * h_prev.transpose();
        out.grads.recurrent_kernel.bottomRows(H).noalias() += pre_n * rh.transpose();
        out.grads.bias.head(H).noalias() += pre_z.rowwise().sum();
        out.grads.bias.segment(H, H).noalias() += pre_r.rowwise().sum();
        out.grads.bias.tail(H).noalias() += pre_n.rowwise().sum();

        out.input_grads[ut].noalias() = p.input_kernel.topRows(H).transpose() * pre_z;
        out.input_grads[ut].noalias() += p.input_kernel.middleRows(H, H).transpose() * pre_r;
        out.input_grads[ut].noalias() += p.input_kernel.bottomRows(H).transpose() * pre_n;

        dh_carry = (dh.array() * z.array() + un_back.array() * r.array()).matrix();
        dh_carry.noalias() += Uz.transpose() * pre_z;
        dh_carry.noalias() += Ur.transpose() * pre_r;
    }
    return out;
}

RecurrentParams make_recurrent(int gates, Index H, Index D_in) {
    RecurrentParams p;
    p.input_kernel = MatrixXd::Zero(gates * H, D_in);
    p.recurrent_kernel = MatrixXd::Zero(gates * H, H);
    p.bias = VectorXd::Zero(gates * H);
    return p;
}

void glorot_fill(MatrixXd& kernel, SplitMix64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(kernel.rows() + kernel.cols()));
    double* data = kernel.data();
    for (Index k = 0; k < kernel.size(); ++k) data[k] = rng.next_symmetric(limit);
}

} // namespace

const char* to_string(ExtraLayer layer) {
    switch (layer) {
        case ExtraLayer::none: return "none";
        case ExtraLayer::lstm: return "lstm";
        case ExtraLayer::gru: return "gru";
    }
    return "none";
}

ExtraLayer extra_layer_from_string(const std::string& name) {
    if (name == "none") return ExtraLayer::none;
    if (name == "lstm") return ExtraLayer::lstm;
    if (name == "gru") return ExtraLayer::gru;
    fail("InvalidSpec", "extra layer must be none|lstm|gru, got '" + name + "'");
}

std::vector<std::pair<double*, Eigen::Index>> param_spans(NetworkState& state) {
    std::vector<std::pair<double*, Index>> spans;
    auto add = [&spans](RecurrentParams& p) {
        spans.emplace_back(p.input_kernel.data(), p.input_kernel.size());
        spans.emplace_back(p.recurrent_kernel.data(), p.recurrent_kernel.size());
        spans.emplace_back(p.bias.data(), p.bias.size());
    };
    add(state.base);
    if (state.extra) add(*state.extra);
    spans.emplace_back(state.head.weight.data(), state.head.weight.size());
    spans.emplace_back(&state.head.bias, 1);
    return spans;
}

std::vector<std::pair<const double*, Eigen::Index>> param_spans(const NetworkState& state) {
    auto mutable_spans = param_spans(const_cast<NetworkState&>(state));
    std::vector<std::pair<const double*, Index>> spans;
    spans.reserve(mutable_spans.size());
    for (const auto& [ptr, n] : mutable_spans) spans.emplace_back(ptr, n);
    return spans;
}

NetworkState zeros_like(const NetworkState& state) {
    NetworkState z = state;
    for (auto& [ptr, n] : param_spans(z)) {
        for (Index k = 0; k < n; ++k) ptr[k] = 0.0;
    }
    return z;
}

NetworkState init_network(const ModelSpec& spec, std::uint64_t seed) {
    check_spec(spec);
    const Index H = spec.neurons;
    NetworkState state;
    state.base = make_recurrent(4, H, spec.input_dim);
    if (spec.extra_layer == ExtraLayer::lstm) {
        state.extra = make_recurrent(4, H, H);
    } else if (spec.extra_layer == ExtraLayer::gru) {
        state.extra = make_recurrent(3, H, H);
    }
    state.head.weight = VectorXd::Zero(H);
    state.head.bias = 0.0;

    SplitMix64 rng(seed);
    glorot_fill(state.base.input_kernel, rng);
    glorot_fill(state.base.recurrent_kernel, rng);
    if (state.extra) {
        glorot_fill(state.extra->input_kernel, rng);
        glorot_fill(state.extra->recurrent_kernel, rng);
    }
    {
        // Head kernel gets the same treatment: fan_in = H, fan_out = 1.
        const double limit = std::sqrt(6.0 / static_cast<double>(H + 1));
        for (Index k = 0; k < H; ++k) state.head.weight[k] = rng.next_symmetric(limit);
    }

    state.base.bias.segment(H, H).setOnes(); // forget gate opens the memory path early
    if (state.extra && spec.extra_layer == ExtraLayer::lstm) state.extra->bias.segment(H, H).setOnes();
    return state;
}

Batch gather_batch(const WindowedDataset& ds, const std::vector<int>& indices) {
    const int T = ds.time_steps();
    const Index D = ds.input_dim();
    const Index B = static_cast<Index>(indices.size());
    Batch batch;
    batch.steps.reserve(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        MatrixXd step(D, B);
        for (Index j = 0; j < B; ++j) step.col(j) = ds.steps[static_cast<std::size_t>(t)].col(indices[static_cast<std::size_t>(j)]);
        batch.steps.push_back(std::move(step));
    }
    return batch;
}

Eigen::VectorXd gather_targets(const WindowedDataset& ds, const std::vector<int>& indices) {
    VectorXd targets(static_cast<Index>(indices.size()));
    for (Index j = 0; j < targets.size(); ++j) targets[j] = ds.targets[indices[static_cast<std::size_t>(j)]];
    return targets;
}

LstmStepResult lstm_cell_forward(const RecurrentParams& p, const MatrixXd& x, const MatrixXd& h_prev,
                                 const MatrixXd& c_prev) {
    const Index H = p.recurrent_kernel.cols();
    const Index B = x.cols();
    MatrixXd pre = p.input_kernel * x + p.recurrent_kernel * h_prev + p.bias.replicate(1, B);
    LstmStepResult r;
    r.i = sigmoid(pre.topRows(H));
    r.f = sigmoid(pre.middleRows(H, H));
    r.g = pre.middleRows(2 * H, H).array().tanh().matrix();
    r.o = sigmoid(pre.bottomRows(H));
    r.c = (r.f.array() * c_prev.array() + r.i.array() * r.g.array()).matrix();
    r.h = (r.o.array() * r.c.array().tanh()).matrix();
    return r;
}

GruStepResult gru_cell_forward(const RecurrentParams& p, const MatrixXd& x, const MatrixXd& h_prev) {
    const Index H = p.recurrent_kernel.cols();
    const Index B = x.cols();
    MatrixXd pre_zr = p.input_kernel.topRows(2 * H) * x + p.recurrent_kernel.topRows(2 * H) * h_prev +
                      p.bias.head(2 * H).replicate(1, B);
    GruStepResult r;
    r.z = sigmoid(pre_zr.topRows(H));
    r.r = sigmoid(pre_zr.bottomRows(H));
    r.reset_h = (r.r.array() * h_prev.array()).matrix();
    MatrixXd pre_n = p.input_kernel.bottomRows(H) * x + p.recurrent_kernel.bottomRows(H) * r.reset_h +
                     p.bias.tail(H).replicate(1, B);
    r.n = pre_n.array().tanh().matrix();
    r.h = (r.z.array() * h_prev.array() + (1.0 - r.z.array()) * r.n.array()).matrix();
    return r;
}

ForwardResult forward(const NetworkState& state, const ModelSpec& spec, const Batch& batch, RunMode mode,
                      std::uint64_t dropout_seed) {
    check_spec(spec);
    if (batch.time_steps() != spec.time_steps) {
        fail("ShapeMismatch", "batch has " + std::to_string(batch.time_steps()) + " steps, spec wants " +
                                  std::to_string(spec.time_steps));
    }
    if (batch.steps.front().rows() != spec.input_dim) {
        fail("ShapeMismatch", "batch input_dim " + std::to_string(batch.steps.front().rows()) + ", spec wants " +
                                  std::to_string(spec.input_dim));
    }
    const Index H = spec.neurons;
    const Index B = batch.steps.front().cols();
    const int T = spec.time_steps;
    const bool train = mode == RunMode::train;

    SplitMix64 rng(dropout_seed);
    ForwardResult result;
    ForwardCaches& caches = result.caches;

    caches.base = run_lstm_layer(state.base, batch.steps);

    MatrixXd stack_out;
    if (state.extra) {
        std::vector<MatrixXd> mid_inputs;
        mid_inputs.reserve(static_cast<std::size_t>(T));
        if (train) {
            caches.base_seq_masks.reserve(static_cast<std::size_t>(T));
            for (int t = 0; t < T; ++t) {
                caches.base_seq_masks.push_back(draw_mask(H, B, spec.dropout, rng));
                mid_inputs.push_back(
                    (caches.base.h[static_cast<std::size_t>(t) + 1].array() * caches.base_seq_masks.back().array())
                        .matrix());
            }
        } else {
            for (int t = 0; t < T; ++t) mid_inputs.push_back(caches.base.h[static_cast<std::size_t>(t) + 1]);
        }
        caches.extra = spec.extra_layer == ExtraLayer::gru ? run_gru_layer(*state.extra, std::move(mid_inputs))
                                                           : run_lstm_layer(*state.extra, std::move(mid_inputs));
        stack_out = caches.extra->h.back();
    } else {
        stack_out = caches.base.h.back();
    }

    if (train) {
        caches.final_mask = draw_mask(H, B, spec.dropout, rng);
        caches.head_input = (stack_out.array() * caches.final_mask.array()).matrix();
    } else {
        caches.head_input = std::move(stack_out);
    }

    result.predictions = ((caches.head_input.transpose() * state.head.weight).array() + state.head.bias).matrix();
    if (!caches.head_input.allFinite() || !result.predictions.allFinite()) {
        fail("NonFiniteActivation", "forward pass produced non-finite values");
    }
    return result;
}

double mse_loss(const VectorXd& pred, const VectorXd& target) {
    if (pred.size() != target.size()) {
        fail("LengthMismatch",
             "pred has " + std::to_string(pred.size()) + " entries, target " + std::to_string(target.size()));
    }
    if (pred.size() == 0) fail("LengthMismatch", "empty vectors");
    return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

double rmse(const VectorXd& pred, const VectorXd& target) { return std::sqrt(mse_loss(pred, target)); }

Gradients backward(const NetworkState& state, const ModelSpec& spec, const ForwardResult& fwd,
                   const VectorXd& target) {
    const ForwardCaches& caches = fwd.caches;
    const Index B = fwd.predictions.size();
    if (target.size() != B) {
        fail("LengthMismatch",
             "target has " + std::to_string(target.size()) + " entries, predictions " + std::to_string(B));
    }
    const int T = spec.time_steps;
    const Index H = spec.neurons;

    Gradients grads = zeros_like(state);

    // d mse / d pred
    const VectorXd dpred = 2.0 / static_cast<double>(B) * (fwd.predictions - target);

    grads.head.weight.noalias() = caches.head_input * dpred;
    grads.head.bias = dpred.sum();

    MatrixXd d_stack_out = state.head.weight * dpred.transpose(); // H x B
    if (caches.final_mask.size() > 0) d_stack_out.array() *= caches.final_mask.array();

    std::vector<MatrixXd> dh_base(static_cast<std::size_t>(T));
    if (caches.extra) {
        std::vector<MatrixXd> dh_extra(static_cast<std::size_t>(T), MatrixXd::Zero(H, B));
        dh_extra.back() = std::move(d_stack_out);
        LayerBackwardResult extra_back = caches.extra->is_gru
                                             ? gru_layer_backward(*state.extra, *caches.extra, dh_extra)
                                             : lstm_layer_backward(*state.extra, *caches.extra, dh_extra);
        grads.extra = std::move(extra_back.grads);
        for (int t = 0; t < T; ++t) {
            const std::size_t ut = static_cast<std::size_t>(t);
            dh_base[ut] = std::move(extra_back.input_grads[ut]);
            if (!caches.base_seq_masks.empty()) dh_base[ut].array() *= caches.base_seq_masks[ut].array();
        }
    } else {
        for (int t = 0; t + 1 < T; ++t) dh_base[static_cast<std::size_t>(t)] = MatrixXd::Zero(H, B);
        dh_base.back() = std::move(d_stack_out);
    }

    LayerBackwardResult base_back = lstm_layer_backward(state.base, caches.base, dh_base);
    grads.base = std::move(base_back.grads);

    for (const auto& [ptr, n] : param_spans(grads)) {
        for (Index k = 0; k < n; ++k) {
            if (!std::isfinite(ptr[k])) fail("NonFiniteGradient", "backward pass produced non-finite values");
        }
    }
    return grads;
}

Gradients numeric_gradient(const NetworkState& state, const ModelSpec& spec, const Batch& batch,
                           const VectorXd& target, double epsilon) {
    NetworkState probe = state;
    Gradients grads = zeros_like(state);
    auto probe_spans = param_spans(probe);
    auto grad_spans = param_spans(grads);

    // Dropout stays off: eval-mode forwards probe the same loss surface the
    // analytic gradients describe at p = 0.
    const auto loss_at = [&]() {
        const ForwardResult fwd = forward(probe, spec, batch, RunMode::eval);
        return mse_loss(fwd.predictions, target);
    };

    for (std::size_t s = 0; s < probe_spans.size(); ++s) {
        double* theta = probe_spans[s].first;
        double* grad = grad_spans[s].first;
        for (Index k = 0; k < probe_spans[s].second; ++k) {
            const double saved = theta[k];
            theta[k] = saved + epsilon;
            const double loss_plus = loss_at();
            theta[k] = saved - epsilon;
            const double loss_minus = loss_at();
            theta[k] = saved;
            grad[k] = (loss_plus - loss_minus) / (2.0 * epsilon);
        }
    }
    return grads;
}

OptimizerState OptimizerState::create(const NetworkState& state, AdamConfig config) {
    OptimizerState opt;
    opt.config = config;
    opt.step_count = 0;
    opt.first_moment = zeros_like(state);
    opt.second_moment = zeros_like(state);
    return opt;
}

void adam_step(OptimizerState& opt, NetworkState& state, const Gradients& grads) {
    opt.step_count += 1;
    const AdamConfig& cfg = opt.config;
    const double correction1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.step_count));
    const double correction2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.step_count));

    auto theta = param_spans(state);
    auto g = param_spans(grads);
    auto m = param_spans(opt.first_moment);
    auto v = param_spans(opt.second_moment);
    for (std::size_t s = 0; s < theta.size(); ++s) {
        double* th = theta[s].first;
        const double* gr = g[s].first;
        double* m1 = m[s].first;
        double* m2 = v[s].first;
        for (Index k = 0; k < theta[s].second; ++k) {
            m1[k] = cfg.beta1 * m1[k] + (1.0 - cfg.beta1) * gr[k];
            m2[k] = cfg.beta2 * m2[k] + (1.0 - cfg.beta2) * gr[k] * gr[k];
            const double m_hat = m1[k] / correction1;
            const double v_hat = m2[k] / correction2;
            th[k] -= cfg.alpha * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
    }
}

} // namespace stockpred
