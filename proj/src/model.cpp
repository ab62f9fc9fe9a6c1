#include "fedawa/model.hpp"

#include <algorithm>
#include <cmath>

#include "fedawa/rng.hpp"

namespace fedawa {

void MlpConfig::validate() const {
    if (layer_sizes.size() < 2) throw ConfigError("model.layers: need at least input and output sizes");
    for (const int s : layer_sizes) {
        if (s < 1) throw ConfigError("model.layers: all sizes must be positive");
    }
}

void TrainConfig::validate() const {
    if (!(initial_lr > 0.0)) throw ConfigError("train.initial_lr: must be > 0");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("train.lr_decay: must be in (0, 1]");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum: must be in [0, 1)");
    if (weight_decay < 0.0) throw ConfigError("train.weight_decay: must be >= 0");
    if (local_epochs < 1) throw ConfigError("train.local_epochs: must be >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
    if (prox_mu < 0.0) throw ConfigError("train.prox_mu: must be >= 0");
}

double TrainConfig::round_lr(int round) const {
    return initial_lr * std::pow(lr_decay, round - 1);
}

LayerLayout mlp_layout(const MlpConfig& cfg) {
    cfg.validate();
    std::vector<std::pair<std::string, std::size_t>> parts;
    for (std::size_t l = 0; l + 1 < cfg.layer_sizes.size(); ++l) {
        const std::size_t fan_in = static_cast<std::size_t>(cfg.layer_sizes[l]);
        const std::size_t fan_out = static_cast<std::size_t>(cfg.layer_sizes[l + 1]);
        parts.emplace_back("w" + std::to_string(l), fan_in * fan_out);
        parts.emplace_back("b" + std::to_string(l), fan_out);
    }
    return LayerLayout::from_lengths(parts);
}

ParamVector init_params(const MlpConfig& cfg) {
    const LayerLayout layout = mlp_layout(cfg);
    std::vector<double> values(layout.total_len(), 0.0);
    Rng rng(cfg.init_seed);
    std::size_t pos = 0;
    for (std::size_t l = 0; l + 1 < cfg.layer_sizes.size(); ++l) {
        const double fan_in = cfg.layer_sizes[l];
        const double fan_out = cfg.layer_sizes[l + 1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        const std::size_t w_len = static_cast<std::size_t>(fan_in) * static_cast<std::size_t>(fan_out);
        for (std::size_t i = 0; i < w_len; ++i) values[pos++] = rng.uniform(-bound, bound);
        pos += static_cast<std::size_t>(fan_out); // biases stay zero
    }
    return ParamVector(std::move(values), layout);
}

namespace {

struct ForwardState {
    // activations[0] is the input; activations[l+1] the output of layer l
    // (post-activation except for the final layer, which holds raw logits).
    std::vector<std::vector<double>> activations;
};

std::vector<double> run_forward(const ParamVector& params, const MlpConfig& cfg, const Batch& batch,
                                ForwardState* state) {
    cfg.validate();
    if (params.layout() != mlp_layout(cfg)) throw LayoutError("forward: params do not match model config");
    if (batch.dim != static_cast<std::size_t>(cfg.layer_sizes.front())) {
        throw DomainError("forward: batch dim " + std::to_string(batch.dim) + " vs model input " +
                          std::to_string(cfg.layer_sizes.front()));
    }
    if (batch.features.size() != batch.rows * batch.dim || batch.labels.size() != batch.rows) {
        throw DomainError("forward: inconsistent batch buffers");
    }

    const std::size_t n_layers = cfg.weight_layers();
    const double* p = params.values().data();
    std::vector<double> cur = batch.features;
    std::size_t cur_dim = batch.dim;
    if (state) state->activations.push_back(cur);

    std::size_t pos = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const std::size_t in = static_cast<std::size_t>(cfg.layer_sizes[l]);
        const std::size_t out = static_cast<std::size_t>(cfg.layer_sizes[l + 1]);
        const double* w = p + pos;
        const double* b = p + pos + in * out;
        pos += in * out + out;

        std::vector<double> next(batch.rows * out);
        for (std::size_t r = 0; r < batch.rows; ++r) {
            const double* x = cur.data() + r * cur_dim;
            double* y = next.data() + r * out;
            for (std::size_t j = 0; j < out; ++j) y[j] = b[j];
            for (std::size_t i = 0; i < in; ++i) {
                const double xi = x[i];
                const double* wrow = w + i * out;
                for (std::size_t j = 0; j < out; ++j) y[j] += xi * wrow[j];
            }
        }
        if (l + 1 < n_layers) {
            if (cfg.activation == Activation::kRelu) {
                for (double& v : next) v = v > 0.0 ? v : 0.0;
            } else {
                for (double& v : next) v = std::tanh(v);
            }
        }
        cur = std::move(next);
        cur_dim = out;
        if (state) state->activations.push_back(cur);
    }
    for (const double v : cur) {
        if (!std::isfinite(v)) {
            throw NumericError("forward: non-finite logits (batch of " + std::to_string(batch.rows) + " rows)");
        }
    }
    return cur;
}

} // namespace

std::vector<double> forward(const ParamVector& params, const MlpConfig& cfg, const Batch& batch) {
    return run_forward(params, cfg, batch, nullptr);
}

std::pair<double, ParamVector> loss_and_grad(const ParamVector& params, const MlpConfig& cfg, const Batch& batch) {
    if (batch.rows == 0) throw DomainError("loss_and_grad: empty batch");
    ForwardState state;
    std::vector<double> logits = run_forward(params, cfg, batch, &state);

    const std::size_t classes = static_cast<std::size_t>(cfg.layer_sizes.back());
    const double inv_rows = 1.0 / static_cast<double>(batch.rows);
    double loss = 0.0;
    // dZ for the last layer: (softmax - onehot) / rows.
    std::vector<double> dz(batch.rows * classes);
    for (std::size_t r = 0; r < batch.rows; ++r) {
        const double* z = logits.data() + r * classes;
        double zmax = z[0];
        for (std::size_t c = 1; c < classes; ++c) zmax = std::max(zmax, z[c]);
        double denom = 0.0;
        for (std::size_t c = 0; c < classes; ++c) denom += std::exp(z[c] - zmax);
        const int y = batch.labels[r];
        if (y < 0 || static_cast<std::size_t>(y) >= classes) throw DomainError("loss_and_grad: label out of range");
        loss += -(z[y] - zmax - std::log(denom));
        for (std::size_t c = 0; c < classes; ++c) {
            const double p = std::exp(z[c] - zmax) / denom;
            dz[r * classes + c] = (p - (static_cast<std::size_t>(y) == c ? 1.0 : 0.0)) * inv_rows;
        }
    }
    loss *= inv_rows;

    const std::size_t n_layers = cfg.weight_layers();
    ParamVector grad = ParamVector::zeros(params.layout());
    double* g = grad.values_mut().data();
    const double* p = params.values().data();

    std::vector<std::size_t> offsets(n_layers);
    {
        std::size_t pos = 0;
        for (std::size_t l = 0; l < n_layers; ++l) {
            offsets[l] = pos;
            pos += static_cast<std::size_t>(cfg.layer_sizes[l]) * static_cast<std::size_t>(cfg.layer_sizes[l + 1]) +
                   static_cast<std::size_t>(cfg.layer_sizes[l + 1]);
        }
    }

    std::vector<double> delta = std::move(dz);
    for (std::size_t l = n_layers; l-- > 0;) {
        const std::size_t in = static_cast<std::size_t>(cfg.layer_sizes[l]);
        const std::size_t out = static_cast<std::size_t>(cfg.layer_sizes[l + 1]);
        const std::vector<double>& h = state.activations[l];
        double* gw = g + offsets[l];
        double* gb = g + offsets[l] + in * out;

        for (std::size_t r = 0; r < batch.rows; ++r) {
            const double* x = h.data() + r * in;
            const double* d = delta.data() + r * out;
            for (std::size_t i = 0; i < in; ++i) {
                const double xi = x[i];
                double* grow = gw + i * out;
                for (std::size_t j = 0; j < out; ++j) grow[j] += xi * d[j];
            }
            for (std::size_t j = 0; j < out; ++j) gb[j] += d[j];
        }

        if (l > 0) {
            const double* w = p + offsets[l];
            std::vector<double> prev(batch.rows * in, 0.0);
            for (std::size_t r = 0; r < batch.rows; ++r) {
                const double* d = delta.data() + r * out;
                double* pd = prev.data() + r * in;
                for (std::size_t i = 0; i < in; ++i) {
                    const double* wrow = w + i * out;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < out; ++j) acc += wrow[j] * d[j];
                    pd[i] = acc;
                }
            }
            // Through the activation of layer l-1; h holds its outputs.
            if (cfg.activation == Activation::kRelu) {
                for (std::size_t i = 0; i < prev.size(); ++i) {
                    if (h[i] <= 0.0) prev[i] = 0.0;
                }
            } else {
                for (std::size_t i = 0; i < prev.size(); ++i) prev[i] *= 1.0 - h[i] * h[i];
            }
            delta = std::move(prev);
        }
    }
    grad.check_finite("loss_and_grad");
    return {loss, std::move(grad)};
}

namespace {

Batch gather_batch(const Dataset& dataset, const std::vector<std::size_t>& order, std::size_t begin,
                   std::size_t end) {
    Batch b;
    b.rows = end - begin;
    b.dim = dataset.dim;
    b.features.resize(b.rows * b.dim);
    b.labels.resize(b.rows);
    for (std::size_t r = 0; r < b.rows; ++r) {
        const std::size_t src = order[begin + r];
        std::copy_n(dataset.row(src), dataset.dim, b.features.data() + r * b.dim);
        b.labels[r] = dataset.labels[src];
    }
    return b;
}

} // namespace

LocalTrainResult local_train(const ParamVector& theta_g, const MlpConfig& cfg, const Dataset& dataset,
                             const ClientPartition& partition, const TrainConfig& tc, double round_lr,
                             std::uint64_t rng_seed) {
    tc.validate();
    if (partition.indices.empty()) throw DomainError("local_train: empty partition");
    if (round_lr < 0.0) throw DomainError("local_train: negative learning rate");
    partition.validate(dataset.n);

    ParamVector theta = theta_g;
    std::vector<double> velocity(theta.size(), 0.0);
    std::vector<std::size_t> order = partition.indices;
    Rng rng(rng_seed);
    const std::size_t batch_size = static_cast<std::size_t>(tc.batch_size);

    double loss_sum = 0.0;
    std::size_t batch_count = 0;
    for (int epoch = 0; epoch < tc.local_epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
            const std::size_t end = std::min(begin + batch_size, order.size());
            const Batch batch = gather_batch(dataset, order, begin, end);
            auto [loss, grad] = loss_and_grad(theta, cfg, batch);
            loss_sum += loss;
            ++batch_count;

            double* v = velocity.data();
            double* t = theta.values_mut().data();
            const double* g = grad.values().data();
            const double* anchor = theta_g.values().data();
            for (std::size_t i = 0; i < theta.size(); ++i) {
                double gi = g[i] + tc.weight_decay * t[i];
                if (tc.prox_mu > 0.0) gi += tc.prox_mu * (t[i] - anchor[i]);
                v[i] = tc.momentum * v[i] + gi;
                t[i] -= round_lr * v[i];
            }
        }
    }
    theta.check_finite("local_train result");
    return {std::move(theta), batch_count > 0 ? loss_sum / static_cast<double>(batch_count) : 0.0};
}

double evaluate(const ParamVector& params, const MlpConfig& cfg, const Dataset& dataset) {
    if (dataset.n == 0) throw DomainError("evaluate: empty dataset");
    const std::size_t classes = static_cast<std::size_t>(cfg.layer_sizes.back());
    constexpr std::size_t kChunk = 256;
    std::size_t correct = 0;
    std::vector<std::size_t> order(dataset.n);
    for (std::size_t i = 0; i < dataset.n; ++i) order[i] = i;
    for (std::size_t begin = 0; begin < dataset.n; begin += kChunk) {
        const std::size_t end = std::min(begin + kChunk, dataset.n);
        const Batch batch = gather_batch(dataset, order, begin, end);
        const std::vector<double> logits = forward(params, cfg, batch);
        for (std::size_t r = 0; r < batch.rows; ++r) {
            const double* z = logits.data() + r * classes;
            std::size_t best = 0;
            for (std::size_t c = 1; c < classes; ++c) {
                if (z[c] > z[best]) best = c;
            }
            if (static_cast<int>(best) == batch.labels[r]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(dataset.n);
}

} // namespace fedawa
