#pragma once

#include <cstdint>
#include <vector>

#include "fedawa/data.hpp"
#include "fedawa/tensor.hpp"

namespace fedawa {

enum class Activation { kRelu, kTanh };

/// Multilayer-perceptron shape: input dim, hidden dims..., class count.
struct MlpConfig {
    std::vector<int> layer_sizes;
    Activation activation = Activation::kRelu;
    std::uint64_t init_seed = 1;

    void validate() const;
    std::size_t weight_layers() const { return layer_sizes.size() - 1; }
};

/// Client-side SGD hyperparameters. prox_mu > 0 adds the FedProx pull-back
/// term mu*(theta - theta_g) to every gradient step.
struct TrainConfig {
    double initial_lr = 0.08;
    double lr_decay = 0.99;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    int local_epochs = 1;
    int batch_size = 32;
    double prox_mu = 0.0;

    void validate() const;
    /// Learning rate for communication round t >= 1: initial_lr * lr_decay^(t-1).
    double round_lr(int round) const;
};

/// One minibatch, features row-major batch x input_dim.
struct Batch {
    std::vector<double> features;
    std::vector<int> labels;
    std::size_t rows = 0;
    std::size_t dim = 0;
};

/// Layout with one entry per weight matrix (wi, fan_in x fan_out row-major)
/// and one per bias vector (bi).
LayerLayout mlp_layout(const MlpConfig& cfg);

/// Scaled uniform init, bound +-sqrt(6/(fan_in+fan_out)); biases zero.
ParamVector init_params(const MlpConfig& cfg);

/// Raw logits for a batch, rows x class_count.
std::vector<double> forward(const ParamVector& params, const MlpConfig& cfg, const Batch& batch);

/// Mean softmax cross-entropy and its gradient in the params layout.
std::pair<double, ParamVector> loss_and_grad(const ParamVector& params, const MlpConfig& cfg, const Batch& batch);

struct LocalTrainResult {
    ParamVector params;
    double mean_loss = 0.0;
};

/// Algorithm: E epochs of minibatch SGD with momentum and weight decay over
/// the client's slice, shuffled deterministically from rng_seed. theta_g is
/// never mutated; with prox_mu > 0 the prox anchor is theta_g.
LocalTrainResult local_train(const ParamVector& theta_g, const MlpConfig& cfg, const Dataset& dataset,
                             const ClientPartition& partition, const TrainConfig& tc, double round_lr,
                             std::uint64_t rng_seed);

/// Top-1 accuracy; argmax ties resolve to the lowest class index.
double evaluate(const ParamVector& params, const MlpConfig& cfg, const Dataset& dataset);

} // namespace fedawa
