#pragma once

#include <cstdint>
#include <vector>

#include "fedawa/data.hpp"
#include "fedawa/tensor.hpp"

namespace fedawa {

/// Per-client aggregation coefficients on the probability simplex:
/// every entry >= 0 and the sum within 1e-9 of 1.
struct AggWeights {
    std::vector<double> lambda;
    int round = 0;

    std::size_t size() const { return lambda.size(); }
    void validate() const;
};

/// K x L coefficients; each layer column is a simplex vector.
struct LayerWeights {
    std::vector<double> lambda; // row-major, clients x layers
    std::size_t clients = 0;
    std::size_t layers = 0;
    int round = 0;

    double at(std::size_t k, std::size_t l) const { return lambda[k * layers + l]; }
    double& at(std::size_t k, std::size_t l) { return lambda[k * layers + l]; }
    std::vector<double> column(std::size_t l) const;
    void validate() const;
};

enum class RegKind { kNone, kEuclid, kCosine };

/// Weight-optimizer knobs. steps == 0 returns the initial weights untouched
/// (used to express the FedAvg reduction). The default step size keeps the
/// per-round drift small; weights then adapt gradually across warm-started
/// rounds instead of concentrating onto single clients.
struct AwaOptions {
    int steps = 200;
    double step_size = 0.0015;
    RegKind reg_kind = RegKind::kCosine;
    double reg_coeff = 1.0;
    bool warm_start = true;

    void validate() const;
};

/// tau_k = theta_k - theta_g.
ClientVector client_vector(const ParamVector& theta_k, const ParamVector& theta_g, int client_id, int round);

/// Sum_k lambda_k * tau_k.
ParamVector merge_vectors(const std::vector<ClientVector>& taus, const AggWeights& w);

/// Dataset-size proportional weights: lambda_k = n_k / sum(n).
AggWeights fedavg_weights(const std::vector<std::size_t>& sample_counts);

/// Dataset-size weights shifted by label-distribution discrepancy:
/// raw_k = max(n_k/sum(n) - a*||hist_k - hist_g||_2 + b, 0), normalized.
/// Falls back to fedavg_weights when every raw weight clips to zero.
AggWeights disco_weights(const std::vector<std::size_t>& sample_counts,
                         const std::vector<LabelHistogram>& local_hists, const LabelHistogram& global_hist,
                         double a, double b);

/// Clipped cosine similarity between local models and the global model,
/// normalized; uniform fallback when all similarities clip to zero.
AggWeights ldawa_weights(const std::vector<ParamVector>& thetas, const ParamVector& theta_g);

/// FedAWA-COS: clipped cosine between each client vector and the w_init-merged
/// global vector, normalized; uniform fallback when all clip to zero.
AggWeights awa_cos_weights(const std::vector<ClientVector>& taus, const AggWeights& w_init);

/// Alignment objective: sum_k lambda_k * ||tau_k - tau_g(lambda)||_2 plus the
/// configured regularizer reg_coeff * d(sum_k lambda_k theta_k, theta_g),
/// where tau_g(lambda) is recomputed from the argument lambda.
double awa_objective(const AggWeights& lambda, const std::vector<ClientVector>& taus,
                     const std::vector<ParamVector>& thetas, const ParamVector& theta_g, const AwaOptions& opts);

/// Objective value and its analytic gradient with respect to the softmax
/// logits z (lambda = softmax(z)); the gradient flows through tau_g(lambda).
std::pair<double, std::vector<double>> awa_objective_grad_z(const std::vector<double>& z,
                                                            const std::vector<ClientVector>& taus,
                                                            const std::vector<ParamVector>& thetas,
                                                            const ParamVector& theta_g, const AwaOptions& opts);

struct OptimizeResult {
    AggWeights weights;
    std::vector<double> trace; // objective at the initial point and after each step
};

/// Gradient descent on z with lambda = softmax(z), z initialized to
/// log(w_init + 1e-8); returns the iterate with the lowest recorded objective.
OptimizeResult optimize_weights(const std::vector<ClientVector>& taus, const std::vector<ParamVector>& thetas,
                                const ParamVector& theta_g, const AggWeights& w_init, const AwaOptions& opts);

struct OptimizeLayerResult {
    LayerWeights weights;
    std::vector<std::vector<double>> traces; // one objective trace per layer
};

/// Independently solves the weight problem restricted to each layout entry.
OptimizeLayerResult optimize_layer_weights(const std::vector<ClientVector>& taus,
                                           const std::vector<ParamVector>& thetas, const ParamVector& theta_g,
                                           const AggWeights& w_init, const AwaOptions& opts);

/// Convex combination sum_k lambda_k * theta_k.
ParamVector aggregate(const std::vector<ParamVector>& thetas, const AggWeights& w);

/// Per-layer convex combination using one simplex column per layout entry.
ParamVector aggregate_layerwise(const std::vector<ParamVector>& thetas, const LayerWeights& w);

} // namespace fedawa
