#pragma once

#include <cstdint>
#include <vector>

#include "fedawa/data.hpp"
#include "fedawa/model.hpp"
#include "fedawa/tensor.hpp"

namespace fedawa {

enum class DistanceMetric { kOneMinusCosine, kOtLabel };

/// Symmetric K x K distance matrix with a zero diagonal.
struct DistanceMatrix {
    std::vector<double> values; // row-major K x K
    std::size_t clients = 0;
    DistanceMetric metric = DistanceMetric::kOneMinusCosine;

    double at(std::size_t i, std::size_t j) const { return values[i * clients + j]; }
};

/// Per-client similarity 1/(1 + d_OT(local_k, global)) in (0, 1].
struct DatasetVector {
    std::vector<double> sims;
};

/// C x C ground cost for histogram transport; 0/1 off-diagonal by default
/// (making the OT distance the total-variation distance).
std::vector<double> uniform_cost(std::size_t classes);
/// |i - j| ground cost.
std::vector<double> absdiff_cost(std::size_t classes);

/// Exact optimal-transport cost between two normalized histograms, solved by
/// successive shortest augmenting paths on the bipartite transportation graph.
double ot_distance(const LabelHistogram& p, const LabelHistogram& q, const std::vector<double>& cost);

DatasetVector dataset_vector(const std::vector<LabelHistogram>& local_hists, const LabelHistogram& global_hist,
                             const std::vector<double>& cost);

/// Pairwise 1 - cosine distances; symmetric by construction, zero diagonal.
DistanceMatrix vector_distance_matrix(const std::vector<ParamVector>& vs);

/// Pairwise OT distances between client label histograms.
DistanceMatrix dataset_distance_matrix(const std::vector<LabelHistogram>& hists, const std::vector<double>& cost);

struct IdealProbe {
    ParamVector tau_ideal;
    std::vector<double> distances; // [ ||tau_g - tau_ideal||, ||tau_1 - tau_ideal||, ... ]
};

/// Trains theta_g on the pooled dataset with the same epoch/lr discipline to
/// obtain tau_ideal, then measures every client vector (and the dataset-size
/// weighted merge tau_g) against it.
IdealProbe ideal_vector_probe(const ParamVector& theta_g, const MlpConfig& cfg, const Dataset& global_dataset,
                              const TrainConfig& tc, double round_lr, std::uint64_t seed,
                              const std::vector<ClientVector>& taus, const std::vector<std::size_t>& client_sizes);

/// Per-round cosine similarity between the aggregation weights and the
/// dataset vector (both non-negative, so the result lies in [0, 1]).
std::vector<double> weight_trajectory_similarity(const std::vector<std::vector<double>>& weights_per_round,
                                                 const DatasetVector& dv);

} // namespace fedawa
