#include "fedawa/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedawa/aggregation.hpp"

namespace fedawa {

std::vector<double> uniform_cost(std::size_t classes) {
    std::vector<double> cost(classes * classes, 1.0);
    for (std::size_t i = 0; i < classes; ++i) cost[i * classes + i] = 0.0;
    return cost;
}

std::vector<double> absdiff_cost(std::size_t classes) {
    std::vector<double> cost(classes * classes, 0.0);
    for (std::size_t i = 0; i < classes; ++i) {
        for (std::size_t j = 0; j < classes; ++j) {
            cost[i * classes + j] = std::abs(static_cast<double>(i) - static_cast<double>(j));
        }
    }
    return cost;
}

namespace {

constexpr double kMassEps = 1e-15;

/// Min-cost flow on the bipartite transportation graph via successive
/// shortest paths with Johnson potentials. Each augmentation exhausts a
/// supply or a demand, so at most 2C-1 augmentations run; Dijkstra is dense.
double solve_transport(const std::vector<double>& supply, const std::vector<double>& demand,
                       const std::vector<double>& cost) {
    const std::size_t n = supply.size();
    std::vector<double> a = supply;  // remaining supply
    std::vector<double> b = demand;  // remaining demand
    std::vector<double> flow(n * n, 0.0);
    std::vector<double> pot(2 * n, 0.0); // node potentials: [0,n) supplies, [n,2n) demands

    for (;;) {
        double remaining = 0.0;
        for (const double v : a) remaining += v;
        if (remaining <= kMassEps) break;

        // Dijkstra from all supplies with remaining mass.
        const std::size_t nodes = 2 * n;
        const double inf = std::numeric_limits<double>::infinity();
        std::vector<double> dist(nodes, inf);
        std::vector<int> prev(nodes, -1);
        std::vector<bool> done(nodes, false);
        for (std::size_t i = 0; i < n; ++i) {
            if (a[i] > kMassEps) dist[i] = 0.0;
        }
        for (;;) {
            std::size_t u = nodes;
            double best = inf;
            for (std::size_t v = 0; v < nodes; ++v) {
                if (!done[v] && dist[v] < best) {
                    best = dist[v];
                    u = v;
                }
            }
            if (u == nodes) break;
            done[u] = true;
            if (u < n) {
                // forward arcs supply u -> demand j
                for (std::size_t j = 0; j < n; ++j) {
                    const double rc = std::max(cost[u * n + j] + pot[u] - pot[n + j], 0.0);
                    if (dist[u] + rc < dist[n + j]) {
                        dist[n + j] = dist[u] + rc;
                        prev[n + j] = static_cast<int>(u);
                    }
                }
            } else {
                // residual arcs demand (u-n) -> supply i where flow exists
                const std::size_t j = u - n;
                for (std::size_t i = 0; i < n; ++i) {
                    if (flow[i * n + j] > kMassEps) {
                        const double rc = std::max(-cost[i * n + j] + pot[u] - pot[i], 0.0);
                        if (dist[u] + rc < dist[i]) {
                            dist[i] = dist[u] + rc;
                            prev[i] = static_cast<int>(u);
                        }
                    }
                }
            }
        }

        // Cheapest reachable demand with remaining deficit.
        std::size_t target = nodes;
        double best = inf;
        for (std::size_t j = 0; j < n; ++j) {
            if (b[j] > kMassEps && dist[n + j] < best) {
                best = dist[n + j];
                target = n + j;
            }
        }
        if (target == nodes) break; // numerically exhausted

        // Bottleneck along the path.
        double push = b[target - n];
        for (int v = static_cast<int>(target); prev[v] != -1; v = prev[v]) {
            const int u = prev[v];
            if (u >= static_cast<int>(n)) {
                // residual arc demand u-n -> supply v
                push = std::min(push, flow[static_cast<std::size_t>(v) * n + (static_cast<std::size_t>(u) - n)]);
            }
        }
        {
            int v = static_cast<int>(target);
            while (prev[v] != -1) v = prev[v];
            push = std::min(push, a[static_cast<std::size_t>(v)]);
        }
        if (push <= kMassEps) break;

        for (int v = static_cast<int>(target); prev[v] != -1; v = prev[v]) {
            const int u = prev[v];
            if (u < static_cast<int>(n)) {
                flow[static_cast<std::size_t>(u) * n + (static_cast<std::size_t>(v) - n)] += push;
            } else {
                flow[static_cast<std::size_t>(v) * n + (static_cast<std::size_t>(u) - n)] -= push;
            }
        }
        {
            int v = static_cast<int>(target);
            while (prev[v] != -1) v = prev[v];
            a[static_cast<std::size_t>(v)] -= push;
        }
        b[target - n] -= push;

        for (std::size_t v = 0; v < nodes; ++v) {
            if (dist[v] < inf) pot[v] += dist[v];
        }
    }

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) total += flow[i * n + j] * cost[i * n + j];
    }
    return total;
}

std::vector<double> checked_distribution(const LabelHistogram& h, const char* side) {
    if (h.normalized.empty()) throw DomainError(std::string("ot_distance: empty histogram on ") + side);
    double sum = 0.0;
    for (const double v : h.normalized) {
        if (!(v >= 0.0)) throw DomainError(std::string("ot_distance: negative mass on ") + side);
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw DomainError(std::string("ot_distance: histogram on ") + side + " is not normalized");
    }
    std::vector<double> p = h.normalized;
    for (double& v : p) v /= sum;
    return p;
}

} // namespace

double ot_distance(const LabelHistogram& p, const LabelHistogram& q, const std::vector<double>& cost) {
    const std::vector<double> a = checked_distribution(p, "p");
    const std::vector<double> b = checked_distribution(q, "q");
    if (a.size() != b.size()) throw DomainError("ot_distance: histogram class counts differ");
    const std::size_t n = a.size();
    if (cost.size() != n * n) throw DomainError("ot_distance: cost matrix is not C x C");
    for (std::size_t i = 0; i < n; ++i) {
        if (cost[i * n + i] != 0.0) throw DomainError("ot_distance: cost diagonal must be zero");
        for (std::size_t j = 0; j < n; ++j) {
            if (!(cost[i * n + j] >= 0.0)) throw DomainError("ot_distance: negative cost entry");
            if (cost[i * n + j] != cost[j * n + i]) throw DomainError("ot_distance: cost must be symmetric");
        }
    }
    return solve_transport(a, b, cost);
}

DatasetVector dataset_vector(const std::vector<LabelHistogram>& local_hists, const LabelHistogram& global_hist,
                             const std::vector<double>& cost) {
    DatasetVector dv;
    dv.sims.reserve(local_hists.size());
    for (const LabelHistogram& h : local_hists) {
        dv.sims.push_back(1.0 / (1.0 + ot_distance(h, global_hist, cost)));
    }
    return dv;
}

DistanceMatrix vector_distance_matrix(const std::vector<ParamVector>& vs) {
    const std::size_t k = vs.size();
    DistanceMatrix m;
    m.clients = k;
    m.metric = DistanceMetric::kOneMinusCosine;
    m.values.assign(k * k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            const double d = 1.0 - cosine_similarity(vs[i], vs[j]);
            m.values[i * k + j] = d;
            m.values[j * k + i] = d;
        }
    }
    return m;
}

DistanceMatrix dataset_distance_matrix(const std::vector<LabelHistogram>& hists, const std::vector<double>& cost) {
    const std::size_t k = hists.size();
    DistanceMatrix m;
    m.clients = k;
    m.metric = DistanceMetric::kOtLabel;
    m.values.assign(k * k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            const double d = ot_distance(hists[i], hists[j], cost);
            m.values[i * k + j] = d;
            m.values[j * k + i] = d;
        }
    }
    return m;
}

IdealProbe ideal_vector_probe(const ParamVector& theta_g, const MlpConfig& cfg, const Dataset& global_dataset,
                              const TrainConfig& tc, double round_lr, std::uint64_t seed,
                              const std::vector<ClientVector>& taus, const std::vector<std::size_t>& client_sizes) {
    if (taus.size() != client_sizes.size()) throw DomainError("ideal_vector_probe: taus/sizes mismatch");
    ClientPartition pooled;
    pooled.client_id = -1;
    pooled.indices.resize(global_dataset.n);
    for (std::size_t i = 0; i < global_dataset.n; ++i) pooled.indices[i] = i;

    const LocalTrainResult ideal = local_train(theta_g, cfg, global_dataset, pooled, tc, round_lr, seed);

    IdealProbe probe;
    probe.tau_ideal = client_vector(ideal.params, theta_g, -1, taus.empty() ? 1 : taus.front().round).delta;

    auto dist_to_ideal = [&](const ParamVector& v) {
        double sq = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double diff = v[i] - probe.tau_ideal[i];
            sq += diff * diff;
        }
        return std::sqrt(sq);
    };

    probe.distances.reserve(taus.size() + 1);
    const ParamVector tau_g = merge_vectors(taus, fedavg_weights(client_sizes));
    probe.distances.push_back(dist_to_ideal(tau_g));
    for (const ClientVector& t : taus) probe.distances.push_back(dist_to_ideal(t.delta));
    return probe;
}

std::vector<double> weight_trajectory_similarity(const std::vector<std::vector<double>>& weights_per_round,
                                                 const DatasetVector& dv) {
    std::vector<double> out;
    out.reserve(weights_per_round.size());
    double dv_norm = 0.0;
    for (const double v : dv.sims) dv_norm += v * v;
    dv_norm = std::sqrt(dv_norm);
    for (const std::vector<double>& w : weights_per_round) {
        if (w.size() != dv.sims.size()) {
            throw DomainError("weight_trajectory_similarity: weight length " + std::to_string(w.size()) +
                              " vs dataset vector length " + std::to_string(dv.sims.size()));
        }
        double wn = 0.0;
        double num = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) {
            wn += w[k] * w[k];
            num += w[k] * dv.sims[k];
        }
        wn = std::sqrt(wn);
        out.push_back((wn < 1e-12 || dv_norm < 1e-12) ? 0.0 : num / (wn * dv_norm));
    }
    return out;
}

} // namespace fedawa
