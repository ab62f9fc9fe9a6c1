#include "fedawa/aggregation.hpp"

#include <algorithm>
#include <cmath>

namespace fedawa {

namespace {

constexpr double kSimplexTol = 1e-9;
constexpr double kNormFloor = 1e-12;
constexpr double kResidualFloor = 1e-15;

void check_simplex(const std::vector<double>& lambda, const char* what) {
    if (lambda.empty()) throw DomainError(std::string(what) + ": empty weight vector");
    double sum = 0.0;
    for (const double v : lambda) {
        if (!(v >= 0.0)) throw DomainError(std::string(what) + ": negative or non-finite weight");
        sum += v;
    }
    if (std::abs(sum - 1.0) > kSimplexTol) {
        throw DomainError(std::string(what) + ": weights sum to " + std::to_string(sum) + ", not 1");
    }
}

std::vector<double> normalized(std::vector<double> raw) {
    double sum = 0.0;
    for (const double v : raw) sum += v;
    for (double& v : raw) v /= sum;
    return raw;
}

} // namespace

void AggWeights::validate() const { check_simplex(lambda, "aggregation weights"); }

std::vector<double> LayerWeights::column(std::size_t l) const {
    std::vector<double> col(clients);
    for (std::size_t k = 0; k < clients; ++k) col[k] = at(k, l);
    return col;
}

void LayerWeights::validate() const {
    if (lambda.size() != clients * layers || clients == 0 || layers == 0) {
        throw DomainError("layer weights: inconsistent shape");
    }
    for (std::size_t l = 0; l < layers; ++l) check_simplex(column(l), "layer weights column");
}

void AwaOptions::validate() const {
    if (steps < 0) throw ConfigError("awa.steps: must be >= 0");
    if (!(step_size > 0.0)) throw ConfigError("awa.step_size: must be > 0");
    if (reg_coeff < 0.0) throw ConfigError("awa.reg_coeff: must be >= 0");
}

ClientVector client_vector(const ParamVector& theta_k, const ParamVector& theta_g, int client_id, int round) {
    require_same_layout(theta_k, theta_g, "client_vector");
    std::vector<double> delta(theta_k.size());
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = theta_k[i] - theta_g[i];
    return ClientVector{ParamVector(std::move(delta), theta_k.layout()), client_id, round};
}

ParamVector merge_vectors(const std::vector<ClientVector>& taus, const AggWeights& w) {
    if (taus.empty()) throw DomainError("merge_vectors: need at least one client vector");
    if (taus.size() != w.size()) {
        throw DomainError("merge_vectors: " + std::to_string(taus.size()) + " vectors vs " +
                          std::to_string(w.size()) + " weights");
    }
    for (const ClientVector& t : taus) require_same_layout(t.delta, taus.front().delta, "merge_vectors");
    std::vector<double> out(taus.front().delta.size(), 0.0);
    for (std::size_t k = 0; k < taus.size(); ++k) {
        const double lk = w.lambda[k];
        const std::vector<double>& d = taus[k].delta.values();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += lk * d[i];
    }
    return ParamVector(std::move(out), taus.front().delta.layout());
}

AggWeights fedavg_weights(const std::vector<std::size_t>& sample_counts) {
    if (sample_counts.empty()) throw DomainError("fedavg_weights: no clients");
    std::size_t total = 0;
    for (const std::size_t n : sample_counts) {
        if (n == 0) throw DomainError("fedavg_weights: client with zero samples");
        total += n;
    }
    AggWeights w;
    w.lambda.resize(sample_counts.size());
    for (std::size_t k = 0; k < sample_counts.size(); ++k) {
        w.lambda[k] = static_cast<double>(sample_counts[k]) / static_cast<double>(total);
    }
    return w;
}

AggWeights disco_weights(const std::vector<std::size_t>& sample_counts,
                         const std::vector<LabelHistogram>& local_hists, const LabelHistogram& global_hist,
                         double a, double b) {
    if (sample_counts.size() != local_hists.size()) throw DomainError("disco_weights: count/histogram mismatch");
    const AggWeights base = fedavg_weights(sample_counts);
    std::vector<double> raw(sample_counts.size());
    double total = 0.0;
    for (std::size_t k = 0; k < raw.size(); ++k) {
        if (local_hists[k].normalized.size() != global_hist.normalized.size()) {
            throw DomainError("disco_weights: histogram class counts differ");
        }
        double d2 = 0.0;
        for (std::size_t c = 0; c < global_hist.normalized.size(); ++c) {
            const double diff = local_hists[k].normalized[c] - global_hist.normalized[c];
            d2 += diff * diff;
        }
        raw[k] = std::max(base.lambda[k] - a * std::sqrt(d2) + b, 0.0);
        total += raw[k];
    }
    if (total <= 0.0) return base;
    AggWeights w;
    w.lambda = normalized(std::move(raw));
    return w;
}

AggWeights ldawa_weights(const std::vector<ParamVector>& thetas, const ParamVector& theta_g) {
    if (thetas.empty()) throw DomainError("ldawa_weights: no clients");
    std::vector<double> sims(thetas.size());
    double total = 0.0;
    for (std::size_t k = 0; k < thetas.size(); ++k) {
        sims[k] = std::max(cosine_similarity(thetas[k], theta_g), 0.0);
        total += sims[k];
    }
    AggWeights w;
    if (total <= 0.0) {
        w.lambda.assign(thetas.size(), 1.0 / static_cast<double>(thetas.size()));
    } else {
        w.lambda = normalized(std::move(sims));
    }
    return w;
}

AggWeights awa_cos_weights(const std::vector<ClientVector>& taus, const AggWeights& w_init) {
    w_init.validate();
    const ParamVector tau_g = merge_vectors(taus, w_init);
    std::vector<double> sims(taus.size());
    double total = 0.0;
    for (std::size_t k = 0; k < taus.size(); ++k) {
        sims[k] = std::max(cosine_similarity(taus[k].delta, tau_g), 0.0);
        total += sims[k];
    }
    AggWeights w;
    w.round = w_init.round;
    if (total <= 0.0) {
        w.lambda.assign(taus.size(), 1.0 / static_cast<double>(taus.size()));
    } else {
        w.lambda = normalized(std::move(sims));
    }
    return w;
}

namespace {

/// The weight-optimization problem reduced to Gram form over one coordinate
/// range. Objective and gradient cost O(K^2) per evaluation, independent of
/// model size, which keeps the per-layer and long-budget paths cheap.
class GramProblem {
public:
    GramProblem(const std::vector<ClientVector>& taus, const std::vector<ParamVector>& thetas,
                const ParamVector& theta_g, const AwaOptions& opts, std::size_t offset, std::size_t length)
        : k_(taus.size()), opts_(opts) {
        tau_gram_.assign(k_ * k_, 0.0);
        for (std::size_t i = 0; i < k_; ++i) {
            for (std::size_t j = i; j < k_; ++j) {
                const double g = range_dot(taus[i].delta, taus[j].delta, offset, length);
                tau_gram_[i * k_ + j] = g;
                tau_gram_[j * k_ + i] = g;
            }
        }
        if (opts.reg_kind != RegKind::kNone) {
            theta_gram_.assign(k_ * k_, 0.0);
            theta_dot_g_.assign(k_, 0.0);
            for (std::size_t i = 0; i < k_; ++i) {
                for (std::size_t j = i; j < k_; ++j) {
                    const double g = range_dot(thetas[i], thetas[j], offset, length);
                    theta_gram_[i * k_ + j] = g;
                    theta_gram_[j * k_ + i] = g;
                }
                theta_dot_g_[i] = range_dot(thetas[i], theta_g, offset, length);
            }
            global_sq_ = range_dot(theta_g, theta_g, offset, length);
        }
    }

    double value(const std::vector<double>& lambda) const {
        double v = term1(lambda, nullptr);
        if (opts_.reg_kind != RegKind::kNone) v += opts_.reg_coeff * reg(lambda, nullptr);
        return v;
    }

    /// Value plus gradient with respect to lambda (not yet chained through softmax).
    double value_grad(const std::vector<double>& lambda, std::vector<double>& grad) const {
        grad.assign(k_, 0.0);
        double v = term1(lambda, &grad);
        if (opts_.reg_kind != RegKind::kNone) {
            std::vector<double> rg(k_, 0.0);
            v += opts_.reg_coeff * reg(lambda, &rg);
            for (std::size_t m = 0; m < k_; ++m) grad[m] += opts_.reg_coeff * rg[m];
        }
        return v;
    }

private:
    static double range_dot(const ParamVector& a, const ParamVector& b, std::size_t offset, std::size_t length) {
        const double* x = a.values().data() + offset;
        const double* y = b.values().data() + offset;
        double acc = 0.0;
        for (std::size_t i = 0; i < length; ++i) acc += x[i] * y[i];
        return acc;
    }

    // sum_k lambda_k * ||tau_k - tau_g(lambda)||, with
    // ||tau_k - tau_g||^2 = G_kk - 2 s_k + q, s = G lambda, q = lambda' G lambda.
    double term1(const std::vector<double>& lambda, std::vector<double>* grad) const {
        std::vector<double> s(k_, 0.0);
        for (std::size_t i = 0; i < k_; ++i) {
            const double* row = tau_gram_.data() + i * k_;
            double acc = 0.0;
            for (std::size_t j = 0; j < k_; ++j) acc += row[j] * lambda[j];
            s[i] = acc;
        }
        double q = 0.0;
        for (std::size_t i = 0; i < k_; ++i) q += lambda[i] * s[i];

        std::vector<double> r(k_, 0.0);
        double v = 0.0;
        for (std::size_t i = 0; i < k_; ++i) {
            r[i] = std::sqrt(std::max(tau_gram_[i * k_ + i] - 2.0 * s[i] + q, 0.0));
            v += lambda[i] * r[i];
        }
        if (grad) {
            // d r_k / d lambda_m = (s_m - G_km) / r_k, skipping vanished residuals.
            double inv_sum = 0.0;             // sum_k lambda_k / r_k
            std::vector<double> wr(k_, 0.0);  // lambda_k / r_k
            for (std::size_t i = 0; i < k_; ++i) {
                if (r[i] > kResidualFloor) {
                    wr[i] = lambda[i] / r[i];
                    inv_sum += wr[i];
                }
            }
            for (std::size_t m = 0; m < k_; ++m) {
                double cross = 0.0;
                const double* col = tau_gram_.data() + m * k_;
                for (std::size_t i = 0; i < k_; ++i) cross += wr[i] * col[i];
                (*grad)[m] += r[m] + s[m] * inv_sum - cross;
            }
        }
        return v;
    }

    // Regularizer d(sum_k lambda_k theta_k, theta_g): 1 - cosine, or L2.
    double reg(const std::vector<double>& lambda, std::vector<double>* grad) const {
        std::vector<double> wt(k_, 0.0); // (sum_j lambda_j theta_j) . theta_m
        for (std::size_t i = 0; i < k_; ++i) {
            const double* row = theta_gram_.data() + i * k_;
            double acc = 0.0;
            for (std::size_t j = 0; j < k_; ++j) acc += row[j] * lambda[j];
            wt[i] = acc;
        }
        double b2 = 0.0;
        for (std::size_t i = 0; i < k_; ++i) b2 += lambda[i] * wt[i];
        double a = 0.0;
        for (std::size_t i = 0; i < k_; ++i) a += lambda[i] * theta_dot_g_[i];

        if (opts_.reg_kind == RegKind::kCosine) {
            const double bn = std::sqrt(std::max(b2, 0.0));
            const double cn = std::sqrt(std::max(global_sq_, 0.0));
            if (bn < kNormFloor || cn < kNormFloor) return 1.0; // cosine defined as 0, gradient flat
            if (grad) {
                for (std::size_t m = 0; m < k_; ++m) {
                    (*grad)[m] = -theta_dot_g_[m] / (bn * cn) + a * wt[m] / (bn * bn * bn * cn);
                }
            }
            return 1.0 - a / (bn * cn);
        }
        const double dist = std::sqrt(std::max(b2 - 2.0 * a + global_sq_, 0.0));
        if (grad && dist > kResidualFloor) {
            for (std::size_t m = 0; m < k_; ++m) (*grad)[m] = (wt[m] - theta_dot_g_[m]) / dist;
        }
        return dist;
    }

    std::size_t k_;
    AwaOptions opts_;
    std::vector<double> tau_gram_;
    std::vector<double> theta_gram_;
    std::vector<double> theta_dot_g_;
    double global_sq_ = 0.0;
};

std::vector<double> softmax(const std::vector<double>& z) {
    double zmax = z[0];
    for (const double v : z) zmax = std::max(zmax, v);
    std::vector<double> out(z.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(z[i] - zmax);
        denom += out[i];
    }
    for (double& v : out) v /= denom;
    return out;
}

void check_problem_inputs(const std::vector<ClientVector>& taus, const std::vector<ParamVector>& thetas,
                          const ParamVector& theta_g) {
    if (taus.empty()) throw DomainError("weight optimization: need at least one client");
    if (thetas.size() != taus.size()) throw DomainError("weight optimization: taus/thetas count mismatch");
    for (const ClientVector& t : taus) require_same_layout(t.delta, theta_g, "weight optimization");
    for (const ParamVector& t : thetas) require_same_layout(t, theta_g, "weight optimization");
}

std::vector<double> init_logits(const std::vector<double>& w) {
    std::vector<double> z(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) z[i] = std::log(w[i] + 1e-8);
    return z;
}

struct GramDescent {
    std::vector<double> best_lambda;
    double best_value = 0.0;
    std::vector<double> trace;
};

GramDescent run_descent(const GramProblem& problem, const std::vector<double>& w_init, const AwaOptions& opts) {
    GramDescent out;
    std::vector<double> z = init_logits(w_init);
    std::vector<double> lambda = softmax(z);
    std::vector<double> grad_lambda(lambda.size());

    out.best_value = problem.value(lambda);
    out.best_lambda = lambda;
    out.trace.reserve(static_cast<std::size_t>(opts.steps) + 1);
    out.trace.push_back(out.best_value);
    if (!std::isfinite(out.best_value)) throw NumericError("weight optimizer: non-finite objective at step 0");

    for (int step = 1; step <= opts.steps; ++step) {
        problem.value_grad(lambda, grad_lambda);
        // Chain rule through softmax: gz_m = lambda_m * (g_m - sum_k lambda_k g_k).
        double mean = 0.0;
        for (std::size_t i = 0; i < lambda.size(); ++i) mean += lambda[i] * grad_lambda[i];
        for (std::size_t i = 0; i < lambda.size(); ++i) {
            z[i] -= opts.step_size * lambda[i] * (grad_lambda[i] - mean);
        }
        lambda = softmax(z);
        const double value = problem.value(lambda);
        if (!std::isfinite(value)) {
            throw NumericError("weight optimizer: non-finite objective at step " + std::to_string(step));
        }
        out.trace.push_back(value);
        if (value < out.best_value) {
            out.best_value = value;
            out.best_lambda = lambda;
        }
    }
    return out;
}

} // namespace

double awa_objective(const AggWeights& lambda, const std::vector<ClientVector>& taus,
                     const std::vector<ParamVector>& thetas, const ParamVector& theta_g, const AwaOptions& opts) {
    lambda.validate();
    check_problem_inputs(taus, thetas, theta_g);
    if (lambda.size() != taus.size()) throw DomainError("awa_objective: weight/client count mismatch");

    const ParamVector tau_g = merge_vectors(taus, lambda);
    double term1 = 0.0;
    for (std::size_t k = 0; k < taus.size(); ++k) {
        double sq = 0.0;
        const std::vector<double>& d = taus[k].delta.values();
        const std::vector<double>& g = tau_g.values();
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double diff = d[i] - g[i];
            sq += diff * diff;
        }
        term1 += lambda.lambda[k] * std::sqrt(sq);
    }
    if (opts.reg_kind == RegKind::kNone) return term1;

    ParamVector merged = aggregate(thetas, lambda);
    if (opts.reg_kind == RegKind::kCosine) {
        return term1 + opts.reg_coeff * (1.0 - cosine_similarity(merged, theta_g));
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < merged.size(); ++i) {
        const double diff = merged[i] - theta_g[i];
        sq += diff * diff;
    }
    return term1 + opts.reg_coeff * std::sqrt(sq);
}

std::pair<double, std::vector<double>> awa_objective_grad_z(const std::vector<double>& z,
                                                            const std::vector<ClientVector>& taus,
                                                            const std::vector<ParamVector>& thetas,
                                                            const ParamVector& theta_g, const AwaOptions& opts) {
    check_problem_inputs(taus, thetas, theta_g);
    if (z.size() != taus.size()) throw DomainError("awa_objective_grad_z: logit/client count mismatch");
    const GramProblem problem(taus, thetas, theta_g, opts, 0, theta_g.size());
    const std::vector<double> lambda = softmax(z);
    std::vector<double> grad_lambda;
    const double value = problem.value_grad(lambda, grad_lambda);
    double mean = 0.0;
    for (std::size_t i = 0; i < lambda.size(); ++i) mean += lambda[i] * grad_lambda[i];
    std::vector<double> grad_z(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) grad_z[i] = lambda[i] * (grad_lambda[i] - mean);
    return {value, std::move(grad_z)};
}

OptimizeResult optimize_weights(const std::vector<ClientVector>& taus, const std::vector<ParamVector>& thetas,
                                const ParamVector& theta_g, const AggWeights& w_init, const AwaOptions& opts) {
    opts.validate();
    w_init.validate();
    check_problem_inputs(taus, thetas, theta_g);
    if (w_init.size() != taus.size()) throw DomainError("optimize_weights: weight/client count mismatch");

    const GramProblem problem(taus, thetas, theta_g, opts, 0, theta_g.size());
    if (opts.steps == 0) {
        // No optimization: hand back w_init untouched so that FedAWA with a
        // zero budget reproduces FedAvg bit for bit.
        return {w_init, {problem.value(w_init.lambda)}};
    }
    GramDescent d = run_descent(problem, w_init.lambda, opts);
    AggWeights w;
    w.lambda = std::move(d.best_lambda);
    w.round = w_init.round;
    w.validate();
    return {std::move(w), std::move(d.trace)};
}

OptimizeLayerResult optimize_layer_weights(const std::vector<ClientVector>& taus,
                                           const std::vector<ParamVector>& thetas, const ParamVector& theta_g,
                                           const AggWeights& w_init, const AwaOptions& opts) {
    opts.validate();
    w_init.validate();
    check_problem_inputs(taus, thetas, theta_g);
    if (w_init.size() != taus.size()) throw DomainError("optimize_layer_weights: weight/client count mismatch");

    const LayerLayout& layout = theta_g.layout();
    OptimizeLayerResult out;
    out.weights.clients = taus.size();
    out.weights.layers = layout.layer_count();
    out.weights.round = w_init.round;
    out.weights.lambda.assign(out.weights.clients * out.weights.layers, 0.0);
    out.traces.resize(layout.layer_count());

    for (std::size_t l = 0; l < layout.layer_count(); ++l) {
        const LayerEntry& e = layout.entry(l);
        const GramProblem problem(taus, thetas, theta_g, opts, e.offset, e.length);
        if (opts.steps == 0) {
            for (std::size_t k = 0; k < taus.size(); ++k) out.weights.at(k, l) = w_init.lambda[k];
            out.traces[l] = {problem.value(w_init.lambda)};
            continue;
        }
        GramDescent d = run_descent(problem, w_init.lambda, opts);
        for (std::size_t k = 0; k < taus.size(); ++k) out.weights.at(k, l) = d.best_lambda[k];
        out.traces[l] = std::move(d.trace);
    }
    out.weights.validate();
    return out;
}

ParamVector aggregate(const std::vector<ParamVector>& thetas, const AggWeights& w) {
    if (thetas.empty()) throw DomainError("aggregate: no models");
    if (thetas.size() != w.size()) {
        throw DomainError("aggregate: " + std::to_string(thetas.size()) + " models vs " + std::to_string(w.size()) +
                          " weights");
    }
    w.validate();
    for (const ParamVector& t : thetas) require_same_layout(t, thetas.front(), "aggregate");
    std::vector<double> out(thetas.front().size(), 0.0);
    for (std::size_t k = 0; k < thetas.size(); ++k) {
        const double lk = w.lambda[k];
        const std::vector<double>& v = thetas[k].values();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += lk * v[i];
    }
    return ParamVector(std::move(out), thetas.front().layout());
}

ParamVector aggregate_layerwise(const std::vector<ParamVector>& thetas, const LayerWeights& w) {
    if (thetas.empty()) throw DomainError("aggregate_layerwise: no models");
    if (thetas.size() != w.clients) throw DomainError("aggregate_layerwise: model/weight count mismatch");
    w.validate();
    const LayerLayout& layout = thetas.front().layout();
    if (layout.layer_count() != w.layers) throw DomainError("aggregate_layerwise: layer count mismatch");
    for (const ParamVector& t : thetas) require_same_layout(t, thetas.front(), "aggregate_layerwise");

    std::vector<double> out(thetas.front().size(), 0.0);
    for (std::size_t l = 0; l < layout.layer_count(); ++l) {
        const LayerEntry& e = layout.entry(l);
        for (std::size_t k = 0; k < thetas.size(); ++k) {
            const double lk = w.at(k, l);
            const double* v = thetas[k].values().data() + e.offset;
            double* o = out.data() + e.offset;
            for (std::size_t i = 0; i < e.length; ++i) o[i] += lk * v[i];
        }
    }
    return ParamVector(std::move(out), layout);
}

} // namespace fedawa
