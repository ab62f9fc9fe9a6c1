#include "fedawa/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include "fedawa/rng.hpp"

namespace fedawa {

const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::kFedAvg: return "fedavg";
        case Strategy::kFedProx: return "fedprox";
        case Strategy::kFedDisco: return "feddisco";
        case Strategy::kLdawa: return "ldawa";
        case Strategy::kFedAwa: return "fedawa";
        case Strategy::kFedAwaL: return "fedawa_l";
        case Strategy::kFedAwaCos: return "fedawa_cos";
    }
    return "unknown";
}

std::optional<Strategy> parse_strategy(const std::string& name) {
    for (const Strategy s : {Strategy::kFedAvg, Strategy::kFedProx, Strategy::kFedDisco, Strategy::kLdawa,
                             Strategy::kFedAwa, Strategy::kFedAwaL, Strategy::kFedAwaCos}) {
        if (name == strategy_name(s)) return s;
    }
    return std::nullopt;
}

void ExperimentConfig::validate() const {
    if (rounds < 1) throw ConfigError("run.rounds: must be >= 1");
    if (clients < 1) throw ConfigError("run.clients: must be >= 1");
    if (!(participation > 0.0 && participation <= 1.0)) throw ConfigError("run.participation: must be in (0, 1]");
    if (eval_every < 1) throw ConfigError("run.eval_every: must be >= 1");
    model.validate();
    train.validate();
    awa.validate();
    if (data.source == DataSource::kBlobs) {
        if (data.classes < 2) throw ConfigError("data.classes: must be >= 2");
        if (data.dims < 1) throw ConfigError("data.dims: must be >= 1");
        if (data.samples_per_class < 1) throw ConfigError("data.samples_per_class: must be >= 1");
        if (data.test_samples_per_class < 1) throw ConfigError("data.test_samples_per_class: must be >= 1");
        if (!(data.spread >= 0.0)) throw ConfigError("data.spread: must be >= 0");
    }
    if (!(data.alpha > 0.0)) throw ConfigError("data.alpha: must be > 0");
}

double RoundRecord::lambda_min() const {
    const std::vector<double> flat = flat_lambda();
    return *std::min_element(flat.begin(), flat.end());
}

double RoundRecord::lambda_max() const {
    const std::vector<double> flat = flat_lambda();
    return *std::max_element(flat.begin(), flat.end());
}

double RoundRecord::objective() const {
    if (objective_trace.empty()) return std::numeric_limits<double>::quiet_NaN();
    return *std::min_element(objective_trace.begin(), objective_trace.end());
}

std::vector<double> RoundRecord::flat_lambda() const {
    if (const AggWeights* w = std::get_if<AggWeights>(&weights)) return w->lambda;
    const LayerWeights& lw = std::get<LayerWeights>(weights);
    std::vector<double> flat(lw.clients, 0.0);
    for (std::size_t k = 0; k < lw.clients; ++k) {
        double acc = 0.0;
        for (std::size_t l = 0; l < lw.layers; ++l) acc += lw.at(k, l);
        flat[k] = acc / static_cast<double>(lw.layers);
    }
    return flat;
}

std::uint64_t SeedPlan::data_seed() const { return mix_seed(master, 0xDA7AULL); }
std::uint64_t SeedPlan::test_seed() const { return mix_seed(master, 0x7E57ULL); }
std::uint64_t SeedPlan::partition_seed() const { return mix_seed(master, 0x9A27ULL); }
std::uint64_t SeedPlan::sampling_seed(int round) const {
    return mix_seed(master, 0x5A3FULL, static_cast<std::uint64_t>(round));
}
std::uint64_t SeedPlan::client_seed(int round, int client_id) const {
    return mix_seed(master, 0xC11E27ULL, static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(client_id));
}

std::vector<int> sample_clients(std::size_t clients, double participation, int round, std::uint64_t master_seed) {
    const std::size_t want =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(participation * static_cast<double>(clients))));
    const std::size_t m = std::min(want, clients);
    std::vector<int> ids(clients);
    for (std::size_t i = 0; i < clients; ++i) ids[i] = static_cast<int>(i);
    if (m < clients) {
        SeedPlan plan{master_seed};
        Rng rng(plan.sampling_seed(round));
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t j = i + rng.uniform_index(clients - i);
            std::swap(ids[i], ids[j]);
        }
        ids.resize(m);
        std::sort(ids.begin(), ids.end());
    }
    return ids;
}

ExperimentEnv build_environment(const ExperimentConfig& config) {
    config.validate();
    const SeedPlan plan{config.master_seed};

    ExperimentEnv env;
    switch (config.data.source) {
        case DataSource::kBlobs:
            env.train = gen_blobs(config.data.classes, config.data.dims, config.data.samples_per_class,
                                  config.data.spread, plan.data_seed());
            env.test = gen_blobs(config.data.classes, config.data.dims, config.data.test_samples_per_class,
                                 config.data.spread, plan.test_seed());
            break;
        case DataSource::kIdx:
            env.train = load_idx(config.data.train_images, config.data.train_labels);
            env.test = load_idx(config.data.test_images, config.data.test_labels);
            break;
        case DataSource::kCsv:
            env.train = load_csv(config.data.train_csv);
            env.test = load_csv(config.data.test_csv);
            break;
    }
    if (static_cast<std::size_t>(config.model.layer_sizes.front()) != env.train.dim) {
        throw ConfigError("model.layers: input size " + std::to_string(config.model.layer_sizes.front()) +
                          " does not match dataset dimension " + std::to_string(env.train.dim));
    }
    if (config.model.layer_sizes.back() != env.train.class_count) {
        throw ConfigError("model.layers: output size " + std::to_string(config.model.layer_sizes.back()) +
                          " does not match class count " + std::to_string(env.train.class_count));
    }

    if (config.data.partition == PartitionKind::kDirichlet) {
        DirichletSpec spec{config.data.alpha, config.clients, plan.partition_seed(), config.data.min_samples};
        env.partitions = dirichlet_partition(env.train.labels, spec);
    } else {
        env.partitions = extreme_groups(env.train.labels, env.train.class_count, config.clients,
                                        plan.partition_seed());
    }

    env.client_sizes.reserve(env.partitions.size());
    env.client_hists.reserve(env.partitions.size());
    for (const ClientPartition& p : env.partitions) {
        env.client_sizes.push_back(p.size());
        env.client_hists.push_back(label_histogram(env.train, p));
    }
    env.global_hist = full_histogram(env.train);
    return env;
}

FederationState initial_state(const ExperimentConfig& config, const ExperimentEnv& env) {
    FederationState state;
    state.global = init_params(config.model);
    state.lambda_full = fedavg_weights(env.client_sizes);
    state.next_round = 1;
    return state;
}

unsigned training_threads() {
    const char* env = std::getenv("FEDAWA_THREADS");
    if (!env) return 0;
    const long v = std::strtol(env, nullptr, 10);
    return v > 1 ? static_cast<unsigned>(v) : 0;
}

namespace {

struct LocalOutputs {
    std::vector<ParamVector> thetas;
    std::vector<double> losses;
};

LocalOutputs train_participants(const FederationState& state, const ExperimentConfig& config,
                                const ExperimentEnv& env, const std::vector<int>& ids, double lr) {
    const SeedPlan plan{config.master_seed};
    TrainConfig tc = config.train;
    // The prox term only applies under the fedprox strategy.
    if (config.strategy != Strategy::kFedProx) tc.prox_mu = 0.0;

    LocalOutputs out;
    out.thetas.resize(ids.size());
    out.losses.resize(ids.size());
    const int round = state.next_round;

    auto train_one = [&](std::size_t i) {
        const int id = ids[i];
        LocalTrainResult r = local_train(state.global, config.model, env.train,
                                         env.partitions[static_cast<std::size_t>(id)], tc, lr,
                                         plan.client_seed(round, id));
        out.thetas[i] = std::move(r.params);
        out.losses[i] = r.mean_loss;
    };

    const unsigned threads = std::min<unsigned>(training_threads(), static_cast<unsigned>(ids.size()));
    if (threads <= 1) {
        for (std::size_t i = 0; i < ids.size(); ++i) train_one(i);
    } else {
        // Each client call is deterministic given its own seed, so results do
        // not depend on how clients land on threads.
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&, t]() {
                for (std::size_t i = t; i < ids.size(); i += threads) train_one(i);
            });
        }
        for (std::thread& th : pool) th.join();
    }
    return out;
}

AggWeights restrict_weights(const AggWeights& full, const std::vector<int>& ids) {
    AggWeights w;
    w.round = full.round;
    w.lambda.resize(ids.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        w.lambda[i] = full.lambda[static_cast<std::size_t>(ids[i])];
        sum += w.lambda[i];
    }
    if (sum <= 0.0) {
        w.lambda.assign(ids.size(), 1.0 / static_cast<double>(ids.size()));
    } else {
        for (double& v : w.lambda) v /= sum;
    }
    return w;
}

} // namespace

RoundRecord run_round(FederationState& state, const ExperimentConfig& config, const ExperimentEnv& env) {
    const auto started = std::chrono::steady_clock::now();
    const int round = state.next_round;
    const double lr = config.train.round_lr(round);

    const std::vector<int> ids = sample_clients(config.clients, config.participation, round, config.master_seed);
    LocalOutputs local = train_participants(state, config, env, ids, lr);

    std::vector<ClientVector> taus;
    taus.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        taus.push_back(client_vector(local.thetas[i], state.global, ids[i], round));
    }

    std::vector<std::size_t> subset_sizes(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        subset_sizes[i] = env.client_sizes[static_cast<std::size_t>(ids[i])];
    }

    RoundRecord record;
    record.round = round;
    record.participants = ids;
    record.local_losses = std::move(local.losses);

    const AggWeights size_weights = fedavg_weights(subset_sizes);
    AggWeights w_init = config.awa.warm_start ? restrict_weights(state.lambda_full, ids) : size_weights;
    w_init.round = round;

    ParamVector new_global = state.global;
    switch (config.strategy) {
        case Strategy::kFedAvg:
        case Strategy::kFedProx: {
            AggWeights w = size_weights;
            w.round = round;
            new_global = aggregate(local.thetas, w);
            record.weights = std::move(w);
            break;
        }
        case Strategy::kFedDisco: {
            std::vector<LabelHistogram> hists(ids.size());
            for (std::size_t i = 0; i < ids.size(); ++i) {
                hists[i] = env.client_hists[static_cast<std::size_t>(ids[i])];
            }
            AggWeights w = disco_weights(subset_sizes, hists, env.global_hist, config.disco.a, config.disco.b);
            w.round = round;
            new_global = aggregate(local.thetas, w);
            record.weights = std::move(w);
            break;
        }
        case Strategy::kLdawa: {
            AggWeights w = ldawa_weights(local.thetas, state.global);
            w.round = round;
            new_global = aggregate(local.thetas, w);
            record.weights = std::move(w);
            break;
        }
        case Strategy::kFedAwaCos: {
            AggWeights w = awa_cos_weights(taus, w_init);
            w.round = round;
            new_global = aggregate(local.thetas, w);
            record.weights = std::move(w);
            break;
        }
        case Strategy::kFedAwa: {
            OptimizeResult r = optimize_weights(taus, local.thetas, state.global, w_init, config.awa);
            new_global = aggregate(local.thetas, r.weights);
            record.objective_trace = std::move(r.trace);
            record.weights = std::move(r.weights);
            break;
        }
        case Strategy::kFedAwaL: {
            OptimizeLayerResult r = optimize_layer_weights(taus, local.thetas, state.global, w_init, config.awa);
            new_global = aggregate_layerwise(local.thetas, r.weights);
            // Summary trace: mean objective across the per-layer problems.
            if (!r.traces.empty()) {
                const std::size_t len = r.traces.front().size();
                record.objective_trace.assign(len, 0.0);
                for (const std::vector<double>& t : r.traces) {
                    for (std::size_t i = 0; i < len; ++i) record.objective_trace[i] += t[i];
                }
                for (double& v : record.objective_trace) v /= static_cast<double>(r.traces.size());
            }
            record.weights = std::move(r.weights);
            break;
        }
    }

    try {
        new_global.check_finite("global model");
    } catch (const NumericError& e) {
        throw NumericError("round " + std::to_string(round) + " (strategy " + strategy_name(config.strategy) +
                           ", lr " + std::to_string(lr) + "): " + e.what());
    }

    // Carry subset weights back into the full-K vector, preserving the
    // subset's previous total mass so the full vector still sums to one.
    const std::vector<double> flat = record.flat_lambda();
    double subset_mass = 0.0;
    for (const int id : ids) subset_mass += state.lambda_full.lambda[static_cast<std::size_t>(id)];
    for (std::size_t i = 0; i < ids.size(); ++i) {
        state.lambda_full.lambda[static_cast<std::size_t>(ids[i])] = flat[i] * subset_mass;
    }
    state.lambda_full.round = round;

    state.global = std::move(new_global);
    state.next_round = round + 1;

    if (round % config.eval_every == 0) {
        record.accuracy = evaluate(state.global, config.model, env.test);
    }
    record.wall_time_s =
        std::chrono::duration_cast<std::chrono::duration<double>>(std::chrono::steady_clock::now() - started)
            .count();
    return record;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RoundCallback& on_round) {
    const ExperimentEnv env = build_environment(config);
    FederationState state = initial_state(config, env);

    ExperimentResult result;
    result.records.reserve(static_cast<std::size_t>(config.rounds));
    for (int t = 1; t <= config.rounds; ++t) {
        RoundRecord record = run_round(state, config, env);
        if (on_round) on_round(record);
        result.records.push_back(std::move(record));
    }
    result.final_model = std::move(state.global);
    return result;
}

} // namespace fedawa
