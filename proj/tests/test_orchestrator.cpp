#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "fedawa/orchestrator.hpp"
#include "fedawa/rng.hpp"

using namespace fedawa;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.rounds = 3;
    cfg.clients = 4;
    cfg.data.classes = 4;
    cfg.data.dims = 8;
    cfg.data.samples_per_class = 30;
    cfg.data.test_samples_per_class = 10;
    cfg.data.alpha = 1.0;
    cfg.model.layer_sizes = {8, 10, 4};
    cfg.master_seed = 11;
    return cfg;
}

/// Two clients over bitwise-identical rows: partition 0 holds the original
/// block, partition 1 its copy. Full-batch training then differs only by
/// floating-point summation order.
struct TwinSetup {
    ExperimentConfig cfg;
    ExperimentEnv env;
};

TwinSetup twin_clients() {
    TwinSetup s;
    s.cfg = small_config();
    s.cfg.clients = 2;
    s.cfg.train.batch_size = 1 << 20;

    Dataset base = gen_blobs(4, 8, 10, 1.0, 77);
    Dataset doubled = base;
    doubled.n = 2 * base.n;
    doubled.features.insert(doubled.features.end(), base.features.begin(), base.features.end());
    doubled.labels.insert(doubled.labels.end(), base.labels.begin(), base.labels.end());

    s.env.train = doubled;
    s.env.test = gen_blobs(4, 8, 10, 1.0, 78);
    ClientPartition a{0, {}};
    ClientPartition b{1, {}};
    for (std::size_t i = 0; i < base.n; ++i) {
        a.indices.push_back(i);
        b.indices.push_back(base.n + i);
    }
    s.env.partitions = {a, b};
    s.env.client_sizes = {base.n, base.n};
    s.env.client_hists = {label_histogram(doubled, a), label_histogram(doubled, b)};
    s.env.global_hist = full_histogram(doubled);
    return s;
}

} // namespace

TEST_CASE("sample_clients") {
    SUBCASE("full participation lists everyone in order") {
        const auto ids = sample_clients(6, 1.0, 3, 9);
        CHECK(ids == std::vector<int>{0, 1, 2, 3, 4, 5});
    }
    SUBCASE("R=0.1 of 10 clients samples exactly one") {
        const auto ids = sample_clients(10, 0.1, 1, 5);
        CHECK(ids.size() == 1);
    }
    SUBCASE("sample size is max(1, round(R*K))") {
        CHECK(sample_clients(10, 0.25, 1, 5).size() == 3);  // round(2.5) away from zero
        CHECK(sample_clients(7, 0.01, 1, 5).size() == 1);   // floor of one participant
    }
    SUBCASE("deterministic in (seed, round) and sorted") {
        const auto a = sample_clients(20, 0.3, 4, 123);
        const auto b = sample_clients(20, 0.3, 4, 123);
        CHECK(a == b);
        CHECK(std::is_sorted(a.begin(), a.end()));
        const auto c = sample_clients(20, 0.3, 5, 123);
        CHECK(a != c);
    }
}

TEST_CASE("symmetric merge of identical clients reproduces the local model") {
    TwinSetup s = twin_clients();
    s.cfg.strategy = Strategy::kFedAvg;
    FederationState state = initial_state(s.cfg, s.env);
    const ParamVector theta_g = state.global;
    const SeedPlan plan{s.cfg.master_seed};
    const auto client0 = local_train(theta_g, s.cfg.model, s.env.train, s.env.partitions[0], s.cfg.train,
                                     s.cfg.train.round_lr(1), plan.client_seed(1, 0));
    run_round(state, s.cfg, s.env);
    for (std::size_t i = 0; i < state.global.size(); ++i) {
        CHECK(std::abs(state.global[i] - client0.params[i]) <= 1e-12 * std::max(1.0, std::abs(client0.params[i])));
    }
}

TEST_CASE("fedawa on identical clients keeps its initial weights") {
    TwinSetup s = twin_clients();
    s.cfg.strategy = Strategy::kFedAwa;
    FederationState state = initial_state(s.cfg, s.env);
    const RoundRecord record = run_round(state, s.cfg, s.env);
    const AggWeights& w = std::get<AggWeights>(record.weights);
    CHECK(std::abs(w.lambda[0] - 0.5) < 1e-6);
    CHECK(std::abs(w.lambda[1] - 0.5) < 1e-6);
}

TEST_CASE("local_epochs = 0 is a config error") {
    ExperimentConfig cfg = small_config();
    cfg.train.local_epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("with one client every strategy walks the same trajectory") {
    // prox_mu = 0 so fedprox's local objective coincides with fedavg's
    std::vector<double> reference;
    double reference_acc = 0.0;
    for (const Strategy strategy :
         {Strategy::kFedAvg, Strategy::kFedProx, Strategy::kFedDisco, Strategy::kLdawa, Strategy::kFedAwa,
          Strategy::kFedAwaL, Strategy::kFedAwaCos}) {
        ExperimentConfig cfg = small_config();
        cfg.clients = 1;
        cfg.strategy = strategy;
        cfg.train.prox_mu = 0.0;
        const ExperimentResult r = run_experiment(cfg);
        for (const RoundRecord& record : r.records) {
            const std::vector<double> lambda = record.flat_lambda();
            REQUIRE(lambda.size() == 1);
            CHECK(lambda[0] == 1.0);
        }
        if (reference.empty()) {
            reference = r.final_model.values();
            reference_acc = r.records.back().accuracy;
        } else {
            CHECK(r.final_model.values() == reference);
            CHECK(r.records.back().accuracy == reference_acc);
        }
    }
}

TEST_CASE("fedawa with a zero-step budget is exactly fedavg") {
    ExperimentConfig avg = small_config();
    avg.rounds = 5;
    avg.strategy = Strategy::kFedAvg;

    ExperimentConfig awa = avg;
    awa.strategy = Strategy::kFedAwa;
    awa.awa.steps = 0;
    awa.awa.warm_start = false; // w_init recomputed as dataset-size weights each round

    const ExperimentResult ra = run_experiment(avg);
    const ExperimentResult rb = run_experiment(awa);
    CHECK(ra.final_model.values() == rb.final_model.values());
    for (int t = 0; t < avg.rounds; ++t) {
        CHECK(ra.records[t].accuracy == rb.records[t].accuracy);
        CHECK(ra.records[t].flat_lambda() == rb.records[t].flat_lambda());
    }
}

TEST_CASE("subset weights renormalize to one") {
    ExperimentConfig cfg = small_config();
    cfg.clients = 6;
    cfg.participation = 0.5;
    cfg.strategy = Strategy::kFedAwa;
    cfg.rounds = 4;
    const ExperimentResult r = run_experiment(cfg);
    for (const RoundRecord& record : r.records) {
        CHECK(record.participants.size() == 3);
        const std::vector<double> lambda = record.flat_lambda();
        CHECK(lambda.size() == 3);
        double sum = 0.0;
        for (const double v : lambda) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("unsampled clients cannot influence a round") {
    ExperimentConfig cfg = small_config();
    cfg.clients = 5;
    cfg.participation = 0.4;
    cfg.strategy = Strategy::kFedAvg;
    cfg.data.samples_per_class = 40;

    const ExperimentEnv env = build_environment(cfg);
    FederationState state = initial_state(cfg, env);
    run_round(state, cfg, env);

    const int round = state.next_round;
    const auto sampled = sample_clients(cfg.clients, cfg.participation, round, cfg.master_seed);
    int victim = -1;
    for (int id = 0; id < static_cast<int>(cfg.clients); ++id) {
        if (std::find(sampled.begin(), sampled.end(), id) == sampled.end()) {
            victim = id;
            break;
        }
    }
    REQUIRE(victim >= 0);

    ExperimentEnv poisoned = env;
    for (const std::size_t i : env.partitions[victim].indices) {
        for (std::size_t d = 0; d < poisoned.train.dim; ++d) {
            poisoned.train.features[i * poisoned.train.dim + d] += 1000.0;
        }
    }

    FederationState state_a = state;
    FederationState state_b = state;
    const RoundRecord ra = run_round(state_a, cfg, env);
    const RoundRecord rb = run_round(state_b, cfg, poisoned);
    CHECK(state_a.global.values() == state_b.global.values());
    CHECK(ra.accuracy == rb.accuracy);
    CHECK(ra.flat_lambda() == rb.flat_lambda());
}

TEST_CASE("identical configs give bitwise-identical telemetry") {
    ExperimentConfig cfg = small_config();
    cfg.strategy = Strategy::kFedAwaCos;
    const ExperimentResult a = run_experiment(cfg);
    const ExperimentResult b = run_experiment(cfg);
    REQUIRE(a.records.size() == b.records.size());
    CHECK(a.final_model.values() == b.final_model.values());
    for (std::size_t t = 0; t < a.records.size(); ++t) {
        CHECK(a.records[t].accuracy == b.records[t].accuracy);
        CHECK(a.records[t].flat_lambda() == b.records[t].flat_lambda());
        CHECK(a.records[t].participants == b.records[t].participants);
    }
}

TEST_CASE("threaded client training matches serial bit for bit") {
    ExperimentConfig cfg = small_config();
    cfg.strategy = Strategy::kFedAwa;
    cfg.clients = 6;
    ::setenv("FEDAWA_THREADS", "0", 1);
    const ExperimentResult serial = run_experiment(cfg);
    ::setenv("FEDAWA_THREADS", "4", 1);
    const ExperimentResult threaded = run_experiment(cfg);
    ::unsetenv("FEDAWA_THREADS");
    CHECK(serial.final_model.values() == threaded.final_model.values());
    for (std::size_t t = 0; t < serial.records.size(); ++t) {
        CHECK(serial.records[t].flat_lambda() == threaded.records[t].flat_lambda());
    }
}

TEST_CASE("fedavg separates IID blobs") {
    ExperimentConfig cfg;
    cfg.strategy = Strategy::kFedAvg;
    cfg.rounds = 30;
    cfg.clients = 4;
    cfg.data.classes = 4;
    cfg.data.dims = 16;
    cfg.data.samples_per_class = 100;
    cfg.data.test_samples_per_class = 50;
    cfg.data.alpha = 100.0;
    cfg.model.layer_sizes = {16, 32, 4};
    cfg.master_seed = 7;
    cfg.eval_every = 30;
    const ExperimentResult r = run_experiment(cfg);
    CHECK(r.records.back().accuracy > 0.9); // measured 0.915 on this configuration
}

TEST_CASE("run_experiment with T=1 is a single round") {
    ExperimentConfig cfg = small_config();
    cfg.rounds = 1;
    const ExperimentResult r = run_experiment(cfg);
    CHECK(r.records.size() == 1);
    CHECK(r.records[0].round == 1);
    CHECK(r.records[0].accuracy >= 0.0);
}
