#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fedawa/aggregation.hpp"
#include "fedawa/data.hpp"
#include "fedawa/model.hpp"

namespace fedawa {

enum class Strategy { kFedAvg, kFedProx, kFedDisco, kLdawa, kFedAwa, kFedAwaL, kFedAwaCos };

const char* strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(const std::string& name);

enum class DataSource { kBlobs, kIdx, kCsv };
enum class PartitionKind { kDirichlet, kExtremeGroups };

/// Dataset synthesis / loading settings ([data] section).
struct DataConfig {
    DataSource source = DataSource::kBlobs;
    int classes = 10;
    std::size_t dims = 32;
    std::size_t samples_per_class = 200;
    std::size_t test_samples_per_class = 100;
    double spread = 1.0;
    double alpha = 0.1;
    std::size_t min_samples = 2;
    PartitionKind partition = PartitionKind::kDirichlet;
    std::string train_images, train_labels, test_images, test_labels; // idx source
    std::string train_csv, test_csv;                                  // csv source
};

/// FedDisco's reconstructed weight formula constants ([disco] section).
struct DiscoConfig {
    double a = 0.5;
    double b = 0.1;
};

/// Everything run_experiment needs; parsed from the config file.
struct ExperimentConfig {
    Strategy strategy = Strategy::kFedAvg;
    int rounds = 50;
    std::size_t clients = 20;
    double participation = 1.0;
    int eval_every = 1;
    std::uint64_t master_seed = 42;
    DataConfig data;
    MlpConfig model;
    TrainConfig train;
    AwaOptions awa;
    DiscoConfig disco;

    void validate() const;
};

/// Per-round telemetry.
struct RoundRecord {
    int round = 0;
    std::vector<int> participants;
    std::variant<AggWeights, LayerWeights> weights;
    std::vector<double> local_losses; // aligned with participants
    double accuracy = std::numeric_limits<double>::quiet_NaN();
    double wall_time_s = 0.0;
    std::vector<double> objective_trace; // empty for strategies without an optimizer

    double lambda_min() const;
    double lambda_max() const;
    /// Best optimizer objective, NaN when no trace exists.
    double objective() const;
    std::vector<double> flat_lambda() const; // layer weights reduce to per-client row means
};

/// Seed derivation used everywhere: data, test split, partitions, client
/// sampling, and per-(round, client) training streams.
struct SeedPlan {
    std::uint64_t master = 0;
    std::uint64_t data_seed() const;
    std::uint64_t test_seed() const;
    std::uint64_t partition_seed() const;
    std::uint64_t sampling_seed(int round) const;
    std::uint64_t client_seed(int round, int client_id) const;
};

/// Uniform sample without replacement of max(1, round(R*K)) client ids,
/// returned ascending; deterministic in (master_seed, round).
std::vector<int> sample_clients(std::size_t clients, double participation, int round, std::uint64_t master_seed);

/// Mutable cross-round state.
struct FederationState {
    ParamVector global;
    AggWeights lambda_full; // full-K weights carried across rounds for warm starts
    int next_round = 1;
};

struct ExperimentEnv {
    Dataset train;
    Dataset test;
    std::vector<ClientPartition> partitions;
    std::vector<std::size_t> client_sizes;
    std::vector<LabelHistogram> client_hists;
    LabelHistogram global_hist;
};

/// Builds datasets, partitions, and the initial model + weights for a config.
ExperimentEnv build_environment(const ExperimentConfig& config);
FederationState initial_state(const ExperimentConfig& config, const ExperimentEnv& env);

/// One communication round: broadcast, local training over the sampled
/// subset, client vectors, strategy weights (renormalized to the subset),
/// aggregation, and evaluation on the held-out split when due.
RoundRecord run_round(FederationState& state, const ExperimentConfig& config, const ExperimentEnv& env);

using RoundCallback = std::function<void(const RoundRecord&)>;

struct ExperimentResult {
    std::vector<RoundRecord> records;
    ParamVector final_model;
};

/// The full Algorithm-1 loop over config.rounds rounds.
ExperimentResult run_experiment(const ExperimentConfig& config, const RoundCallback& on_round = nullptr);

/// Client-training concurrency cap from FEDAWA_THREADS (0 or 1 = serial).
unsigned training_threads();

} // namespace fedawa
