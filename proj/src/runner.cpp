#include "fedawa/runner.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "fedawa/analysis.hpp"
#include "fedawa/rng.hpp"

namespace fs = std::filesystem;

namespace fedawa {

namespace {

std::string iso_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::json json_double(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}

nlohmann::json record_json(const RoundRecord& r, const char* strategy) {
    nlohmann::json j;
    j["round"] = r.round;
    j["strategy"] = strategy;
    j["participants"] = r.participants;
    if (const LayerWeights* lw = std::get_if<LayerWeights>(&r.weights)) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t k = 0; k < lw->clients; ++k) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t l = 0; l < lw->layers; ++l) row.push_back(lw->at(k, l));
            rows.push_back(std::move(row));
        }
        j["lambda_layers"] = std::move(rows);
    }
    j["lambda"] = r.flat_lambda();
    j["local_losses"] = r.local_losses;
    j["accuracy"] = json_double(r.accuracy);
    j["wall_time_s"] = r.wall_time_s;
    j["objective"] = json_double(r.objective());
    return j;
}

nlohmann::json weights_json(const RoundRecord& r, const char* strategy) {
    nlohmann::json j;
    j["round"] = r.round;
    j["strategy"] = strategy;
    j["lambda"] = r.flat_lambda();
    if (const LayerWeights* lw = std::get_if<LayerWeights>(&r.weights)) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t k = 0; k < lw->clients; ++k) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t l = 0; l < lw->layers; ++l) row.push_back(lw->at(k, l));
            rows.push_back(std::move(row));
        }
        j["lambda_layers"] = std::move(rows);
    }
    j["objective_trace"] = r.objective_trace;
    return j;
}

std::string summary_row(const RoundRecord& r, const char* strategy) {
    std::string out = std::to_string(r.round);
    out += ",";
    out += strategy;
    out += "," + format_float(r.accuracy);
    out += "," + format_float(r.lambda_min());
    out += "," + format_float(r.lambda_max());
    out += "," + format_float(r.objective());
    out += "\n";
    return out;
}

ConfigDoc load_with_overrides(const std::string& config_path, const CliOverrides& overrides) {
    ConfigDoc doc = load_config_file(config_path);
    if (overrides.seed) doc.set("run.master_seed", *overrides.seed);
    if (overrides.strategy) {
        if (!parse_strategy(*overrides.strategy)) {
            throw ConfigError("run.strategy: unknown strategy '" + *overrides.strategy + "'");
        }
        doc.set("run.strategy", *overrides.strategy);
    }
    return doc;
}

void write_manifest(const std::string& out_dir, const ConfigDoc& doc) {
    nlohmann::json manifest;
    manifest["config_hash"] = config_hash(doc);
    manifest["config_text"] = canonical_text(doc);
    manifest["out_dir"] = out_dir;
    manifest["created"] = iso_timestamp();
    write_file_atomic(out_dir + "/manifest.json", manifest.dump(2) + "\n");
}

int classify(const Error& e, std::ostream& err) {
    err << "error: " << e.what() << "\n";
    return dynamic_cast<const ConfigError*>(&e) ? 2 : 1;
}

struct RunDir {
    ConfigDoc doc;
    ExperimentConfig config;
};

RunDir load_run_dir(const std::string& run_dir) {
    const std::string manifest_path = run_dir + "/manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw Error("missing run artifact: " + manifest_path);
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw Error(manifest_path + ": " + e.what());
    }
    RunDir rd;
    rd.doc = parse_config_text(manifest.at("config_text").get<std::string>());
    rd.config = to_experiment_config(rd.doc);
    return rd;
}

std::vector<std::vector<double>> read_lambda_rounds(const std::string& run_dir) {
    const std::string path = run_dir + "/records.jsonl";
    std::ifstream in(path);
    if (!in) throw Error("missing run artifact: " + path);
    std::vector<std::vector<double>> rounds;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        rounds.push_back(j.at("lambda").get<std::vector<double>>());
    }
    if (rounds.empty()) throw Error(path + ": no round records");
    return rounds;
}

std::string matrix_csv(const DistanceMatrix& m, const std::vector<int>& ids) {
    std::string out;
    for (std::size_t j = 0; j < m.clients; ++j) {
        if (j) out += ",";
        out += "client_" + std::to_string(ids[j]);
    }
    out += "\n";
    for (std::size_t i = 0; i < m.clients; ++i) {
        for (std::size_t j = 0; j < m.clients; ++j) {
            if (j) out += ",";
            out += format_float(m.at(i, j));
        }
        out += "\n";
    }
    return out;
}

/// Client models of one round, trained from the supplied global model with
/// the exact per-(round, client) seeds the orchestrator uses.
std::vector<ParamVector> replay_client_models(const ExperimentConfig& config, const ExperimentEnv& env,
                                              const ParamVector& global, const std::vector<int>& ids, int round) {
    const SeedPlan plan{config.master_seed};
    TrainConfig tc = config.train;
    if (config.strategy != Strategy::kFedProx) tc.prox_mu = 0.0;
    const double lr = config.train.round_lr(round);
    std::vector<ParamVector> thetas;
    thetas.reserve(ids.size());
    for (const int id : ids) {
        thetas.push_back(local_train(global, config.model, env.train, env.partitions[static_cast<std::size_t>(id)],
                                     tc, lr, plan.client_seed(round, id))
                             .params);
    }
    return thetas;
}

int analyze_distance_matrix(const std::string& run_dir, const RunDir& rd) {
    const ExperimentEnv env = build_environment(rd.config);
    const FederationState state = initial_state(rd.config, env);
    const std::vector<int> ids =
        sample_clients(rd.config.clients, rd.config.participation, 1, rd.config.master_seed);
    const std::vector<ParamVector> thetas = replay_client_models(rd.config, env, state.global, ids, 1);
    std::vector<ParamVector> deltas;
    deltas.reserve(thetas.size());
    for (std::size_t i = 0; i < thetas.size(); ++i) {
        deltas.push_back(client_vector(thetas[i], state.global, ids[i], 1).delta);
    }
    write_file_atomic(run_dir + "/distance_matrix.csv", matrix_csv(vector_distance_matrix(deltas), ids));
    return 0;
}

int analyze_ideal_vector(const std::string& run_dir, const RunDir& rd) {
    const ExperimentEnv env = build_environment(rd.config);
    FederationState state = initial_state(rd.config, env);
    const SeedPlan plan{rd.config.master_seed};
    const int probe_rounds = std::min(rd.config.rounds, 20);

    std::string csv = "round,dist_global";
    const std::vector<int> first_ids =
        sample_clients(rd.config.clients, rd.config.participation, 1, rd.config.master_seed);
    for (const int id : first_ids) csv += ",dist_client_" + std::to_string(id);
    csv += "\n";

    for (int t = 1; t <= probe_rounds; ++t) {
        const std::vector<int> ids =
            sample_clients(rd.config.clients, rd.config.participation, t, rd.config.master_seed);
        const std::vector<ParamVector> thetas = replay_client_models(rd.config, env, state.global, ids, t);
        std::vector<ClientVector> taus;
        std::vector<std::size_t> sizes;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            taus.push_back(client_vector(thetas[i], state.global, ids[i], t));
            sizes.push_back(env.client_sizes[static_cast<std::size_t>(ids[i])]);
        }
        TrainConfig tc = rd.config.train;
        tc.prox_mu = 0.0;
        const IdealProbe probe =
            ideal_vector_probe(state.global, rd.config.model, env.train, tc, rd.config.train.round_lr(t),
                               mix_seed(rd.config.master_seed, 0x1DEA11ULL, static_cast<std::uint64_t>(t)), taus,
                               sizes);
        csv += std::to_string(t);
        for (const double d : probe.distances) csv += "," + format_float(d);
        csv += "\n";
        run_round(state, rd.config, env);
    }
    write_file_atomic(run_dir + "/ideal_vector.csv", csv);
    return 0;
}

int analyze_weight_trajectory(const std::string& run_dir, const RunDir& rd) {
    const ExperimentEnv env = build_environment(rd.config);
    const std::vector<std::vector<double>> rounds = read_lambda_rounds(run_dir);
    // The dataset vector is defined over the full client set; the probe
    // therefore needs full-participation weight records.
    for (const std::vector<double>& w : rounds) {
        if (w.size() != rd.config.clients) {
            throw Error("weight_trajectory: round weights cover " + std::to_string(w.size()) + " of " +
                        std::to_string(rd.config.clients) + " clients (partial participation run)");
        }
    }
    const DatasetVector dv =
        dataset_vector(env.client_hists, env.global_hist, uniform_cost(env.client_hists.front().counts.size()));
    const std::vector<double> sims = weight_trajectory_similarity(rounds, dv);
    std::string csv = "round,similarity\n";
    for (std::size_t i = 0; i < sims.size(); ++i) {
        csv += std::to_string(i + 1) + "," + format_float(sims[i]) + "\n";
    }
    write_file_atomic(run_dir + "/weight_trajectory.csv", csv);
    return 0;
}

} // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open for writing: " + tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("write failed: " + tmp);
    }
    fs::rename(tmp, path);
}

int cmd_run(const std::string& config_path, const std::string& out_dir, const CliOverrides& overrides,
            std::ostream& err) {
    try {
        const ConfigDoc doc = load_with_overrides(config_path, overrides);
        const ExperimentConfig config = to_experiment_config(doc);
        fs::create_directories(out_dir);

        const char* strategy = strategy_name(config.strategy);
        std::string records_text;
        std::string weights_text;
        std::string summary_text = "round,strategy,accuracy,lambda_min,lambda_max,objective\n";
        const ExperimentResult result = run_experiment(config, [&](const RoundRecord& r) {
            records_text += record_json(r, strategy).dump() + "\n";
            weights_text += weights_json(r, strategy).dump() + "\n";
            summary_text += summary_row(r, strategy);
        });

        write_manifest(out_dir, doc);
        write_file_atomic(out_dir + "/records.jsonl", records_text);
        write_file_atomic(out_dir + "/weights.jsonl", weights_text);
        write_file_atomic(out_dir + "/summary.csv", summary_text);
        {
            std::ostringstream checkpoint;
            save_param_vector(result.final_model, checkpoint);
            write_file_atomic(out_dir + "/checkpoint.bin", checkpoint.str());
        }
        return 0;
    } catch (const Error& e) {
        return classify(e, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_partition(const std::string& config_path, const std::string& out_dir, const CliOverrides& overrides,
                  std::ostream& err) {
    try {
        const ConfigDoc doc = load_with_overrides(config_path, overrides);
        const ExperimentConfig config = to_experiment_config(doc);
        const ExperimentEnv env = build_environment(config);
        fs::create_directories(out_dir);
        write_manifest(out_dir, doc);
        const SeedPlan plan{config.master_seed};
        write_file_atomic(out_dir + "/partition.json",
                          partition_manifest_json(env.train, env.partitions, plan.partition_seed(),
                                                  config.data.alpha) +
                              "\n");
        return 0;
    } catch (const Error& e) {
        return classify(e, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_analyze(const std::string& run_dir, const std::string& probe, std::ostream& err) {
    try {
        const RunDir rd = load_run_dir(run_dir);
        if (probe == "distance_matrix") return analyze_distance_matrix(run_dir, rd);
        if (probe == "ideal_vector") return analyze_ideal_vector(run_dir, rd);
        if (probe == "weight_trajectory") return analyze_weight_trajectory(run_dir, rd);
        throw ConfigError("analyze.probe: unknown probe '" + probe +
                          "' (expected distance_matrix|ideal_vector|weight_trajectory)");
    } catch (const Error& e) {
        return classify(e, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace fedawa
