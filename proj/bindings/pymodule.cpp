#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fedawa/analysis.hpp"
#include "fedawa/config.hpp"
#include "fedawa/orchestrator.hpp"
#include "fedawa/runner.hpp"

namespace py = pybind11;
using namespace fedawa;

namespace {

AggWeights weights_from(std::vector<double> lambda, int round) {
    AggWeights w{std::move(lambda), round};
    w.validate();
    return w;
}

LabelHistogram hist_from_counts(std::vector<std::int64_t> counts) {
    LabelHistogram h;
    h.counts = std::move(counts);
    const double total = static_cast<double>(h.total());
    if (total <= 0.0) throw DomainError("histogram: empty counts");
    for (const std::int64_t c : h.counts) h.normalized.push_back(static_cast<double>(c) / total);
    return h;
}

py::dict record_to_dict(const RoundRecord& r) {
    py::dict d;
    d["round"] = r.round;
    d["participants"] = r.participants;
    d["lambda"] = r.flat_lambda();
    d["local_losses"] = r.local_losses;
    d["accuracy"] = r.accuracy;
    d["objective"] = r.objective();
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "fedawa: deterministic federated-learning simulation engine";

    // translators run newest-first: register the base before the subclass
    py::register_exception<Error>(m, "FedawaError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "FedawaConfigError", PyExc_ValueError);

    py::class_<LayerLayout>(m, "LayerLayout")
        .def(py::init([](const std::vector<std::pair<std::string, std::size_t>>& parts) {
            return LayerLayout::from_lengths(parts);
        }))
        .def_property_readonly("total_len", &LayerLayout::total_len)
        .def_property_readonly("layer_count", &LayerLayout::layer_count);

    py::class_<ParamVector>(m, "ParamVector")
        .def(py::init<std::vector<double>, LayerLayout>())
        .def_property_readonly("values", [](const ParamVector& v) { return v.values(); })
        .def("__len__", &ParamVector::size);

    py::class_<ClientVector>(m, "ClientVector")
        .def_readonly("delta", &ClientVector::delta)
        .def_readonly("client_id", &ClientVector::client_id)
        .def_readonly("round", &ClientVector::round);

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("n", [](const Dataset& d) { return d.n; })
        .def_property_readonly("dim", [](const Dataset& d) { return d.dim; })
        .def_property_readonly("class_count", [](const Dataset& d) { return d.class_count; })
        .def_readonly("labels", &Dataset::labels)
        .def_readonly("features", &Dataset::features);

    py::class_<ClientPartition>(m, "ClientPartition")
        .def_readonly("client_id", &ClientPartition::client_id)
        .def_readonly("indices", &ClientPartition::indices)
        .def("__len__", &ClientPartition::size);

    py::class_<LabelHistogram>(m, "LabelHistogram")
        .def(py::init(&hist_from_counts))
        .def_readonly("counts", &LabelHistogram::counts)
        .def_readonly("normalized", &LabelHistogram::normalized);

    py::class_<AggWeights>(m, "AggWeights")
        .def(py::init(&weights_from), py::arg("lambda_"), py::arg("round") = 1)
        .def_property_readonly("lambda_", [](const AggWeights& w) { return w.lambda; })
        .def_readonly("round", &AggWeights::round);

    // tensor operations
    m.def("dot", &dot);
    m.def("l2_norm", &l2_norm);
    m.def("cosine_similarity", &cosine_similarity);
    m.def("axpy", &axpy);

    // data
    m.def("gen_blobs", &gen_blobs, py::arg("classes"), py::arg("dim"), py::arg("n_per_class"), py::arg("spread"),
          py::arg("seed"));
    m.def(
        "dirichlet_partition",
        [](const std::vector<int>& labels, double alpha, std::size_t clients, std::uint64_t seed,
           std::size_t min_samples) {
            return dirichlet_partition(labels, DirichletSpec{alpha, clients, seed, min_samples});
        },
        py::arg("labels"), py::arg("alpha"), py::arg("clients"), py::arg("seed"), py::arg("min_samples") = 2);
    m.def("extreme_groups", &extreme_groups, py::arg("labels"), py::arg("class_count"), py::arg("clients"),
          py::arg("seed"));
    m.def("label_histogram", &label_histogram);
    m.def("full_histogram", &full_histogram);
    m.def("load_idx", &load_idx);
    m.def("load_csv", &load_csv);

    // aggregation
    m.def("client_vector", &client_vector, py::arg("theta_k"), py::arg("theta_g"), py::arg("client_id"),
          py::arg("round"));
    m.def("merge_vectors", &merge_vectors);
    m.def("fedavg_weights", &fedavg_weights);
    m.def("disco_weights", &disco_weights, py::arg("sample_counts"), py::arg("local_hists"), py::arg("global_hist"),
          py::arg("a") = 0.5, py::arg("b") = 0.1);
    m.def("ldawa_weights", &ldawa_weights);
    m.def("awa_cos_weights", &awa_cos_weights);
    m.def("aggregate", &aggregate);

    const auto opts_from = [](int steps, double step_size, const std::string& reg, double reg_coeff,
                              bool warm_start) {
        AwaOptions opts;
        opts.steps = steps;
        opts.step_size = step_size;
        opts.reg_coeff = reg_coeff;
        opts.warm_start = warm_start;
        if (reg == "none") {
            opts.reg_kind = RegKind::kNone;
        } else if (reg == "euclid") {
            opts.reg_kind = RegKind::kEuclid;
        } else if (reg == "cosine") {
            opts.reg_kind = RegKind::kCosine;
        } else {
            throw ConfigError("awa.reg: unknown regularizer '" + reg + "'");
        }
        return opts;
    };
    m.def(
        "awa_objective",
        [opts_from](const AggWeights& lambda, const std::vector<ClientVector>& taus,
                    const std::vector<ParamVector>& thetas, const ParamVector& theta_g, int steps, double step_size,
                    const std::string& reg, double reg_coeff) {
            return awa_objective(lambda, taus, thetas, theta_g, opts_from(steps, step_size, reg, reg_coeff, true));
        },
        py::arg("lambda_"), py::arg("taus"), py::arg("thetas"), py::arg("theta_g"), py::arg("steps") = 200,
        py::arg("step_size") = 0.0015, py::arg("reg") = "cosine", py::arg("reg_coeff") = 1.0);
    m.def(
        "optimize_weights",
        [opts_from](const std::vector<ClientVector>& taus, const std::vector<ParamVector>& thetas,
                    const ParamVector& theta_g, const AggWeights& w_init, int steps, double step_size,
                    const std::string& reg, double reg_coeff) {
            const OptimizeResult r =
                optimize_weights(taus, thetas, theta_g, w_init, opts_from(steps, step_size, reg, reg_coeff, true));
            return py::make_tuple(r.weights, r.trace);
        },
        py::arg("taus"), py::arg("thetas"), py::arg("theta_g"), py::arg("w_init"), py::arg("steps") = 200,
        py::arg("step_size") = 0.0015, py::arg("reg") = "cosine", py::arg("reg_coeff") = 1.0);

    // analysis
    m.def("uniform_cost", &uniform_cost);
    m.def("absdiff_cost", &absdiff_cost);
    m.def("ot_distance", &ot_distance);
    m.def("dataset_vector", [](const std::vector<LabelHistogram>& hists, const LabelHistogram& global,
                               const std::vector<double>& cost) { return dataset_vector(hists, global, cost).sims; });
    m.def("vector_distance_matrix", [](const std::vector<ParamVector>& vs) {
        const DistanceMatrix m_ = vector_distance_matrix(vs);
        std::vector<std::vector<double>> rows(m_.clients, std::vector<double>(m_.clients));
        for (std::size_t i = 0; i < m_.clients; ++i) {
            for (std::size_t j = 0; j < m_.clients; ++j) rows[i][j] = m_.at(i, j);
        }
        return rows;
    });
    m.def("weight_trajectory_similarity",
          [](const std::vector<std::vector<double>>& weights, const std::vector<double>& sims) {
              DatasetVector dv;
              dv.sims = sims;
              return weight_trajectory_similarity(weights, dv);
          });

    // experiment driver: parses the same config text the CLI accepts
    m.def(
        "run_experiment",
        [](const std::string& config_text) {
            const ExperimentConfig cfg = to_experiment_config(parse_config_text(config_text));
            const ExperimentResult result = run_experiment(cfg);
            py::list records;
            for (const RoundRecord& r : result.records) records.append(record_to_dict(r));
            return py::make_tuple(records, result.final_model);
        },
        py::arg("config_text"));
    m.def("config_schema", &schema_dump);
    m.def("canonical_config", [](const std::string& text) { return canonical_text(parse_config_text(text)); });
    m.def("config_hash", [](const std::string& text) { return config_hash(parse_config_text(text)); });
}
