#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedawa/error.hpp"

namespace fedawa {

/// Labeled feature matrix. Features are row-major n x dim.
struct Dataset {
    std::vector<double> features;
    std::vector<int> labels;
    std::size_t n = 0;
    std::size_t dim = 0;
    int class_count = 0;

    const double* row(std::size_t i) const { return features.data() + i * dim; }
    void validate() const;
};

/// One client's slice of a parent dataset, stored as sorted unique indices.
struct ClientPartition {
    int client_id = 0;
    std::vector<std::size_t> indices;

    std::size_t size() const { return indices.size(); }
    void validate(std::size_t dataset_n) const;
};

/// Exact per-class counts plus the normalized distribution.
struct LabelHistogram {
    std::vector<std::int64_t> counts;
    std::vector<double> normalized;

    std::int64_t total() const;
};

/// Parameters of a Dirichlet non-IID split.
struct DirichletSpec {
    double alpha = 0.1;
    std::size_t clients = 1;
    std::uint64_t seed = 0;
    std::size_t min_samples = 2;
};

/// Synthetic Gaussian-blob classification data. Class means are a pure
/// function of (class, dim, spread) — unit-norm pseudo-random directions
/// scaled by 3*spread — so datasets drawn with different seeds share the
/// same class geometry and differ only in sampling noise.
Dataset gen_blobs(int classes, std::size_t dim, std::size_t n_per_class, double spread, std::uint64_t seed);

/// Per-class Dirichlet split of the label set across spec.clients.
/// Guarantees every client at least spec.min_samples samples, re-drawing a
/// bounded number of times and then moving samples from the largest client.
std::vector<ClientPartition> dirichlet_partition(const std::vector<int>& labels, const DirichletSpec& spec);

/// Three-group extreme split: the first third of the clients sees only the
/// lower half of the classes, the second third only the upper half, and the
/// last third all classes. Client sizes are as equal as integer splits allow.
std::vector<ClientPartition> extreme_groups(const std::vector<int>& labels, int class_count,
                                            std::size_t clients, std::uint64_t seed);

LabelHistogram label_histogram(const Dataset& dataset, const ClientPartition& partition);
LabelHistogram full_histogram(const Dataset& dataset);

/// IDX (big-endian magic, ubyte payload) image + label pair. Pixels scale to [0,1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// CSV with header row `label,f0,f1,...`.
Dataset load_csv(const std::string& path);

/// Partition manifest: {seed, alpha, clients:[{id, n, histogram}]}.
std::string partition_manifest_json(const Dataset& dataset, const std::vector<ClientPartition>& partitions,
                                    std::uint64_t seed, double alpha);

} // namespace fedawa
