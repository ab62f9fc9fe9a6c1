#include "fedawa/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fedawa/rng.hpp"

namespace fedawa {

void Dataset::validate() const {
    if (n == 0) throw DomainError("dataset: empty");
    if (dim == 0) throw DomainError("dataset: zero feature dimension");
    if (features.size() != n * dim) throw DomainError("dataset: feature buffer size mismatch");
    if (labels.size() != n) throw DomainError("dataset: label count mismatch");
    if (class_count < 1) throw DomainError("dataset: class_count must be >= 1");
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || labels[i] >= class_count) {
            throw DomainError("dataset: label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                              " outside [0, " + std::to_string(class_count) + ")");
        }
    }
    for (const double v : features) {
        if (!std::isfinite(v)) throw NumericError("dataset: non-finite feature value");
    }
}

void ClientPartition::validate(std::size_t dataset_n) const {
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= dataset_n) throw DomainError("partition: index out of bounds");
        if (i > 0 && indices[i] <= indices[i - 1]) throw DomainError("partition: indices not sorted unique");
    }
}

std::int64_t LabelHistogram::total() const {
    std::int64_t t = 0;
    for (const std::int64_t c : counts) t += c;
    return t;
}

namespace {

constexpr std::uint64_t kBlobMeanSeed = 0xB10B5EEDULL;

std::vector<double> blob_mean(int cls, std::size_t dim, double spread) {
    Rng rng(mix_seed(kBlobMeanSeed, static_cast<std::uint64_t>(cls)));
    std::vector<double> m(dim);
    double norm_sq = 0.0;
    for (double& v : m) {
        v = rng.normal();
        norm_sq += v * v;
    }
    const double norm = std::sqrt(norm_sq);
    const double scale = norm > 0.0 ? 3.0 * spread / norm : 0.0;
    for (double& v : m) v *= scale;
    return m;
}

} // namespace

Dataset gen_blobs(int classes, std::size_t dim, std::size_t n_per_class, double spread, std::uint64_t seed) {
    if (classes < 2) throw DomainError("gen_blobs: need at least 2 classes");
    if (dim < 1) throw DomainError("gen_blobs: need at least 1 dimension");
    if (n_per_class < 1) throw DomainError("gen_blobs: need at least 1 sample per class");

    Dataset ds;
    ds.n = static_cast<std::size_t>(classes) * n_per_class;
    ds.dim = dim;
    ds.class_count = classes;
    ds.features.resize(ds.n * dim);
    ds.labels.resize(ds.n);

    std::size_t row = 0;
    for (int c = 0; c < classes; ++c) {
        const std::vector<double> mean = blob_mean(c, dim, spread);
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(c)));
        for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
            double* out = ds.features.data() + row * dim;
            for (std::size_t d = 0; d < dim; ++d) out[d] = mean[d] + spread * rng.normal();
            ds.labels[row] = c;
        }
    }
    return ds;
}

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const std::vector<int>& labels, int class_count) {
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(class_count));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int c = labels[i];
        if (c < 0 || c >= class_count) throw DomainError("partition: label out of range");
        by_class[static_cast<std::size_t>(c)].push_back(i);
    }
    return by_class;
}

std::vector<ClientPartition> draw_dirichlet_once(const std::vector<std::vector<std::size_t>>& by_class,
                                                 const DirichletSpec& spec, std::uint64_t seed) {
    const std::size_t k = spec.clients;
    std::vector<std::vector<std::size_t>> assigned(k);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        const std::vector<std::size_t>& idx = by_class[c];
        if (idx.empty()) continue;
        Rng rng(mix_seed(seed, c));
        const std::vector<double> p = rng.dirichlet(spec.alpha, k);
        // Split this class's indices at cumulative-proportion boundaries.
        const std::size_t m = idx.size();
        double cum = 0.0;
        std::size_t start = 0;
        for (std::size_t j = 0; j < k; ++j) {
            cum += p[j];
            std::size_t end = (j + 1 == k) ? m : static_cast<std::size_t>(std::floor(cum * static_cast<double>(m)));
            if (end > m) end = m;
            if (end < start) end = start;
            for (std::size_t i = start; i < end; ++i) assigned[j].push_back(idx[i]);
            start = end;
        }
    }
    std::vector<ClientPartition> parts(k);
    for (std::size_t j = 0; j < k; ++j) {
        std::sort(assigned[j].begin(), assigned[j].end());
        parts[j] = ClientPartition{static_cast<int>(j), std::move(assigned[j])};
    }
    return parts;
}

} // namespace

std::vector<ClientPartition> dirichlet_partition(const std::vector<int>& labels, const DirichletSpec& spec) {
    if (!(spec.alpha > 0.0)) throw ConfigError("dirichlet: alpha must be > 0");
    if (spec.clients < 1) throw ConfigError("dirichlet: need at least 1 client");
    if (labels.size() < spec.clients * spec.min_samples) {
        throw ConfigError("dirichlet: " + std::to_string(labels.size()) + " samples cannot give " +
                          std::to_string(spec.clients) + " clients at least " + std::to_string(spec.min_samples) +
                          " samples each");
    }
    int class_count = 0;
    for (const int l : labels) class_count = std::max(class_count, l + 1);
    const auto by_class = indices_by_class(labels, class_count);

    constexpr int kMaxRedraws = 10;
    std::vector<ClientPartition> parts;
    for (int attempt = 0; attempt <= kMaxRedraws; ++attempt) {
        parts = draw_dirichlet_once(by_class, spec, mix_seed(spec.seed, static_cast<std::uint64_t>(attempt)));
        const bool ok = std::all_of(parts.begin(), parts.end(),
                                    [&](const ClientPartition& p) { return p.size() >= spec.min_samples; });
        if (ok) return parts;
    }

    // Bounded retries exhausted: top up deficient clients from the largest one.
    for (std::size_t j = 0; j < parts.size(); ++j) {
        while (parts[j].size() < spec.min_samples) {
            std::size_t largest = 0;
            for (std::size_t i = 1; i < parts.size(); ++i) {
                if (parts[i].size() > parts[largest].size()) largest = i;
            }
            if (largest == j || parts[largest].size() <= spec.min_samples) {
                throw ConfigError("dirichlet: cannot satisfy min_samples even by rebalancing");
            }
            parts[j].indices.push_back(parts[largest].indices.back());
            parts[largest].indices.pop_back();
        }
        std::sort(parts[j].indices.begin(), parts[j].indices.end());
    }
    return parts;
}

std::vector<ClientPartition> extreme_groups(const std::vector<int>& labels, int class_count,
                                            std::size_t clients, std::uint64_t seed) {
    if (clients < 3 || clients % 3 != 0) {
        throw ConfigError("extreme_groups: client count must be a positive multiple of 3");
    }
    if (class_count < 2) throw ConfigError("extreme_groups: need at least 2 classes");
    const std::size_t group = clients / 3;
    const int half = class_count / 2;
    auto by_class = indices_by_class(labels, class_count);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        Rng rng(mix_seed(seed, 0x9E0Full, c));
        rng.shuffle(by_class[c]);
    }

    // Two thirds of each class go to its dedicated group, one third to the
    // mixed group; this makes client sizes equal up to integer rounding.
    std::vector<std::vector<std::size_t>> assigned(clients);
    auto spread_across = [](const std::vector<std::size_t>& idx, std::size_t begin, std::size_t count,
                            std::vector<std::vector<std::size_t>>& out, std::size_t first_client,
                            std::size_t n_clients) {
        for (std::size_t i = 0; i < count; ++i) {
            out[first_client + i % n_clients].push_back(idx[begin + i]);
        }
    };
    for (int c = 0; c < class_count; ++c) {
        const auto& idx = by_class[static_cast<std::size_t>(c)];
        const std::size_t dedicated = (idx.size() * 2) / 3;
        const std::size_t first = c < half ? 0 : group;
        spread_across(idx, 0, dedicated, assigned, first, group);
        spread_across(idx, dedicated, idx.size() - dedicated, assigned, 2 * group, group);
    }

    std::vector<ClientPartition> parts(clients);
    for (std::size_t j = 0; j < clients; ++j) {
        std::sort(assigned[j].begin(), assigned[j].end());
        parts[j] = ClientPartition{static_cast<int>(j), std::move(assigned[j])};
    }
    return parts;
}

LabelHistogram label_histogram(const Dataset& dataset, const ClientPartition& partition) {
    partition.validate(dataset.n);
    LabelHistogram h;
    h.counts.assign(static_cast<std::size_t>(dataset.class_count), 0);
    for (const std::size_t i : partition.indices) {
        ++h.counts[static_cast<std::size_t>(dataset.labels[i])];
    }
    const double total = static_cast<double>(partition.indices.size());
    h.normalized.resize(h.counts.size());
    for (std::size_t c = 0; c < h.counts.size(); ++c) {
        h.normalized[c] = total > 0.0 ? static_cast<double>(h.counts[c]) / total : 0.0;
    }
    return h;
}

LabelHistogram full_histogram(const Dataset& dataset) {
    ClientPartition all;
    all.client_id = -1;
    all.indices.resize(dataset.n);
    for (std::size_t i = 0; i < dataset.n; ++i) all.indices[i] = i;
    return label_histogram(dataset, all);
}

namespace {

std::uint32_t read_be_u32(std::istream& in, std::size_t& offset, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw ParseError(path + ": truncated at byte " + std::to_string(offset));
    offset += 4;
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

struct IdxPayload {
    std::vector<std::uint32_t> dims;
    std::vector<unsigned char> data;
};

IdxPayload read_idx(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path + ": cannot open");
    std::size_t offset = 0;
    const std::uint32_t magic = read_be_u32(in, offset, path);
    if ((magic & 0xFFFF0000u) != 0) {
        throw ParseError(path + ": bad magic at byte 0 (first two bytes must be zero)");
    }
    const std::uint32_t dtype = (magic >> 8) & 0xFF;
    if (dtype != 0x08) {
        throw ParseError(path + ": unsupported IDX element type 0x" + std::to_string(dtype) + " at byte 2");
    }
    const std::uint32_t ndims = magic & 0xFF;
    if (ndims == 0 || ndims > 3) {
        throw ParseError(path + ": unsupported dimension count " + std::to_string(ndims) + " at byte 3");
    }
    IdxPayload payload;
    std::size_t total = 1;
    for (std::uint32_t d = 0; d < ndims; ++d) {
        const std::uint32_t dim = read_be_u32(in, offset, path);
        payload.dims.push_back(dim);
        total *= dim;
    }
    payload.data.resize(total);
    in.read(reinterpret_cast<char*>(payload.data.data()), static_cast<std::streamsize>(total));
    if (!in) throw ParseError(path + ": truncated payload at byte " + std::to_string(offset));
    return payload;
}

} // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const IdxPayload images = read_idx(images_path);
    const IdxPayload labels = read_idx(labels_path);
    if (labels.dims.size() != 1) throw ParseError(labels_path + ": label file must be 1-dimensional");
    if (images.dims.empty() || images.dims[0] != labels.dims[0]) {
        throw ParseError(images_path + ": image count does not match label count");
    }

    Dataset ds;
    ds.n = images.dims[0];
    ds.dim = 1;
    for (std::size_t d = 1; d < images.dims.size(); ++d) ds.dim *= images.dims[d];
    if (ds.n == 0 || ds.dim == 0) throw ParseError(images_path + ": empty image payload");

    ds.features.resize(ds.n * ds.dim);
    for (std::size_t i = 0; i < ds.features.size(); ++i) {
        ds.features[i] = static_cast<double>(images.data[i]) / 255.0;
    }
    ds.labels.resize(ds.n);
    int max_label = 0;
    for (std::size_t i = 0; i < ds.n; ++i) {
        ds.labels[i] = static_cast<int>(labels.data[i]);
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.class_count = max_label + 1;
    ds.validate();
    return ds;
}

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": missing header row");
    if (line.rfind("label", 0) != 0) throw ParseError(path + ": header must start with 'label'");
    std::size_t dim = 0;
    for (const char ch : line) {
        if (ch == ',') ++dim;
    }
    if (dim == 0) throw ParseError(path + ": header names no feature columns");

    Dataset ds;
    ds.dim = dim;
    int max_label = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        if (!std::getline(ss, cell, ',')) throw ParseError(path + ": empty row at line " + std::to_string(line_no));
        int label = 0;
        try {
            label = std::stoi(cell);
        } catch (const std::exception&) {
            throw ParseError(path + ": bad label '" + cell + "' at line " + std::to_string(line_no));
        }
        if (label < 0) throw ParseError(path + ": negative label at line " + std::to_string(line_no));
        max_label = std::max(max_label, label);
        ds.labels.push_back(label);
        std::size_t got = 0;
        while (std::getline(ss, cell, ',')) {
            try {
                ds.features.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ParseError(path + ": bad feature '" + cell + "' at line " + std::to_string(line_no));
            }
            ++got;
        }
        if (got != dim) {
            throw ParseError(path + ": expected " + std::to_string(dim) + " features, got " + std::to_string(got) +
                             " at line " + std::to_string(line_no));
        }
    }
    ds.n = ds.labels.size();
    ds.class_count = max_label + 1;
    ds.validate();
    return ds;
}

std::string partition_manifest_json(const Dataset& dataset, const std::vector<ClientPartition>& partitions,
                                    std::uint64_t seed, double alpha) {
    nlohmann::json manifest;
    manifest["seed"] = seed;
    manifest["alpha"] = alpha;
    nlohmann::json clients = nlohmann::json::array();
    for (const ClientPartition& p : partitions) {
        const LabelHistogram h = label_histogram(dataset, p);
        clients.push_back({{"id", p.client_id}, {"n", p.size()}, {"histogram", h.counts}});
    }
    manifest["clients"] = std::move(clients);
    return manifest.dump(2);
}

} // namespace fedawa
