#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "fedawa/data.hpp"
#include "fedawa/rng.hpp"

using namespace fedawa;

namespace {

std::vector<double> class_mean(const Dataset& ds, int cls) {
    std::vector<double> m(ds.dim, 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < ds.n; ++i) {
        if (ds.labels[i] != cls) continue;
        for (std::size_t d = 0; d < ds.dim; ++d) m[d] += ds.row(i)[d];
        ++count;
    }
    for (double& v : m) v /= static_cast<double>(count);
    return m;
}

double mean_l1_to_global(const Dataset& ds, const std::vector<ClientPartition>& parts) {
    const LabelHistogram global = full_histogram(ds);
    double total = 0.0;
    for (const ClientPartition& p : parts) {
        const LabelHistogram h = label_histogram(ds, p);
        double l1 = 0.0;
        for (std::size_t c = 0; c < h.normalized.size(); ++c) {
            l1 += std::abs(h.normalized[c] - global.normalized[c]);
        }
        total += l1;
    }
    return total / static_cast<double>(parts.size());
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("gen_blobs counts and determinism") {
    const Dataset ds = gen_blobs(2, 2, 5, 1.0, 12);
    CHECK(ds.n == 10);
    CHECK(ds.dim == 2);
    CHECK(ds.class_count == 2);
    std::size_t zeros = 0;
    for (const int l : ds.labels) zeros += l == 0;
    CHECK(zeros == 5);

    const Dataset again = gen_blobs(2, 2, 5, 1.0, 12);
    CHECK(again.features == ds.features);
    CHECK(again.labels == ds.labels);
}

TEST_CASE("gen_blobs spread=0 collapses each class onto its mean") {
    const Dataset ds = gen_blobs(3, 4, 6, 0.0, 5);
    for (int c = 0; c < 3; ++c) {
        const std::vector<double> m = class_mean(ds, c);
        for (std::size_t i = 0; i < ds.n; ++i) {
            if (ds.labels[i] != c) continue;
            for (std::size_t d = 0; d < ds.dim; ++d) CHECK(ds.row(i)[d] == m[d]);
        }
    }
}

TEST_CASE("gen_blobs class geometry is shared across seeds") {
    // different seeds draw different noise around the same class means
    const Dataset a = gen_blobs(4, 8, 400, 0.7, 100);
    const Dataset b = gen_blobs(4, 8, 400, 0.7, 200);
    CHECK(a.features != b.features);
    for (int c = 0; c < 4; ++c) {
        const std::vector<double> ma = class_mean(a, c);
        const std::vector<double> mb = class_mean(b, c);
        for (std::size_t d = 0; d < a.dim; ++d) {
            CHECK(std::abs(ma[d] - mb[d]) < 0.35); // sample means of 400 draws, sd 0.7
        }
    }
}

TEST_CASE("dirichlet partition soundness over random specs") {
    Rng rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        const Dataset ds = gen_blobs(5, 2, 40, 1.0, 1000 + trial);
        DirichletSpec spec;
        spec.alpha = std::exp(rng.uniform(std::log(0.1), std::log(100.0)));
        spec.clients = 2 + rng.uniform_index(6);
        spec.seed = rng.next_u64();
        const auto parts = dirichlet_partition(ds.labels, spec);
        REQUIRE(parts.size() == spec.clients);
        std::set<std::size_t> seen;
        for (const ClientPartition& p : parts) {
            CHECK(p.size() >= spec.min_samples);
            for (const std::size_t i : p.indices) {
                CHECK(seen.insert(i).second); // pairwise disjoint
            }
        }
        CHECK(seen.size() == ds.n); // union is everything
    }
}

TEST_CASE("near-IID draw stays close to the global histogram") {
    const Dataset ds = gen_blobs(10, 2, 100, 1.0, 2);
    const auto parts = dirichlet_partition(ds.labels, DirichletSpec{100.0, 4, 31, 2});
    const LabelHistogram global = full_histogram(ds);
    for (const ClientPartition& p : parts) {
        const LabelHistogram h = label_histogram(ds, p);
        for (std::size_t c = 0; c < h.normalized.size(); ++c) {
            CHECK(std::abs(h.normalized[c] - global.normalized[c]) < 0.15);
        }
    }
}

TEST_CASE("small alpha lowers per-client histogram entropy") {
    const Dataset ds = gen_blobs(10, 2, 100, 1.0, 2);
    const auto entropy_of = [&](double alpha) {
        const auto parts = dirichlet_partition(ds.labels, DirichletSpec{alpha, 4, 31, 2});
        double mean = 0.0;
        for (const ClientPartition& p : parts) {
            const LabelHistogram h = label_histogram(ds, p);
            double e = 0.0;
            for (const double q : h.normalized) {
                if (q > 0.0) e -= q * std::log(q);
            }
            mean += e / static_cast<double>(parts.size());
        }
        return mean;
    };
    CHECK(entropy_of(0.1) < entropy_of(100.0));
}

TEST_CASE("heterogeneity decreases monotonically in alpha") {
    const Dataset ds = gen_blobs(10, 2, 60, 1.0, 4);
    double mean_l1[3] = {0, 0, 0};
    const double alphas[3] = {0.1, 0.5, 100.0};
    for (int a = 0; a < 3; ++a) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto parts = dirichlet_partition(ds.labels, DirichletSpec{alphas[a], 5, seed, 2});
            mean_l1[a] += mean_l1_to_global(ds, parts) / 20.0;
        }
    }
    CHECK(mean_l1[0] > mean_l1[1]);
    CHECK(mean_l1[1] > mean_l1[2]);
}

TEST_CASE("small alpha gives unequal partition sizes") {
    const Dataset ds = gen_blobs(10, 2, 100, 1.0, 2);
    const auto parts = dirichlet_partition(ds.labels, DirichletSpec{0.1, 6, 17, 2});
    std::set<std::size_t> sizes;
    for (const ClientPartition& p : parts) sizes.insert(p.size());
    CHECK(sizes.size() > 1);
}

TEST_CASE("dirichlet determinism and trivial cases") {
    const Dataset ds = gen_blobs(4, 2, 25, 1.0, 6);
    const DirichletSpec spec{0.3, 5, 99, 2};
    const auto a = dirichlet_partition(ds.labels, spec);
    const auto b = dirichlet_partition(ds.labels, spec);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].indices == b[k].indices);

    const auto one = dirichlet_partition(ds.labels, DirichletSpec{1.0, 1, 5, 2});
    REQUIRE(one.size() == 1);
    CHECK(one[0].size() == ds.n);

    CHECK_THROWS_AS(dirichlet_partition(std::vector<int>{0, 1, 0}, DirichletSpec{1.0, 4, 5, 2}), ConfigError);
}

TEST_CASE("min_samples floor holds under extreme skew") {
    const Dataset ds = gen_blobs(2, 2, 30, 1.0, 8);
    const auto parts = dirichlet_partition(ds.labels, DirichletSpec{0.02, 8, 3, 2});
    for (const ClientPartition& p : parts) CHECK(p.size() >= 2);
}

TEST_CASE("extreme_groups splits classes by thirds of the clients") {
    const Dataset ds = gen_blobs(10, 2, 60, 1.0, 9);
    const auto parts = extreme_groups(ds.labels, ds.class_count, 12, 55);
    REQUIRE(parts.size() == 12);
    std::size_t min_size = ds.n;
    std::size_t max_size = 0;
    for (std::size_t k = 0; k < 12; ++k) {
        const LabelHistogram h = label_histogram(ds, parts[k]);
        min_size = std::min(min_size, parts[k].size());
        max_size = std::max(max_size, parts[k].size());
        for (int c = 0; c < 10; ++c) {
            if (k < 4) {
                // first group: only the first five classes
                if (c >= 5) CHECK(h.counts[c] == 0);
            } else if (k < 8) {
                if (c < 5) CHECK(h.counts[c] == 0);
            }
        }
        if (k >= 8) {
            for (int c = 0; c < 10; ++c) CHECK(h.counts[c] > 0);
        }
    }
    CHECK(max_size - min_size <= 4); // near-equal client sizes
    CHECK_THROWS_AS(extreme_groups(ds.labels, ds.class_count, 10, 1), ConfigError);
}

TEST_CASE("label_histogram exact counts") {
    Dataset ds;
    ds.n = 3;
    ds.dim = 1;
    ds.class_count = 3;
    ds.features = {0, 0, 0};
    ds.labels = {0, 0, 2};
    ClientPartition p{0, {0, 1, 2}};
    const LabelHistogram h = label_histogram(ds, p);
    CHECK(h.counts == std::vector<std::int64_t>{2, 0, 1});
    CHECK(h.total() == 3);
    double sum = 0.0;
    for (const double v : h.normalized) sum += v;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
}

TEST_CASE("IDX loader handles the standard format") {
    const std::string images = temp_path("fedawa_test_images.idx");
    const std::string labels = temp_path("fedawa_test_labels.idx");
    {
        // 4 images of 2x2 ubyte pixels
        std::ofstream f(images, std::ios::binary);
        const unsigned char header[] = {0, 0, 0x08, 3, 0, 0, 0, 4, 0, 0, 0, 2, 0, 0, 0, 2};
        f.write(reinterpret_cast<const char*>(header), sizeof(header));
        for (int i = 0; i < 16; ++i) {
            const unsigned char px = static_cast<unsigned char>(i == 0 ? 255 : i);
            f.write(reinterpret_cast<const char*>(&px), 1);
        }
    }
    {
        std::ofstream f(labels, std::ios::binary);
        const unsigned char header[] = {0, 0, 0x08, 1, 0, 0, 0, 4};
        f.write(reinterpret_cast<const char*>(header), sizeof(header));
        const unsigned char y[] = {0, 1, 1, 0};
        f.write(reinterpret_cast<const char*>(y), 4);
    }
    const Dataset ds = load_idx(images, labels);
    CHECK(ds.n == 4);
    CHECK(ds.dim == 4);
    CHECK(ds.class_count == 2);
    CHECK(ds.features[0] == 1.0);        // pixel 255 scales to exactly 1
    CHECK(ds.features[1] == 1.0 / 255.0);
    CHECK(ds.labels == std::vector<int>{0, 1, 1, 0});

    // truncated image payload parses into an error, not a crash
    const std::string cut = temp_path("fedawa_test_cut.idx");
    {
        std::ifstream in(images, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream out(cut, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 6));
    }
    CHECK_THROWS_AS(load_idx(cut, labels), ParseError);

    // bad magic names the offending byte
    const std::string bad = temp_path("fedawa_test_bad.idx");
    {
        std::ofstream f(bad, std::ios::binary);
        const unsigned char header[] = {1, 2, 0x08, 1, 0, 0, 0, 1, 7};
        f.write(reinterpret_cast<const char*>(header), sizeof(header));
    }
    CHECK_THROWS_WITH_AS(load_idx(bad, labels), doctest::Contains("byte 0"), ParseError);

    std::filesystem::remove(images);
    std::filesystem::remove(labels);
    std::filesystem::remove(cut);
    std::filesystem::remove(bad);
}

TEST_CASE("CSV loader") {
    const std::string path = temp_path("fedawa_test.csv");
    {
        std::ofstream f(path);
        f << "label,f0,f1\n1,0.5,-1.25\n0,2.0,3.5\n";
    }
    const Dataset ds = load_csv(path);
    CHECK(ds.n == 2);
    CHECK(ds.dim == 2);
    CHECK(ds.class_count == 2);
    CHECK(ds.features == std::vector<double>{0.5, -1.25, 2.0, 3.5});
    CHECK(ds.labels == std::vector<int>{1, 0});

    {
        std::ofstream f(path);
        f << "label,f0\n-3,1.0\n";
    }
    CHECK_THROWS_AS(load_csv(path), ParseError);
    {
        std::ofstream f(path);
        f << "label,f0\n1,1.0,9.0\n";
    }
    CHECK_THROWS_AS(load_csv(path), ParseError);
    std::filesystem::remove(path);
}

TEST_CASE("partition manifest schema") {
    const Dataset ds = gen_blobs(3, 2, 10, 1.0, 3);
    const auto parts = dirichlet_partition(ds.labels, DirichletSpec{0.5, 3, 44, 2});
    const nlohmann::json j = nlohmann::json::parse(partition_manifest_json(ds, parts, 44, 0.5));
    CHECK(j.at("seed") == 44);
    CHECK(j.at("alpha") == 0.5);
    REQUIRE(j.at("clients").size() == 3);
    std::int64_t total = 0;
    for (const auto& c : j.at("clients")) {
        std::int64_t n = 0;
        for (const auto& count : c.at("histogram")) n += count.get<std::int64_t>();
        CHECK(n == c.at("n").get<std::int64_t>());
        total += n;
    }
    CHECK(total == static_cast<std::int64_t>(ds.n));
}
