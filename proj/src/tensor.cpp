#include "fedawa/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fedawa {

LayerLayout::LayerLayout(std::vector<LayerEntry> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) {
        throw DomainError("layout: at least one entry required");
    }
    if (entries_.front().offset != 0) {
        throw DomainError("layout: first entry must start at offset 0");
    }
    std::size_t expected = 0;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const LayerEntry& e = entries_[i];
        if (e.length == 0) {
            throw DomainError("layout: entry '" + e.name + "' has zero length");
        }
        if (e.offset != expected) {
            throw DomainError("layout: entry '" + e.name + "' is not contiguous with its predecessor");
        }
        expected = e.offset + e.length;
    }
    total_len_ = expected;
}

LayerLayout LayerLayout::from_lengths(const std::vector<std::pair<std::string, std::size_t>>& parts) {
    std::vector<LayerEntry> entries;
    entries.reserve(parts.size());
    std::size_t offset = 0;
    for (const auto& [name, length] : parts) {
        entries.push_back({name, offset, length});
        offset += length;
    }
    return LayerLayout(std::move(entries));
}

const LayerEntry& LayerLayout::entry(std::size_t l) const {
    if (l >= entries_.size()) {
        throw DomainError("layout: layer index " + std::to_string(l) + " out of range (have " +
                          std::to_string(entries_.size()) + " layers)");
    }
    return entries_[l];
}

bool LayerLayout::operator==(const LayerLayout& other) const {
    if (total_len_ != other.total_len_ || entries_.size() != other.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const LayerEntry& a = entries_[i];
        const LayerEntry& b = other.entries_[i];
        if (a.offset != b.offset || a.length != b.length || a.name != b.name) return false;
    }
    return true;
}

ParamVector::ParamVector(std::vector<double> values, LayerLayout layout)
    : values_(std::move(values)), layout_(std::move(layout)) {
    if (values_.size() != layout_.total_len()) {
        throw DomainError("param vector: " + std::to_string(values_.size()) + " values vs layout total_len " +
                          std::to_string(layout_.total_len()));
    }
    check_finite("param vector");
}

ParamVector ParamVector::zeros(const LayerLayout& layout) {
    return ParamVector(std::vector<double>(layout.total_len(), 0.0), layout);
}

void ParamVector::check_finite(const std::string& context) const {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw NumericError(context + ": non-finite value at index " + std::to_string(i));
        }
    }
}

void require_same_layout(const ParamVector& a, const ParamVector& b, const char* op) {
    if (a.layout() != b.layout()) {
        throw LayoutError(std::string(op) + ": layout mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + " values)");
    }
}

double dot(const ParamVector& a, const ParamVector& b) {
    require_same_layout(a, b, "dot");
    const std::vector<double>& x = a.values();
    const std::vector<double>& y = b.values();
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    return acc;
}

double l2_norm(const ParamVector& a) {
    double acc = 0.0;
    for (const double v : a.values()) acc += v * v;
    return std::sqrt(acc);
}

double cosine_similarity(const ParamVector& a, const ParamVector& b) {
    require_same_layout(a, b, "cosine_similarity");
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na < 1e-12 || nb < 1e-12) return 0.0;
    return dot(a, b) / (na * nb);
}

ParamVector axpy(double alpha, const ParamVector& x, const ParamVector& y) {
    require_same_layout(x, y, "axpy");
    std::vector<double> out(x.size());
    const std::vector<double>& xv = x.values();
    const std::vector<double>& yv = y.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * xv[i] + yv[i];
    return ParamVector(std::move(out), x.layout());
}

std::span<const double> layer_slice(const ParamVector& v, std::size_t l) {
    const LayerEntry& e = v.layout().entry(l);
    return std::span<const double>(v.values().data() + e.offset, e.length);
}

namespace {

void put_u32_le(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b, 4);
}

std::uint32_t get_u32_le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw ParseError("checkpoint: truncated header length");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

void put_f64_le(std::ostream& out, double d) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    out.write(b, 8);
}

double get_f64_le(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw ParseError("checkpoint: truncated payload");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

} // namespace

void save_param_vector(const ParamVector& v, std::ostream& out) {
    nlohmann::json header;
    header["format"] = "fedawa-paramvector";
    header["version"] = 1;
    nlohmann::json entries = nlohmann::json::array();
    for (const LayerEntry& e : v.layout().entries()) {
        entries.push_back({{"name", e.name}, {"offset", e.offset}, {"length", e.length}});
    }
    header["layout"] = {{"total_len", v.layout().total_len()}, {"entries", entries}};
    const std::string text = header.dump();
    put_u32_le(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const double d : v.values()) put_f64_le(out, d);
}

ParamVector load_param_vector(std::istream& in) {
    const std::uint32_t header_len = get_u32_le(in);
    std::string text(header_len, '\0');
    in.read(text.data(), header_len);
    if (!in) throw ParseError("checkpoint: truncated JSON header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint: bad JSON header: ") + e.what());
    }
    if (header.value("format", "") != "fedawa-paramvector") {
        throw ParseError("checkpoint: unexpected format tag");
    }
    std::vector<LayerEntry> entries;
    for (const auto& e : header.at("layout").at("entries")) {
        entries.push_back({e.at("name").get<std::string>(), e.at("offset").get<std::size_t>(),
                           e.at("length").get<std::size_t>()});
    }
    LayerLayout layout(std::move(entries));
    std::vector<double> values(layout.total_len());
    for (double& d : values) d = get_f64_le(in);
    return ParamVector(std::move(values), std::move(layout));
}

void save_param_vector_file(const ParamVector& v, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    save_param_vector(v, out);
    if (!out) throw Error("write failed: " + path);
}

ParamVector load_param_vector_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path);
    return load_param_vector(in);
}

} // namespace fedawa
