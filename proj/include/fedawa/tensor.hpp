#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fedawa/error.hpp"

namespace fedawa {

/// One named contiguous segment of a flattened parameter vector.
struct LayerEntry {
    std::string name;
    std::size_t offset = 0;
    std::size_t length = 0;
};

/// Ordered, contiguous, non-overlapping partition of [0, total_len).
class LayerLayout {
public:
    LayerLayout() = default;

    /// Validates contiguity: entry[i].offset + entry[i].length == entry[i+1].offset,
    /// first offset 0, lengths sum to total_len > 0.
    explicit LayerLayout(std::vector<LayerEntry> entries);

    /// Convenience: entries from (name, length) pairs with offsets derived.
    static LayerLayout from_lengths(const std::vector<std::pair<std::string, std::size_t>>& parts);

    std::size_t total_len() const { return total_len_; }
    std::size_t layer_count() const { return entries_.size(); }
    const LayerEntry& entry(std::size_t l) const;
    const std::vector<LayerEntry>& entries() const { return entries_; }

    bool operator==(const LayerLayout& other) const;
    bool operator!=(const LayerLayout& other) const { return !(*this == other); }

private:
    std::vector<LayerEntry> entries_;
    std::size_t total_len_ = 0;
};

/// A model's full parameter set flattened to one vector of 64-bit floats.
/// Values are finite by construction; operations never mutate their inputs.
class ParamVector {
public:
    ParamVector() = default;
    ParamVector(std::vector<double> values, LayerLayout layout);

    static ParamVector zeros(const LayerLayout& layout);

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values_mut() { return values_; }
    const LayerLayout& layout() const { return layout_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }

    /// Re-checks the finiteness invariant after in-place edits via values_mut().
    void check_finite(const std::string& context) const;

private:
    std::vector<double> values_;
    LayerLayout layout_;
};

/// Per-round update delta tau_k = theta_k - theta_g for one client.
struct ClientVector {
    ParamVector delta;
    int client_id = 0;
    int round = 1;
};

/// Sum_i a_i*b_i accumulated left to right (fixed order for reproducibility).
double dot(const ParamVector& a, const ParamVector& b);

/// sqrt(dot(a, a)).
double l2_norm(const ParamVector& a);

/// dot(a,b)/(|a||b|), or 0 when either norm is below 1e-12.
double cosine_similarity(const ParamVector& a, const ParamVector& b);

/// alpha*x + y element-wise.
ParamVector axpy(double alpha, const ParamVector& x, const ParamVector& y);

/// Read-only view of the l-th layout segment.
std::span<const double> layer_slice(const ParamVector& v, std::size_t l);

void require_same_layout(const ParamVector& a, const ParamVector& b, const char* op);

/// Checkpoint format: u32 little-endian JSON header length, the JSON layout
/// header, then total_len little-endian IEEE-754 doubles.
void save_param_vector(const ParamVector& v, std::ostream& out);
ParamVector load_param_vector(std::istream& in);
void save_param_vector_file(const ParamVector& v, const std::string& path);
ParamVector load_param_vector_file(const std::string& path);

} // namespace fedawa
