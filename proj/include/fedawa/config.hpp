#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "fedawa/orchestrator.hpp"

namespace fedawa {

using ConfigValue = std::variant<std::string, std::int64_t, double, bool, std::vector<std::int64_t>>;

/// Parsed key-value config, keyed by "section.key". Every key has a schema
/// entry with a type, a default, and a doc line; unknown keys are rejected.
struct ConfigDoc {
    std::map<std::string, ConfigValue> values;

    const ConfigValue& at(const std::string& dotted) const;
    std::string get_string(const std::string& dotted) const;
    std::int64_t get_int(const std::string& dotted) const;
    double get_float(const std::string& dotted) const;
    bool get_bool(const std::string& dotted) const;
    std::vector<std::int64_t> get_int_list(const std::string& dotted) const;
    void set(const std::string& dotted, ConfigValue v);
};

/// All defaults from the schema.
ConfigDoc default_config();

/// Parses TOML-style sections/keys over the defaults. Unknown fields and type
/// mismatches raise ConfigError naming the field.
ConfigDoc parse_config_text(const std::string& text);
ConfigDoc load_config_file(const std::string& path);

/// Canonical emission: schema ordering, floats at 17 significant digits.
/// canonicalize(parse(emit(doc))) == canonicalize(doc).
std::string canonical_text(const ConfigDoc& doc);

/// Content hash (64-bit FNV-1a of the canonical text) as 16 hex digits.
std::string config_hash(const ConfigDoc& doc);

/// Human-readable dump of every key, default, and doc line.
std::string schema_dump();

/// Converts and validates into the runtime config. ConfigError on bad values.
ExperimentConfig to_experiment_config(const ConfigDoc& doc);

/// 17-significant-digit float formatting shared by CSV and config emission.
std::string format_float(double v);

} // namespace fedawa
