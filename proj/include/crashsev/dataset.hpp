#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crashsev/tensor.hpp"

#include "json.hpp"

namespace crashsev::dataset {

enum class ColumnKind { Binary, Ordinal, Continuous };

// A feature column. Binary columns map labels[0] -> 0 and labels[1] -> 1.
// Ordinal columns map labels[i] -> code i+1 (codes start at 1). Continuous
// columns carry no labels and pass numeric text through unchanged.
struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::Binary;
    std::vector<std::string> labels;
};

struct Schema {
    std::vector<Column> features;
    std::string target_name;
    std::vector<std::string> target_labels;  // index = class id

    std::size_t feature_count() const { return features.size(); }
    std::size_t n_classes() const { return target_labels.size(); }

    // Label -> numeric code for one feature column. Throws ContractError on
    // an unknown label or non-numeric continuous value.
    double encode_value(std::size_t col, const std::string& raw) const;
    std::string decode_value(std::size_t col, double value) const;
    int encode_target(const std::string& raw) const;
    const std::string& decode_target(int cls) const;

    // Stable textual form; hash() is the FNV-1a 64 digest of it, used to tie
    // checkpoints to the schema they were trained with.
    std::string canonical_string() const;
    std::uint64_t hash() const;

    nlohmann::json to_json() const;
    static Schema from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static Schema load(const std::string& path);
};

// The pedestrian-crash schema: 26 feature columns plus a 5-level severity
// target, ordered from most to least severe.
Schema default_schema();

struct EncodedDataset {
    Tensor features;  // n_rows x feature_count, numeric codes
    std::vector<int> targets;
    std::vector<std::int64_t> row_ids;
    Schema schema;

    std::size_t n_rows() const { return static_cast<std::size_t>(features.rows); }
    std::vector<std::size_t> class_histogram() const;
    // Enforces the column invariants: binary in {0,1}, ordinal an integral
    // code in [1, n_labels], continuous finite, targets in range, and all
    // row_ids distinct.
    void validate() const;
    EncodedDataset subset(const std::vector<std::size_t>& indices) const;
};

enum class RowErrorPolicy { Fail, Skip };

struct LoadStats {
    std::size_t rows_read = 0;
    std::size_t rows_skipped = 0;
    std::vector<std::string> warnings;
};

// Reads a labeled CSV (header row required; columns matched to the schema by
// name, extra columns ignored with a warning). Malformed rows either abort
// with a file:line DataError or are skipped and counted, per policy.
EncodedDataset load_csv(const std::string& path, const Schema& schema,
                        RowErrorPolicy policy = RowErrorPolicy::Fail,
                        LoadStats* stats = nullptr);

// Numeric-code CSV: row_id, one column per feature, then the target class id.
void save_encoded_csv(const EncodedDataset& data, const std::string& path);
EncodedDataset load_encoded_csv(const std::string& path, const Schema& schema);

// Human-readable CSV with codes decoded back to labels (no row_id column).
void save_label_csv(const EncodedDataset& data, const std::string& path);

struct FixtureConfig {
    std::uint64_t seed = 1;
    std::size_t n_rows = 1000;
    // Class shares; must sum to 1. Defaults mirror the observed severity mix.
    std::vector<double> class_mix = {0.05, 0.15, 0.44, 0.30, 0.06};
    // 0 = features independent of class, 1 = strongly separable.
    double signal_strength = 1.0;
};

// Deterministic synthetic dataset conforming to default_schema(), with a
// planted class signal in age and a handful of categorical columns.
EncodedDataset synthesize_fixture(const FixtureConfig& cfg);

}  // namespace crashsev::dataset
