#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "crashsev/tensor.hpp"

#include "json.hpp"

namespace crashsev::attribution {

// Black-box scalar model: feature rows in, one value per row out.
using PredictFn = std::function<std::vector<double>(const Tensor&)>;

// Full-class model: feature rows in, [rows x n_classes] probabilities out.
using ClassPredictFn = std::function<Tensor(const Tensor&)>;

// The value function of the attribution game: features outside the
// coalition are replaced by background rows and the prediction is averaged
// over that reference sample.
struct CoalitionValueFn {
    PredictFn predict;
    Tensor background;  // [B x N], nonempty
};

// Mean over background rows b of predict(z) where z equals the instance on
// coalition indices and b elsewhere. One batched predict call per coalition.
double coalition_value(const CoalitionValueFn& cv, std::span<const double> instance,
                       const std::vector<std::size_t>& coalition);

struct AttributionResult {
    std::vector<double> phi;
    double base_value = 0.0;  // value of the empty coalition
    double fx = 0.0;          // value of the full coalition
    std::string method;       // "exact" | "permutation"
    std::size_t n_samples = 0;  // permutations actually used (sampling only)
};

// 2^N coalitions become infeasible fast; past this many features the
// permutation estimator is required.
constexpr std::size_t kEnumerationLimit = 20;

// phi_i = sum over S not containing i of |S|!(N-|S|-1)!/N! * (v(S+i) - v(S)),
// with every coalition value memoized. Additivity sum(phi) = fx - base_value
// holds by construction.
AttributionResult exact_shapley(const CoalitionValueFn& cv, std::span<const double> instance,
                                std::size_t enumeration_limit = kEnumerationLimit);

// Monte-Carlo estimate: mean marginal contribution over random feature
// orderings. With `antithetic` every sampled ordering is paired with its
// reverse (an odd count is rounded up), which makes certain symmetric-player
// pairs exact rather than just unbiased.
AttributionResult permutation_shapley(const CoalitionValueFn& cv,
                                      std::span<const double> instance,
                                      std::size_t n_permutations, std::uint64_t seed,
                                      bool antithetic = false);

struct ExplainOptions {
    std::string method = "auto";  // auto | exact | permutation
    std::size_t n_permutations = 200;
    std::uint64_t seed = 0;
    bool antithetic = false;
    std::size_t enumeration_limit = kEnumerationLimit;
};

// Per-class attribution of every instance, sharing model evaluations across
// classes. ranking[c] is the mean |phi| per feature normalized to sum to 1.
struct DatasetAttribution {
    std::vector<Tensor> phi;             // per class: [instances x N]
    std::vector<double> base_values;     // per class
    Tensor fx;                           // [instances x n_classes]
    std::vector<std::vector<double>> ranking;  // per class, length N
    std::string method;
    std::size_t n_samples = 0;
};

DatasetAttribution explain_dataset(const ClassPredictFn& model, const Tensor& instances,
                                   const Tensor& background, std::size_t n_classes,
                                   const ExplainOptions& opts = {});

// Force-plot data: contributions sorted by |phi| descending (ties by feature
// index), zero contributions dropped.
struct ForceEntry {
    std::string name;
    std::string value;  // display value of the feature at this instance
    double phi = 0.0;
};
struct ForceData {
    double base_value = 0.0;
    double fx = 0.0;
    std::vector<ForceEntry> entries;
};
ForceData force_data(const AttributionResult& result, const std::vector<std::string>& names,
                     const std::vector<std::string>& values);

// Long-form CSV: row_id, class, feature, value, phi.
void save_attribution_csv(const DatasetAttribution& attr, const Tensor& instances,
                          const std::vector<std::int64_t>& row_ids,
                          const std::vector<std::string>& feature_names,
                          const std::vector<std::string>& class_names,
                          const std::string& path);

nlohmann::json attribution_to_json(const DatasetAttribution& attr,
                                   const std::vector<std::int64_t>& row_ids,
                                   const std::vector<std::string>& feature_names,
                                   const std::vector<std::string>& class_names);

}  // namespace crashsev::attribution
