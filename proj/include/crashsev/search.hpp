#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "crashsev/dataset.hpp"
#include "crashsev/resample.hpp"
#include "crashsev/tabnet.hpp"

#include "json.hpp"

namespace crashsev::search {

struct Domain {
    enum class Kind { Choice, IntRange, LogUniform };
    Kind kind = Kind::Choice;
    std::vector<std::string> choices;  // Choice: value literals
    long lo_int = 0, hi_int = 0;       // IntRange: inclusive bounds
    double lo = 0.0, hi = 0.0;         // LogUniform: positive bounds
};

// Hyperparameter domains keyed by TabNetConfig field name, kept sorted by
// name so enumeration and sampling order are reproducible.
struct SearchSpace {
    std::vector<std::pair<std::string, Domain>> params;

    // {"n_d": {"choice": [8, 16]}, "learning_rate": {"log_uniform": [1e-4, 0.1]},
    //  "n_steps": {"int_range": [1, 3]}}
    static SearchSpace from_json(const nlohmann::json& j);
    static SearchSpace load(const std::string& path);
};

struct TrialRecord {
    std::size_t trial_index = 0;  // enumeration/sampling order
    std::vector<std::pair<std::string, std::string>> assignment;
    std::vector<double> fold_losses;  // +inf where training diverged
    double mean_loss = 0.0;
    double std_loss = 0.0;
    std::size_t rank = 0;  // 1 = best

    tabnet::TabNetConfig config(tabnet::TabNetConfig base) const;
};

struct SearchOptions {
    tabnet::TabNetConfig base;  // assignments override these fields
    std::size_t k_folds = 3;
    std::uint64_t seed = 0;
    bool apply_smote = false;
    std::size_t smote_k_neighbors = 5;
};

// Stratified fold ids (0..k-1 per row), seed-deterministic and independent
// of any trial, so every trial sees identical partitions.
std::vector<std::size_t> fold_assignment(const dataset::EncodedDataset& data,
                                         std::size_t k_folds, std::uint64_t seed);

// Trains config on each k-1 fold union, scores cross-entropy on the held-out
// fold (SMOTE, when on, touches only the training portion). Per-fold train
// seeds depend on (options seed, fold) alone, so any trial's recorded losses
// reproduce bit-exactly when its config is re-evaluated.
std::vector<double> evaluate_config(const tabnet::TabNetConfig& cfg,
                                    const dataset::EncodedDataset& data,
                                    const SearchOptions& opts);

// Exhaustive Cartesian product over finite domains (log-uniform domains are
// a contract error here). Returned records are rank-sorted: mean loss, then
// std, then trial order.
std::vector<TrialRecord> grid_search(const SearchSpace& space,
                                     const dataset::EncodedDataset& data,
                                     const SearchOptions& opts);

// Independent draws per trial: uniform over choices and integer ranges,
// log-uniform over float ranges. Trial draws depend only on (seed, trial
// index), so growing n_trials extends the schedule without changing it.
std::vector<TrialRecord> random_search(const SearchSpace& space, std::size_t n_trials,
                                       const dataset::EncodedDataset& data,
                                       const SearchOptions& opts);

void save_trials_csv(const std::vector<TrialRecord>& trials, const std::string& path);

}  // namespace crashsev::search
