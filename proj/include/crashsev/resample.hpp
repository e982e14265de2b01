#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "crashsev/dataset.hpp"

namespace crashsev::resample {

// Per-class shuffled split. Class proportions carry over within one row per
// class; every class needs at least two rows so both sides stay nonempty.
std::pair<dataset::EncodedDataset, dataset::EncodedDataset>
stratified_split(const dataset::EncodedDataset& data, double train_fraction,
                 std::uint64_t seed);

struct SmoteConfig {
    std::size_t k_neighbors = 5;
    // Classes below this count are oversampled up to it. Unset: the majority
    // class count.
    std::optional<std::size_t> target_count;
    std::uint64_t seed = 0;
};

// Synthetic oversampling: each new row is x + u*(x' - x) for a random row x
// of an under-represented class and one of its k nearest same-class
// neighbors x' (u uniform in [0,1)). Binary and ordinal columns are rounded
// back to valid codes. Originals are retained unchanged; synthetic rows get
// row_ids starting at 2^40 so they never collide with file row ids.
dataset::EncodedDataset smote(const dataset::EncodedDataset& train, const SmoteConfig& cfg);

}  // namespace crashsev::resample
