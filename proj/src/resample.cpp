#include "crashsev/resample.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "crashsev/errors.hpp"
#include "crashsev/rng.hpp"

namespace crashsev::resample {

using dataset::ColumnKind;
using dataset::EncodedDataset;

namespace {

std::vector<std::vector<std::size_t>> rows_by_class(const EncodedDataset& data) {
    std::vector<std::vector<std::size_t>> by_class(data.schema.n_classes());
    for (std::size_t i = 0; i < data.n_rows(); ++i)
        by_class[static_cast<std::size_t>(data.targets[i])].push_back(i);
    return by_class;
}

// Nearest valid code for a categorical column; continuous values pass
// through clamped to the parent segment (guards rounding at the ends).
double snap_to_schema(const dataset::Column& col, double v, double lo, double hi) {
    if (col.kind == ColumnKind::Continuous) return std::clamp(v, lo, hi);
    double r = std::round(v);
    double min_code = col.kind == ColumnKind::Binary ? 0.0 : 1.0;
    double max_code = col.kind == ColumnKind::Binary
                          ? 1.0
                          : static_cast<double>(col.labels.size());
    return std::clamp(r, min_code, max_code);
}

}  // namespace

std::pair<EncodedDataset, EncodedDataset>
stratified_split(const EncodedDataset& data, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ContractError("train_fraction must lie strictly between 0 and 1");
    auto by_class = rows_by_class(data);
    for (std::size_t c = 0; c < by_class.size(); ++c)
        if (!by_class[c].empty() && by_class[c].size() < 2)
            throw ContractError("class " + std::to_string(c) +
                                " has fewer than 2 rows; cannot stratify");

    Rng rng(derive_seed(seed, "stratified-split"));
    std::vector<std::size_t> train_idx, test_idx;
    for (auto& rows : by_class) {
        if (rows.empty()) continue;
        rng.shuffle(rows);
        auto n = rows.size();
        auto n_train = static_cast<std::size_t>(
            std::llround(train_fraction * static_cast<double>(n)));
        n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
        train_idx.insert(train_idx.end(), rows.begin(), rows.begin() + static_cast<long>(n_train));
        test_idx.insert(test_idx.end(), rows.begin() + static_cast<long>(n_train), rows.end());
    }
    // Restore original row order within each side.
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return {data.subset(train_idx), data.subset(test_idx)};
}

EncodedDataset smote(const EncodedDataset& train, const SmoteConfig& cfg) {
    if (cfg.k_neighbors < 1) throw ContractError("k_neighbors must be at least 1");
    auto by_class = rows_by_class(train);
    std::size_t majority = 0;
    for (const auto& rows : by_class) majority = std::max(majority, rows.size());
    const std::size_t target = cfg.target_count.value_or(majority);

    const int d = train.features.cols;
    EncodedDataset out = train;

    std::int64_t next_id = std::int64_t{1} << 40;
    for (std::int64_t id : train.row_ids) next_id = std::max(next_id, id + 1);

    for (std::size_t c = 0; c < by_class.size(); ++c) {
        const auto& rows = by_class[c];
        if (rows.size() >= target) continue;
        if (rows.empty())
            throw ContractError("class " + std::to_string(c) +
                                " has no rows; cannot oversample");
        if (rows.size() < 2)
            throw ContractError("class " + std::to_string(c) +
                                " has a single row; cannot interpolate");

        // Neighbor lists: same-class rows ordered by Euclidean distance on
        // the encoded features, distance ties broken by row index.
        const std::size_t n = rows.size();
        std::vector<std::vector<std::size_t>> neighbors(n);
        for (std::size_t a = 0; a < n; ++a) {
            std::vector<std::pair<double, std::size_t>> dist;
            dist.reserve(n - 1);
            const double* xa = train.features.row_ptr(static_cast<int>(rows[a]));
            for (std::size_t b = 0; b < n; ++b) {
                if (b == a) continue;
                const double* xb = train.features.row_ptr(static_cast<int>(rows[b]));
                double d2 = 0.0;
                for (int j = 0; j < d; ++j) {
                    double diff = xa[j] - xb[j];
                    d2 += diff * diff;
                }
                dist.push_back({d2, b});
            }
            std::sort(dist.begin(), dist.end());
            neighbors[a].reserve(dist.size());
            for (const auto& [d2, b] : dist) neighbors[a].push_back(b);
        }
        const std::size_t k_eff = std::min(cfg.k_neighbors, n - 1);

        Rng rng(derive_seed(cfg.seed, "smote", c));
        for (std::size_t made = rows.size(); made < target; ++made) {
            std::size_t a = rng.next_below(n);
            std::size_t b = neighbors[a][rng.next_below(k_eff)];
            double u = rng.next_double();
            const double* xa = train.features.row_ptr(static_cast<int>(rows[a]));
            const double* xb = train.features.row_ptr(static_cast<int>(rows[b]));
            std::vector<double> synth(static_cast<std::size_t>(d));
            for (int j = 0; j < d; ++j) {
                double v = xa[j] + u * (xb[j] - xa[j]);
                synth[static_cast<std::size_t>(j)] = snap_to_schema(
                    train.schema.features[static_cast<std::size_t>(j)], v,
                    std::min(xa[j], xb[j]), std::max(xa[j], xb[j]));
            }
            out.features.values.insert(out.features.values.end(), synth.begin(), synth.end());
            ++out.features.rows;
            out.targets.push_back(static_cast<int>(c));
            out.row_ids.push_back(next_id++);
        }
    }
    out.validate();
    return out;
}

}  // namespace crashsev::resample
