#include "crashsev/attribution.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>

#include "crashsev/errors.hpp"
#include "crashsev/numfmt.hpp"
#include "crashsev/rng.hpp"

namespace crashsev::attribution {

namespace {

void check_inputs(const Tensor& background, std::span<const double> instance) {
    if (background.rows == 0) throw ContractError("background set is empty");
    if (background.cols != instance.size())
        throw ShapeError("instance has " + std::to_string(instance.size()) +
                         " features, background has " + std::to_string(background.cols));
}

// Composite rows: instance values on coalition bits, background elsewhere.
Tensor composite(const Tensor& background, std::span<const double> instance,
                 std::uint64_t mask) {
    Tensor z = background;
    for (std::size_t j = 0; j < z.cols; ++j) {
        if (!(mask >> j & 1)) continue;
        for (std::size_t r = 0; r < z.rows; ++r) z.at(r, j) = instance[j];
    }
    return z;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) throw ContractError("prediction function returned no values");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Shapley coalition weight |S|!(N-1-|S|)!/N! computed as 1/(N*C(N-1,|S|));
// binomials up to C(19, .) are exact in doubles.
std::vector<double> coalition_weights(std::size_t n) {
    std::vector<double> binom(n, 1.0);  // C(n-1, s)
    for (std::size_t s = 1; s < n; ++s)
        binom[s] = binom[s - 1] * static_cast<double>(n - s) / static_cast<double>(s);
    std::vector<double> w(n);
    for (std::size_t s = 0; s < n; ++s) w[s] = 1.0 / (static_cast<double>(n) * binom[s]);
    return w;
}

// Ordering walk shared by the single-class and per-class estimators: value
// differences along a growing coalition, telescoping to full - empty.
template <typename EvalFn, typename AccumFn>
void permutation_walk(const std::vector<std::size_t>& perm, std::uint64_t full_mask,
                      const EvalFn& eval, const std::vector<double>& at_empty,
                      const std::vector<double>& at_full, const AccumFn& accum) {
    std::uint64_t mask = 0;
    std::vector<double> prev = at_empty;
    for (std::size_t k = 0; k < perm.size(); ++k) {
        mask |= std::uint64_t{1} << perm[k];
        std::vector<double> cur = mask == full_mask ? at_full : eval(mask);
        accum(perm[k], prev, cur);
        prev = std::move(cur);
    }
}

}  // namespace

double coalition_value(const CoalitionValueFn& cv, std::span<const double> instance,
                       const std::vector<std::size_t>& coalition) {
    check_inputs(cv.background, instance);
    std::uint64_t mask = 0;
    for (std::size_t j : coalition) {
        if (j >= instance.size())
            throw ContractError("coalition index " + std::to_string(j) + " out of range");
        mask |= std::uint64_t{1} << j;
    }
    return mean_of(cv.predict(composite(cv.background, instance, mask)));
}

AttributionResult exact_shapley(const CoalitionValueFn& cv, std::span<const double> instance,
                                std::size_t enumeration_limit) {
    check_inputs(cv.background, instance);
    const std::size_t n = instance.size();
    if (n > enumeration_limit)
        throw ContractError("exact enumeration over " + std::to_string(n) +
                            " features exceeds the limit of " +
                            std::to_string(enumeration_limit) +
                            "; use permutation_shapley instead");
    if (n > 30) throw ContractError("exact enumeration beyond 30 features is not supported");

    const std::uint64_t n_masks = std::uint64_t{1} << n;
    std::vector<double> v(n_masks);
    for (std::uint64_t mask = 0; mask < n_masks; ++mask)
        v[mask] = mean_of(cv.predict(composite(cv.background, instance, mask)));

    const std::vector<double> w = coalition_weights(n);
    AttributionResult res;
    res.phi.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t bit = std::uint64_t{1} << i;
        for (std::uint64_t mask = 0; mask < n_masks; ++mask) {
            if (mask & bit) continue;
            res.phi[i] += w[static_cast<std::size_t>(std::popcount(mask))] *
                          (v[mask | bit] - v[mask]);
        }
    }
    res.base_value = v[0];
    res.fx = v[n_masks - 1];
    res.method = "exact";
    return res;
}

AttributionResult permutation_shapley(const CoalitionValueFn& cv,
                                      std::span<const double> instance,
                                      std::size_t n_permutations, std::uint64_t seed,
                                      bool antithetic) {
    check_inputs(cv.background, instance);
    if (n_permutations < 1) throw ContractError("n_permutations must be at least 1");
    const std::size_t n = instance.size();
    const std::uint64_t full = n == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;
    if (n > 64) throw ContractError("permutation estimator supports at most 64 features");

    auto eval = [&](std::uint64_t mask) {
        return std::vector<double>{
            mean_of(cv.predict(composite(cv.background, instance, mask)))};
    };
    const std::vector<double> at_empty = eval(0);
    const std::vector<double> at_full = eval(full);

    std::size_t total = antithetic ? (n_permutations + 1) / 2 * 2 : n_permutations;
    std::vector<double> phi_sum(n, 0.0);
    auto accum = [&](std::size_t feature, const std::vector<double>& prev,
                     const std::vector<double>& cur) { phi_sum[feature] += cur[0] - prev[0]; };

    Rng rng(derive_seed(seed, "perm-shapley"));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    const std::size_t draws = antithetic ? total / 2 : total;
    for (std::size_t d = 0; d < draws; ++d) {
        rng.shuffle(perm);
        permutation_walk(perm, full, eval, at_empty, at_full, accum);
        if (antithetic) {
            std::vector<std::size_t> rev(perm.rbegin(), perm.rend());
            permutation_walk(rev, full, eval, at_empty, at_full, accum);
        }
    }

    AttributionResult res;
    res.phi.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        res.phi[i] = phi_sum[i] / static_cast<double>(total);
    res.base_value = at_empty[0];
    res.fx = at_full[0];
    res.method = "permutation";
    res.n_samples = total;
    return res;
}

namespace {

// Per-class coalition values from one batched model call per coalition.
struct MultiEvaluator {
    const ClassPredictFn& model;
    const Tensor& background;
    std::size_t n_classes;

    std::vector<double> operator()(std::span<const double> instance,
                                   std::uint64_t mask) const {
        Tensor out = model(composite(background, instance, mask));
        if (out.cols != n_classes || out.rows != background.rows)
            throw ShapeError("model output shape does not match background x classes");
        std::vector<double> mean(n_classes, 0.0);
        for (std::size_t r = 0; r < out.rows; ++r)
            for (std::size_t c = 0; c < n_classes; ++c) mean[c] += out.at(r, c);
        for (double& v : mean) v /= static_cast<double>(out.rows);
        return mean;
    }
};

}  // namespace

DatasetAttribution explain_dataset(const ClassPredictFn& model, const Tensor& instances,
                                   const Tensor& background, std::size_t n_classes,
                                   const ExplainOptions& opts) {
    if (instances.rows == 0) throw ContractError("no instances to explain");
    if (background.rows == 0) throw ContractError("background set is empty");
    if (instances.cols != background.cols)
        throw ShapeError("instances and background disagree on feature count");
    if (n_classes < 1) throw ContractError("n_classes must be positive");

    const std::size_t n = instances.cols;
    bool exact;
    if (opts.method == "exact") {
        if (n > opts.enumeration_limit)
            throw ContractError("exact enumeration over " + std::to_string(n) +
                                " features exceeds the limit of " +
                                std::to_string(opts.enumeration_limit) +
                                "; use the permutation method");
        exact = true;
    } else if (opts.method == "permutation") {
        exact = false;
    } else if (opts.method == "auto") {
        exact = n <= opts.enumeration_limit;
    } else {
        throw ContractError("attribution method must be auto, exact, or permutation");
    }
    if (!exact && opts.n_permutations < 1)
        throw ContractError("n_permutations must be at least 1");
    if (exact && n > 30)
        throw ContractError("exact enumeration beyond 30 features is not supported");
    if (n > 64) throw ContractError("attribution supports at most 64 features");

    MultiEvaluator eval{model, background, n_classes};
    const std::uint64_t full = n == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;

    DatasetAttribution out;
    out.method = exact ? "exact" : "permutation";
    out.phi.assign(n_classes, Tensor(instances.rows, n));
    out.fx = Tensor(instances.rows, n_classes);
    out.base_values.assign(n_classes, 0.0);

    std::size_t total_perms = 0;
    for (std::size_t row = 0; row < instances.rows; ++row) {
        std::span<const double> x(instances.row_ptr(row), n);
        if (exact) {
            const std::uint64_t n_masks = std::uint64_t{1} << n;
            std::vector<std::vector<double>> v(n_masks);
            for (std::uint64_t mask = 0; mask < n_masks; ++mask) v[mask] = eval(x, mask);
            const std::vector<double> w = coalition_weights(n);
            for (std::size_t i = 0; i < n; ++i) {
                const std::uint64_t bit = std::uint64_t{1} << i;
                for (std::uint64_t mask = 0; mask < n_masks; ++mask) {
                    if (mask & bit) continue;
                    double wt = w[static_cast<std::size_t>(std::popcount(mask))];
                    for (std::size_t c = 0; c < n_classes; ++c)
                        out.phi[c].at(row, i) += wt * (v[mask | bit][c] - v[mask][c]);
                }
            }
            for (std::size_t c = 0; c < n_classes; ++c) {
                out.fx.at(row, c) = v[n_masks - 1][c];
                if (row == 0) out.base_values[c] = v[0][c];
            }
        } else {
            auto eval_here = [&](std::uint64_t mask) { return eval(x, mask); };
            const std::vector<double> at_empty = eval_here(0);
            const std::vector<double> at_full = eval_here(full);
            std::size_t total =
                opts.antithetic ? (opts.n_permutations + 1) / 2 * 2 : opts.n_permutations;
            total_perms = total;

            std::vector<std::vector<double>> phi_sum(n_classes,
                                                     std::vector<double>(n, 0.0));
            auto accum = [&](std::size_t feature, const std::vector<double>& prev,
                             const std::vector<double>& cur) {
                for (std::size_t c = 0; c < n_classes; ++c)
                    phi_sum[c][feature] += cur[c] - prev[c];
            };
            Rng rng(derive_seed(opts.seed, "explain-perm", row));
            std::vector<std::size_t> perm(n);
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            const std::size_t draws = opts.antithetic ? total / 2 : total;
            for (std::size_t d = 0; d < draws; ++d) {
                rng.shuffle(perm);
                permutation_walk(perm, full, eval_here, at_empty, at_full, accum);
                if (opts.antithetic) {
                    std::vector<std::size_t> rev(perm.rbegin(), perm.rend());
                    permutation_walk(rev, full, eval_here, at_empty, at_full, accum);
                }
            }
            for (std::size_t c = 0; c < n_classes; ++c) {
                for (std::size_t i = 0; i < n; ++i)
                    out.phi[c].at(row, i) = phi_sum[c][i] / static_cast<double>(total);
                out.fx.at(row, c) = at_full[c];
                if (row == 0) out.base_values[c] = at_empty[c];
            }
        }
    }
    out.n_samples = exact ? 0 : total_perms;

    out.ranking.assign(n_classes, std::vector<double>(n, 0.0));
    for (std::size_t c = 0; c < n_classes; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t row = 0; row < instances.rows; ++row)
                s += std::abs(out.phi[c].at(row, i));
            out.ranking[c][i] = s / static_cast<double>(instances.rows);
            total += out.ranking[c][i];
        }
        if (total > 0.0)
            for (double& v : out.ranking[c]) v /= total;
    }
    return out;
}

ForceData force_data(const AttributionResult& result, const std::vector<std::string>& names,
                     const std::vector<std::string>& values) {
    if (names.size() != result.phi.size() || values.size() != result.phi.size())
        throw ContractError("feature names/values length does not match phi");
    ForceData fd;
    fd.base_value = result.base_value;
    fd.fx = result.fx;
    std::vector<std::size_t> idx(result.phi.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(result.phi[a]) > std::abs(result.phi[b]);
    });
    for (std::size_t i : idx) {
        if (result.phi[i] == 0.0) continue;
        fd.entries.push_back(ForceEntry{names[i], values[i], result.phi[i]});
    }
    return fd;
}

void save_attribution_csv(const DatasetAttribution& attr, const Tensor& instances,
                          const std::vector<std::int64_t>& row_ids,
                          const std::vector<std::string>& feature_names,
                          const std::vector<std::string>& class_names,
                          const std::string& path) {
    if (row_ids.size() != instances.rows)
        throw ContractError("row_ids length does not match instances");
    if (feature_names.size() != instances.cols)
        throw ContractError("feature_names length does not match instances");
    if (class_names.size() != attr.phi.size())
        throw ContractError("class_names length does not match attribution classes");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing", path);
    out << "row_id,class,feature,value,phi\n";
    for (std::size_t row = 0; row < instances.rows; ++row)
        for (std::size_t c = 0; c < attr.phi.size(); ++c)
            for (std::size_t i = 0; i < instances.cols; ++i)
                out << row_ids[row] << "," << class_names[c] << "," << feature_names[i] << ","
                    << format_double(instances.at(row, i)) << ","
                    << format_double(attr.phi[c].at(row, i)) << "\n";
    if (!out) throw DataError("write failed", path);
}

nlohmann::json attribution_to_json(const DatasetAttribution& attr,
                                   const std::vector<std::int64_t>& row_ids,
                                   const std::vector<std::string>& feature_names,
                                   const std::vector<std::string>& class_names) {
    nlohmann::json j;
    j["method"] = attr.method;
    if (attr.n_samples > 0) j["n_samples"] = attr.n_samples;
    j["feature_names"] = feature_names;
    j["class_names"] = class_names;
    j["row_ids"] = row_ids;
    j["base_values"] = attr.base_values;
    j["fx"] = nlohmann::json::array();
    for (std::size_t r = 0; r < attr.fx.rows; ++r) j["fx"].push_back(attr.fx.row(r));
    j["phi"] = nlohmann::json::array();
    for (std::size_t c = 0; c < attr.phi.size(); ++c) {
        nlohmann::json m = nlohmann::json::array();
        for (std::size_t r = 0; r < attr.phi[c].rows; ++r) m.push_back(attr.phi[c].row(r));
        j["phi"].push_back(std::move(m));
    }
    j["ranking"] = attr.ranking;
    return j;
}

}  // namespace crashsev::attribution
