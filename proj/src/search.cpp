#include "crashsev/search.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "crashsev/config_kv.hpp"
#include "crashsev/errors.hpp"
#include "crashsev/numfmt.hpp"
#include "crashsev/rng.hpp"

namespace crashsev::search {

namespace {

std::string json_value_to_string(const nlohmann::json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
}

}  // namespace

SearchSpace SearchSpace::from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.empty())
        throw ConfigError("search space must be a nonempty json object");
    SearchSpace s;
    for (auto it = j.begin(); it != j.end(); ++it) {  // nlohmann keeps keys sorted
        const nlohmann::json& body = it.value();
        Domain d;
        if (body.contains("choice")) {
            for (const auto& v : body.at("choice")) d.choices.push_back(json_value_to_string(v));
            if (d.choices.empty())
                throw ConfigError("search space: '" + it.key() + "' has an empty choice list");
            d.kind = Domain::Kind::Choice;
        } else if (body.contains("int_range")) {
            auto r = body.at("int_range");
            if (!r.is_array() || r.size() != 2)
                throw ConfigError("search space: '" + it.key() + "' int_range needs [lo, hi]");
            d.lo_int = r[0].get<long>();
            d.hi_int = r[1].get<long>();
            if (d.lo_int > d.hi_int)
                throw ConfigError("search space: '" + it.key() + "' range is reversed");
            d.kind = Domain::Kind::IntRange;
        } else if (body.contains("log_uniform")) {
            auto r = body.at("log_uniform");
            if (!r.is_array() || r.size() != 2)
                throw ConfigError("search space: '" + it.key() + "' log_uniform needs [lo, hi]");
            d.lo = r[0].get<double>();
            d.hi = r[1].get<double>();
            if (!(d.lo > 0.0) || d.lo > d.hi)
                throw ConfigError("search space: '" + it.key() +
                                  "' log_uniform needs 0 < lo <= hi");
            d.kind = Domain::Kind::LogUniform;
        } else {
            throw ConfigError("search space: '" + it.key() +
                              "' needs one of choice, int_range, log_uniform");
        }
        s.params.push_back({it.key(), std::move(d)});
    }
    return s;
}

SearchSpace SearchSpace::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open search space file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid search space json in '" + path + "': " + e.what());
    }
    return from_json(j);
}

tabnet::TabNetConfig TrialRecord::config(tabnet::TabNetConfig base) const {
    for (const auto& [k, v] : assignment) config::apply_kv(base, k, v);
    base.validate();
    return base;
}

std::vector<std::size_t> fold_assignment(const dataset::EncodedDataset& data,
                                         std::size_t k_folds, std::uint64_t seed) {
    if (k_folds < 2) throw ContractError("k_folds must be at least 2");
    if (data.n_rows() < k_folds)
        throw ContractError("need at least one row per fold");
    std::vector<std::vector<std::size_t>> by_class(data.schema.n_classes());
    for (std::size_t i = 0; i < data.n_rows(); ++i)
        by_class[static_cast<std::size_t>(data.targets[i])].push_back(i);

    Rng rng(derive_seed(seed, "cv-folds"));
    std::vector<std::size_t> fold(data.n_rows(), 0);
    std::size_t next = 0;  // rotates across classes so folds stay balanced
    for (auto& rows : by_class) {
        rng.shuffle(rows);
        for (std::size_t r : rows) fold[r] = next++ % k_folds;
    }
    return fold;
}

std::vector<double> evaluate_config(const tabnet::TabNetConfig& cfg,
                                    const dataset::EncodedDataset& data,
                                    const SearchOptions& opts) {
    auto folds = fold_assignment(data, opts.k_folds, opts.seed);
    std::vector<double> losses;
    for (std::size_t f = 0; f < opts.k_folds; ++f) {
        std::vector<std::size_t> train_idx, valid_idx;
        for (std::size_t i = 0; i < data.n_rows(); ++i)
            (folds[i] == f ? valid_idx : train_idx).push_back(i);
        if (train_idx.empty() || valid_idx.empty())
            throw ContractError("fold " + std::to_string(f) + " is degenerate");
        auto train_part = data.subset(train_idx);
        auto valid_part = data.subset(valid_idx);
        if (opts.apply_smote) {
            resample::SmoteConfig sc;
            sc.k_neighbors = opts.smote_k_neighbors;
            sc.seed = derive_seed(opts.seed, "smote-fold", f);
            train_part = resample::smote(train_part, sc);
        }
        tabnet::TabNetConfig fold_cfg = cfg;
        fold_cfg.seed = derive_seed(opts.seed, "fold-train", f);
        try {
            tabnet::TrainReport rep;
            tabnet::train(fold_cfg, train_part, valid_part, &rep);
            losses.push_back(rep.best_valid_loss);
        } catch (const DivergenceError&) {
            losses.push_back(std::numeric_limits<double>::infinity());
        }
    }
    return losses;
}

namespace {

TrialRecord make_record(std::size_t index,
                        std::vector<std::pair<std::string, std::string>> assignment,
                        const dataset::EncodedDataset& data, const SearchOptions& opts) {
    TrialRecord rec;
    rec.trial_index = index;
    rec.assignment = std::move(assignment);
    rec.fold_losses = evaluate_config(rec.config(opts.base), data, opts);

    double mean = 0.0;
    for (double l : rec.fold_losses) mean += l;
    mean /= static_cast<double>(rec.fold_losses.size());
    if (!std::isfinite(mean)) {
        rec.mean_loss = std::numeric_limits<double>::infinity();
        rec.std_loss = std::numeric_limits<double>::infinity();
    } else {
        double var = 0.0;
        for (double l : rec.fold_losses) var += (l - mean) * (l - mean);
        rec.mean_loss = mean;
        rec.std_loss = std::sqrt(var / static_cast<double>(rec.fold_losses.size()));
    }
    return rec;
}

std::vector<TrialRecord> rank(std::vector<TrialRecord> trials) {
    std::stable_sort(trials.begin(), trials.end(), [](const TrialRecord& a, const TrialRecord& b) {
        if (a.mean_loss != b.mean_loss) return a.mean_loss < b.mean_loss;
        if (a.std_loss != b.std_loss) return a.std_loss < b.std_loss;
        return a.trial_index < b.trial_index;
    });
    for (std::size_t i = 0; i < trials.size(); ++i) trials[i].rank = i + 1;
    return trials;
}

}  // namespace

std::vector<TrialRecord> grid_search(const SearchSpace& space,
                                     const dataset::EncodedDataset& data,
                                     const SearchOptions& opts) {
    if (space.params.empty()) throw ContractError("search space is empty");

    std::vector<std::vector<std::string>> values;
    for (const auto& [name, d] : space.params) {
        switch (d.kind) {
            case Domain::Kind::Choice:
                values.push_back(d.choices);
                break;
            case Domain::Kind::IntRange: {
                std::vector<std::string> v;
                for (long x = d.lo_int; x <= d.hi_int; ++x) v.push_back(std::to_string(x));
                values.push_back(std::move(v));
                break;
            }
            case Domain::Kind::LogUniform:
                throw ContractError("grid search needs finite domains; '" + name +
                                    "' is log-uniform (use random search)");
        }
    }

    std::vector<TrialRecord> trials;
    std::vector<std::size_t> odometer(values.size(), 0);
    std::size_t index = 0;
    while (true) {
        std::vector<std::pair<std::string, std::string>> assignment;
        for (std::size_t p = 0; p < values.size(); ++p)
            assignment.push_back({space.params[p].first, values[p][odometer[p]]});
        trials.push_back(make_record(index++, std::move(assignment), data, opts));

        std::size_t p = values.size();
        while (p > 0) {
            --p;
            if (++odometer[p] < values[p].size()) break;
            odometer[p] = 0;
            if (p == 0) return rank(std::move(trials));
        }
    }
}

std::vector<TrialRecord> random_search(const SearchSpace& space, std::size_t n_trials,
                                       const dataset::EncodedDataset& data,
                                       const SearchOptions& opts) {
    if (space.params.empty()) throw ContractError("search space is empty");
    if (n_trials < 1) throw ContractError("n_trials must be at least 1");

    std::vector<TrialRecord> trials;
    for (std::size_t t = 0; t < n_trials; ++t) {
        Rng rng(derive_seed(opts.seed, "trial-draw", t));
        std::vector<std::pair<std::string, std::string>> assignment;
        for (const auto& [name, d] : space.params) {
            switch (d.kind) {
                case Domain::Kind::Choice:
                    assignment.push_back(
                        {name, d.choices[static_cast<std::size_t>(rng.next_below(d.choices.size()))]});
                    break;
                case Domain::Kind::IntRange: {
                    auto span = static_cast<std::uint64_t>(d.hi_int - d.lo_int) + 1;
                    assignment.push_back(
                        {name, std::to_string(d.lo_int + static_cast<long>(rng.next_below(span)))});
                    break;
                }
                case Domain::Kind::LogUniform: {
                    double x = std::exp(rng.uniform(std::log(d.lo), std::log(d.hi)));
                    assignment.push_back({name, format_double(x)});
                    break;
                }
            }
        }
        trials.push_back(make_record(t, std::move(assignment), data, opts));
    }
    return rank(std::move(trials));
}

void save_trials_csv(const std::vector<TrialRecord>& trials, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing", path);
    out << "rank,trial,mean_valid_loss,std_valid_loss,fold_losses,params\n";
    for (const auto& t : trials) {
        out << t.rank << "," << t.trial_index << "," << format_double(t.mean_loss) << ","
            << format_double(t.std_loss) << ",";
        for (std::size_t i = 0; i < t.fold_losses.size(); ++i)
            out << (i ? ";" : "") << format_double(t.fold_losses[i]);
        out << ",";
        for (std::size_t i = 0; i < t.assignment.size(); ++i)
            out << (i ? ";" : "") << t.assignment[i].first << "=" << t.assignment[i].second;
        out << "\n";
    }
    if (!out) throw DataError("write failed", path);
}

}  // namespace crashsev::search
