#include "crashsev/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include "crashsev/attribution.hpp"
#include "crashsev/config_kv.hpp"
#include "crashsev/dataset.hpp"
#include "crashsev/errors.hpp"
#include "crashsev/metrics.hpp"
#include "crashsev/numfmt.hpp"
#include "crashsev/resample.hpp"
#include "crashsev/rng.hpp"
#include "crashsev/search.hpp"
#include "crashsev/svg.hpp"
#include "crashsev/tabnet.hpp"

#include "CLI11.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace crashsev::cli {

namespace {

struct CommonOpts {
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string config_path;
    std::string schema_path;
    std::vector<std::string> sets;
};

void add_common(CLI::App* sub, CommonOpts& c) {
    sub->add_option("--out", c.out_dir, "Output directory")->capture_default_str();
    sub->add_option("--seed", c.seed, "Master seed; every random choice derives from it")
        ->capture_default_str();
    sub->add_option("--config", c.config_path, "key=value config file (see `--set` for keys)");
    sub->add_option("--schema", c.schema_path, "Schema json (default: built-in crash schema)");
    sub->add_option("--set", c.sets, "Config override, e.g. --set n_steps=3 (repeatable)");
}

// Precedence: built-in defaults < --config file < --set overrides < --seed.
tabnet::TabNetConfig resolve_config(CLI::App* sub, CommonOpts& c) {
    c.seed_given = sub->count("--seed") > 0;
    tabnet::TabNetConfig cfg;
    if (!c.config_path.empty()) cfg = config::load_kv_file(c.config_path, cfg);
    for (const auto& s : c.sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("--set expects key=value, got '" + s + "'");
        config::apply_kv(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    if (c.seed_given) cfg.seed = c.seed;
    cfg.validate();
    return cfg;
}

dataset::Schema load_schema(const CommonOpts& c) {
    return c.schema_path.empty() ? dataset::default_schema() : dataset::Schema::load(c.schema_path);
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing", path);
    out << content;
    if (!out) throw DataError("write failed", path);
}

// Manifest: the resolved inputs of a run. Keys come out sorted, values use
// round-trip number formatting, no timestamps, so reruns rewrite identical
// bytes.
void write_manifest(const std::string& out_dir, const json& j) {
    write_text_file(out_dir + "/manifest.json", j.dump(2) + "\n");
}

json config_echo(const tabnet::TabNetConfig& cfg) {
    json j = json::object();
    for (const auto& [k, v] : config::to_kv(cfg)) j[k] = v;
    return j;
}

std::vector<std::string> feature_names(const dataset::Schema& schema) {
    std::vector<std::string> names;
    names.reserve(schema.features.size());
    for (const auto& col : schema.features) names.push_back(col.name);
    return names;
}

std::vector<int> argmax_rows(const Tensor& probs) {
    std::vector<int> out(probs.rows);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < probs.cols; ++j)
            if (probs.at(i, j) > probs.at(i, best)) best = j;
        out[i] = static_cast<int>(best);
    }
    return out;
}

// ---- encode ----------------------------------------------------------

struct EncodeOpts {
    std::string data;
    std::string on_bad_row = "fail";
};

void cmd_encode(const CommonOpts& c, const EncodeOpts& e) {
    auto schema = load_schema(c);
    fs::create_directories(c.out_dir);

    dataset::LoadStats stats;
    auto policy = e.on_bad_row == "skip" ? dataset::RowErrorPolicy::Skip
                                         : dataset::RowErrorPolicy::Fail;
    auto data = dataset::load_csv(e.data, schema, policy, &stats);
    dataset::save_encoded_csv(data, c.out_dir + "/encoded.csv");

    json st;
    st["rows_read"] = stats.rows_read;
    st["rows_skipped"] = stats.rows_skipped;
    st["warnings"] = stats.warnings;
    auto hist = data.class_histogram();
    json classes = json::object();
    for (std::size_t k = 0; k < hist.size(); ++k) classes[schema.target_labels[k]] = hist[k];
    st["class_counts"] = classes;

    json cols = json::array();
    for (std::size_t j = 0; j < schema.features.size(); ++j) {
        const auto& col = schema.features[j];
        json cj;
        cj["name"] = col.name;
        switch (col.kind) {
            case dataset::ColumnKind::Binary: cj["kind"] = "binary"; break;
            case dataset::ColumnKind::Ordinal: cj["kind"] = "ordinal"; break;
            case dataset::ColumnKind::Continuous: cj["kind"] = "continuous"; break;
        }
        if (col.kind == dataset::ColumnKind::Continuous) {
            double lo = 0, hi = 0, sum = 0;
            for (std::size_t i = 0; i < data.n_rows(); ++i) {
                double v = data.features.at(i, j);
                if (i == 0) lo = hi = v;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
                sum += v;
            }
            cj["min"] = lo;
            cj["max"] = hi;
            cj["mean"] = data.n_rows() ? sum / data.n_rows() : 0.0;
        } else {
            std::vector<std::size_t> counts(col.labels.size(), 0);
            const std::size_t base = col.kind == dataset::ColumnKind::Ordinal ? 1 : 0;
            for (std::size_t i = 0; i < data.n_rows(); ++i) {
                auto code = static_cast<std::size_t>(data.features.at(i, j));
                counts[code - base]++;
            }
            json hj = json::object();
            for (std::size_t k = 0; k < col.labels.size(); ++k) hj[col.labels[k]] = counts[k];
            cj["histogram"] = hj;
        }
        cols.push_back(cj);
    }
    st["columns"] = cols;
    write_text_file(c.out_dir + "/stats.json", st.dump(2) + "\n");

    json man;
    man["command"] = "encode";
    man["input"] = e.data;
    man["on_bad_row"] = e.on_bad_row;
    man["schema"] = c.schema_path.empty() ? "builtin" : c.schema_path;
    man["schema_hash"] = hash_hex(schema.hash());
    write_manifest(c.out_dir, man);

    std::cout << "encoded " << data.n_rows() << " rows (" << stats.rows_skipped
              << " skipped) -> " << c.out_dir << "/encoded.csv\n";
}

// ---- train -----------------------------------------------------------

struct TrainOpts {
    std::string data;
    double split = 0.8;
    bool smote = true;
    std::size_t smote_k = 5;
    std::size_t members = 1;
};

void cmd_train(const CommonOpts& c, const TrainOpts& t, const tabnet::TabNetConfig& cfg) {
    auto schema = load_schema(c);
    auto data = dataset::load_encoded_csv(t.data, schema);
    fs::create_directories(c.out_dir);

    auto [train_set, test_set] =
        resample::stratified_split(data, t.split, derive_seed(cfg.seed, "train-test-split"));
    auto hist_before = train_set.class_histogram();
    if (t.smote) {
        resample::SmoteConfig sc;
        sc.k_neighbors = t.smote_k;
        sc.seed = derive_seed(cfg.seed, "train-smote");
        train_set = resample::smote(train_set, sc);
    }
    auto hist_after = train_set.class_histogram();

    // What the model actually consumed (post-resampling) plus the untouched
    // holdout, so any audit can work from files alone.
    dataset::save_encoded_csv(train_set, c.out_dir + "/train_split.csv");
    dataset::save_encoded_csv(test_set, c.out_dir + "/test_split.csv");

    std::vector<tabnet::TrainReport> reports;
    tabnet::TabNetEnsemble ensemble;
    if (t.members <= 1) {
        tabnet::TrainReport rep;
        ensemble.members.push_back(tabnet::train(cfg, train_set, test_set, &rep));
        reports.push_back(rep);
    } else {
        ensemble = tabnet::train_bootstrap(cfg, train_set, test_set, t.members, &reports);
    }
    tabnet::save_checkpoint(c.out_dir + "/model.ckpt", ensemble);

    json rj;
    rj["train_rows"] = train_set.n_rows();
    rj["test_rows"] = test_set.n_rows();
    rj["smote"] = t.smote;
    rj["train_class_histogram_before_resampling"] = hist_before;
    rj["train_class_histogram"] = hist_after;
    json members = json::array();
    for (const auto& r : reports) members.push_back(r.to_json());
    rj["members"] = members;
    write_text_file(c.out_dir + "/trainreport.json", rj.dump(2) + "\n");

    json man;
    man["command"] = "train";
    man["input"] = t.data;
    man["schema"] = c.schema_path.empty() ? "builtin" : c.schema_path;
    man["schema_hash"] = hash_hex(schema.hash());
    man["config"] = config_echo(cfg);
    man["train_fraction"] = format_double(t.split);
    man["smote"] = t.smote;
    man["smote_k_neighbors"] = t.smote_k;
    man["members"] = t.members;
    write_manifest(c.out_dir, man);

    const auto& last = reports.back();
    std::cout << "trained " << ensemble.members.size() << " model(s) on " << train_set.n_rows()
              << " rows; best validation loss " << format_double(last.best_valid_loss)
              << " at epoch " << last.best_epoch << " -> " << c.out_dir << "/model.ckpt\n";
}

// ---- evaluate --------------------------------------------------------

struct EvalOpts {
    std::string data;
    std::string model;
};

void cmd_evaluate(const CommonOpts& c, const EvalOpts& e) {
    auto schema = load_schema(c);
    auto data = dataset::load_encoded_csv(e.data, schema);
    auto ensemble = tabnet::load_checkpoint(e.model, schema.hash());
    fs::create_directories(c.out_dir);

    Tensor probs = ensemble.predict(data.features);
    auto y_pred = argmax_rows(probs);
    auto rep = metrics::report(data.targets, y_pred, schema.n_classes(), schema.target_labels);

    std::string text = metrics::render_text(rep);
    write_text_file(c.out_dir + "/report.txt", text);

    json rj;
    rj["n_rows"] = data.n_rows();
    rj["accuracy"] = rep.accuracy;
    json per = json::array();
    for (std::size_t k = 0; k < rep.per_class.size(); ++k) {
        json pj;
        pj["class"] = rep.class_names[k];
        pj["precision"] = rep.per_class[k].precision;
        pj["recall"] = rep.per_class[k].recall;
        pj["f1"] = rep.per_class[k].f1;
        per.push_back(pj);
    }
    rj["per_class"] = per;
    json cm = json::array();
    for (std::size_t i = 0; i < rep.confusion.n_classes; ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < rep.confusion.n_classes; ++j) row.push_back(rep.confusion.at(i, j));
        cm.push_back(row);
    }
    rj["confusion"] = cm;
    write_text_file(c.out_dir + "/report.json", rj.dump(2) + "\n");

    std::ostringstream pred_csv;
    pred_csv << "row_id,truth,predicted";
    for (std::size_t k = 0; k < schema.n_classes(); ++k) pred_csv << ",prob_" << k;
    pred_csv << "\n";
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        pred_csv << data.row_ids[i] << "," << data.targets[i] << "," << y_pred[i];
        for (std::size_t k = 0; k < schema.n_classes(); ++k)
            pred_csv << "," << format_double(probs.at(i, k));
        pred_csv << "\n";
    }
    write_text_file(c.out_dir + "/predictions.csv", pred_csv.str());

    json man;
    man["command"] = "evaluate";
    man["input"] = e.data;
    man["model"] = e.model;
    man["schema"] = c.schema_path.empty() ? "builtin" : c.schema_path;
    man["schema_hash"] = hash_hex(schema.hash());
    write_manifest(c.out_dir, man);

    std::cout << text;
}

// ---- explain ---------------------------------------------------------

struct ExplainOpts {
    std::string data;
    std::string model;
    std::string background_path;
    std::size_t background_size = 50;
    std::size_t rows = 8;  // 0 = all rows
    std::int64_t row_id = -1;
    bool row_id_given = false;
    int cls = 0;
    std::string method = "auto";
    std::size_t permutations = 200;
    bool antithetic = false;
};

// Feature display order for the figures: best rank first, ties by index.
std::vector<std::size_t> ranked_order(const std::vector<double>& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

void cmd_explain(const CommonOpts& c, const ExplainOpts& e) {
    auto schema = load_schema(c);
    auto data = dataset::load_encoded_csv(e.data, schema);
    auto ensemble = tabnet::load_checkpoint(e.model, schema.hash());
    if (e.cls < 0 || static_cast<std::size_t>(e.cls) >= schema.n_classes())
        throw ConfigError("--class out of range; the schema has " +
                          std::to_string(schema.n_classes()) + " classes");
    fs::create_directories(c.out_dir);

    // Rows to explain: the leading --rows rows, plus the named row if it
    // sits further down.
    std::size_t n_explain = e.rows == 0 ? data.n_rows() : std::min(e.rows, data.n_rows());
    std::vector<std::size_t> idx(n_explain);
    std::iota(idx.begin(), idx.end(), 0);
    std::size_t force_pos = 0;
    if (e.row_id_given) {
        auto it = std::find(data.row_ids.begin(), data.row_ids.end(), e.row_id);
        if (it == data.row_ids.end())
            throw LookupError("row id " + std::to_string(e.row_id) + " not found in " + e.data);
        auto at = static_cast<std::size_t>(it - data.row_ids.begin());
        if (at < n_explain) {
            force_pos = at;
        } else {
            idx.push_back(at);
            force_pos = idx.size() - 1;
        }
    }
    auto instances = data.subset(idx);

    auto background =
        e.background_path.empty() ? data : dataset::load_encoded_csv(e.background_path, schema);
    if (background.n_rows() > e.background_size) {
        std::vector<std::size_t> pool(background.n_rows());
        std::iota(pool.begin(), pool.end(), 0);
        Rng rng(derive_seed(c.seed, "background-sample"));
        rng.shuffle(pool);
        pool.resize(e.background_size);
        std::sort(pool.begin(), pool.end());
        background = background.subset(pool);
    }

    attribution::ExplainOptions opts;
    opts.method = e.method;
    opts.n_permutations = e.permutations;
    opts.seed = c.seed;
    opts.antithetic = e.antithetic;
    auto model_fn = [&](const Tensor& x) { return ensemble.predict(x); };
    auto attr = attribution::explain_dataset(model_fn, instances.features, background.features,
                                             schema.n_classes(), opts);

    auto names = feature_names(schema);
    attribution::save_attribution_csv(attr, instances.features, instances.row_ids, names,
                                      schema.target_labels, c.out_dir + "/attributions.csv");
    json aj = attribution::attribution_to_json(attr, instances.row_ids, names,
                                               schema.target_labels);
    write_text_file(c.out_dir + "/attributions.json", aj.dump(2) + "\n");

    for (std::size_t k = 0; k < schema.n_classes(); ++k) {
        auto order = ranked_order(attr.ranking[k]);
        const std::string& cname = schema.target_labels[k];

        std::vector<svg::BarEntry> bars;
        for (std::size_t j : order) bars.push_back({names[j], attr.ranking[k][j]});
        write_text_file(c.out_dir + "/importance_class" + std::to_string(k) + ".svg",
                        svg::importance_bars(bars, "Mean |phi| share by feature: " + cname));

        std::vector<svg::DotSeries> series;
        for (std::size_t j : order) {
            svg::DotSeries s;
            s.feature = names[j];
            for (std::size_t i = 0; i < instances.n_rows(); ++i) {
                s.phi.push_back(attr.phi[k].at(i, j));
                s.value.push_back(instances.features.at(i, j));
            }
            series.push_back(std::move(s));
        }
        write_text_file(c.out_dir + "/summary_class" + std::to_string(k) + ".svg",
                        svg::summary_dot_plot(series, "Attribution summary: " + cname));
    }

    auto cls = static_cast<std::size_t>(e.cls);
    attribution::AttributionResult row_result;
    row_result.phi.resize(names.size());
    for (std::size_t j = 0; j < names.size(); ++j)
        row_result.phi[j] = attr.phi[cls].at(force_pos, j);
    row_result.base_value = attr.base_values[cls];
    row_result.fx = attr.fx.at(force_pos, cls);
    row_result.method = attr.method;
    row_result.n_samples = attr.n_samples;
    std::vector<std::string> display;
    for (std::size_t j = 0; j < names.size(); ++j)
        display.push_back(schema.decode_value(j, instances.features.at(force_pos, j)));
    auto fd = attribution::force_data(row_result, names, display);
    auto force_id = instances.row_ids[force_pos];
    write_text_file(
        c.out_dir + "/force_row" + std::to_string(force_id) + "_class" + std::to_string(cls) +
            ".svg",
        svg::force_plot(fd, "Contribution walk: row " + std::to_string(force_id) + ", " +
                                schema.target_labels[cls]));

    json man;
    man["command"] = "explain";
    man["input"] = e.data;
    man["model"] = e.model;
    man["schema"] = c.schema_path.empty() ? "builtin" : c.schema_path;
    man["schema_hash"] = hash_hex(schema.hash());
    man["seed"] = c.seed;
    man["method"] = attr.method;
    man["permutations"] = e.permutations;
    man["antithetic"] = e.antithetic;
    man["rows_explained"] = instances.n_rows();
    man["force_row_id"] = force_id;
    man["class"] = e.cls;
    man["background"] = e.background_path.empty() ? "input data" : e.background_path;
    man["background_rows"] = background.n_rows();
    write_manifest(c.out_dir, man);

    std::cout << "explained " << instances.n_rows() << " rows (" << attr.method << ") -> "
              << c.out_dir << "/attributions.csv\n";
}

// ---- search ----------------------------------------------------------

struct SearchCmdOpts {
    std::string data;
    std::string space;
    std::string mode = "grid";
    std::size_t trials = 20;
    std::size_t folds = 3;
    bool smote = false;
    std::size_t smote_k = 5;
};

void cmd_search(const CommonOpts& c, const SearchCmdOpts& s, const tabnet::TabNetConfig& base) {
    auto schema = load_schema(c);
    auto data = dataset::load_encoded_csv(s.data, schema);
    auto space = search::SearchSpace::load(s.space);
    fs::create_directories(c.out_dir);

    search::SearchOptions opts;
    opts.base = base;
    opts.k_folds = s.folds;
    opts.seed = base.seed;
    opts.apply_smote = s.smote;
    opts.smote_k_neighbors = s.smote_k;

    auto trials = s.mode == "grid" ? search::grid_search(space, data, opts)
                                   : search::random_search(space, s.trials, data, opts);
    search::save_trials_csv(trials, c.out_dir + "/trials.csv");
    const auto& best = trials.front();
    config::save_kv_file(best.config(base), c.out_dir + "/best_config.cfg");

    json man;
    man["command"] = "search";
    man["input"] = s.data;
    man["schema"] = c.schema_path.empty() ? "builtin" : c.schema_path;
    man["schema_hash"] = hash_hex(schema.hash());
    man["config"] = config_echo(base);
    man["mode"] = s.mode;
    man["folds"] = s.folds;
    man["trials"] = trials.size();
    man["smote"] = s.smote;
    man["smote_k_neighbors"] = s.smote_k;
    {
        std::ifstream in(s.space);
        man["space"] = json::parse(in);
    }
    write_manifest(c.out_dir, man);

    std::cout << "ran " << trials.size() << " trials; best mean loss "
              << format_double(best.mean_loss) << " -> " << c.out_dir << "/best_config.cfg\n";
}

}  // namespace

int run_cli(std::vector<std::string> args) {
    CLI::App app{"Pedestrian crash severity pipeline: encode, train, evaluate, explain, search"};
    app.require_subcommand(1);

    CommonOpts enc_common, trn_common, evl_common, exp_common, sch_common;
    EncodeOpts enc;
    TrainOpts trn;
    EvalOpts evl;
    ExplainOpts exp;
    SearchCmdOpts sch;

    auto* cmd_enc = app.add_subcommand("encode", "Encode a labeled crash CSV to numeric codes");
    cmd_enc->add_option("data", enc.data, "Input CSV with label-valued columns")->required();
    cmd_enc->add_option("--on-bad-row", enc.on_bad_row, "fail | skip")
        ->check(CLI::IsMember({"fail", "skip"}))
        ->capture_default_str();
    add_common(cmd_enc, enc_common);
    cmd_enc->callback([&] { cmd_encode(enc_common, enc); });

    auto* cmd_trn = app.add_subcommand("train", "Split, optionally oversample, and fit a model");
    cmd_trn->add_option("data", trn.data, "Encoded CSV (see `encode`)")->required();
    cmd_trn->add_option("--split", trn.split, "Training fraction of the stratified split")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd_trn->add_flag("--smote,!--no-smote", trn.smote,
                      "Oversample minority classes in the training portion");
    cmd_trn->add_option("--smote-k", trn.smote_k, "Neighbor count for synthetic rows")
        ->capture_default_str();
    cmd_trn->add_option("--members", trn.members, "Bootstrap ensemble size (1 = plain fit)")
        ->capture_default_str();
    add_common(cmd_trn, trn_common);
    cmd_trn->callback([&] { cmd_train(trn_common, trn, resolve_config(cmd_trn, trn_common)); });

    auto* cmd_evl = app.add_subcommand("evaluate", "Score a checkpoint on encoded rows");
    cmd_evl->add_option("data", evl.data, "Encoded CSV")->required();
    cmd_evl->add_option("--model", evl.model, "Checkpoint file")->required();
    add_common(cmd_evl, evl_common);
    cmd_evl->callback([&] { cmd_evaluate(evl_common, evl); });

    auto* cmd_exp = app.add_subcommand("explain", "Per-feature attributions and figures");
    cmd_exp->add_option("data", exp.data, "Encoded CSV with the rows to explain")->required();
    cmd_exp->add_option("--model", exp.model, "Checkpoint file")->required();
    cmd_exp->add_option("--method", exp.method, "auto | exact | permutation")
        ->check(CLI::IsMember({"auto", "exact", "permutation"}))
        ->capture_default_str();
    cmd_exp->add_option("--permutations", exp.permutations, "Sample size for the estimator")
        ->capture_default_str();
    cmd_exp->add_flag("--antithetic", exp.antithetic, "Pair each ordering with its reverse");
    cmd_exp->add_option("--rows", exp.rows, "How many leading rows to explain (0 = all)")
        ->capture_default_str();
    auto* row_opt = cmd_exp->add_option("--row-id", exp.row_id,
                                        "Row for the contribution walk (default: first row)");
    cmd_exp->add_option("--class", exp.cls, "Class index for the contribution walk")
        ->capture_default_str();
    cmd_exp->add_option("--background-data", exp.background_path,
                        "Encoded CSV for the reference sample (default: input data)");
    cmd_exp->add_option("--background-size", exp.background_size,
                        "Reference sample rows (subsampled if larger)")
        ->capture_default_str();
    add_common(cmd_exp, exp_common);
    cmd_exp->callback([&] {
        exp.row_id_given = row_opt->count() > 0;
        cmd_explain(exp_common, exp);
    });

    auto* cmd_sch = app.add_subcommand("search", "Cross-validated hyperparameter search");
    cmd_sch->add_option("data", sch.data, "Encoded CSV")->required();
    cmd_sch->add_option("--space", sch.space, "Search space json")->required();
    cmd_sch->add_option("--mode", sch.mode, "grid | random")
        ->check(CLI::IsMember({"grid", "random"}))
        ->capture_default_str();
    cmd_sch->add_option("--trials", sch.trials, "Trial count (random mode)")
        ->capture_default_str();
    cmd_sch->add_option("--folds", sch.folds, "Cross-validation folds")->capture_default_str();
    cmd_sch->add_flag("--smote,!--no-smote", sch.smote,
                      "Oversample each fold's training portion");
    cmd_sch->add_option("--smote-k", sch.smote_k, "Neighbor count for synthetic rows")
        ->capture_default_str();
    add_common(cmd_sch, sch_common);
    cmd_sch->callback([&] { cmd_search(sch_common, sch, resolve_config(cmd_sch, sch_common)); });

    try {
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 6;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DivergenceError& e) {
        std::cerr << "error: training diverged at epoch " << e.epoch << ": " << e.what() << "\n";
        return 3;
    } catch (const SchemaMismatchError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const LookupError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 6;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace crashsev::cli
