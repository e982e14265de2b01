#include "crashsev/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "crashsev/errors.hpp"
#include "crashsev/numfmt.hpp"
#include "crashsev/rng.hpp"

namespace crashsev::dataset {

namespace {

const char* kind_name(ColumnKind k) {
    switch (k) {
        case ColumnKind::Binary: return "binary";
        case ColumnKind::Ordinal: return "ordinal";
        case ColumnKind::Continuous: return "continuous";
    }
    return "?";
}

ColumnKind kind_from_name(const std::string& s) {
    if (s == "binary") return ColumnKind::Binary;
    if (s == "ordinal") return ColumnKind::Ordinal;
    if (s == "continuous") return ColumnKind::Continuous;
    throw ContractError("unknown column kind '" + s + "'");
}

// One physical line -> fields. Quoted fields may contain commas; "" inside
// quotes is a literal quote. Fields must not span lines.
std::vector<std::string> split_csv_line(const std::string& line,
                                        const std::string& path,
                                        std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (in_quotes)
        throw DataError("unterminated quoted field", path, line_no);
    fields.push_back(cur);
    return fields;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string strip_cr_and_bom(std::string line, bool first_line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first_line && line.size() >= 3 && line[0] == '\xEF' && line[1] == '\xBB' &&
        line[2] == '\xBF')
        line.erase(0, 3);
    return line;
}

void check_labels(const Column& col) {
    if (col.kind == ColumnKind::Continuous) {
        if (!col.labels.empty())
            throw ContractError("column '" + col.name + "': continuous columns carry no labels");
        return;
    }
    if (col.kind == ColumnKind::Binary && col.labels.size() != 2)
        throw ContractError("column '" + col.name + "': binary columns need exactly two labels");
    if (col.kind == ColumnKind::Ordinal && col.labels.empty())
        throw ContractError("column '" + col.name + "': ordinal columns need at least one label");
    std::set<std::string> seen(col.labels.begin(), col.labels.end());
    if (seen.size() != col.labels.size())
        throw ContractError("column '" + col.name + "': duplicate labels");
}

void check_schema(const Schema& s) {
    if (s.features.empty()) throw ContractError("schema has no feature columns");
    if (s.target_labels.size() < 2) throw ContractError("target needs at least two classes");
    std::set<std::string> names;
    for (const auto& col : s.features) {
        check_labels(col);
        if (!names.insert(col.name).second)
            throw ContractError("duplicate column name '" + col.name + "'");
    }
    if (!names.insert(s.target_name).second)
        throw ContractError("target name '" + s.target_name + "' collides with a feature");
    std::set<std::string> tl(s.target_labels.begin(), s.target_labels.end());
    if (tl.size() != s.target_labels.size())
        throw ContractError("duplicate target labels");
}

Column binary_no_yes(std::string name) {
    return Column{std::move(name), ColumnKind::Binary, {"No", "Yes"}};
}

}  // namespace

double Schema::encode_value(std::size_t col, const std::string& raw) const {
    if (col >= features.size()) throw ContractError("feature column index out of range");
    const Column& c = features[col];
    if (c.kind == ColumnKind::Continuous) {
        double v = 0.0;
        if (!try_parse_double(raw, v) || !std::isfinite(v))
            throw ContractError("column '" + c.name + "': expected a number, got '" + raw + "'");
        return v;
    }
    for (std::size_t i = 0; i < c.labels.size(); ++i) {
        if (c.labels[i] == raw)
            return c.kind == ColumnKind::Binary ? static_cast<double>(i)
                                                : static_cast<double>(i + 1);
    }
    throw ContractError("column '" + c.name + "': unknown label '" + raw + "'");
}

std::string Schema::decode_value(std::size_t col, double value) const {
    if (col >= features.size()) throw ContractError("feature column index out of range");
    const Column& c = features[col];
    if (c.kind == ColumnKind::Continuous) return format_double(value);
    double rounded = std::round(value);
    if (value != rounded)
        throw ContractError("column '" + c.name + "': code " + format_double(value) +
                            " is not integral");
    long code = static_cast<long>(rounded);
    long lo = c.kind == ColumnKind::Binary ? 0 : 1;
    long hi = c.kind == ColumnKind::Binary ? 1 : static_cast<long>(c.labels.size());
    if (code < lo || code > hi)
        throw ContractError("column '" + c.name + "': code " + std::to_string(code) +
                            " out of range");
    return c.labels[static_cast<std::size_t>(code - lo)];
}

int Schema::encode_target(const std::string& raw) const {
    for (std::size_t i = 0; i < target_labels.size(); ++i)
        if (target_labels[i] == raw) return static_cast<int>(i);
    throw ContractError("column '" + target_name + "': unknown label '" + raw + "'");
}

const std::string& Schema::decode_target(int cls) const {
    if (cls < 0 || static_cast<std::size_t>(cls) >= target_labels.size())
        throw ContractError("target class " + std::to_string(cls) + " out of range");
    return target_labels[static_cast<std::size_t>(cls)];
}

std::string Schema::canonical_string() const { return to_json().dump(); }

std::uint64_t Schema::hash() const { return fnv1a64(canonical_string()); }

nlohmann::json Schema::to_json() const {
    nlohmann::json j;
    j["features"] = nlohmann::json::array();
    for (const auto& c : features) {
        nlohmann::json col;
        col["name"] = c.name;
        col["kind"] = kind_name(c.kind);
        if (c.kind != ColumnKind::Continuous) col["labels"] = c.labels;
        j["features"].push_back(col);
    }
    j["target"] = {{"name", target_name}, {"labels", target_labels}};
    return j;
}

Schema Schema::from_json(const nlohmann::json& j) {
    Schema s;
    if (!j.contains("features") || !j["features"].is_array())
        throw ContractError("schema json: missing 'features' array");
    for (const auto& col : j["features"]) {
        Column c;
        c.name = col.at("name").get<std::string>();
        c.kind = kind_from_name(col.at("kind").get<std::string>());
        if (col.contains("labels"))
            c.labels = col["labels"].get<std::vector<std::string>>();
        s.features.push_back(std::move(c));
    }
    if (!j.contains("target"))
        throw ContractError("schema json: missing 'target'");
    s.target_name = j["target"].at("name").get<std::string>();
    s.target_labels = j["target"].at("labels").get<std::vector<std::string>>();
    check_schema(s);
    return s;
}

void Schema::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing", path);
    out << to_json().dump(2) << "\n";
    if (!out) throw DataError("write failed", path);
}

Schema Schema::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open schema file", path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid schema json: ") + e.what(), path);
    }
    try {
        return from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid schema json: ") + e.what(), path);
    } catch (const ContractError& e) {
        throw DataError(e.what(), path);
    }
}

Schema default_schema() {
    Schema s;
    s.features = {
        Column{"sex", ColumnKind::Binary, {"Female", "Male"}},
        Column{"age", ColumnKind::Continuous, {}},
        binary_no_yes("aggressive_driving"),
        Column{"alcohol_drug_test_result",
               ColumnKind::Ordinal,
               {"Both-Positive", "Drug-Positive", "Alcohol-Positive", "Negative",
                "Not related"}},
        binary_no_yes("dui"),
        binary_no_yes("distracted_driving"),
        binary_no_yes("drowsy_driving"),
        binary_no_yes("older_driver"),
        binary_no_yes("teenage_driver"),
        binary_no_yes("holiday"),
        binary_no_yes("right_turn"),
        binary_no_yes("intersection"),
        binary_no_yes("left_turn"),
        binary_no_yes("overturn_rollover"),
        binary_no_yes("domestic_animal"),
        binary_no_yes("commercial_vehicle"),
        binary_no_yes("heavy_truck"),
        binary_no_yes("transit_vehicle"),
        binary_no_yes("work_zone"),
        binary_no_yes("wrong_way_driving"),
        Column{"road_type", ColumnKind::Binary, {"Urban", "Rural"}},
        Column{"functional_class", ColumnKind::Ordinal, {"Local", "Collector", "Arterial"}},
        Column{"roadway_surface_dry", ColumnKind::Binary, {"No", "Yes"}},
        Column{"lighting",
               ColumnKind::Ordinal,
               {"Dark-Not lighted", "Dark-Lighted", "Daylight", "Dusk", "Dawn"}},
        Column{"weather",
               ColumnKind::Ordinal,
               {"Clear", "Cloudy", "Rain", "Fog, Smog", "Snowing", "Others"}},
        Column{"vertical_alignment", ColumnKind::Ordinal, {"Level", "Uphill", "Downhill", "Others"}},
    };
    s.target_name = "severity";
    s.target_labels = {"Fatal", "Serious injury", "Minor injury", "Possible injury",
                       "No injury/PDO"};
    check_schema(s);
    return s;
}

std::vector<std::size_t> EncodedDataset::class_histogram() const {
    std::vector<std::size_t> counts(schema.n_classes(), 0);
    for (int t : targets) {
        if (t < 0 || static_cast<std::size_t>(t) >= counts.size())
            throw ContractError("target class out of range");
        ++counts[static_cast<std::size_t>(t)];
    }
    return counts;
}

void EncodedDataset::validate() const {
    const std::size_t n = n_rows();
    const std::size_t d = schema.feature_count();
    if (static_cast<std::size_t>(features.cols) != d)
        throw ContractError("feature matrix width does not match schema");
    if (targets.size() != n || row_ids.size() != n)
        throw ContractError("targets/row_ids length does not match row count");
    for (std::size_t i = 0; i < n; ++i) {
        if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= schema.n_classes())
            throw ContractError("row " + std::to_string(i) + ": target class out of range");
        for (std::size_t c = 0; c < d; ++c) {
            double v = features.at(static_cast<int>(i), static_cast<int>(c));
            const Column& col = schema.features[c];
            if (!std::isfinite(v))
                throw ContractError("row " + std::to_string(i) + ", column '" + col.name +
                                    "': non-finite value");
            if (col.kind == ColumnKind::Binary) {
                if (v != 0.0 && v != 1.0)
                    throw ContractError("row " + std::to_string(i) + ", column '" + col.name +
                                        "': binary value must be 0 or 1");
            } else if (col.kind == ColumnKind::Ordinal) {
                double r = std::round(v);
                if (v != r || r < 1.0 || r > static_cast<double>(col.labels.size()))
                    throw ContractError("row " + std::to_string(i) + ", column '" + col.name +
                                        "': ordinal code out of range");
            }
        }
    }
    std::unordered_set<std::int64_t> ids(row_ids.begin(), row_ids.end());
    if (ids.size() != row_ids.size()) throw ContractError("duplicate row_ids");
}

EncodedDataset EncodedDataset::subset(const std::vector<std::size_t>& indices) const {
    EncodedDataset out;
    out.schema = schema;
    out.features = Tensor::zeros(static_cast<int>(indices.size()), features.cols);
    out.targets.reserve(indices.size());
    out.row_ids.reserve(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        std::size_t i = indices[k];
        if (i >= n_rows()) throw ContractError("subset index out of range");
        for (int c = 0; c < features.cols; ++c)
            out.features.at(static_cast<int>(k), c) = features.at(static_cast<int>(i), c);
        out.targets.push_back(targets[i]);
        out.row_ids.push_back(row_ids[i]);
    }
    return out;
}

EncodedDataset load_csv(const std::string& path, const Schema& schema,
                        RowErrorPolicy policy, LoadStats* stats) {
    check_schema(schema);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file", path);

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty file: header row required", path);
    line = strip_cr_and_bom(line, true);
    std::vector<std::string> header = split_csv_line(line, path, 1);

    std::unordered_map<std::string, std::size_t> col_index;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (!col_index.emplace(header[i], i).second)
            throw DataError("duplicate header column '" + header[i] + "'", path, 1);
    }

    const std::size_t d = schema.feature_count();
    std::vector<std::size_t> feature_pos(d);
    for (std::size_t c = 0; c < d; ++c) {
        auto it = col_index.find(schema.features[c].name);
        if (it == col_index.end())
            throw DataError("missing required column '" + schema.features[c].name + "'", path, 1);
        feature_pos[c] = it->second;
    }
    auto target_it = col_index.find(schema.target_name);
    if (target_it == col_index.end())
        throw DataError("missing required column '" + schema.target_name + "'", path, 1);
    std::size_t target_pos = target_it->second;

    if (stats) {
        std::set<std::string> wanted;
        for (const auto& c : schema.features) wanted.insert(c.name);
        wanted.insert(schema.target_name);
        for (const auto& h : header)
            if (!wanted.count(h)) stats->warnings.push_back("ignoring extra column '" + h + "'");
    }

    std::vector<double> values;
    std::vector<int> targets;
    std::vector<std::int64_t> row_ids;
    std::size_t line_no = 1;
    std::int64_t data_row = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr_and_bom(line, false);
        if (line.empty()) continue;
        std::int64_t row_id = data_row++;
        try {
            std::vector<std::string> fields = split_csv_line(line, path, line_no);
            if (fields.size() != header.size())
                throw ContractError("expected " + std::to_string(header.size()) +
                                    " fields, got " + std::to_string(fields.size()));
            std::vector<double> row(d);
            for (std::size_t c = 0; c < d; ++c)
                row[c] = schema.encode_value(c, fields[feature_pos[c]]);
            int target = schema.encode_target(fields[target_pos]);
            values.insert(values.end(), row.begin(), row.end());
            targets.push_back(target);
            row_ids.push_back(row_id);
        } catch (const ContractError& e) {
            if (policy == RowErrorPolicy::Fail) throw DataError(e.what(), path, line_no);
            if (stats) ++stats->rows_skipped;
        } catch (const DataError&) {
            if (policy == RowErrorPolicy::Fail) throw;
            if (stats) ++stats->rows_skipped;
        }
    }

    EncodedDataset out;
    out.schema = schema;
    out.targets = std::move(targets);
    out.row_ids = std::move(row_ids);
    out.features = Tensor::zeros(static_cast<int>(out.targets.size()), static_cast<int>(d));
    out.features.values = std::move(values);
    if (stats) stats->rows_read = out.n_rows();
    out.validate();
    return out;
}

void save_encoded_csv(const EncodedDataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing", path);
    out << "row_id";
    for (const auto& c : data.schema.features) out << "," << csv_escape(c.name);
    out << "," << csv_escape(data.schema.target_name) << "\n";
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        out << data.row_ids[i];
        for (int c = 0; c < data.features.cols; ++c)
            out << "," << format_double(data.features.at(static_cast<int>(i), c));
        out << "," << data.targets[i] << "\n";
    }
    if (!out) throw DataError("write failed", path);
}

EncodedDataset load_encoded_csv(const std::string& path, const Schema& schema) {
    check_schema(schema);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file", path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty file: header row required", path);
    line = strip_cr_and_bom(line, true);
    std::vector<std::string> header = split_csv_line(line, path, 1);

    const std::size_t d = schema.feature_count();
    if (header.size() != d + 2 || header[0] != "row_id")
        throw DataError("expected header: row_id, feature columns, target", path, 1);
    for (std::size_t c = 0; c < d; ++c)
        if (header[c + 1] != schema.features[c].name)
            throw DataError("column " + std::to_string(c + 1) + " is '" + header[c + 1] +
                            "', schema expects '" + schema.features[c].name + "'", path, 1);
    if (header[d + 1] != schema.target_name)
        throw DataError("last column is '" + header[d + 1] + "', schema expects '" +
                        schema.target_name + "'", path, 1);

    EncodedDataset out;
    out.schema = schema;
    std::size_t line_no = 1;
    std::vector<double> values;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr_and_bom(line, false);
        if (line.empty()) continue;
        std::vector<std::string> fields = split_csv_line(line, path, line_no);
        if (fields.size() != d + 2)
            throw DataError("expected " + std::to_string(d + 2) + " fields, got " +
                            std::to_string(fields.size()), path, line_no);
        try {
            out.row_ids.push_back(static_cast<std::int64_t>(std::stoll(fields[0])));
            for (std::size_t c = 0; c < d; ++c) values.push_back(parse_double(fields[c + 1]));
            double t = parse_double(fields[d + 1]);
            if (t != std::round(t)) throw ContractError("target class must be an integer");
            out.targets.push_back(static_cast<int>(t));
        } catch (const std::exception& e) {
            throw DataError(e.what(), path, line_no);
        }
    }
    out.features = Tensor::zeros(static_cast<int>(out.targets.size()), static_cast<int>(d));
    out.features.values = std::move(values);
    out.validate();
    return out;
}

void save_label_csv(const EncodedDataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing", path);
    for (std::size_t c = 0; c < data.schema.feature_count(); ++c)
        out << (c ? "," : "") << csv_escape(data.schema.features[c].name);
    out << "," << csv_escape(data.schema.target_name) << "\n";
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        for (std::size_t c = 0; c < data.schema.feature_count(); ++c) {
            double v = data.features.at(static_cast<int>(i), static_cast<int>(c));
            out << (c ? "," : "") << csv_escape(data.schema.decode_value(c, v));
        }
        out << "," << csv_escape(data.schema.decode_target(data.targets[i])) << "\n";
    }
    if (!out) throw DataError("write failed", path);
}

EncodedDataset synthesize_fixture(const FixtureConfig& cfg) {
    Schema schema = default_schema();
    if (cfg.n_rows == 0) throw ContractError("fixture needs at least one row");
    if (cfg.class_mix.size() != schema.n_classes())
        throw ContractError("class_mix must have one share per severity class");
    double sum = 0.0;
    for (double m : cfg.class_mix) {
        if (m < 0.0) throw ContractError("class_mix shares must be nonnegative");
        sum += m;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ContractError("class_mix must sum to 1");
    if (cfg.signal_strength < 0.0 || cfg.signal_strength > 1.0)
        throw ContractError("signal_strength must lie in [0, 1]");

    const std::size_t k = schema.n_classes();

    // Largest-remainder allocation of n_rows across classes.
    std::vector<std::size_t> counts(k);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < k; ++c) {
        double quota = cfg.class_mix[c] * static_cast<double>(cfg.n_rows);
        counts[c] = static_cast<std::size_t>(std::floor(quota));
        assigned += counts[c];
        remainders.push_back({quota - std::floor(quota), c});
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t r = 0; assigned < cfg.n_rows; ++r, ++assigned)
        ++counts[remainders[r % k].second];

    std::vector<int> labels;
    labels.reserve(cfg.n_rows);
    for (std::size_t c = 0; c < k; ++c)
        labels.insert(labels.end(), counts[c], static_cast<int>(c));
    Rng order_rng(derive_seed(cfg.seed, "fixture-order"));
    order_rng.shuffle(labels);

    // Column indices with a planted class signal.
    constexpr int kAge = 1, kAlcohol = 3, kDui = 4, kRightTurn = 10, kIntersection = 11,
                  kLeftTurn = 12, kRoadType = 20, kFunctionalClass = 21, kLighting = 23,
                  kWeather = 24, kVertical = 25;

    Rng rng(derive_seed(cfg.seed, "fixture-rows"));
    const double s = cfg.signal_strength;
    auto coin = [&]() { return rng.next_u64() & 1 ? 1.0 : 0.0; };
    auto uniform_code = [&](std::size_t col) {
        return static_cast<double>(1 + rng.next_below(schema.features[col].labels.size()));
    };
    auto signal_code = [&](std::size_t col, double proto) {
        return rng.next_double() < s * 0.93 ? proto : uniform_code(col);
    };
    auto signal_bit = [&](double proto) {
        return rng.next_double() < s * 0.93 ? proto : coin();
    };

    EncodedDataset out;
    out.schema = schema;
    out.features = Tensor::zeros(static_cast<int>(cfg.n_rows), static_cast<int>(schema.feature_count()));
    out.targets = labels;
    out.row_ids.resize(cfg.n_rows);
    for (std::size_t i = 0; i < cfg.n_rows; ++i) {
        out.row_ids[i] = static_cast<std::int64_t>(i);
        const int cls = labels[i];
        double* row = out.features.row_ptr(static_cast<int>(i));
        for (std::size_t c = 0; c < schema.feature_count(); ++c) {
            const Column& col = schema.features[c];
            switch (col.kind) {
                case ColumnKind::Binary: row[c] = coin(); break;
                case ColumnKind::Ordinal: row[c] = uniform_code(c); break;
                case ColumnKind::Continuous: row[c] = rng.uniform(5.0, 80.0); break;
            }
        }
        // Class prototypes: disjoint age bands plus a handful of categorical
        // markers, each kept with probability 0.93 when the signal is full.
        if (rng.next_double() < s)
            row[kAge] = 15.0 + 12.0 * cls + rng.uniform(-4.0, 4.0);
        row[kAlcohol] = signal_code(kAlcohol, static_cast<double>(cls + 1));
        row[kLighting] = signal_code(kLighting, static_cast<double>(cls + 1));
        row[kWeather] = signal_code(kWeather, static_cast<double>(cls + 1));
        row[kVertical] = signal_code(kVertical, static_cast<double>(cls % 4 + 1));
        row[kFunctionalClass] = signal_code(kFunctionalClass, static_cast<double>(cls % 3 + 1));
        row[kDui] = signal_bit(cls == 0 ? 1.0 : 0.0);
        row[kRoadType] = signal_bit(cls == 0 ? 1.0 : 0.0);
        row[kIntersection] = signal_bit(cls == 2 || cls == 3 ? 1.0 : 0.0);
        row[kLeftTurn] = signal_bit(cls == 1 || cls == 3 ? 1.0 : 0.0);
        row[kRightTurn] = signal_bit(cls == 3 || cls == 4 ? 1.0 : 0.0);
    }
    out.validate();
    return out;
}

}  // namespace crashsev::dataset
