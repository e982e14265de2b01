#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "crashsev/dataset.hpp"
#include "crashsev/errors.hpp"
#include "crashsev/resample.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace crashsev;
using dataset::EncodedDataset;
using resample::SmoteConfig;
using resample::smote;
using resample::stratified_split;

namespace {

// Two-feature dataset with the given per-class counts, rows distinguishable
// by row_id.
EncodedDataset tiny(const std::vector<std::size_t>& per_class, std::uint64_t seed = 4) {
    std::size_t n = 0;
    for (auto c : per_class) n += c;
    std::size_t n_classes = std::max<std::size_t>(per_class.size(), 2);
    EncodedDataset d;
    d.schema = testutil::simple_schema(2, n_classes);
    d.features = Tensor::zeros(static_cast<int>(n), 2);
    Rng rng(seed);
    int i = 0;
    for (std::size_t cls = 0; cls < per_class.size(); ++cls) {
        for (std::size_t k = 0; k < per_class[cls]; ++k, ++i) {
            d.features.at(i, 0) = 10.0 * static_cast<double>(cls) + rng.uniform(-1.0, 1.0);
            d.features.at(i, 1) = rng.uniform(-1.0, 1.0);
            d.targets.push_back(static_cast<int>(cls));
            d.row_ids.push_back(i);
        }
    }
    return d;
}

std::map<std::int64_t, std::size_t> index_by_row_id(const EncodedDataset& d) {
    std::map<std::int64_t, std::size_t> out;
    for (std::size_t i = 0; i < d.n_rows(); ++i) out[d.row_ids[i]] = i;
    return out;
}

}  // namespace

TEST_SUITE("resample") {

TEST_CASE("split keeps class proportions and partitions the rows") {
    auto data = tiny({60, 40});
    auto [train, test] = stratified_split(data, 0.8, 11);

    CHECK(train.n_rows() == 80);
    CHECK(test.n_rows() == 20);
    auto h_train = train.class_histogram();
    auto h_test = test.class_histogram();
    CHECK(h_train[0] == 48);
    CHECK(h_train[1] == 32);
    CHECK(h_test[0] == 12);
    CHECK(h_test[1] == 8);

    // exact partition: every input row lands on exactly one side
    std::set<std::int64_t> seen;
    for (auto id : train.row_ids) CHECK(seen.insert(id).second);
    for (auto id : test.row_ids) CHECK(seen.insert(id).second);
    CHECK(seen.size() == 100);

    // rows carry their feature values with them
    auto src = index_by_row_id(data);
    for (std::size_t i = 0; i < test.n_rows(); ++i) {
        auto j = src.at(test.row_ids[i]);
        CHECK(test.features.at(static_cast<int>(i), 0) ==
              data.features.at(static_cast<int>(j), 0));
        CHECK(test.targets[i] == data.targets[j]);
    }
}

TEST_CASE("split proportions are within one row per class") {
    auto data = tiny({23, 17, 9}, 8);
    auto [train, test] = stratified_split(data, 0.7, 5);
    std::vector<std::size_t> counts = {23, 17, 9};
    auto h = train.class_histogram();
    for (std::size_t c = 0; c < 3; ++c) {
        double want = 0.7 * static_cast<double>(counts[c]);
        CHECK(std::abs(static_cast<double>(h[c]) - want) <= 1.0);
    }
}

TEST_CASE("split of a 10-row class at one half") {
    auto data = tiny({10});
    // single-class data still splits; 0.5 puts five rows on each side
    auto [train, test] = stratified_split(data, 0.5, 3);
    CHECK(train.n_rows() == 5);
    CHECK(test.n_rows() == 5);
}

TEST_CASE("split is seed-deterministic") {
    auto data = tiny({30, 30, 20}, 2);
    auto [a_train, a_test] = stratified_split(data, 0.8, 7);
    auto [b_train, b_test] = stratified_split(data, 0.8, 7);
    CHECK(a_train.row_ids == b_train.row_ids);
    CHECK(a_test.row_ids == b_test.row_ids);
    auto [c_train, c_test] = stratified_split(data, 0.8, 8);
    CHECK(a_train.row_ids != c_train.row_ids);
}

TEST_CASE("split rejects classes too small to land on both sides") {
    auto data = tiny({5, 1});
    CHECK_THROWS_AS(stratified_split(data, 0.8, 1), ContractError);
    auto ok = tiny({5, 2});
    CHECK_NOTHROW(stratified_split(ok, 0.8, 1));

    SUBCASE("fraction must be interior") {
        CHECK_THROWS_AS(stratified_split(ok, 0.0, 1), ContractError);
        CHECK_THROWS_AS(stratified_split(ok, 1.0, 1), ContractError);
    }
}

TEST_CASE("smote balances to the majority count") {
    auto data = tiny({100, 20});
    SmoteConfig cfg;
    cfg.seed = 13;
    auto out = smote(data, cfg);
    auto h = out.class_histogram();
    CHECK(h[0] == 100);
    CHECK(h[1] == 100);
    out.validate();
}

TEST_CASE("smote hits an explicit target exactly") {
    auto data = tiny({40, 12, 7}, 6);
    SmoteConfig cfg;
    cfg.target_count = 55;
    cfg.seed = 2;
    auto out = smote(data, cfg);
    auto h = out.class_histogram();
    CHECK(h[0] == 55);
    CHECK(h[1] == 55);
    CHECK(h[2] == 55);
}

TEST_CASE("originals are retained unchanged") {
    auto data = tiny({50, 10});
    SmoteConfig cfg;
    cfg.seed = 99;
    auto out = smote(data, cfg);
    auto by_id = index_by_row_id(out);
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        auto it = by_id.find(data.row_ids[i]);
        REQUIRE(it != by_id.end());
        auto j = it->second;
        CHECK(out.features.at(static_cast<int>(j), 0) ==
              data.features.at(static_cast<int>(i), 0));
        CHECK(out.features.at(static_cast<int>(j), 1) ==
              data.features.at(static_cast<int>(i), 1));
        CHECK(out.targets[j] == data.targets[i]);
    }
}

TEST_CASE("synthetic row ids live above two to the forty") {
    auto data = tiny({30, 5});
    SmoteConfig cfg;
    cfg.seed = 1;
    auto out = smote(data, cfg);
    const std::int64_t floor = std::int64_t(1) << 40;
    std::set<std::int64_t> synth;
    for (std::size_t i = 0; i < out.n_rows(); ++i) {
        bool original = out.row_ids[i] < floor;
        if (original) continue;
        CHECK(synth.insert(out.row_ids[i]).second);
    }
    CHECK(synth.size() == 25);
}

TEST_CASE("synthetic rows lie on a segment between same-class originals") {
    auto data = tiny({60, 15}, 77);
    SmoteConfig cfg;
    cfg.seed = 42;
    auto out = smote(data, cfg);

    std::vector<std::size_t> minority;
    for (std::size_t i = 0; i < data.n_rows(); ++i)
        if (data.targets[i] == 1) minority.push_back(i);

    const std::int64_t floor = std::int64_t(1) << 40;
    std::size_t checked = 0;
    for (std::size_t i = 0; i < out.n_rows(); ++i) {
        if (out.row_ids[i] < floor) continue;
        CHECK(out.targets[i] == 1);
        // a point x = a + u (b - a) satisfies, coordinatewise, the same u;
        // recover u from one axis and confirm the other agrees for some
        // minority pair (a, b)
        double x0 = out.features.at(static_cast<int>(i), 0);
        double x1 = out.features.at(static_cast<int>(i), 1);
        bool on_some_segment = false;
        for (auto a : minority) {
            for (auto b : minority) {
                double a0 = data.features.at(static_cast<int>(a), 0);
                double a1 = data.features.at(static_cast<int>(a), 1);
                double b0 = data.features.at(static_cast<int>(b), 0);
                double b1 = data.features.at(static_cast<int>(b), 1);
                double d0 = b0 - a0, d1 = b1 - a1;
                double u;
                if (std::abs(d0) > std::abs(d1)) {
                    if (d0 == 0.0) continue;
                    u = (x0 - a0) / d0;
                } else {
                    if (d1 == 0.0) continue;
                    u = (x1 - a1) / d1;
                }
                if (u < -1e-9 || u > 1.0 + 1e-9) continue;
                if (std::abs(a0 + u * d0 - x0) < 1e-9 && std::abs(a1 + u * d1 - x1) < 1e-9) {
                    on_some_segment = true;
                    break;
                }
            }
            if (on_some_segment) break;
        }
        CHECK(on_some_segment);
        ++checked;
    }
    CHECK(checked == 45);
}

TEST_CASE("coincident parents give an identical synthetic row") {
    EncodedDataset d;
    d.schema = testutil::simple_schema(2, 2);
    d.features = Tensor::zeros(6, 2);
    for (int i = 0; i < 6; ++i) {
        d.features.at(i, 0) = (i < 4) ? static_cast<double>(i) : 7.0;
        d.features.at(i, 1) = (i < 4) ? 0.0 : 7.0;
        d.targets.push_back(i < 4 ? 0 : 1);
        d.row_ids.push_back(i);
    }
    // both minority rows sit at (7, 7): every interpolation collapses there
    SmoteConfig cfg;
    cfg.k_neighbors = 1;
    cfg.seed = 3;
    auto out = smote(d, cfg);
    const std::int64_t floor = std::int64_t(1) << 40;
    for (std::size_t i = 0; i < out.n_rows(); ++i) {
        if (out.row_ids[i] < floor) continue;
        CHECK(out.features.at(static_cast<int>(i), 0) == 7.0);
        CHECK(out.features.at(static_cast<int>(i), 1) == 7.0);
    }
}

TEST_CASE("categorical columns stay valid codes") {
    dataset::FixtureConfig fc;
    fc.seed = 12;
    fc.n_rows = 400;
    auto data = dataset::synthesize_fixture(fc);
    SmoteConfig cfg;
    cfg.seed = 6;
    auto out = smote(data, cfg);
    // validate() enforces binary in {0,1} and ordinal in [1, n_labels]
    out.validate();
    auto h = out.class_histogram();
    auto want = *std::max_element(h.begin(), h.end());
    for (auto c : h) CHECK(c == want);
}

TEST_CASE("smote is seed-deterministic") {
    auto data = tiny({80, 25}, 10);
    SmoteConfig cfg;
    cfg.seed = 20;
    auto a = smote(data, cfg);
    auto b = smote(data, cfg);
    CHECK(a.features.values == b.features.values);
    CHECK(a.row_ids == b.row_ids);
    cfg.seed = 21;
    auto c = smote(data, cfg);
    CHECK(a.features.values != c.features.values);
}

TEST_CASE("a one-row class cannot be oversampled") {
    auto data = tiny({10, 1});
    SmoteConfig cfg;
    cfg.seed = 1;
    CHECK_THROWS_AS(smote(data, cfg), ContractError);
}

TEST_CASE("k neighbors must be positive") {
    auto data = tiny({10, 4});
    SmoteConfig cfg;
    cfg.k_neighbors = 0;
    CHECK_THROWS_AS(smote(data, cfg), ContractError);
}

}  // TEST_SUITE
