#include <cmath>
#include <vector>

#include "crashsev/errors.hpp"
#include "crashsev/rng.hpp"
#include "crashsev/tape.hpp"
#include "crashsev/tensor.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace crashsev;
using diffgraph::Tape;
using testutil::max_grad_err;
using testutil::random_tensor;
using testutil::rel_err;

namespace {

// Sum of all output entries as the scalar loss; its gradient with respect to
// the input isolates the op's backward rule.
double sum_all(const Tensor& t) {
    double s = 0.0;
    for (double v : t.values) s += v;
    return s;
}

int sum_node(Tape& tape, int x) {
    const Tensor& v = tape.value(x);
    Tensor ones(v.cols, 1, 1.0);
    Tensor row_ones(1, v.rows, 1.0);
    int col = tape.matmul(x, tape.leaf(ones));
    return tape.matmul(tape.leaf(row_ones), col);
}

// Fixed pseudo-random weights per shape. A plain sum would be blind to ops
// whose outputs have a constant sum (softmax rows, for one).
Tensor probe_weights(std::size_t rows, std::size_t cols) {
    Rng rng(1000 + 31 * rows + cols);
    Tensor w(rows, cols);
    for (auto& v : w.values) v = rng.uniform(0.5, 1.5);
    return w;
}

int weighted_sum_node(Tape& tape, int x) {
    const Tensor& v = tape.value(x);
    int w = tape.leaf(probe_weights(v.rows, v.cols));
    return sum_node(tape, tape.mul(x, w));
}

// Gradient of weighted_sum(op(x)) with respect to x, via the tape.
std::vector<double> tape_grad(const std::function<int(Tape&, int)>& op, const Tensor& x) {
    Tape tape;
    int xid = tape.leaf(x, true);
    int out = op(tape, xid);
    tape.backward(weighted_sum_node(tape, out));
    return tape.grad_of(xid);
}

double tape_value_sum(const std::function<int(Tape&, int)>& op, const Tensor& x) {
    Tape tape;
    int xid = tape.leaf(x);
    int out = op(tape, xid);
    const Tensor& v = tape.value(out);
    double s = 0.0;
    const Tensor w = probe_weights(v.rows, v.cols);
    for (std::size_t i = 0; i < v.values.size(); ++i) s += v.values[i] * w.values[i];
    return s;
}

void check_op_gradient(const std::function<int(Tape&, int)>& op, const Tensor& x,
                       double tol = 1e-4) {
    auto analytic = tape_grad(op, x);
    auto fn = [&](const Tensor& t) { return tape_value_sum(op, t); };
    CHECK(max_grad_err(fn, x, analytic) < tol);
}

}  // namespace

TEST_SUITE("diffgraph") {

TEST_CASE("matmul basics") {
    Tape tape;
    int i2 = tape.leaf(Tensor::identity(2));
    int a = tape.leaf(Tensor::from_rows({{1, 2}, {3, 4}}));
    CHECK(approx_equal(tape.value(tape.matmul(i2, a)), Tensor::from_rows({{1, 2}, {3, 4}}), 0));

    int b = tape.leaf(Tensor::from_rows({{5}, {6}}));
    CHECK(approx_equal(tape.value(tape.matmul(a, b)), Tensor::from_rows({{17}, {39}}), 0));

    int z = tape.leaf(Tensor::zeros(2, 3));
    CHECK(approx_equal(tape.value(tape.matmul(a, z)), Tensor::zeros(2, 3), 0));

    int bad = tape.leaf(Tensor::zeros(3, 1));
    CHECK_THROWS_AS(tape.matmul(a, bad), ShapeError);
}

TEST_CASE("matmul gradient flows to both operands") {
    Rng rng(11);
    Tensor a = random_tensor(3, 4, rng);
    Tensor b = random_tensor(4, 2, rng);

    Tape tape;
    int aid = tape.leaf(a, true);
    int bid = tape.leaf(b, true);
    tape.backward(sum_node(tape, tape.matmul(aid, bid)));
    auto ga = tape.grad_of(aid);
    auto gb = tape.grad_of(bid);

    auto fa = [&](const Tensor& t) {
        Tape tp;
        return sum_all(tp.value(tp.matmul(tp.leaf(t), tp.leaf(b))));
    };
    auto fb = [&](const Tensor& t) {
        Tape tp;
        return sum_all(tp.value(tp.matmul(tp.leaf(a), tp.leaf(t))));
    };
    CHECK(max_grad_err(fa, a, ga) < 1e-6);
    CHECK(max_grad_err(fb, b, gb) < 1e-6);
}

TEST_CASE("glu gates the first half by the sigmoid of the second") {
    Tape tape;
    int x = tape.leaf(Tensor::from_rows({{2, 0}}));
    CHECK(tape.value(tape.glu(x)).at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

    int zeros = tape.leaf(Tensor::zeros(2, 6));
    CHECK(approx_equal(tape.value(tape.glu(zeros)), Tensor::zeros(2, 3), 0));

    int saturated = tape.leaf(Tensor::from_rows({{3, 40}}));
    CHECK(std::abs(tape.value(tape.glu(saturated)).at(0, 0) - 3.0) < 1e-9);

    int odd = tape.leaf(Tensor::zeros(1, 3));
    CHECK_THROWS_AS(tape.glu(odd), ShapeError);
}

TEST_CASE("elementwise and shaping ops match finite differences") {
    Rng rng(17);
    Tensor x = random_tensor(3, 4, rng);
    // keep relu entries away from the kink, where the derivative jumps
    for (auto& v : x.values)
        if (std::abs(v) < 0.05) v += 0.1;

    check_op_gradient([](Tape& t, int id) { return t.relu(id); }, x);
    check_op_gradient([](Tape& t, int id) { return t.sigmoid(id); }, x);
    check_op_gradient([](Tape& t, int id) { return t.scale(id, -1.7); }, x);
    check_op_gradient([](Tape& t, int id) { return t.affine(id, 0.5, 2.0); }, x);
    check_op_gradient([](Tape& t, int id) { return t.slice_cols(id, 1, 3); }, x);
    check_op_gradient([](Tape& t, int id) { return t.glu(id); }, x);
    check_op_gradient([](Tape& t, int id) { return t.softmax_rows(id); }, x);
    check_op_gradient([](Tape& t, int id) { return t.mul(id, id); }, x);
    check_op_gradient([](Tape& t, int id) { return t.add(id, t.scale(id, 2.0)); }, x);

    Tensor bias = random_tensor(1, 4, rng);
    check_op_gradient([&](Tape& t, int id) { return t.add_row_bias(id, t.leaf(bias)); }, x);

    Tensor positive = random_tensor(3, 4, rng, 0.05, 1.0);
    check_op_gradient([](Tape& t, int id) { return t.neg_entropy_mean(id); }, positive);
}

TEST_CASE("softmax rows") {
    Tape tape;
    int uniform = tape.leaf(Tensor(1, 5, 3.7));
    auto probs = tape.value(tape.softmax_rows(uniform));
    for (std::size_t j = 0; j < 5; ++j) CHECK(probs.at(0, j) == doctest::Approx(0.2).epsilon(1e-12));

    int two = tape.leaf(Tensor::from_rows({{std::log(2.0), 0}}));
    auto p2 = tape.value(tape.softmax_rows(two));
    CHECK(p2.at(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(p2.at(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    Rng rng(3);
    Tensor z = random_tensor(20, 7, rng, -30, 30);
    Tape t2;
    auto out = t2.value(t2.softmax_rows(t2.leaf(z)));
    for (std::size_t i = 0; i < out.rows; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < out.cols; ++j) {
            CHECK(out.at(i, j) >= 0.0);
            sum += out.at(i, j);
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("cross entropy") {
    Tape tape;
    // logits so extreme the true class has probability 1 to double precision;
    // the log-argument guard leaves a residual of about -1e-12, not exactly 0
    int logits = tape.leaf(Tensor::from_rows({{100, 0, 0}}));
    CHECK(std::abs(tape.value(tape.cross_entropy(logits, {0})).at(0, 0)) < 1e-11);

    CHECK_THROWS_AS(tape.cross_entropy(logits, {3}), ContractError);
    CHECK_THROWS_AS(tape.cross_entropy(logits, {-1}), ContractError);

    Rng rng(5);
    Tensor z = random_tensor(6, 4, rng);
    std::vector<int> labels = {0, 1, 2, 3, 1, 2};
    auto op = [&](Tape& t, int id) { return t.cross_entropy(id, labels); };
    check_op_gradient(op, z);
}

TEST_CASE("backward seeds 1 at a scalar loss and follows the chain rule") {
    Tape tape;
    int x = tape.leaf(Tensor::from_rows({{3}}), true);
    int y = tape.leaf(Tensor::from_rows({{5}}), true);
    tape.backward(tape.mul(x, y));
    CHECK(tape.grad_of(x)[0] == 5.0);
    CHECK(tape.grad_of(y)[0] == 3.0);

    Tape t2;
    int v = t2.leaf(Tensor::from_rows({{1, 2}}), true);
    t2.backward(sum_node(t2, t2.mul(v, v)));
    CHECK(t2.grad_of(v) == std::vector<double>{2, 4});

    Tape t3;
    int wide = t3.leaf(Tensor::zeros(1, 2), true);
    CHECK_THROWS_AS(t3.backward(wide), ContractError);
}

TEST_CASE("batchnorm train mode") {
    diffgraph::BatchNormState state;
    Tape tape;
    int scale = tape.leaf(Tensor(1, 1, 1.0));
    int shift = tape.leaf(Tensor(1, 1, 0.0));

    SUBCASE("constant column maps to zero") {
        int x = tape.leaf(Tensor(4, 1, 7.25));
        auto out = tape.value(tape.batchnorm_train(x, state, scale, shift));
        for (double v : out.values) CHECK(v == doctest::Approx(0.0).epsilon(1e-9));
    }

    SUBCASE("two-point column normalizes to plus and minus one") {
        int x = tape.leaf(Tensor::from_rows({{0}, {2}}));
        auto out = tape.value(tape.batchnorm_train(x, state, scale, shift));
        CHECK(out.at(0, 0) == doctest::Approx(-1.0).epsilon(1e-4));
        CHECK(out.at(1, 0) == doctest::Approx(1.0).epsilon(1e-4));
    }

    SUBCASE("momentum weights the new batch statistic") {
        state.running_mean = {0.0};
        state.running_var = {1.0};
        state.momentum = 0.3;
        state.initialized = true;
        int x = tape.leaf(Tensor::from_rows({{9}, {11}}));  // batch mean 10
        tape.batchnorm_train(x, state, scale, shift);
        CHECK(state.running_mean[0] == doctest::Approx(3.0).epsilon(1e-12));
    }

    SUBCASE("columns come out standardized") {
        Rng rng(23);
        Tensor x = random_tensor(64, 3, rng, -5, 5);
        Tape t;
        int s = t.leaf(Tensor(1, 3, 1.0));
        int b = t.leaf(Tensor(1, 3, 0.0));
        diffgraph::BatchNormState st;
        auto out = t.value(t.batchnorm_train(t.leaf(x), st, s, b));
        for (std::size_t j = 0; j < 3; ++j) {
            double mean = 0, var = 0;
            for (std::size_t i = 0; i < out.rows; ++i) mean += out.at(i, j);
            mean /= static_cast<double>(out.rows);
            for (std::size_t i = 0; i < out.rows; ++i)
                var += (out.at(i, j) - mean) * (out.at(i, j) - mean);
            var /= static_cast<double>(out.rows);
            CHECK(std::abs(mean) < 1e-10);
            CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
        }
    }
}

TEST_CASE("batchnorm infer requires populated statistics") {
    diffgraph::BatchNormState state;
    Tape tape;
    int scale = tape.leaf(Tensor(1, 1, 1.0));
    int shift = tape.leaf(Tensor(1, 1, 0.0));
    int x = tape.leaf(Tensor::from_rows({{1}, {2}}));
    CHECK_THROWS_AS(tape.batchnorm_infer(x, state, scale, shift), ContractError);

    tape.batchnorm_train(x, state, scale, shift);
    auto first = tape.value(tape.batchnorm_infer(x, state, scale, shift));
    auto second = tape.value(tape.batchnorm_infer(x, state, scale, shift));
    CHECK(first.values == second.values);
}

TEST_CASE("batchnorm gradient matches finite differences") {
    Rng rng(31);
    Tensor x = random_tensor(8, 3, rng);
    Tensor scale = random_tensor(1, 3, rng, 0.5, 1.5);
    Tensor shift = random_tensor(1, 3, rng, -0.5, 0.5);

    auto loss_of = [&](const Tensor& xin, const Tensor& sc, const Tensor& sh) {
        Tape tape;
        diffgraph::BatchNormState state;  // fresh per pass; value is stat-free
        int out = tape.batchnorm_train(tape.leaf(xin, true), state, tape.leaf(sc, true),
                                       tape.leaf(sh, true));
        // square the output so the gradient through the normalization is
        // nontrivial (sum alone cancels the mean term)
        return sum_all(tape.value(tape.mul(out, out)));
    };

    Tape tape;
    diffgraph::BatchNormState state;
    int xid = tape.leaf(x, true);
    int sid = tape.leaf(scale, true);
    int bid = tape.leaf(shift, true);
    int out = tape.batchnorm_train(xid, state, sid, bid);
    tape.backward(sum_node(tape, tape.mul(out, out)));

    auto fx = [&](const Tensor& t) { return loss_of(t, scale, shift); };
    auto fs = [&](const Tensor& t) { return loss_of(x, t, shift); };
    auto fb = [&](const Tensor& t) { return loss_of(x, scale, t); };
    CHECK(max_grad_err(fx, x, tape.grad_of(xid)) < 1e-4);
    CHECK(max_grad_err(fs, scale, tape.grad_of(sid)) < 1e-4);
    CHECK(max_grad_err(fb, shift, tape.grad_of(bid)) < 1e-4);
}

TEST_CASE("one-hot rows carry zero entropy penalty") {
    Tape tape;
    Tensor m = Tensor::zeros(3, 4);
    m.at(0, 1) = 1.0;
    m.at(1, 0) = 1.0;
    m.at(2, 3) = 1.0;
    CHECK(std::abs(tape.value(tape.neg_entropy_mean(tape.leaf(m))).at(0, 0)) < 1e-9);
}

TEST_CASE("replaying a tape is bit-identical") {
    Rng rng(41);
    Tensor x = random_tensor(4, 6, rng);
    Tensor w = random_tensor(6, 3, rng);
    std::vector<int> labels = {0, 1, 2, 1};

    auto run = [&](std::vector<double>& grads) {
        Tape tape;
        int xid = tape.leaf(x);
        int wid = tape.leaf(w, true);
        int loss = tape.cross_entropy(tape.matmul(xid, wid), labels);
        tape.backward(loss);
        grads = tape.grad_of(wid);
        return tape.value(loss).at(0, 0);
    };
    std::vector<double> g1, g2;
    double l1 = run(g1);
    double l2 = run(g2);
    CHECK(l1 == l2);
    CHECK(g1 == g2);
}

}  // TEST_SUITE
