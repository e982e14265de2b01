#include "crashsev/tape.hpp"

#include <algorithm>
#include <cmath>

#include "crashsev/errors.hpp"

namespace crashsev::diffgraph {

namespace {

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

int Tape::push(Tensor value, std::vector<int> inputs, BackwardFn backward) {
    bool needs_grad = false;
    for (int in : inputs) needs_grad = needs_grad || nodes_[static_cast<std::size_t>(in)].requires_grad;
    nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(backward), needs_grad});
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Tensor value, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), {}, nullptr, requires_grad});
    return static_cast<int>(nodes_.size()) - 1;
}

void Tape::accumulate_grad(int id, const std::vector<double>& delta) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) return;
    n.value.ensure_grad();
    for (std::size_t i = 0; i < delta.size(); ++i) n.value.grad[i] += delta[i];
}

std::vector<double>& Tape::grad_buffer(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    n.value.ensure_grad();
    return n.value.grad;
}

int Tape::matmul(int a, int b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.cols != tb.rows)
        throw ShapeError("matmul: inner dimensions disagree (" + std::to_string(ta.cols) +
                         " vs " + std::to_string(tb.rows) + ")");
    const std::size_t m = ta.rows, k = ta.cols, n = tb.cols;
    Tensor out(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = ta.row_ptr(i);
        double* orow = out.row_ptr(i);
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = arow[kk];
            if (aik == 0.0) continue;
            const double* brow = tb.row_ptr(kk);
            for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    }
    return push(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, const std::vector<double>& g, int) {
        const Tensor& ta = t.value(a);
        const Tensor& tb = t.value(b);
        if (t.requires_grad(a)) {
            std::vector<double>& ga = t.grad_buffer(a);
            for (std::size_t i = 0; i < m; ++i) {
                const double* grow = g.data() + i * n;
                for (std::size_t kk = 0; kk < k; ++kk) {
                    const double* brow = tb.row_ptr(kk);
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    ga[i * k + kk] += acc;
                }
            }
        }
        if (t.requires_grad(b)) {
            std::vector<double>& gb = t.grad_buffer(b);
            for (std::size_t i = 0; i < m; ++i) {
                const double* arow = ta.row_ptr(i);
                const double* grow = g.data() + i * n;
                for (std::size_t kk = 0; kk < k; ++kk) {
                    const double aik = arow[kk];
                    if (aik == 0.0) continue;
                    double* gbrow = gb.data() + kk * n;
                    for (std::size_t j = 0; j < n; ++j) gbrow[j] += aik * grow[j];
                }
            }
        }
    });
}

int Tape::add(int a, int b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb)) throw ShapeError("add: shape mismatch");
    Tensor out = ta;
    out.grad.clear();
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += tb.values[i];
    return push(std::move(out), {a, b}, [a, b](Tape& t, const std::vector<double>& g, int) {
        t.accumulate_grad(a, g);
        t.accumulate_grad(b, g);
    });
}

int Tape::add_row_bias(int x, int bias) {
    const Tensor& tx = value(x);
    const Tensor& tb = value(bias);
    if (tb.rows != 1 || tb.cols != tx.cols) throw ShapeError("add_row_bias: bias must be [1 x cols]");
    Tensor out = tx;
    out.grad.clear();
    for (std::size_t i = 0; i < tx.rows; ++i)
        for (std::size_t j = 0; j < tx.cols; ++j) out.at(i, j) += tb.values[j];
    return push(std::move(out), {x, bias}, [x, bias](Tape& t, const std::vector<double>& g, int) {
        t.accumulate_grad(x, g);
        if (t.requires_grad(bias)) {
            const Tensor& tx = t.value(x);
            std::vector<double>& gb = t.grad_buffer(bias);
            for (std::size_t i = 0; i < tx.rows; ++i)
                for (std::size_t j = 0; j < tx.cols; ++j) gb[j] += g[i * tx.cols + j];
        }
    });
}

int Tape::mul(int a, int b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb)) throw ShapeError("mul: shape mismatch");
    Tensor out = ta;
    out.grad.clear();
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] *= tb.values[i];
    return push(std::move(out), {a, b}, [a, b](Tape& t, const std::vector<double>& g, int) {
        const Tensor& ta = t.value(a);
        const Tensor& tb = t.value(b);
        if (t.requires_grad(a)) {
            std::vector<double>& ga = t.grad_buffer(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * tb.values[i];
        }
        if (t.requires_grad(b)) {
            std::vector<double>& gb = t.grad_buffer(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ta.values[i];
        }
    });
}

int Tape::scale(int x, double k) { return affine(x, k, 0.0); }

int Tape::affine(int x, double k, double c) {
    Tensor out = value(x);
    out.grad.clear();
    for (double& v : out.values) v = k * v + c;
    return push(std::move(out), {x}, [x, k](Tape& t, const std::vector<double>& g, int) {
        if (!t.requires_grad(x)) return;
        std::vector<double>& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += k * g[i];
    });
}

int Tape::relu(int x) {
    Tensor out = value(x);
    out.grad.clear();
    for (double& v : out.values) v = v > 0.0 ? v : 0.0;
    return push(std::move(out), {x}, [x](Tape& t, const std::vector<double>& g, int) {
        if (!t.requires_grad(x)) return;
        const Tensor& tx = t.value(x);
        std::vector<double>& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (tx.values[i] > 0.0) gx[i] += g[i];
    });
}

int Tape::sigmoid(int x) {
    Tensor out = value(x);
    out.grad.clear();
    for (double& v : out.values) v = stable_sigmoid(v);
    return push(std::move(out), {x}, [x](Tape& t, const std::vector<double>& g, int id) {
        if (!t.requires_grad(x)) return;
        const Tensor& s = t.value(id);
        std::vector<double>& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i)
            gx[i] += g[i] * s.values[i] * (1.0 - s.values[i]);
    });
}

int Tape::glu(int x) {
    const Tensor& tx = value(x);
    if (tx.cols % 2 != 0) throw ShapeError("glu: column count must be even");
    const std::size_t u = tx.cols / 2;
    Tensor out(tx.rows, u);
    for (std::size_t i = 0; i < tx.rows; ++i)
        for (std::size_t j = 0; j < u; ++j)
            out.at(i, j) = tx.at(i, j) * stable_sigmoid(tx.at(i, j + u));
    return push(std::move(out), {x}, [x, u](Tape& t, const std::vector<double>& g, int) {
        if (!t.requires_grad(x)) return;
        const Tensor& tx = t.value(x);
        std::vector<double>& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < tx.rows; ++i) {
            for (std::size_t j = 0; j < u; ++j) {
                const double a = tx.at(i, j);
                const double s = stable_sigmoid(tx.at(i, j + u));
                const double go = g[i * u + j];
                gx[i * tx.cols + j] += go * s;
                gx[i * tx.cols + j + u] += go * a * s * (1.0 - s);
            }
        }
    });
}

int Tape::slice_cols(int x, std::size_t c0, std::size_t c1) {
    const Tensor& tx = value(x);
    if (c0 >= c1 || c1 > tx.cols) throw ShapeError("slice_cols: bad column range");
    Tensor out(tx.rows, c1 - c0);
    for (std::size_t i = 0; i < tx.rows; ++i)
        for (std::size_t j = c0; j < c1; ++j) out.at(i, j - c0) = tx.at(i, j);
    return push(std::move(out), {x}, [x, c0, c1](Tape& t, const std::vector<double>& g, int) {
        if (!t.requires_grad(x)) return;
        const Tensor& tx = t.value(x);
        std::vector<double>& gx = t.grad_buffer(x);
        const std::size_t w = c1 - c0;
        for (std::size_t i = 0; i < tx.rows; ++i)
            for (std::size_t j = 0; j < w; ++j) gx[i * tx.cols + c0 + j] += g[i * w + j];
    });
}

int Tape::softmax_rows(int x) {
    const Tensor& tx = value(x);
    Tensor out(tx.rows, tx.cols);
    for (std::size_t i = 0; i < tx.rows; ++i) {
        const double* in = tx.row_ptr(i);
        double* o = out.row_ptr(i);
        double mx = in[0];
        for (std::size_t j = 1; j < tx.cols; ++j) mx = std::max(mx, in[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < tx.cols; ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        for (std::size_t j = 0; j < tx.cols; ++j) o[j] /= sum;
    }
    return push(std::move(out), {x}, [x](Tape& t, const std::vector<double>& g, int id) {
        if (!t.requires_grad(x)) return;
        const Tensor& p = t.value(id);
        std::vector<double>& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < p.rows; ++i) {
            const double* prow = p.row_ptr(i);
            const double* grow = g.data() + i * p.cols;
            double dot = 0.0;
            for (std::size_t j = 0; j < p.cols; ++j) dot += prow[j] * grow[j];
            for (std::size_t j = 0; j < p.cols; ++j)
                gx[i * p.cols + j] += prow[j] * (grow[j] - dot);
        }
    });
}

int Tape::cross_entropy(int logits, const std::vector<int>& labels) {
    const Tensor& tl = value(logits);
    if (labels.size() != tl.rows) throw ContractError("cross_entropy: one label per row required");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= tl.cols)
            throw ContractError("cross_entropy: label out of range");
    // fused log-softmax + NLL; probabilities saved for the backward rule
    Tensor probs(tl.rows, tl.cols);
    double loss = 0.0;
    for (std::size_t i = 0; i < tl.rows; ++i) {
        const double* in = tl.row_ptr(i);
        double* p = probs.row_ptr(i);
        double mx = in[0];
        for (std::size_t j = 1; j < tl.cols; ++j) mx = std::max(mx, in[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < tl.cols; ++j) {
            p[j] = std::exp(in[j] - mx);
            sum += p[j];
        }
        for (std::size_t j = 0; j < tl.cols; ++j) p[j] /= sum;
        loss -= std::log(p[static_cast<std::size_t>(labels[i])] + kLogEpsilon);
    }
    loss /= static_cast<double>(tl.rows);
    Tensor out(1, 1);
    out.values[0] = loss;
    return push(std::move(out), {logits},
                [logits, labels, probs](Tape& t, const std::vector<double>& g, int) {
                    if (!t.requires_grad(logits)) return;
                    const double go = g[0] / static_cast<double>(probs.rows);
                    std::vector<double>& gl = t.grad_buffer(logits);
                    for (std::size_t i = 0; i < probs.rows; ++i) {
                        const double* p = probs.row_ptr(i);
                        for (std::size_t j = 0; j < probs.cols; ++j) {
                            double delta = p[j] - (static_cast<std::size_t>(labels[i]) == j ? 1.0 : 0.0);
                            gl[i * probs.cols + j] += go * delta;
                        }
                    }
                });
}

int Tape::neg_entropy_mean(int m) {
    const Tensor& tm = value(m);
    if (tm.size() == 0) throw ContractError("neg_entropy_mean: empty tensor");
    double acc = 0.0;
    for (double v : tm.values) acc -= v * std::log(v + kLogEpsilon);
    Tensor out(1, 1);
    out.values[0] = acc / static_cast<double>(tm.size());
    return push(std::move(out), {m}, [m](Tape& t, const std::vector<double>& g, int) {
        if (!t.requires_grad(m)) return;
        const Tensor& tm = t.value(m);
        const double go = g[0] / static_cast<double>(tm.size());
        std::vector<double>& gm = t.grad_buffer(m);
        for (std::size_t i = 0; i < tm.values.size(); ++i) {
            const double v = tm.values[i];
            gm[i] += go * (-std::log(v + kLogEpsilon) - v / (v + kLogEpsilon));
        }
    });
}

int Tape::batchnorm_train(int x, BatchNormState& state, int scale, int shift) {
    const Tensor& tx = value(x);
    const std::size_t n = tx.rows, c = tx.cols;
    if (n == 0) throw ContractError("batchnorm_train: empty batch");
    if (value(scale).cols != c || value(shift).cols != c)
        throw ShapeError("batchnorm_train: scale/shift width mismatch");
    if (state.running_mean.size() != c) {
        state.running_mean.assign(c, 0.0);
        state.running_var.assign(c, 1.0);
    }

    std::vector<double> mean(c, 0.0), var(c, 0.0), inv_std(c, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) mean[j] += tx.at(i, j);
    for (std::size_t j = 0; j < c; ++j) mean[j] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            const double d = tx.at(i, j) - mean[j];
            var[j] += d * d;
        }
    for (std::size_t j = 0; j < c; ++j) {
        var[j] /= static_cast<double>(n);
        inv_std[j] = 1.0 / std::sqrt(var[j] + state.epsilon);
    }

    if (!state.initialized) {
        state.running_mean = mean;
        state.running_var = var;
        state.initialized = true;
    } else {
        for (std::size_t j = 0; j < c; ++j) {
            state.running_mean[j] = (1.0 - state.momentum) * state.running_mean[j] + state.momentum * mean[j];
            state.running_var[j] = (1.0 - state.momentum) * state.running_var[j] + state.momentum * var[j];
        }
    }

    Tensor xhat(n, c);
    Tensor out(n, c);
    const Tensor& tsc = value(scale);
    const Tensor& tsh = value(shift);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            xhat.at(i, j) = (tx.at(i, j) - mean[j]) * inv_std[j];
            out.at(i, j) = tsc.values[j] * xhat.at(i, j) + tsh.values[j];
        }

    return push(std::move(out), {x, scale, shift},
                [x, scale, shift, xhat, inv_std, n, c](Tape& t, const std::vector<double>& g, int) {
                    const Tensor& tsc = t.value(scale);
                    if (t.requires_grad(shift)) {
                        std::vector<double>& gsh = t.grad_buffer(shift);
                        for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t j = 0; j < c; ++j) gsh[j] += g[i * c + j];
                    }
                    if (t.requires_grad(scale)) {
                        std::vector<double>& gsc = t.grad_buffer(scale);
                        for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t j = 0; j < c; ++j)
                                gsc[j] += g[i * c + j] * xhat.at(i, j);
                    }
                    if (t.requires_grad(x)) {
                        // dxhat = g * scale; dx folds the mean/var paths:
                        // dx = inv_std/N * (N*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat))
                        std::vector<double> sum_d(c, 0.0), sum_dx(c, 0.0);
                        for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t j = 0; j < c; ++j) {
                                const double dxh = g[i * c + j] * tsc.values[j];
                                sum_d[j] += dxh;
                                sum_dx[j] += dxh * xhat.at(i, j);
                            }
                        std::vector<double>& gx = t.grad_buffer(x);
                        const double invn = 1.0 / static_cast<double>(n);
                        for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t j = 0; j < c; ++j) {
                                const double dxh = g[i * c + j] * tsc.values[j];
                                gx[i * c + j] += inv_std[j] * (dxh - invn * sum_d[j] -
                                                               invn * xhat.at(i, j) * sum_dx[j]);
                            }
                    }
                });
}

int Tape::batchnorm_infer(int x, const BatchNormState& state, int scale, int shift) {
    const Tensor& tx = value(x);
    if (!state.initialized)
        throw ContractError("batchnorm_infer: running statistics not initialized (train first)");
    const std::size_t n = tx.rows, c = tx.cols;
    if (state.running_mean.size() != c) throw ShapeError("batchnorm_infer: state width mismatch");
    std::vector<double> inv_std(c);
    for (std::size_t j = 0; j < c; ++j)
        inv_std[j] = 1.0 / std::sqrt(state.running_var[j] + state.epsilon);
    Tensor out(n, c);
    const Tensor& tsc = value(scale);
    const Tensor& tsh = value(shift);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j)
            out.at(i, j) = tsc.values[j] * (tx.at(i, j) - state.running_mean[j]) * inv_std[j] +
                           tsh.values[j];
    std::vector<double> mean = state.running_mean;
    return push(std::move(out), {x, scale, shift},
                [x, scale, shift, inv_std, mean, n, c](Tape& t, const std::vector<double>& g, int) {
                    const Tensor& tsc = t.value(scale);
                    const Tensor& tx = t.value(x);
                    if (t.requires_grad(shift)) {
                        std::vector<double>& gsh = t.grad_buffer(shift);
                        for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t j = 0; j < c; ++j) gsh[j] += g[i * c + j];
                    }
                    if (t.requires_grad(scale)) {
                        std::vector<double>& gsc = t.grad_buffer(scale);
                        for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t j = 0; j < c; ++j)
                                gsc[j] += g[i * c + j] * (tx.at(i, j) - mean[j]) * inv_std[j];
                    }
                    if (t.requires_grad(x)) {
                        std::vector<double>& gx = t.grad_buffer(x);
                        for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t j = 0; j < c; ++j)
                                gx[i * c + j] += g[i * c + j] * tsc.values[j] * inv_std[j];
                    }
                });
}

int Tape::custom(Tensor value, std::vector<int> inputs, BackwardFn backward) {
    return push(std::move(value), std::move(inputs), std::move(backward));
}

void Tape::backward(int loss_id) {
    const Tensor& loss = value(loss_id);
    if (loss.rows != 1 || loss.cols != 1)
        throw ContractError("backward: loss node must be scalar (1x1)");

    // mark nodes the loss actually depends on
    std::vector<char> reachable(nodes_.size(), 0);
    std::vector<int> stack{loss_id};
    reachable[static_cast<std::size_t>(loss_id)] = 1;
    while (!stack.empty()) {
        int id = stack.back();
        stack.pop_back();
        for (int in : nodes_[static_cast<std::size_t>(id)].inputs) {
            if (!reachable[static_cast<std::size_t>(in)]) {
                reachable[static_cast<std::size_t>(in)] = 1;
                stack.push_back(in);
            }
        }
    }

    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (reachable[i] && nodes_[i].requires_grad) nodes_[i].value.ensure_grad();

    Node& ln = nodes_[static_cast<std::size_t>(loss_id)];
    ln.value.ensure_grad();
    ln.value.grad[0] = 1.0;

    for (int id = loss_id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!reachable[static_cast<std::size_t>(id)] || !n.requires_grad || !n.backward_fn)
            continue;
        if (!n.value.has_grad()) continue;
        n.backward_fn(*this, n.value.grad, id);
    }
}

}  // namespace crashsev::diffgraph
