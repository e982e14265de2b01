#include "crashsev/tabnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <span>
#include <unordered_map>

#include "crashsev/errors.hpp"
#include "crashsev/rng.hpp"
#include "crashsev/simplex.hpp"

namespace crashsev::tabnet {

using diffgraph::BatchNormState;
using diffgraph::Tape;

std::string mask_type_name(MaskType t) {
    return t == MaskType::Entmax ? "entmax" : "sparsemax";
}

MaskType mask_type_from_name(const std::string& s) {
    if (s == "entmax") return MaskType::Entmax;
    if (s == "sparsemax") return MaskType::Sparsemax;
    throw ConfigError("mask_type must be 'entmax' or 'sparsemax', got '" + s + "'");
}

void TabNetConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v < 1) throw ConfigError(std::string(name) + " must be positive");
    };
    positive(n_d, "n_d");
    positive(n_a, "n_a");
    positive(n_steps, "n_steps");
    positive(max_epochs, "max_epochs");
    positive(batch_size, "batch_size");
    if (n_classes < 2) throw ConfigError("n_classes must be at least 2");
    if (n_shared < 0 || n_independent < 0)
        throw ConfigError("GLU layer counts must be nonnegative");
    if (n_shared + n_independent < 1)
        throw ConfigError("need at least one GLU layer (shared or independent)");
    if (lambda_sparse < 0.0) throw ConfigError("lambda_sparse must be nonnegative");
    if (gamma < 1.0) throw ConfigError("gamma must be at least 1");
    if (!(bn_momentum > 0.0 && bn_momentum <= 1.0))
        throw ConfigError("bn_momentum must lie in (0, 1]");
    if (clip_value <= 0.0) throw ConfigError("clip_value must be positive");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (entmax_alpha < 1.0 || entmax_alpha > 2.0)
        throw ConfigError("entmax_alpha must lie in [1, 2]");
    if (patience < 0) throw ConfigError("patience must be nonnegative");
}

nlohmann::json TabNetConfig::to_json() const {
    return nlohmann::json{{"n_d", n_d},
                          {"n_a", n_a},
                          {"n_steps", n_steps},
                          {"lambda_sparse", lambda_sparse},
                          {"gamma", gamma},
                          {"n_independent", n_independent},
                          {"n_shared", n_shared},
                          {"bn_momentum", bn_momentum},
                          {"clip_value", clip_value},
                          {"learning_rate", learning_rate},
                          {"mask_type", mask_type_name(mask_type)},
                          {"entmax_alpha", entmax_alpha},
                          {"n_classes", n_classes},
                          {"seed", seed},
                          {"max_epochs", max_epochs},
                          {"batch_size", batch_size},
                          {"patience", patience}};
}

TabNetConfig TabNetConfig::from_json(const nlohmann::json& j) {
    TabNetConfig c;
    try {
        c.n_d = j.at("n_d").get<int>();
        c.n_a = j.at("n_a").get<int>();
        c.n_steps = j.at("n_steps").get<int>();
        c.lambda_sparse = j.at("lambda_sparse").get<double>();
        c.gamma = j.at("gamma").get<double>();
        c.n_independent = j.at("n_independent").get<int>();
        c.n_shared = j.at("n_shared").get<int>();
        c.bn_momentum = j.at("bn_momentum").get<double>();
        c.clip_value = j.at("clip_value").get<double>();
        c.learning_rate = j.at("learning_rate").get<double>();
        c.mask_type = mask_type_from_name(j.at("mask_type").get<std::string>());
        c.entmax_alpha = j.at("entmax_alpha").get<double>();
        c.n_classes = j.at("n_classes").get<int>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.max_epochs = j.at("max_epochs").get<int>();
        c.batch_size = j.at("batch_size").get<int>();
        c.patience = j.at("patience").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad model config: ") + e.what());
    }
    c.validate();
    return c;
}

namespace {

BnParams make_bn(std::size_t dim, double momentum) {
    BnParams bn;
    bn.scale = Tensor(1, dim, 1.0);
    bn.shift = Tensor(1, dim, 0.0);
    bn.state.momentum = momentum;
    return bn;
}

Tensor glorot(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
    Tensor w(fan_in, fan_out);
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : w.values) v = rng.uniform(-limit, limit);
    return w;
}

}  // namespace

TabNetModel init_model(const TabNetConfig& config, std::size_t input_dim,
                       std::uint64_t schema_hash) {
    config.validate();
    if (input_dim == 0) throw ContractError("input_dim must be positive");

    const auto u = static_cast<std::size_t>(config.n_d + config.n_a);
    const auto n_shared = static_cast<std::size_t>(config.n_shared);
    const auto n_indep = static_cast<std::size_t>(config.n_independent);
    const auto n_steps = static_cast<std::size_t>(config.n_steps);

    TabNetModel m;
    m.config = config;
    m.schema_hash = schema_hash;
    m.input_dim = input_dim;

    Rng rng(derive_seed(config.seed, "weight-init"));
    m.input_bn_scale = Tensor(1, input_dim, 1.0);
    m.input_bn_shift = Tensor(1, input_dim, 0.0);
    m.input_bn_state.momentum = config.bn_momentum;

    for (std::size_t i = 0; i < n_shared; ++i) {
        std::size_t in = i == 0 ? input_dim : u;
        m.shared_fc.push_back(glorot(rng, in, 2 * u));
    }
    m.transformers.resize(n_steps + 1);
    for (auto& ft : m.transformers) {
        for (std::size_t i = 0; i < n_shared; ++i)
            ft.shared_bn.push_back(make_bn(2 * u, config.bn_momentum));
        for (std::size_t i = 0; i < n_indep; ++i) {
            std::size_t in = (n_shared == 0 && i == 0) ? input_dim : u;
            ft.indep_fc.push_back(glorot(rng, in, 2 * u));
            ft.indep_bn.push_back(make_bn(2 * u, config.bn_momentum));
        }
    }
    for (std::size_t s = 0; s < n_steps; ++s) {
        m.att_fc.push_back(glorot(rng, static_cast<std::size_t>(config.n_a), input_dim));
        m.att_bn.push_back(make_bn(input_dim, config.bn_momentum));
    }
    m.final_w = glorot(rng, static_cast<std::size_t>(config.n_d),
                       static_cast<std::size_t>(config.n_classes));
    m.final_b = Tensor(1, static_cast<std::size_t>(config.n_classes), 0.0);
    return m;
}

void TabNetModel::visit_params(const std::function<void(const std::string&, Tensor&)>& fn) {
    fn("input_bn.scale", input_bn_scale);
    fn("input_bn.shift", input_bn_shift);
    for (std::size_t i = 0; i < shared_fc.size(); ++i)
        fn("shared_fc." + std::to_string(i), shared_fc[i]);
    for (std::size_t t = 0; t < transformers.size(); ++t) {
        auto& ft = transformers[t];
        std::string p = "ft" + std::to_string(t) + ".";
        for (std::size_t i = 0; i < ft.shared_bn.size(); ++i) {
            fn(p + "shared_bn" + std::to_string(i) + ".scale", ft.shared_bn[i].scale);
            fn(p + "shared_bn" + std::to_string(i) + ".shift", ft.shared_bn[i].shift);
        }
        for (std::size_t i = 0; i < ft.indep_fc.size(); ++i) {
            fn(p + "indep_fc" + std::to_string(i), ft.indep_fc[i]);
            fn(p + "indep_bn" + std::to_string(i) + ".scale", ft.indep_bn[i].scale);
            fn(p + "indep_bn" + std::to_string(i) + ".shift", ft.indep_bn[i].shift);
        }
    }
    for (std::size_t s = 0; s < att_fc.size(); ++s) {
        std::string p = "att" + std::to_string(s) + ".";
        fn(p + "fc", att_fc[s]);
        fn(p + "bn.scale", att_bn[s].scale);
        fn(p + "bn.shift", att_bn[s].shift);
    }
    fn("final.weight", final_w);
    fn("final.bias", final_b);
}

void TabNetModel::visit_bn_states(
    const std::function<void(const std::string&, BatchNormState&)>& fn) {
    fn("input_bn", input_bn_state);
    for (std::size_t t = 0; t < transformers.size(); ++t) {
        auto& ft = transformers[t];
        std::string p = "ft" + std::to_string(t) + ".";
        for (std::size_t i = 0; i < ft.shared_bn.size(); ++i)
            fn(p + "shared_bn" + std::to_string(i), ft.shared_bn[i].state);
        for (std::size_t i = 0; i < ft.indep_bn.size(); ++i)
            fn(p + "indep_bn" + std::to_string(i), ft.indep_bn[i].state);
    }
    for (std::size_t s = 0; s < att_bn.size(); ++s)
        fn("att" + std::to_string(s) + ".bn", att_bn[s].state);
}

std::uint64_t parameter_checksum(const TabNetModel& model) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    auto mix = [&h](std::string_view bytes) {
        for (unsigned char c : bytes) {
            h ^= c;
            h *= 0x100000001B3ULL;
        }
    };
    // visitation never mutates; the const_cast only satisfies the signature
    auto& m = const_cast<TabNetModel&>(model);
    m.visit_params([&](const std::string& name, Tensor& t) {
        mix(name);
        mix(std::string_view(reinterpret_cast<const char*>(t.values.data()),
                             t.values.size() * sizeof(double)));
    });
    return h;
}

namespace {

// Pushes each distinct parameter tensor onto the tape once and remembers the
// node, so shared weights accumulate all their gradient on one leaf.
struct ParamBinder {
    Tape& tape;
    std::vector<std::pair<Tensor*, int>> order;
    std::unordered_map<Tensor*, int> seen;

    int operator()(Tensor& p) {
        auto it = seen.find(&p);
        if (it != seen.end()) return it->second;
        int id = tape.leaf(p, true);
        seen.emplace(&p, id);
        order.push_back({&p, id});
        return id;
    }
};

// Row-wise simplex mapping as a tape primitive. alpha = 2 is the exact
// sparsemax path; backward uses the closed-form Jacobian-vector product.
int simplex_rows(Tape& t, int input, MaskType type, double alpha) {
    const Tensor& in = t.value(input);
    const double a_eff = type == MaskType::Sparsemax ? 2.0 : alpha;
    Tensor out(in.rows, in.cols);
    auto per_row = std::make_shared<std::vector<simplexmap::SimplexOutput>>();
    per_row->reserve(in.rows);
    for (std::size_t r = 0; r < in.rows; ++r) {
        std::span<const double> z(in.row_ptr(r), in.cols);
        simplexmap::SimplexOutput so =
            type == MaskType::Sparsemax ? simplexmap::sparsemax(z) : simplexmap::entmax(z, alpha);
        std::copy(so.probabilities.begin(), so.probabilities.end(), out.row_ptr(r));
        per_row->push_back(std::move(so));
    }
    return t.custom(std::move(out), {input},
                    [per_row, input, a_eff](Tape& tp, const std::vector<double>& g, int self) {
                        const Tensor& val = tp.value(self);
                        std::vector<double> gin(val.size(), 0.0);
                        for (std::size_t r = 0; r < val.rows; ++r) {
                            std::span<const double> up(g.data() + r * val.cols, val.cols);
                            auto grow = simplexmap::entmax_backward((*per_row)[r], up, a_eff);
                            std::copy(grow.begin(), grow.end(), gin.begin() + static_cast<std::ptrdiff_t>(r * val.cols));
                        }
                        tp.accumulate_grad(input, gin);
                    });
}

}  // namespace

TapeForward forward_on_tape(Tape& tape, TabNetModel& model, const Tensor& x, bool training) {
    const TabNetConfig& cfg = model.config;
    if (x.cols != model.input_dim)
        throw ShapeError("input has " + std::to_string(x.cols) + " features, model expects " +
                         std::to_string(model.input_dim));
    if (x.rows == 0) throw ContractError("batch must be nonempty");

    const auto n_d = static_cast<std::size_t>(cfg.n_d);
    const auto u = static_cast<std::size_t>(cfg.n_d + cfg.n_a);
    const double res_scale = std::sqrt(0.5);

    TapeForward tf;
    ParamBinder bind{tape, {}, {}};

    auto bn_apply = [&](BnParams& bn, int input) {
        int sc = bind(bn.scale);
        int sh = bind(bn.shift);
        return training ? tape.batchnorm_train(input, bn.state, sc, sh)
                        : tape.batchnorm_infer(input, bn.state, sc, sh);
    };
    auto glu_block = [&](Tensor& fc, BnParams& bn, int input) {
        return tape.glu(bn_apply(bn, tape.matmul(input, bind(fc))));
    };
    auto feature_transformer = [&](FeatureTransformer& ft, int input) {
        int h = -1;
        for (std::size_t i = 0; i < model.shared_fc.size(); ++i) {
            int z = glu_block(model.shared_fc[i], ft.shared_bn[i], h < 0 ? input : h);
            h = h < 0 ? z : tape.scale(tape.add(h, z), res_scale);
        }
        for (std::size_t i = 0; i < ft.indep_fc.size(); ++i) {
            int z = glu_block(ft.indep_fc[i], ft.indep_bn[i], h < 0 ? input : h);
            h = h < 0 ? z : tape.scale(tape.add(h, z), res_scale);
        }
        return h;
    };

    int xn = tape.leaf(x, false);
    int xbn = [&] {
        int sc = bind(model.input_bn_scale);
        int sh = bind(model.input_bn_shift);
        return training ? tape.batchnorm_train(xn, model.input_bn_state, sc, sh)
                        : tape.batchnorm_infer(xn, model.input_bn_state, sc, sh);
    }();

    int ft0 = feature_transformer(model.transformers[0], xbn);
    int a = tape.slice_cols(ft0, n_d, u);
    int prior = tape.leaf(Tensor(x.rows, x.cols, 1.0), false);

    std::vector<int> sparsity_terms;
    int d_sum = -1;
    for (std::size_t s = 0; s < static_cast<std::size_t>(cfg.n_steps); ++s) {
        int att = bn_apply(model.att_bn[s], tape.matmul(a, bind(model.att_fc[s])));
        int mask = simplex_rows(tape, tape.mul(att, prior), cfg.mask_type, cfg.entmax_alpha);
        sparsity_terms.push_back(tape.neg_entropy_mean(mask));
        prior = tape.mul(prior, tape.affine(mask, -1.0, cfg.gamma));

        int masked = tape.mul(mask, xbn);
        int ft = feature_transformer(model.transformers[s + 1], masked);
        int d = tape.relu(tape.slice_cols(ft, 0, n_d));
        d_sum = d_sum < 0 ? d : tape.add(d_sum, d);
        if (s + 1 < static_cast<std::size_t>(cfg.n_steps)) a = tape.slice_cols(ft, n_d, u);

        tf.traces.push_back(StepTrace{tape.value(mask), tape.value(prior), tape.value(d)});
    }

    tf.logits = tape.add_row_bias(tape.matmul(d_sum, bind(model.final_w)), bind(model.final_b));
    int sp = sparsity_terms[0];
    for (std::size_t i = 1; i < sparsity_terms.size(); ++i) sp = tape.add(sp, sparsity_terms[i]);
    tf.sparsity = cfg.n_steps > 1 ? tape.scale(sp, 1.0 / cfg.n_steps) : sp;
    tf.params = std::move(bind.order);
    return tf;
}

ForwardOutput forward(TabNetModel& model, const Tensor& x, bool training) {
    Tape tape;
    TapeForward tf = forward_on_tape(tape, model, x, training);
    ForwardOutput out;
    out.logits = tape.value(tf.logits);
    out.traces = std::move(tf.traces);
    out.sparsity_loss = tape.value(tf.sparsity).values[0];
    return out;
}

Tensor predict(const TabNetModel& model, const Tensor& x) {
    Tape tape;
    // inference never writes through the model; the cast only widens access
    auto tf = forward_on_tape(tape, const_cast<TabNetModel&>(model), x, false);
    return tape.value(tape.softmax_rows(tf.logits));
}

std::vector<double> global_mask_importance(const TabNetModel& model, const Tensor& x) {
    Tape tape;
    auto tf = forward_on_tape(tape, const_cast<TabNetModel&>(model), x, false);
    std::vector<double> importance(x.cols, 0.0);
    for (const StepTrace& st : tf.traces)
        for (std::size_t r = 0; r < st.mask.rows; ++r)
            for (std::size_t c = 0; c < st.mask.cols; ++c) importance[c] += st.mask.at(r, c);
    double total = 0.0;
    for (double v : importance) total += v;
    if (total > 0.0)
        for (double& v : importance) v /= total;
    return importance;
}

nlohmann::json TrainReport::to_json() const {
    return nlohmann::json{{"train_loss", train_loss},
                          {"valid_loss", valid_loss},
                          {"stopping_epoch", stopping_epoch},
                          {"best_epoch", best_epoch},
                          {"best_valid_loss", best_valid_loss},
                          {"max_abs_applied_gradient", max_abs_applied_gradient},
                          {"ensemble_members", ensemble_members}};
}

namespace {

struct Snapshot {
    std::vector<Tensor> params;
    std::vector<BatchNormState> bn;
};

Snapshot take_snapshot(TabNetModel& m) {
    Snapshot s;
    m.visit_params([&](const std::string&, Tensor& t) { s.params.push_back(t); });
    m.visit_bn_states([&](const std::string&, BatchNormState& b) { s.bn.push_back(b); });
    return s;
}

void restore_snapshot(TabNetModel& m, const Snapshot& s) {
    std::size_t pi = 0, bi = 0;
    m.visit_params([&](const std::string&, Tensor& t) { t = s.params[pi++]; });
    m.visit_bn_states([&](const std::string&, BatchNormState& b) { b = s.bn[bi++]; });
}

double validation_cross_entropy(TabNetModel& model, const dataset::EncodedDataset& valid,
                                int batch_size) {
    double total = 0.0;
    std::size_t n = valid.n_rows();
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
        std::size_t stop = std::min(n, start + static_cast<std::size_t>(batch_size));
        std::vector<std::size_t> idx(stop - start);
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
        auto chunk = valid.subset(idx);
        Tape tape;
        auto tf = forward_on_tape(tape, model, chunk.features, false);
        int ce = tape.cross_entropy(tf.logits, chunk.targets);
        total += tape.value(ce).values[0] * static_cast<double>(idx.size());
    }
    return total / static_cast<double>(n);
}

struct AdamSlot {
    std::vector<double> m, v;
};

}  // namespace

TabNetModel train(const TabNetConfig& config, const dataset::EncodedDataset& train_set,
                  const dataset::EncodedDataset& valid_set, TrainReport* report) {
    config.validate();
    if (train_set.n_rows() == 0) throw ContractError("training set is empty");
    if (valid_set.n_rows() == 0) throw ContractError("validation set is empty");
    if (train_set.schema.hash() != valid_set.schema.hash())
        throw ContractError("train and validation sets use different schemas");

    TabNetModel model =
        init_model(config, train_set.schema.feature_count(), train_set.schema.hash());

    TrainReport local;
    TrainReport& rep = report ? *report : local;
    rep = TrainReport{};

    std::unordered_map<Tensor*, AdamSlot> adam;
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
    long long adam_step = 0;

    const std::size_t n = train_set.n_rows();
    const auto batch = static_cast<std::size_t>(config.batch_size);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    double best = std::numeric_limits<double>::infinity();
    Snapshot best_snapshot;
    int bad_epochs = 0;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(config.seed, "epoch-shuffle",
                                    static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < n; start += batch) {
            std::size_t stop = std::min(n, start + batch);
            // a trailing single-row batch has no usable batch statistics
            if (stop - start == 1 && n > 1) break;
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(stop));
            auto chunk = train_set.subset(idx);

            Tape tape;
            auto tf = forward_on_tape(tape, model, chunk.features, true);
            int ce = tape.cross_entropy(tf.logits, chunk.targets);
            int loss = tape.add(ce, tape.scale(tf.sparsity, config.lambda_sparse));
            double loss_value = tape.value(loss).values[0];
            if (!std::isfinite(loss_value))
                throw DivergenceError("training loss is not finite at epoch " +
                                          std::to_string(epoch),
                                      static_cast<std::size_t>(epoch));
            epoch_loss += loss_value * static_cast<double>(idx.size());
            seen += idx.size();

            tape.backward(loss);
            ++adam_step;
            const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam_step));
            const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam_step));
            for (auto& [param, node] : tf.params) {
                const std::vector<double>& g = tape.grad_of(node);
                if (g.empty()) continue;
                AdamSlot& slot = adam[param];
                if (slot.m.empty()) {
                    slot.m.assign(param->size(), 0.0);
                    slot.v.assign(param->size(), 0.0);
                }
                for (std::size_t i = 0; i < g.size(); ++i) {
                    double gi = std::clamp(g[i], -config.clip_value, config.clip_value);
                    rep.max_abs_applied_gradient =
                        std::max(rep.max_abs_applied_gradient, std::abs(gi));
                    slot.m[i] = kBeta1 * slot.m[i] + (1.0 - kBeta1) * gi;
                    slot.v[i] = kBeta2 * slot.v[i] + (1.0 - kBeta2) * gi * gi;
                    param->values[i] -=
                        config.learning_rate * (slot.m[i] / bc1) /
                        (std::sqrt(slot.v[i] / bc2) + kAdamEps);
                }
            }
            // clamp() passes NaN gradients through, so a poisoned update can
            // land in the parameters and wreck the next forward pass; the
            // magnitude bound also catches runaway-but-finite blow-ups
            for (auto& [param, node] : tf.params)
                for (double v : param->values)
                    if (!(std::abs(v) <= 1e100))
                        throw DivergenceError("parameter values exploded at epoch " +
                                                  std::to_string(epoch),
                                              static_cast<std::size_t>(epoch));
        }
        rep.train_loss.push_back(epoch_loss / static_cast<double>(seen));

        double vloss = validation_cross_entropy(model, valid_set, config.batch_size);
        if (!std::isfinite(vloss))
            throw DivergenceError("validation loss is not finite at epoch " +
                                      std::to_string(epoch),
                                  static_cast<std::size_t>(epoch));
        rep.valid_loss.push_back(vloss);
        rep.stopping_epoch = epoch;

        if (vloss < best) {
            best = vloss;
            rep.best_epoch = epoch;
            best_snapshot = take_snapshot(model);
            bad_epochs = 0;
        } else if (++bad_epochs > config.patience) {
            break;
        }
    }

    restore_snapshot(model, best_snapshot);
    rep.best_valid_loss = best;
    return model;
}

Tensor TabNetEnsemble::predict(const Tensor& x) const {
    if (members.empty()) throw ContractError("ensemble has no members");
    Tensor mean = tabnet::predict(members[0], x);
    for (std::size_t m = 1; m < members.size(); ++m) {
        Tensor p = tabnet::predict(members[m], x);
        for (std::size_t i = 0; i < mean.values.size(); ++i) mean.values[i] += p.values[i];
    }
    const double inv = 1.0 / static_cast<double>(members.size());
    for (double& v : mean.values) v *= inv;
    return mean;
}

std::vector<double> TabNetEnsemble::global_mask_importance(const Tensor& x) const {
    if (members.empty()) throw ContractError("ensemble has no members");
    std::vector<double> total(x.cols, 0.0);
    for (const auto& m : members) {
        auto imp = tabnet::global_mask_importance(m, x);
        for (std::size_t i = 0; i < total.size(); ++i) total[i] += imp[i];
    }
    double sum = 0.0;
    for (double v : total) sum += v;
    if (sum > 0.0)
        for (double& v : total) v /= sum;
    return total;
}

std::uint64_t TabNetEnsemble::schema_hash() const {
    if (members.empty()) throw ContractError("ensemble has no members");
    return members[0].schema_hash;
}

const TabNetConfig& TabNetEnsemble::config() const {
    if (members.empty()) throw ContractError("ensemble has no members");
    return members[0].config;
}

TabNetEnsemble train_bootstrap(const TabNetConfig& config,
                               const dataset::EncodedDataset& train_set,
                               const dataset::EncodedDataset& valid_set,
                               std::size_t n_members, std::vector<TrainReport>* reports,
                               const ResampleFn& resample) {
    if (n_members < 1) throw ContractError("ensemble needs at least one member");
    ResampleFn sampler = resample;
    if (!sampler) {
        sampler = [](std::uint64_t member_seed, std::size_t n) {
            Rng rng(derive_seed(member_seed, "bootstrap"));
            std::vector<std::size_t> idx(n);
            for (auto& i : idx) i = static_cast<std::size_t>(rng.next_below(n));
            return idx;
        };
    }

    TabNetEnsemble ens;
    for (std::size_t m = 0; m < n_members; ++m) {
        TabNetConfig member_cfg = config;
        member_cfg.seed = config.seed + m;
        auto idx = sampler(member_cfg.seed, train_set.n_rows());
        auto member_data = train_set.subset(idx);
        TrainReport rep;
        ens.members.push_back(train(member_cfg, member_data, valid_set, &rep));
        rep.ensemble_members = static_cast<int>(n_members);
        if (reports) reports->push_back(std::move(rep));
    }
    return ens;
}

namespace {

constexpr char kMagic[8] = {'S', 'E', 'V', 'T', 'B', 'N', '0', '1'};

std::string hash_to_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

std::uint64_t hex_to_hash(const std::string& s) {
    if (s.size() != 16) throw DataError("schema hash must be 16 hex digits");
    return std::strtoull(s.c_str(), nullptr, 16);
}

void append_doubles(std::string& out, const std::vector<double>& v) {
    // raw little-endian doubles; the container is declared little-endian
    std::size_t at = out.size();
    out.resize(at + v.size() * sizeof(double));
    std::memcpy(out.data() + at, v.data(), v.size() * sizeof(double));
}

}  // namespace

void save_checkpoint(const std::string& path, const TabNetEnsemble& ensemble) {
    if (ensemble.members.empty()) throw ContractError("ensemble has no members");

    nlohmann::json header;
    header["format"] = 1;
    header["schema_hash"] = hash_to_hex(ensemble.schema_hash());
    header["input_dim"] = ensemble.members[0].input_dim;
    header["members"] = nlohmann::json::array();
    header["tensors"] = nlohmann::json::array();

    std::string payload;
    for (std::size_t m = 0; m < ensemble.members.size(); ++m) {
        auto& model = const_cast<TabNetModel&>(ensemble.members[m]);
        nlohmann::json member;
        member["config"] = model.config.to_json();
        member["bn_initialized"] = nlohmann::json::object();
        model.visit_params([&](const std::string& name, Tensor& t) {
            header["tensors"].push_back(
                {{"member", m}, {"name", name}, {"rows", t.rows}, {"cols", t.cols}});
            append_doubles(payload, t.values);
        });
        model.visit_bn_states([&](const std::string& name, BatchNormState& st) {
            member["bn_initialized"][name] = st.initialized;
            header["tensors"].push_back({{"member", m},
                                         {"name", "bn:" + name + ".mean"},
                                         {"rows", 1},
                                         {"cols", st.running_mean.size()}});
            append_doubles(payload, st.running_mean);
            header["tensors"].push_back({{"member", m},
                                         {"name", "bn:" + name + ".var"},
                                         {"rows", 1},
                                         {"cols", st.running_var.size()}});
            append_doubles(payload, st.running_var);
        });
        header["members"].push_back(std::move(member));
    }

    std::string header_text = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing", path);
    out.write(kMagic, sizeof kMagic);
    std::uint64_t len = header_text.size();
    char lenbuf[8];
    std::memcpy(lenbuf, &len, 8);
    out.write(lenbuf, 8);
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw DataError("write failed", path);
}

TabNetEnsemble load_checkpoint(const std::string& path,
                               std::optional<std::uint64_t> expected_schema_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint", path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (blob.size() < 16 || std::memcmp(blob.data(), kMagic, sizeof kMagic) != 0)
        throw DataError("not a model checkpoint (bad magic)", path);

    std::uint64_t header_len = 0;
    std::memcpy(&header_len, blob.data() + 8, 8);
    if (16 + header_len > blob.size())
        throw DataError("checkpoint header truncated", path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(blob.substr(16, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("bad checkpoint header: ") + e.what(), path);
    }
    if (header.value("format", 0) != 1)
        throw DataError("unsupported checkpoint format", path);

    std::uint64_t schema_hash = hex_to_hash(header.at("schema_hash").get<std::string>());
    if (expected_schema_hash && *expected_schema_hash != schema_hash)
        throw SchemaMismatchError(
            "checkpoint was trained against a different schema (hash " +
            hash_to_hex(schema_hash) + ", expected " + hash_to_hex(*expected_schema_hash) + ")");

    auto input_dim = header.at("input_dim").get<std::size_t>();
    TabNetEnsemble ens;
    for (const auto& member : header.at("members")) {
        TabNetConfig cfg = TabNetConfig::from_json(member.at("config"));
        ens.members.push_back(init_model(cfg, input_dim, schema_hash));
    }

    // The maps hold pointers into ens.members, so they can only be built
    // once the vector has stopped growing.
    std::vector<std::unordered_map<std::string, Tensor*>> param_maps;
    std::vector<std::unordered_map<std::string, BatchNormState*>> bn_maps;
    for (std::size_t m = 0; m < ens.members.size(); ++m) {
        TabNetModel& model = ens.members[m];
        const auto& member = header.at("members")[m];
        std::unordered_map<std::string, Tensor*> pm;
        model.visit_params([&](const std::string& name, Tensor& t) { pm[name] = &t; });
        std::unordered_map<std::string, BatchNormState*> bm;
        model.visit_bn_states([&](const std::string& name, BatchNormState& st) {
            bm[name] = &st;
            st.initialized = member.at("bn_initialized").at(name).get<bool>();
        });
        param_maps.push_back(std::move(pm));
        bn_maps.push_back(std::move(bm));
    }

    std::size_t offset = 16 + header_len;
    auto read_doubles = [&](std::vector<double>& dst, std::size_t count,
                            const std::string& name) {
        std::size_t bytes = count * sizeof(double);
        if (offset + bytes > blob.size())
            throw DataError("checkpoint payload truncated at tensor '" + name + "'", path);
        dst.resize(count);
        std::memcpy(dst.data(), blob.data() + offset, bytes);
        offset += bytes;
    };

    for (const auto& entry : header.at("tensors")) {
        auto m = entry.at("member").get<std::size_t>();
        auto name = entry.at("name").get<std::string>();
        auto rows = entry.at("rows").get<std::size_t>();
        auto cols = entry.at("cols").get<std::size_t>();
        if (m >= ens.members.size())
            throw DataError("tensor '" + name + "' references missing member", path);
        if (name.rfind("bn:", 0) == 0) {
            std::string base = name.substr(3);
            bool is_mean = base.size() > 5 && base.compare(base.size() - 5, 5, ".mean") == 0;
            bool is_var = base.size() > 4 && base.compare(base.size() - 4, 4, ".var") == 0;
            std::string key = is_mean ? base.substr(0, base.size() - 5)
                                      : base.substr(0, base.size() - 4);
            auto it = bn_maps[m].find(key);
            if (!(is_mean || is_var) || it == bn_maps[m].end())
                throw DataError("unknown batch-norm state '" + name + "'", path);
            read_doubles(is_mean ? it->second->running_mean : it->second->running_var,
                         rows * cols, name);
        } else {
            auto it = param_maps[m].find(name);
            if (it == param_maps[m].end())
                throw DataError("unknown tensor '" + name + "'", path);
            if (it->second->rows != rows || it->second->cols != cols)
                throw DataError("tensor '" + name + "' has unexpected shape", path);
            read_doubles(it->second->values, rows * cols, name);
        }
    }
    if (offset != blob.size())
        throw DataError("checkpoint has trailing bytes", path);
    return ens;
}

}  // namespace crashsev::tabnet
