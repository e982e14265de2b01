#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "crashsev/dataset.hpp"
#include "crashsev/tape.hpp"
#include "crashsev/tensor.hpp"

#include "json.hpp"

namespace crashsev::tabnet {

enum class MaskType { Entmax, Sparsemax };

std::string mask_type_name(MaskType t);
MaskType mask_type_from_name(const std::string& s);

struct TabNetConfig {
    int n_d = 53;
    int n_a = 58;
    int n_steps = 1;
    double lambda_sparse = 0.023989318;
    double gamma = 1.952667709;
    int n_independent = 8;
    int n_shared = 6;
    double bn_momentum = 0.3;
    double clip_value = 2.0;
    double learning_rate = 0.007566832;
    MaskType mask_type = MaskType::Entmax;
    double entmax_alpha = 1.5;
    int n_classes = 5;
    std::uint64_t seed = 0;
    int max_epochs = 500;
    int batch_size = 256;
    int patience = 20;

    void validate() const;  // throws ConfigError
    nlohmann::json to_json() const;
    static TabNetConfig from_json(const nlohmann::json& j);
};

// Batch norm with learnable per-column scale and shift.
struct BnParams {
    Tensor scale;  // [1 x dim]
    Tensor shift;  // [1 x dim]
    diffgraph::BatchNormState state;
};

// One feature-transformer instance: its own batch-norm stats for the shared
// GLU layers (whose FC weights live on the model and are reused everywhere)
// plus fully step-specific GLU layers.
struct FeatureTransformer {
    std::vector<BnParams> shared_bn;  // size n_shared
    std::vector<Tensor> indep_fc;     // size n_independent, [in x 2(n_d+n_a)]
    std::vector<BnParams> indep_bn;   // size n_independent
};

struct TabNetModel {
    TabNetConfig config;
    std::uint64_t schema_hash = 0;
    std::size_t input_dim = 0;

    Tensor input_bn_scale, input_bn_shift;
    diffgraph::BatchNormState input_bn_state;
    std::vector<Tensor> shared_fc;                 // n_shared weights
    std::vector<FeatureTransformer> transformers;  // [0] initial, then one per step
    std::vector<Tensor> att_fc;                    // per step, [n_a x D]
    std::vector<BnParams> att_bn;                  // per step, over D columns
    Tensor final_w;  // [n_d x n_classes]
    Tensor final_b;  // [1 x n_classes]

    // Fixed traversal order; the basis for init, optimizer state,
    // checkpoints, and checksums.
    void visit_params(const std::function<void(const std::string&, Tensor&)>& fn);
    void visit_bn_states(
        const std::function<void(const std::string&, diffgraph::BatchNormState&)>& fn);
};

// Fresh model with fan-scaled uniform weight init drawn from config.seed.
TabNetModel init_model(const TabNetConfig& config, std::size_t input_dim,
                       std::uint64_t schema_hash);

// FNV-1a over the raw parameter bytes in traversal order.
std::uint64_t parameter_checksum(const TabNetModel& model);

struct StepTrace {
    Tensor mask;                   // [batch x D], rows on the simplex
    Tensor prior_after;            // [batch x D], prior ⊙ (gamma − mask)
    Tensor decision_contribution;  // [batch x n_d], relu of the decision slice
};

// Tape-level forward pass. Training mode uses batch statistics and updates
// the model's running batch-norm state in place; inference mode reads the
// running state and never mutates the model.
struct TapeForward {
    int logits = -1;
    int sparsity = -1;  // scalar node: mean over steps, batch, features of -M log(M+eps)
    std::vector<StepTrace> traces;
    std::vector<std::pair<Tensor*, int>> params;  // model tensor -> leaf node
};
TapeForward forward_on_tape(diffgraph::Tape& tape, TabNetModel& model, const Tensor& x,
                            bool training);

struct ForwardOutput {
    Tensor logits;
    std::vector<StepTrace> traces;
    double sparsity_loss = 0.0;
};
ForwardOutput forward(TabNetModel& model, const Tensor& x, bool training);

// Row-wise softmax probabilities under inference-mode batch norm.
Tensor predict(const TabNetModel& model, const Tensor& x);

// Mean mask value per feature over batch and steps, normalized to sum to 1.
std::vector<double> global_mask_importance(const TabNetModel& model, const Tensor& x);

struct TrainReport {
    std::vector<double> train_loss;  // per epoch: cross-entropy + sparsity term
    std::vector<double> valid_loss;  // per epoch: cross-entropy, inference mode
    int stopping_epoch = 0;          // epochs actually run (1-based count)
    int best_epoch = 0;              // 1-based epoch of the restored checkpoint
    double best_valid_loss = 0.0;
    double max_abs_applied_gradient = 0.0;  // after clipping, across training
    int ensemble_members = 1;

    nlohmann::json to_json() const;
};

// Adam with elementwise gradient clipping and early stopping on validation
// cross-entropy; returns the best-validation snapshot.
TabNetModel train(const TabNetConfig& config, const dataset::EncodedDataset& train_set,
                  const dataset::EncodedDataset& valid_set, TrainReport* report = nullptr);

struct TabNetEnsemble {
    std::vector<TabNetModel> members;

    // Mean of member probability rows.
    Tensor predict(const Tensor& x) const;
    std::vector<double> global_mask_importance(const Tensor& x) const;
    std::uint64_t schema_hash() const;
    const TabNetConfig& config() const;
};

// Index resampler injection point: maps (member seed, n_rows) to the row
// indices the member trains on. Default: with-replacement uniform sample of
// n_rows.
using ResampleFn =
    std::function<std::vector<std::size_t>(std::uint64_t member_seed, std::size_t n_rows)>;

// Member i trains on a bootstrap resample with seed = config.seed + i.
TabNetEnsemble train_bootstrap(const TabNetConfig& config,
                               const dataset::EncodedDataset& train_set,
                               const dataset::EncodedDataset& valid_set,
                               std::size_t n_members,
                               std::vector<TrainReport>* reports = nullptr,
                               const ResampleFn& resample = {});

// Versioned binary container: magic, JSON header (configs, schema hash,
// tensor directory), then raw little-endian doubles. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const TabNetEnsemble& ensemble);
TabNetEnsemble load_checkpoint(const std::string& path,
                               std::optional<std::uint64_t> expected_schema_hash = {});

}  // namespace crashsev::tabnet
