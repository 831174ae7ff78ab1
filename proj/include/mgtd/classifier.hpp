#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mgtd/corpus.hpp"
#include "mgtd/ensemble.hpp"
#include "mgtd/features.hpp"

namespace mgtd {

// Per-class loss weights w_i = N_total / (N_i * C).
struct class_weights {
    std::vector<double> values;
    class_counts source;

    int num_classes() const { return static_cast<int>(values.size()); }
    static class_weights uniform(int num_classes);
};

class_weights compute_class_weights(const class_counts& counts);

enum class loss_kind { ce, wce };

struct train_config {
    int epochs = 3;
    double learning_rate = 0.1;
    int batch_size = 32;
    double l2 = 0.0;
    std::uint64_t seed = 42;
    loss_kind loss = loss_kind::wce;

    void validate() const;
};

struct training_meta {
    int epochs = 0;
    double learning_rate = 0.0;
    std::uint64_t seed = 0;
    std::string loss = "wce";
    std::vector<double> loss_history;  // mean loss per epoch
};

struct softmax_model {
    int num_classes = 0;
    std::uint32_t dim = 0;
    std::vector<double> weights;  // num_classes x dim, row-major
    std::vector<double> bias;     // num_classes
    feature_config features;
    tokenizer_config tokenizer;
    std::string label_schema_digest;
    std::vector<std::string> class_names;
    training_meta meta;
    std::string model_id = "softmax";

    double& w(int k, std::uint32_t j) { return weights[static_cast<std::size_t>(k) * dim + j]; }
    double w(int k, std::uint32_t j) const {
        return weights[static_cast<std::size_t>(k) * dim + j];
    }
    void validate() const;  // finite parameters, shapes consistent with dim
};

// One featurized training pair.
struct example {
    feature_vector x;
    int label = -1;
};

std::vector<double> softmax(std::span<const double> logits);

// (1/B) * sum_b w[y_b] * (-ln p_b[y_b]), probabilities clamped to
// [1e-12, 1] before the log. Rows must sum to 1 within 1e-6.
double weighted_ce_loss(const std::vector<std::vector<double>>& probabilities,
                        const std::vector<int>& labels, const class_weights& weights);

inline constexpr double kProbClamp = 1e-12;

struct gradient {
    std::vector<double> weights;  // same shape as softmax_model::weights
    std::vector<double> bias;
};

// Analytic gradient of weighted_ce_loss(softmax(affine(x))) over the batch;
// per sample b and class k the logit gradient is w[y_b]*(p_k - 1{k==y_b})/B.
gradient loss_gradient(const softmax_model& model, std::span<const example> batch,
                       const class_weights& weights);

// Mean weighted CE of the model on the batch (same clamp as the loss).
double batch_loss(const softmax_model& model, std::span<const example> batch,
                  const class_weights& weights);

struct model_metadata {
    feature_config features;
    tokenizer_config tokenizer;
    std::string label_schema_digest;
    std::vector<std::string> class_names;
    std::string model_id = "softmax";
};

struct train_options {
    const std::vector<example>* val = nullptr;       // per-epoch val accuracy when present
    std::ostream* metrics_log = nullptr;             // one line per epoch
};

// Mini-batch gradient descent, fixed learning rate, seeded per-epoch shuffle.
// Deterministic per seed (and per OpenMP thread count). Throws train_error on
// a non-finite loss, naming epoch and batch.
softmax_model train(const std::vector<example>& data, const train_config& config,
                    const class_weights& weights, const model_metadata& meta,
                    const train_options& options = {});

prob_matrix predict_proba(const softmax_model& model, const std::vector<std::string>& texts);
prob_matrix predict_proba(const softmax_model& model, const std::vector<std::string>& ids,
                          const std::vector<std::string>& texts);

// Fraction of examples whose argmax (lowest index on ties) equals the label.
double accuracy_on(const softmax_model& model, std::span<const example> examples);

// Self-describing JSON container: parameters (sparse), both configs, schema
// digest, class names, training meta. Layout documented in the README.
void save_model(const softmax_model& model, const std::filesystem::path& path);
softmax_model load_model(const std::filesystem::path& path);

}  // namespace mgtd
