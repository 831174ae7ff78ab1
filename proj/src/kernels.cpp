#include "mgtd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "mgtd/error.hpp"

namespace mgtd::kernels {

namespace {

// Logits + softmax for one sample; shared by every kernel so serial and
// parallel variants produce identical rows.
void softmax_row(const softmax_model& model, const feature_vector& x, double* out) {
    const auto c = static_cast<std::size_t>(model.num_classes);
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < c; ++k) {
        const std::span<const double> row(model.weights.data() + k * model.dim, model.dim);
        out[k] = x.dot(row) + model.bias[k];
        max_logit = std::max(max_logit, out[k]);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
        out[k] = std::exp(out[k] - max_logit);
        sum += out[k];
    }
    for (std::size_t k = 0; k < c; ++k) out[k] /= sum;
}

std::vector<double> probs_for_batch(const softmax_model& model, std::span<const example> batch,
                                    bool use_parallel) {
    const auto c = static_cast<std::size_t>(model.num_classes);
    std::vector<double> probs(batch.size() * c);
    if (use_parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(batch.size()); ++b) {
            softmax_row(model, batch[static_cast<std::size_t>(b)].x,
                        probs.data() + static_cast<std::size_t>(b) * c);
        }
    } else {
        for (std::size_t b = 0; b < batch.size(); ++b) {
            softmax_row(model, batch[b].x, probs.data() + b * c);
        }
    }
    return probs;
}

// Phase 2 of the WCE gradient: scatter per-sample coefficients into the
// dense gradient. Each class row is owned by one iteration and accumulated
// in sample order, so the summation order per cell never depends on the
// thread count.
void scatter_gradient(std::span<const example> batch, const double* probs,
                      const class_weights& weights, int num_classes, std::uint32_t dim,
                      gradient& grad, bool use_parallel) {
    const auto c = static_cast<std::size_t>(num_classes);
    const double inv_b = 1.0 / static_cast<double>(batch.size());

#pragma omp parallel for schedule(static) if (use_parallel)
    for (int k = 0; k < num_classes; ++k) {
        double* wrow = grad.weights.data() + static_cast<std::size_t>(k) * dim;
        double bias_acc = 0.0;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const int y = batch[b].label;
            const double p = probs[b * c + static_cast<std::size_t>(k)];
            const double coef =
                weights.values[static_cast<std::size_t>(y)] * (p - (k == y ? 1.0 : 0.0)) * inv_b;
            for (const auto& [idx, val] : batch[b].x.entries) {
                wrow[idx] += coef * val;
            }
            bias_acc += coef;
        }
        grad.bias[static_cast<std::size_t>(k)] = bias_acc;
    }
}

gradient wce_gradient_impl(const softmax_model& model, std::span<const example> batch,
                           const class_weights& weights, double* mean_loss, bool use_parallel) {
    if (batch.empty()) throw data_error("wce_gradient: empty batch");
    if (weights.num_classes() != model.num_classes) {
        throw data_error("wce_gradient: weights cover " + std::to_string(weights.num_classes()) +
                         " classes, model has " + std::to_string(model.num_classes));
    }
    const auto c = static_cast<std::size_t>(model.num_classes);
    for (const example& ex : batch) {
        if (ex.label < 0 || ex.label >= model.num_classes) {
            throw data_error("wce_gradient: label " + std::to_string(ex.label) + " out of range");
        }
        if (ex.x.dim != model.dim) {
            throw data_error("wce_gradient: feature dim mismatch");
        }
    }

    const std::vector<double> probs = probs_for_batch(model, batch, use_parallel);

    gradient grad;
    grad.weights.assign(static_cast<std::size_t>(model.num_classes) * model.dim, 0.0);
    grad.bias.assign(c, 0.0);
    scatter_gradient(batch, probs.data(), weights, model.num_classes, model.dim, grad, use_parallel);

    if (mean_loss != nullptr) {
        // Fixed sample-order sum regardless of thread count.
        double total = 0.0;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const auto y = static_cast<std::size_t>(batch[b].label);
            const double p = std::clamp(probs[b * c + y], kProbClamp, 1.0);
            total += weights.values[y] * (-std::log(p));
        }
        *mean_loss = total / static_cast<double>(batch.size());
    }
    return grad;
}

}  // namespace

std::vector<feature_vector> featurize_texts(std::span<const std::string> texts,
                                            const tokenizer_config& tok,
                                            const feature_config& config) {
    config.validate();
    std::vector<feature_vector> out(texts.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(texts.size()); ++i) {
        out[static_cast<std::size_t>(i)] =
            vectorize_text(texts[static_cast<std::size_t>(i)], tok, config);
    }
    return out;
}

std::vector<feature_vector> featurize_texts_serial(std::span<const std::string> texts,
                                                   const tokenizer_config& tok,
                                                   const feature_config& config) {
    config.validate();
    std::vector<feature_vector> out(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        out[i] = vectorize_text(texts[i], tok, config);
    }
    return out;
}

std::vector<double> predict_probs(const softmax_model& model,
                                  std::span<const feature_vector> inputs) {
    const auto c = static_cast<std::size_t>(model.num_classes);
    std::vector<double> probs(inputs.size() * c);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(inputs.size()); ++i) {
        softmax_row(model, inputs[static_cast<std::size_t>(i)],
                    probs.data() + static_cast<std::size_t>(i) * c);
    }
    return probs;
}

std::vector<double> predict_probs_serial(const softmax_model& model,
                                         std::span<const feature_vector> inputs) {
    const auto c = static_cast<std::size_t>(model.num_classes);
    std::vector<double> probs(inputs.size() * c);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        softmax_row(model, inputs[i], probs.data() + i * c);
    }
    return probs;
}

gradient wce_gradient(const softmax_model& model, std::span<const example> batch,
                      const class_weights& weights, double* mean_loss) {
    return wce_gradient_impl(model, batch, weights, mean_loss, true);
}

gradient wce_gradient_serial(const softmax_model& model, std::span<const example> batch,
                             const class_weights& weights, double* mean_loss) {
    return wce_gradient_impl(model, batch, weights, mean_loss, false);
}

namespace {

// mean = x0 + (sum_j (x_j - x0)) / M. Exact identity when every member
// agrees (all deviations are 0), which the soft-vote contract requires for
// M copies of one matrix; otherwise within ~M ulp of the plain mean.
inline double mean_cell(std::span<const double* const> matrices, std::size_t i) {
    const double base = matrices[0][i];
    double acc = 0.0;
    for (std::size_t j = 1; j < matrices.size(); ++j) acc += matrices[j][i] - base;
    return base + acc / static_cast<double>(matrices.size());
}

}  // namespace

std::vector<double> average_rows(std::span<const double* const> matrices, std::size_t rows,
                                 std::size_t cols) {
    if (matrices.empty()) throw data_error("average_rows: no matrices");
    std::vector<double> out(rows * cols);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rows * cols); ++i) {
        out[static_cast<std::size_t>(i)] = mean_cell(matrices, static_cast<std::size_t>(i));
    }
    return out;
}

std::vector<double> average_rows_serial(std::span<const double* const> matrices, std::size_t rows,
                                        std::size_t cols) {
    if (matrices.empty()) throw data_error("average_rows: no matrices");
    std::vector<double> out(rows * cols);
    for (std::size_t i = 0; i < rows * cols; ++i) {
        out[i] = mean_cell(matrices, i);
    }
    return out;
}

std::vector<std::int64_t> token_lengths(std::span<const text_record> records,
                                        const tokenizer_config& tok) {
    std::vector<std::int64_t> lengths(records.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(records.size()); ++i) {
        lengths[static_cast<std::size_t>(i)] =
            static_cast<std::int64_t>(tokenize(records[static_cast<std::size_t>(i)].text, tok).size());
    }
    return lengths;
}

std::vector<std::int64_t> token_lengths_serial(std::span<const text_record> records,
                                               const tokenizer_config& tok) {
    std::vector<std::int64_t> lengths(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        lengths[i] = static_cast<std::int64_t>(tokenize(records[i].text, tok).size());
    }
    return lengths;
}

}  // namespace mgtd::kernels
