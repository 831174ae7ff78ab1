#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mgtd/classifier.hpp"
#include "mgtd/corpus.hpp"
#include "mgtd/features.hpp"

// Data-parallel inner loops (OpenMP) with serial reference implementations.
// Every pair is bit-identical by construction: per-element work is shared
// code and every floating-point accumulation runs in a fixed order
// independent of the thread count. The serial variants are kept for the
// equality tests and the mgtd_bench comparison.
namespace mgtd::kernels {

std::vector<feature_vector> featurize_texts(std::span<const std::string> texts,
                                            const tokenizer_config& tok,
                                            const feature_config& config);
std::vector<feature_vector> featurize_texts_serial(std::span<const std::string> texts,
                                                   const tokenizer_config& tok,
                                                   const feature_config& config);

// N x C row-major probabilities for pre-featurized inputs.
std::vector<double> predict_probs(const softmax_model& model,
                                  std::span<const feature_vector> inputs);
std::vector<double> predict_probs_serial(const softmax_model& model,
                                         std::span<const feature_vector> inputs);

// Batch WCE gradient plus mean batch loss. Parallel phase 1 computes
// per-sample probabilities; phase 2 accumulates per class in sample order,
// so each gradient cell sees the same summation order as the serial loop.
gradient wce_gradient(const softmax_model& model, std::span<const example> batch,
                      const class_weights& weights, double* mean_loss = nullptr);
gradient wce_gradient_serial(const softmax_model& model, std::span<const example> batch,
                             const class_weights& weights, double* mean_loss = nullptr);

// Elementwise mean of M row-major matrices of identical shape, summed in
// member order per cell.
std::vector<double> average_rows(std::span<const double* const> matrices, std::size_t rows,
                                 std::size_t cols);
std::vector<double> average_rows_serial(std::span<const double* const> matrices, std::size_t rows,
                                        std::size_t cols);

std::vector<std::int64_t> token_lengths(std::span<const text_record> records,
                                        const tokenizer_config& tok);
std::vector<std::int64_t> token_lengths_serial(std::span<const text_record> records,
                                               const tokenizer_config& tok);

}  // namespace mgtd::kernels
