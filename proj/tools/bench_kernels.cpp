// Compares the OpenMP kernels against their serial reference implementations
// on a synthetic corpus, checking that both produce identical results.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>

#include "mgtd/classifier.hpp"
#include "mgtd/corpus.hpp"
#include "mgtd/kernels.hpp"
#include "mgtd/rng.hpp"

namespace {

using clock_type = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int repeat) {
    double best = 1e300;
    for (int r = 0; r < repeat; ++r) {
        const auto t0 = clock_type::now();
        fn();
        const auto t1 = clock_type::now();
        best = std::min(best,
                        std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count() /
                            1e6);
    }
    return best;
}

std::vector<std::string> synth_texts(std::size_t n, std::size_t tokens_per_text,
                                     std::uint64_t seed) {
    std::vector<std::string> texts(n);
    mgtd::rng64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        std::string t;
        for (std::size_t k = 0; k < tokens_per_text; ++k) {
            t += "tok" + std::to_string(rng.next_below(5000));
            t += ' ';
        }
        texts[i] = std::move(t);
    }
    return texts;
}

void report(const std::string& name, double serial_ms, double parallel_ms, bool identical) {
    std::printf("%-18s %10.2f ms %10.2f ms   %5.2fx   %s\n", name.c_str(), serial_ms, parallel_ms,
                serial_ms / parallel_ms, identical ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"serial vs OpenMP kernel comparison"};
    std::size_t n_texts = 8000;
    std::size_t tokens_per_text = 200;
    std::uint32_t dim = 1u << 18;
    int repeat = 3;
    app.add_option("--texts", n_texts, "number of synthetic texts");
    app.add_option("--tokens", tokens_per_text, "tokens per text");
    app.add_option("--dim", dim, "feature dimension (power of two)");
    app.add_option("--repeat", repeat, "timed repetitions (best of)");
    CLI11_PARSE(app, argc, argv);

    std::cout << "threads: " << omp_get_max_threads() << ", texts: " << n_texts
              << ", tokens/text: " << tokens_per_text << ", dim: " << dim << "\n\n";
    std::printf("%-18s %13s %13s %8s\n", "kernel", "serial", "openmp", "speedup");

    const std::vector<std::string> texts = synth_texts(n_texts, tokens_per_text, 7);
    mgtd::tokenizer_config tok;
    mgtd::feature_config fc;
    fc.dim = dim;
    fc.max_tokens = 0;

    std::vector<mgtd::feature_vector> fv_serial, fv_parallel;
    const double feat_s =
        time_ms([&] { fv_serial = mgtd::kernels::featurize_texts_serial(texts, tok, fc); }, repeat);
    const double feat_p =
        time_ms([&] { fv_parallel = mgtd::kernels::featurize_texts(texts, tok, fc); }, repeat);
    bool feat_ok = fv_serial.size() == fv_parallel.size();
    for (std::size_t i = 0; feat_ok && i < fv_serial.size(); ++i) {
        feat_ok = fv_serial[i].entries == fv_parallel[i].entries;
    }
    report("featurize", feat_s, feat_p, feat_ok);

    // Random model over the synthetic vocabulary.
    mgtd::softmax_model model;
    model.num_classes = mgtd::kNumClasses;
    model.dim = dim;
    model.features = fc;
    model.tokenizer = tok;
    model.weights.resize(static_cast<std::size_t>(model.num_classes) * dim);
    model.bias.assign(static_cast<std::size_t>(model.num_classes), 0.0);
    mgtd::rng64 rng(11);
    for (double& w : model.weights) {
        w = (static_cast<double>(rng.next()) / 1.8446744073709552e19 - 0.5) * 0.01;
    }

    std::vector<double> probs_serial, probs_parallel;
    const double pred_s = time_ms(
        [&] { probs_serial = mgtd::kernels::predict_probs_serial(model, fv_serial); }, repeat);
    const double pred_p =
        time_ms([&] { probs_parallel = mgtd::kernels::predict_probs(model, fv_serial); }, repeat);
    report("predict", pred_s, pred_p, probs_serial == probs_parallel);

    std::vector<mgtd::example> batch(fv_serial.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        batch[i] = {fv_serial[i], static_cast<int>(i % mgtd::kNumClasses)};
    }
    const mgtd::class_weights weights = mgtd::class_weights::uniform(mgtd::kNumClasses);
    mgtd::gradient grad_serial, grad_parallel;
    double loss_serial = 0.0, loss_parallel = 0.0;
    const double grad_s = time_ms(
        [&] {
            grad_serial = mgtd::kernels::wce_gradient_serial(model, batch, weights, &loss_serial);
        },
        repeat);
    const double grad_p = time_ms(
        [&] { grad_parallel = mgtd::kernels::wce_gradient(model, batch, weights, &loss_parallel); },
        repeat);
    report("wce_gradient", grad_s, grad_p,
           grad_serial.weights == grad_parallel.weights &&
               grad_serial.bias == grad_parallel.bias && loss_serial == loss_parallel);

    // Soft-vote averaging over four copies of the probability matrix.
    const std::vector<const double*> mats(4, probs_serial.data());
    std::vector<double> avg_serial, avg_parallel;
    const double avg_s = time_ms(
        [&] {
            avg_serial = mgtd::kernels::average_rows_serial(
                mats, fv_serial.size(), static_cast<std::size_t>(mgtd::kNumClasses));
        },
        repeat);
    const double avg_p = time_ms(
        [&] {
            avg_parallel = mgtd::kernels::average_rows(
                mats, fv_serial.size(), static_cast<std::size_t>(mgtd::kNumClasses));
        },
        repeat);
    report("soft_vote_mean", avg_s, avg_p, avg_serial == avg_parallel);

    std::vector<mgtd::text_record> records(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        records[i] = {std::to_string(i), texts[i], 0, "", ""};
    }
    std::vector<std::int64_t> len_serial, len_parallel;
    const double len_s = time_ms(
        [&] { len_serial = mgtd::kernels::token_lengths_serial(records, tok); }, repeat);
    const double len_p =
        time_ms([&] { len_parallel = mgtd::kernels::token_lengths(records, tok); }, repeat);
    report("token_lengths", len_s, len_p, len_serial == len_parallel);

    return 0;
}
