#include "mgtd/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "mgtd/error.hpp"
#include "mgtd/kernels.hpp"
#include "mgtd/rng.hpp"

namespace mgtd {

namespace {

using nlohmann::json;

int argmax_lowest(std::span<const double> row) {
    int best = 0;
    for (int k = 1; k < static_cast<int>(row.size()); ++k) {
        if (row[k] > row[best]) best = k;
    }
    return best;
}

}  // namespace

class_weights class_weights::uniform(int num_classes) {
    class_weights w;
    w.values.assign(static_cast<std::size_t>(num_classes), 1.0);
    w.source.counts.assign(static_cast<std::size_t>(num_classes), 1);
    w.source.total = num_classes;
    return w;
}

class_weights compute_class_weights(const class_counts& counts) {
    const int c = counts.num_classes();
    if (c < 1) throw data_error("compute_class_weights: no classes");
    class_weights w;
    w.source = counts;
    w.values.resize(static_cast<std::size_t>(c));
    for (int i = 0; i < c; ++i) {
        const std::int64_t n_i = counts.counts[static_cast<std::size_t>(i)];
        if (n_i <= 0) {
            throw data_error("compute_class_weights: class " + std::to_string(i) +
                             " has no samples");
        }
        w.values[static_cast<std::size_t>(i)] =
            static_cast<double>(counts.total) / (static_cast<double>(n_i) * static_cast<double>(c));
    }
    return w;
}

void train_config::validate() const {
    if (epochs < 1) throw config_error("train: epochs must be >= 1");
    if (batch_size < 1) throw config_error("train: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw config_error("train: learning_rate must be positive");
    if (l2 < 0.0) throw config_error("train: l2 must be non-negative");
}

void softmax_model::validate() const {
    if (num_classes < 2) throw data_error("model: needs at least 2 classes");
    if (dim != features.dim) throw data_error("model: dim does not match feature config");
    if (weights.size() != static_cast<std::size_t>(num_classes) * dim ||
        bias.size() != static_cast<std::size_t>(num_classes)) {
        throw data_error("model: parameter shapes inconsistent");
    }
    for (double v : weights) {
        if (!std::isfinite(v)) throw data_error("model: non-finite weight");
    }
    for (double v : bias) {
        if (!std::isfinite(v)) throw data_error("model: non-finite bias");
    }
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        out[k] = std::exp(logits[k] - m);
        sum += out[k];
    }
    for (double& v : out) v /= sum;
    return out;
}

double weighted_ce_loss(const std::vector<std::vector<double>>& probabilities,
                        const std::vector<int>& labels, const class_weights& weights) {
    if (probabilities.empty()) throw data_error("weighted_ce_loss: empty batch");
    if (probabilities.size() != labels.size()) {
        throw data_error("weighted_ce_loss: batch size mismatch (" +
                         std::to_string(probabilities.size()) + " rows, " +
                         std::to_string(labels.size()) + " labels)");
    }
    const int c = weights.num_classes();
    double total = 0.0;
    for (std::size_t b = 0; b < probabilities.size(); ++b) {
        const auto& row = probabilities[b];
        if (static_cast<int>(row.size()) != c) {
            throw data_error("weighted_ce_loss: row " + std::to_string(b) + " has " +
                             std::to_string(row.size()) + " classes, expected " +
                             std::to_string(c));
        }
        const double row_sum = std::accumulate(row.begin(), row.end(), 0.0);
        if (std::abs(row_sum - 1.0) > 1e-6) {
            throw data_error("weighted_ce_loss: row " + std::to_string(b) +
                             " is not a probability distribution (sum " +
                             std::to_string(row_sum) + ")");
        }
        const int y = labels[b];
        if (y < 0 || y >= c) {
            throw data_error("weighted_ce_loss: label " + std::to_string(y) +
                             " out of range at row " + std::to_string(b));
        }
        const double p = std::clamp(row[static_cast<std::size_t>(y)], kProbClamp, 1.0);
        total += weights.values[static_cast<std::size_t>(y)] * (-std::log(p));
    }
    return total / static_cast<double>(probabilities.size());
}

gradient loss_gradient(const softmax_model& model, std::span<const example> batch,
                       const class_weights& weights) {
    return kernels::wce_gradient(model, batch, weights);
}

double batch_loss(const softmax_model& model, std::span<const example> batch,
                  const class_weights& weights) {
    double loss = 0.0;
    kernels::wce_gradient(model, batch, weights, &loss);
    return loss;
}

softmax_model train(const std::vector<example>& data, const train_config& config,
                    const class_weights& weights, const model_metadata& meta,
                    const train_options& options) {
    config.validate();
    meta.features.validate();
    if (data.empty()) throw data_error("train: no training data");
    const int c = weights.num_classes();
    for (const example& ex : data) {
        if (ex.label < 0 || ex.label >= c) {
            throw data_error("train: label " + std::to_string(ex.label) + " out of range [0," +
                             std::to_string(c - 1) + "]");
        }
    }

    softmax_model model;
    model.num_classes = c;
    model.dim = meta.features.dim;
    model.weights.assign(static_cast<std::size_t>(c) * model.dim, 0.0);
    model.bias.assign(static_cast<std::size_t>(c), 0.0);
    model.features = meta.features;
    model.tokenizer = meta.tokenizer;
    model.label_schema_digest = meta.label_schema_digest;
    model.class_names = meta.class_names;
    model.model_id = meta.model_id;
    model.meta.epochs = config.epochs;
    model.meta.learning_rate = config.learning_rate;
    model.meta.seed = config.seed;
    model.meta.loss = config.loss == loss_kind::wce ? "wce" : "ce";

    // Plain CE is WCE with unit weights.
    const class_weights& effective =
        config.loss == loss_kind::wce ? weights : class_weights::uniform(c);

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<example> batch;
    batch.reserve(static_cast<std::size_t>(config.batch_size));

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        deterministic_shuffle(order, mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));

        double epoch_loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);

            double mean_loss = 0.0;
            gradient grad = kernels::wce_gradient(model, batch, effective, &mean_loss);
            if (!std::isfinite(mean_loss)) {
                throw train_error("train: non-finite loss at epoch " + std::to_string(epoch + 1) +
                                  ", batch " + std::to_string(batches + 1));
            }
            epoch_loss_sum += mean_loss;
            ++batches;

            const double lr = config.learning_rate;
            if (config.l2 > 0.0) {
                const double decay = lr * config.l2;
                for (std::size_t j = 0; j < model.weights.size(); ++j) {
                    model.weights[j] -= lr * grad.weights[j] + decay * model.weights[j];
                }
            } else {
                for (std::size_t j = 0; j < model.weights.size(); ++j) {
                    model.weights[j] -= lr * grad.weights[j];
                }
            }
            for (std::size_t k = 0; k < model.bias.size(); ++k) {
                model.bias[k] -= lr * grad.bias[k];
            }
        }

        const double epoch_loss = epoch_loss_sum / static_cast<double>(batches);
        model.meta.loss_history.push_back(epoch_loss);

        if (options.metrics_log != nullptr) {
            std::ostream& log = *options.metrics_log;
            log << (epoch + 1) << ' ' << std::setprecision(17) << epoch_loss << ' '
                << std::setprecision(6) << accuracy_on(model, data);
            if (options.val != nullptr && !options.val->empty()) {
                log << ' ' << std::setprecision(6) << accuracy_on(model, *options.val);
            } else {
                log << " -";
            }
            log << '\n';
        }
    }
    return model;
}

prob_matrix predict_proba(const softmax_model& model, const std::vector<std::string>& texts) {
    std::vector<std::string> ids(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) ids[i] = std::to_string(i);
    return predict_proba(model, ids, texts);
}

prob_matrix predict_proba(const softmax_model& model, const std::vector<std::string>& ids,
                          const std::vector<std::string>& texts) {
    model.validate();
    if (ids.size() != texts.size()) {
        throw data_error("predict_proba: " + std::to_string(ids.size()) + " ids for " +
                         std::to_string(texts.size()) + " texts");
    }
    const std::vector<feature_vector> inputs =
        kernels::featurize_texts(texts, model.tokenizer, model.features);

    prob_matrix out;
    out.model_id = model.model_id;
    out.class_names = model.class_names.empty()
                          ? std::vector<std::string>(static_cast<std::size_t>(model.num_classes))
                          : model.class_names;
    if (model.class_names.empty()) {
        for (int k = 0; k < model.num_classes; ++k) {
            out.class_names[static_cast<std::size_t>(k)] = "class" + std::to_string(k);
        }
    }
    out.row_ids = ids;
    out.values = kernels::predict_probs(model, inputs);
    return out;
}

double accuracy_on(const softmax_model& model, std::span<const example> examples) {
    if (examples.empty()) return 0.0;
    std::vector<feature_vector> inputs(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) inputs[i] = examples[i].x;
    const std::vector<double> probs = kernels::predict_probs(model, inputs);
    std::int64_t hits = 0;
    const auto c = static_cast<std::size_t>(model.num_classes);
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const std::span<const double> row(probs.data() + i * c, c);
        if (argmax_lowest(row) == examples[i].label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(examples.size());
}

namespace {

json tokenizer_to_json(const tokenizer_config& tok) {
    return json{{"mode", tok.mode == tokenizer_config::split_mode::character ? "character"
                                                                             : "unicode-word"},
                {"lowercase", tok.lowercase}};
}

tokenizer_config tokenizer_from_json(const json& j) {
    tokenizer_config tok;
    const std::string mode = j.value("mode", "unicode-word");
    if (mode == "character") {
        tok.mode = tokenizer_config::split_mode::character;
    } else if (mode == "unicode-word") {
        tok.mode = tokenizer_config::split_mode::unicode_word;
    } else {
        throw parse_error("unknown tokenizer mode \"" + mode + "\"");
    }
    tok.lowercase = j.value("lowercase", true);
    return tok;
}

json features_to_json(const feature_config& fc) {
    return json{{"ngram_orders", fc.ngram_orders},
                {"dim", fc.dim},
                {"hash_seed", fc.hash_seed},
                {"tf_scaling",
                 fc.tf_scaling == feature_config::tf_mode::raw_count ? "raw-count" : "log1p"},
                {"max_tokens", fc.max_tokens}};
}

feature_config features_from_json(const json& j) {
    feature_config fc;
    if (j.contains("ngram_orders")) {
        fc.ngram_orders = std::set<int>(j["ngram_orders"].begin(), j["ngram_orders"].end());
    }
    fc.dim = j.value("dim", 1u << 20);
    fc.hash_seed = j.value("hash_seed", static_cast<std::uint64_t>(0));
    const std::string tf = j.value("tf_scaling", "log1p");
    if (tf == "raw-count") {
        fc.tf_scaling = feature_config::tf_mode::raw_count;
    } else if (tf == "log1p") {
        fc.tf_scaling = feature_config::tf_mode::log1p;
    } else {
        throw parse_error("unknown tf_scaling \"" + tf + "\"");
    }
    fc.max_tokens = j.value("max_tokens", static_cast<std::size_t>(512));
    fc.validate();
    return fc;
}

}  // namespace

void save_model(const softmax_model& model, const std::filesystem::path& path) {
    model.validate();
    json doc;
    doc["format"] = "mgtd-model/1";
    doc["model_id"] = model.model_id;
    doc["num_classes"] = model.num_classes;
    doc["dim"] = model.dim;
    doc["tokenizer"] = tokenizer_to_json(model.tokenizer);
    doc["features"] = features_to_json(model.features);
    doc["label_schema_digest"] = model.label_schema_digest;
    doc["class_names"] = model.class_names;
    doc["bias"] = model.bias;

    // Sparse parameter storage: untouched cells are exactly zero.
    json rows = json::array();
    for (int k = 0; k < model.num_classes; ++k) {
        json idx = json::array();
        json val = json::array();
        for (std::uint32_t j = 0; j < model.dim; ++j) {
            const double v = model.w(k, j);
            if (v != 0.0) {
                idx.push_back(j);
                val.push_back(v);
            }
        }
        rows.push_back(json{{"index", std::move(idx)}, {"value", std::move(val)}});
    }
    doc["weights"] = std::move(rows);
    doc["training"] = json{{"epochs", model.meta.epochs},
                           {"learning_rate", model.meta.learning_rate},
                           {"seed", model.meta.seed},
                           {"loss", model.meta.loss},
                           {"loss_history", model.meta.loss_history}};

    std::ofstream out(path);
    if (!out) throw error("cannot write model file: " + path.string());
    out << doc.dump(2) << '\n';
}

softmax_model load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open model file: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw parse_error("malformed model file " + path.string() + ": " + e.what());
    }
    if (doc.value("format", "") != "mgtd-model/1") {
        throw parse_error("not an mgtd model file: " + path.string());
    }

    softmax_model model;
    model.model_id = doc.value("model_id", "softmax");
    model.num_classes = doc.at("num_classes").get<int>();
    model.dim = doc.at("dim").get<std::uint32_t>();
    model.tokenizer = tokenizer_from_json(doc.at("tokenizer"));
    model.features = features_from_json(doc.at("features"));
    model.label_schema_digest = doc.value("label_schema_digest", "");
    model.class_names = doc.value("class_names", std::vector<std::string>{});
    model.bias = doc.at("bias").get<std::vector<double>>();
    model.weights.assign(static_cast<std::size_t>(model.num_classes) * model.dim, 0.0);
    const json& rows = doc.at("weights");
    if (static_cast<int>(rows.size()) != model.num_classes) {
        throw parse_error("model file has " + std::to_string(rows.size()) +
                          " weight rows, expected " + std::to_string(model.num_classes));
    }
    for (int k = 0; k < model.num_classes; ++k) {
        const json& row = rows[static_cast<std::size_t>(k)];
        const auto& idx = row.at("index");
        const auto& val = row.at("value");
        if (idx.size() != val.size()) {
            throw parse_error("model row " + std::to_string(k) + " index/value length mismatch");
        }
        for (std::size_t t = 0; t < idx.size(); ++t) {
            const auto j = idx[t].get<std::uint32_t>();
            if (j >= model.dim) {
                throw parse_error("model row " + std::to_string(k) + " index " +
                                  std::to_string(j) + " out of range");
            }
            model.w(k, j) = val[t].get<double>();
        }
    }
    if (doc.contains("training")) {
        const json& t = doc["training"];
        model.meta.epochs = t.value("epochs", 0);
        model.meta.learning_rate = t.value("learning_rate", 0.0);
        model.meta.seed = t.value("seed", static_cast<std::uint64_t>(0));
        model.meta.loss = t.value("loss", "wce");
        model.meta.loss_history = t.value("loss_history", std::vector<double>{});
    }
    model.validate();
    return model;
}

}  // namespace mgtd
