#include "mgtd/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "mgtd/error.hpp"
#include "mgtd/kernels.hpp"

namespace mgtd {

namespace {

using nlohmann::json;

}  // namespace

std::span<const double> prob_matrix::row(std::size_t i) const {
    const auto c = static_cast<std::size_t>(num_classes());
    return {values.data() + i * c, c};
}

std::span<double> prob_matrix::row(std::size_t i) {
    const auto c = static_cast<std::size_t>(num_classes());
    return {values.data() + i * c, c};
}

void prob_matrix::validate(double row_sum_tol) const {
    const auto c = static_cast<std::size_t>(num_classes());
    if (c == 0) throw data_error("prob matrix \"" + model_id + "\": no classes");
    if (values.size() != rows() * c) {
        throw data_error("prob matrix \"" + model_id + "\": value count " +
                         std::to_string(values.size()) + " does not match " +
                         std::to_string(rows()) + "x" + std::to_string(c));
    }
    std::unordered_set<std::string> ids;
    for (const std::string& id : row_ids) {
        if (!ids.insert(id).second) {
            throw data_error("prob matrix \"" + model_id + "\": duplicate row id \"" + id + "\"");
        }
    }
    for (std::size_t i = 0; i < rows(); ++i) {
        double sum = 0.0;
        for (double v : row(i)) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw data_error("prob matrix \"" + model_id + "\": entry out of [0,1] in row \"" +
                                 row_ids[i] + "\"");
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > row_sum_tol) {
            std::ostringstream os;
            os << "prob matrix \"" << model_id << "\": row \"" << row_ids[i]
               << "\" sums to " << sum << ", not 1";
            throw data_error(os.str());
        }
    }
}

std::int64_t& confusion_matrix::at(int gold, int predicted) {
    return cells[static_cast<std::size_t>(gold) * static_cast<std::size_t>(num_classes) +
                 static_cast<std::size_t>(predicted)];
}

std::int64_t confusion_matrix::at(int gold, int predicted) const {
    return cells[static_cast<std::size_t>(gold) * static_cast<std::size_t>(num_classes) +
                 static_cast<std::size_t>(predicted)];
}

std::int64_t confusion_matrix::total() const {
    return std::accumulate(cells.begin(), cells.end(), std::int64_t{0});
}

std::int64_t confusion_matrix::trace() const {
    std::int64_t t = 0;
    for (int k = 0; k < num_classes; ++k) t += at(k, k);
    return t;
}

std::int64_t confusion_matrix::gold_count(int gold) const {
    std::int64_t t = 0;
    for (int p = 0; p < num_classes; ++p) t += at(gold, p);
    return t;
}

confusion_matrix confusion(std::span<const int> predictions, std::span<const int> golds,
                           int num_classes) {
    if (predictions.size() != golds.size()) {
        throw data_error("confusion: " + std::to_string(predictions.size()) +
                         " predictions vs " + std::to_string(golds.size()) + " golds");
    }
    if (predictions.empty()) throw data_error("confusion: empty input");
    confusion_matrix cm(num_classes);
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const int g = golds[i];
        const int p = predictions[i];
        if (g < 0 || g >= num_classes || p < 0 || p >= num_classes) {
            throw data_error("confusion: class out of range at position " + std::to_string(i));
        }
        ++cm.at(g, p);
    }
    return cm;
}

std::vector<class_score> per_class_scores(const confusion_matrix& cm) {
    std::vector<class_score> scores(static_cast<std::size_t>(cm.num_classes));
    for (int k = 0; k < cm.num_classes; ++k) {
        std::int64_t gold_total = 0;
        std::int64_t pred_total = 0;
        for (int j = 0; j < cm.num_classes; ++j) {
            gold_total += cm.at(k, j);
            pred_total += cm.at(j, k);
        }
        const auto diag = static_cast<double>(cm.at(k, k));
        class_score& s = scores[static_cast<std::size_t>(k)];
        s.support = gold_total;
        s.recall = gold_total > 0 ? diag / static_cast<double>(gold_total) : 0.0;
        s.precision = pred_total > 0 ? diag / static_cast<double>(pred_total) : 0.0;
        s.f1 = (s.precision + s.recall) > 0.0
                   ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
                   : 0.0;
    }
    return scores;
}

std::string to_string(selection_metric m) {
    return m == selection_metric::per_class_f1 ? "per-class-F1" : "per-class-recall";
}

selection_metric selection_metric_from_string(const std::string& s) {
    if (s == "per-class-recall" || s == "recall") return selection_metric::per_class_recall;
    if (s == "per-class-F1" || s == "per-class-f1" || s == "f1") return selection_metric::per_class_f1;
    throw config_error("unknown selection metric \"" + s + "\"");
}

ensemble_spec select_members(
    const std::vector<std::pair<std::string, confusion_matrix>>& candidates,
    selection_metric metric) {
    if (candidates.empty()) throw data_error("select_members: no candidates");
    const int c = candidates.front().second.num_classes;
    const std::int64_t n = candidates.front().second.total();
    for (const auto& [id, cm] : candidates) {
        if (cm.num_classes != c || cm.total() != n) {
            throw data_error("select_members: candidate \"" + id +
                             "\" evaluated on a different set");
        }
    }

    std::vector<std::vector<double>> metric_values;  // candidate x class
    metric_values.reserve(candidates.size());
    for (const auto& [id, cm] : candidates) {
        const std::vector<class_score> scores = per_class_scores(cm);
        std::vector<double> vals(static_cast<std::size_t>(c));
        for (int k = 0; k < c; ++k) {
            vals[static_cast<std::size_t>(k)] = metric == selection_metric::per_class_f1
                                                    ? scores[static_cast<std::size_t>(k)].f1
                                                    : scores[static_cast<std::size_t>(k)].recall;
        }
        metric_values.push_back(std::move(vals));
    }

    ensemble_spec spec;
    spec.metric = metric;
    for (int k = 0; k < c; ++k) {
        double best = -1.0;
        for (const auto& vals : metric_values) {
            best = std::max(best, vals[static_cast<std::size_t>(k)]);
        }
        for (std::size_t j = 0; j < candidates.size(); ++j) {
            if (metric_values[j][static_cast<std::size_t>(k)] == best) {
                spec.excels_in[candidates[j].first].insert(k);
            }
        }
    }
    for (const auto& [id, cm] : candidates) {
        if (spec.excels_in.count(id) > 0) spec.members.push_back(id);
    }
    return spec;
}

prob_matrix soft_vote(const std::vector<prob_matrix>& matrices) {
    if (matrices.empty()) throw data_error("soft_vote: no matrices");
    const prob_matrix& base = matrices.front();
    const auto c = static_cast<std::size_t>(base.num_classes());
    const std::size_t n = base.rows();
    for (const prob_matrix& m : matrices) m.validate();

    // Align every matrix to the first one's row order.
    std::vector<std::vector<double>> aligned;  // reordered copies where needed
    std::vector<const double*> mats;
    aligned.reserve(matrices.size());
    mats.reserve(matrices.size());
    mats.push_back(base.values.data());
    for (std::size_t j = 1; j < matrices.size(); ++j) {
        const prob_matrix& m = matrices[j];
        if (static_cast<std::size_t>(m.num_classes()) != c) {
            throw data_error("soft_vote: \"" + m.model_id + "\" has " +
                             std::to_string(m.num_classes()) + " classes, expected " +
                             std::to_string(c));
        }
        std::unordered_map<std::string, std::size_t> pos;
        pos.reserve(m.rows());
        for (std::size_t i = 0; i < m.rows(); ++i) pos.emplace(m.row_ids[i], i);

        std::string missing;
        std::size_t missing_count = 0;
        for (const std::string& id : base.row_ids) {
            if (pos.find(id) == pos.end()) {
                ++missing_count;
                if (missing_count <= 5) missing += (missing.empty() ? "" : ", ") + id;
            }
        }
        if (missing_count == 0 && m.rows() != n) {
            // ids of base all present but m has extras
            std::unordered_set<std::string> base_ids(base.row_ids.begin(), base.row_ids.end());
            for (const std::string& id : m.row_ids) {
                if (base_ids.count(id) == 0) {
                    ++missing_count;
                    if (missing_count <= 5) missing += (missing.empty() ? "" : ", ") + id;
                }
            }
            if (missing_count > 0) {
                throw data_error("soft_vote: \"" + m.model_id + "\" has rows absent from \"" +
                                 base.model_id + "\": " + missing +
                                 (missing_count > 5 ? ", ..." : ""));
            }
        }
        if (missing_count > 0) {
            throw data_error("soft_vote: \"" + m.model_id + "\" is missing rows: " + missing +
                             (missing_count > 5 ? ", ..." : ""));
        }

        bool same_order = true;
        for (std::size_t i = 0; i < n && same_order; ++i) {
            same_order = m.row_ids[i] == base.row_ids[i];
        }
        if (same_order) {
            mats.push_back(m.values.data());
        } else {
            std::vector<double> reordered(n * c);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t src = pos.at(base.row_ids[i]);
                std::copy_n(m.values.data() + src * c, c, reordered.data() + i * c);
            }
            aligned.push_back(std::move(reordered));
            mats.push_back(aligned.back().data());
        }
    }

    prob_matrix out;
    out.class_names = base.class_names;
    out.row_ids = base.row_ids;
    std::string id;
    for (const prob_matrix& m : matrices) id += (id.empty() ? "" : "+") + m.model_id;
    out.model_id = id;
    out.values = kernels::average_rows(mats, n, c);
    return out;
}

std::vector<int> decide(const prob_matrix& matrix) {
    matrix.validate();
    std::vector<int> out(matrix.rows());
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        const std::span<const double> row = matrix.row(i);
        int best = 0;
        for (int k = 1; k < matrix.num_classes(); ++k) {
            if (row[static_cast<std::size_t>(k)] > row[static_cast<std::size_t>(best)]) best = k;
        }
        out[i] = best;
    }
    return out;
}

void write_prob_matrix(const std::filesystem::path& path, const prob_matrix& matrix) {
    matrix.validate();
    std::ofstream out(path);
    if (!out) throw error("cannot write matrix file: " + path.string());
    out << json{{"model_id", matrix.model_id}, {"classes", matrix.class_names}}.dump() << '\n';
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        const auto row = matrix.row(i);
        out << json{{"id", matrix.row_ids[i]},
                    {"probs", std::vector<double>(row.begin(), row.end())}}
                   .dump()
            << '\n';
    }
}

prob_matrix read_prob_matrix(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open matrix file: " + path.string());
    prob_matrix matrix;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw parse_error("malformed JSON at " + path.string() + ":" +
                              std::to_string(line_no) + ": " + e.what());
        }
        if (line_no == 1) {
            if (!obj.contains("model_id") || !obj.contains("classes")) {
                throw parse_error("matrix header must carry model_id and classes: " +
                                  path.string());
            }
            matrix.model_id = obj["model_id"].get<std::string>();
            matrix.class_names = obj["classes"].get<std::vector<std::string>>();
            continue;
        }
        if (!obj.contains("id") || !obj.contains("probs")) {
            throw parse_error("matrix row missing id/probs at " + path.string() + ":" +
                              std::to_string(line_no));
        }
        matrix.row_ids.push_back(obj["id"].is_string() ? obj["id"].get<std::string>()
                                                       : obj["id"].dump());
        const auto probs = obj["probs"].get<std::vector<double>>();
        if (probs.size() != matrix.class_names.size()) {
            throw parse_error("matrix row has " + std::to_string(probs.size()) +
                              " probabilities, expected " +
                              std::to_string(matrix.class_names.size()) + " at " + path.string() +
                              ":" + std::to_string(line_no));
        }
        matrix.values.insert(matrix.values.end(), probs.begin(), probs.end());
    }
    if (matrix.class_names.empty()) {
        throw parse_error("matrix file has no header line: " + path.string());
    }
    matrix.validate();
    return matrix;
}

void write_ensemble_spec(const std::filesystem::path& path, const ensemble_spec& spec) {
    json doc;
    doc["members"] = spec.members;
    json excels = json::object();
    for (const auto& [id, classes] : spec.excels_in) {
        excels[id] = classes;
    }
    doc["excels_in"] = std::move(excels);
    doc["selection_metric"] = to_string(spec.metric);
    std::ofstream out(path);
    if (!out) throw error("cannot write ensemble spec: " + path.string());
    out << doc.dump(2) << '\n';
}

ensemble_spec read_ensemble_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open ensemble spec: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw parse_error("malformed ensemble spec " + path.string() + ": " + e.what());
    }
    ensemble_spec spec;
    spec.members = doc.at("members").get<std::vector<std::string>>();
    for (const auto& [id, classes] : doc.at("excels_in").items()) {
        spec.excels_in[id] = std::set<int>(classes.begin(), classes.end());
    }
    spec.metric = selection_metric_from_string(doc.value("selection_metric", "per-class-recall"));

    if (spec.members.empty()) {
        throw parse_error("ensemble spec has no members: " + path.string());
    }
    std::unordered_set<std::string> unique(spec.members.begin(), spec.members.end());
    if (unique.size() != spec.members.size()) {
        throw parse_error("ensemble spec has duplicate members: " + path.string());
    }
    for (const auto& [id, classes] : spec.excels_in) {
        for (int c : classes) {
            if (c < 0) {
                throw parse_error("ensemble spec has a negative class id for \"" + id + "\"");
            }
        }
    }
    return spec;
}

}  // namespace mgtd
