#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace mgtd {

// N x C row-stochastic matrix of per-text class distributions from one model.
struct prob_matrix {
    std::string model_id;
    std::vector<std::string> class_names;
    std::vector<std::string> row_ids;
    std::vector<double> values;  // row-major, rows() x num_classes()

    std::size_t rows() const { return row_ids.size(); }
    int num_classes() const { return static_cast<int>(class_names.size()); }
    std::span<const double> row(std::size_t i) const;
    std::span<double> row(std::size_t i);

    // Row sums within tol of 1, entries in [0,1], unique row ids.
    void validate(double row_sum_tol = 1e-6) const;
};

struct confusion_matrix {
    int num_classes = 0;
    std::vector<std::int64_t> cells;  // row-major, gold x predicted

    confusion_matrix() = default;
    explicit confusion_matrix(int classes)
        : num_classes(classes),
          cells(static_cast<std::size_t>(classes) * static_cast<std::size_t>(classes), 0) {}

    std::int64_t& at(int gold, int predicted);
    std::int64_t at(int gold, int predicted) const;
    std::int64_t total() const;
    std::int64_t trace() const;
    std::int64_t gold_count(int gold) const;
};

confusion_matrix confusion(std::span<const int> predictions, std::span<const int> golds,
                           int num_classes);

struct class_score {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t support = 0;  // gold count; 0 means the 0/0 -> 0 convention applied
};

std::vector<class_score> per_class_scores(const confusion_matrix& cm);

enum class selection_metric { per_class_recall, per_class_f1 };

std::string to_string(selection_metric m);
selection_metric selection_metric_from_string(const std::string& s);

// M member models plus the per-class excels-in table.
struct ensemble_spec {
    std::vector<std::string> members;                 // candidate order
    std::map<std::string, std::set<int>> excels_in;   // model_id -> classes it wins
    selection_metric metric = selection_metric::per_class_recall;
};

// For each class, the candidates maximizing the metric on it (ties keep all)
// gain that class; members are the candidates with a non-empty class set.
ensemble_spec select_members(
    const std::vector<std::pair<std::string, confusion_matrix>>& candidates,
    selection_metric metric);

// Mean probability over the member matrices, rows aligned by id to the first
// matrix's order. Mismatched id sets are an error listing missing ids.
prob_matrix soft_vote(const std::vector<prob_matrix>& matrices);

// Per-row argmax; exact ties go to the lowest class index.
std::vector<int> decide(const prob_matrix& matrix);

// JSONL matrix files: header line {"model_id":..., "classes":[...]}, then one
// {"id":..., "probs":[...]} object per text.
void write_prob_matrix(const std::filesystem::path& path, const prob_matrix& matrix);
prob_matrix read_prob_matrix(const std::filesystem::path& path);

void write_ensemble_spec(const std::filesystem::path& path, const ensemble_spec& spec);
ensemble_spec read_ensemble_spec(const std::filesystem::path& path);

}  // namespace mgtd
