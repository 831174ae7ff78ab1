#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mgtd/corpus.hpp"
#include "mgtd/ensemble.hpp"

namespace mgtd {

struct eval_report {
    double accuracy = 0.0;  // trace(confusion) / n
    confusion_matrix confusion;
    std::vector<class_score> per_class;
    std::int64_t n = 0;
    std::string model_id;
};

eval_report evaluate(std::span<const int> predictions, std::span<const int> golds,
                     const std::string& model_id, int num_classes = kNumClasses);

// Human-readable text plus the machine-readable CSV with identical numbers.
struct rendered_table {
    std::string text;
    std::string csv;
};

struct comparison_row {
    std::string model_id;
    std::string config_summary;
    double accuracy = 0.0;
};

// Rows in input order; accuracy to 4 decimals in both renderings.
rendered_table comparison_table(const std::vector<comparison_row>& rows);

// One row group per ensemble: each member with its excels-in checkmarks,
// group accuracy on the first line.
struct ensemble_table_row {
    std::string label;                               // e.g. "best single model"
    std::vector<std::string> member_ids;             // empty for plain rows
    std::map<std::string, std::set<int>> excels_in;  // per member
    double accuracy = 0.0;
};

rendered_table ensemble_table(const std::vector<ensemble_table_row>& rows,
                              int num_classes = kNumClasses);

std::string report_text(const eval_report& report, const std::vector<std::string>& class_names);
std::string report_csv(const eval_report& report, const std::vector<std::string>& class_names);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace mgtd
