#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mgtd/classifier.hpp"
#include "mgtd/corpus.hpp"
#include "mgtd/ensemble.hpp"
#include "mgtd/eval.hpp"
#include "mgtd/features.hpp"

namespace mgtd {

struct dataset_ref {
    std::filesystem::path path;
    jsonl_schema schema;

    bool present() const { return !path.empty(); }
};

struct grid_spec {
    std::vector<int> epochs;
    std::vector<double> learning_rates;

    bool empty() const { return epochs.empty() && learning_rates.empty(); }
};

// One declarative run: dataset paths and schemas, label schema, split,
// feature/tokenizer/train settings, ensemble members, output directory.
struct run_config {
    std::filesystem::path out_dir = "out";
    std::uint64_t seed = 42;
    std::map<std::string, dataset_ref> datasets;  // primary, supplement, holdout, eval
    label_schema labels = label_schema::mgt_default();
    double val_fraction = 0.2;
    tokenizer_config tokenizer;
    feature_config features;
    train_config train;
    std::string model_name = "softmax";
    grid_spec grid;
    std::vector<std::filesystem::path> members;   // model files and/or matrix files
    selection_metric metric = selection_metric::per_class_recall;
    std::int64_t bucket_width = 100;
    std::vector<std::string> stats_targets;

    std::filesystem::path corpus_dir() const { return out_dir / "corpus"; }
    std::filesystem::path models_dir() const { return out_dir / "models"; }
    std::filesystem::path matrices_dir() const { return out_dir / "matrices"; }
    std::filesystem::path reports_dir() const { return out_dir / "reports"; }

    const dataset_ref* dataset(const std::string& name) const;
    const dataset_ref& require_dataset(const std::string& name) const;
};

run_config load_run_config(const std::filesystem::path& path);

// merge -> corpus/merged.jsonl plus a class-count summary on `out`.
void cmd_merge(const run_config& config, std::ostream& out);

// stats -> reports/token_length_<target>.csv per target.
void cmd_stats(const run_config& config, std::ostream& out);

// split -> corpus/split.csv (stratified, seeded).
void cmd_split(const run_config& config, std::ostream& out);

// train -> models/<name>.json + reports/train_metrics_<name>.log; grid mode
// additionally writes reports/train_grid.{txt,csv}.
void cmd_train(const run_config& config, std::ostream& out);

// predict -> matrices/<model_id>.jsonl per member source.
void cmd_predict(const run_config& config, std::ostream& out);

// ensemble -> reports/ensemble_spec.json, ensemble_report.{txt,csv},
// ensemble_table.{txt,csv}, matrices/ensemble.jsonl.
void cmd_ensemble(const run_config& config, std::ostream& out);

// evaluate -> reports/eval_<model_id>.{txt,csv} per member source plus a
// comparison table when several sources are given.
void cmd_evaluate(const run_config& config, std::ostream& out);

}  // namespace mgtd
