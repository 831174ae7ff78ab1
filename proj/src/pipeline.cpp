#include "mgtd/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "mgtd/error.hpp"
#include "mgtd/kernels.hpp"

namespace mgtd {

namespace {

using nlohmann::json;

jsonl_schema schema_from_json(const json& j) {
    jsonl_schema s;
    s.text_field = j.value("text", s.text_field);
    s.label_field = j.value("label", s.label_field);
    s.generator_field = j.value("generator", s.generator_field);
    s.source_field = j.value("source", s.source_field);
    s.id_field = j.value("id", s.id_field);
    return s;
}

// Records with a generator string go through the label schema; the rest must
// already carry a valid label from the input file.
std::vector<text_record> ensure_labeled(std::vector<text_record> records,
                                        const label_schema& schema) {
    schema.validate();
    for (text_record& rec : records) {
        if (!rec.generator.empty()) {
            auto it = schema.generator_to_class.find(rec.generator);
            if (it == schema.generator_to_class.end()) {
                throw data_error("generator \"" + rec.generator +
                                 "\" has no class mapping (record id \"" + rec.id + "\")");
            }
            rec.label = it->second;
        } else if (rec.label < 0) {
            throw data_error("record \"" + rec.id + "\" carries neither a label nor a generator");
        }
    }
    return records;
}

std::vector<text_record> load_labeled(const dataset_ref& ref, const label_schema& schema) {
    return ensure_labeled(load_dataset(ref.path, ref.schema), schema);
}

void ensure_dirs(const run_config& config) {
    std::filesystem::create_directories(config.corpus_dir());
    std::filesystem::create_directories(config.models_dir());
    std::filesystem::create_directories(config.matrices_dir());
    std::filesystem::create_directories(config.reports_dir());
}

std::filesystem::path merged_corpus_path(const run_config& config) {
    return config.corpus_dir() / "merged.jsonl";
}

std::filesystem::path split_path(const run_config& config) {
    return config.corpus_dir() / "split.csv";
}

std::vector<text_record> load_merged(const run_config& config) {
    const std::filesystem::path path = merged_corpus_path(config);
    if (!std::filesystem::exists(path)) {
        throw config_error("no merged corpus at " + path.string() + "; run `mgtd merge` first");
    }
    return load_dataset(path, jsonl_schema::merged_output());
}

std::string sanitize_filename(const std::string& name) {
    std::string out;
    for (char ch : name) {
        const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                        (ch >= '0' && ch <= '9') || ch == '-' || ch == '_' || ch == '.';
        out.push_back(ok ? ch : '_');
    }
    return out.empty() ? std::string("unnamed") : out;
}

std::string format_lr(double lr) {
    std::ostringstream os;
    os << lr;
    return os.str();
}

struct member_matrix {
    prob_matrix matrix;
    std::filesystem::path source;
};

// A .jsonl member is an imported probability matrix; anything else is a
// native model file applied to the eval corpus.
std::vector<member_matrix> collect_matrices(const run_config& config,
                                            const std::vector<text_record>* eval_records) {
    if (config.members.empty()) {
        throw config_error("no ensemble members configured (ensemble.members)");
    }
    std::vector<member_matrix> out;
    for (const std::filesystem::path& src : config.members) {
        if (!std::filesystem::exists(src)) {
            throw config_error("member source does not exist: " + src.string());
        }
        member_matrix mm;
        mm.source = src;
        if (src.extension() == ".jsonl") {
            mm.matrix = read_prob_matrix(src);
        } else {
            if (eval_records == nullptr) {
                throw config_error("native model member \"" + src.string() +
                                   "\" needs an eval dataset");
            }
            const softmax_model model = load_model(src);
            std::vector<std::string> ids(eval_records->size());
            std::vector<std::string> texts(eval_records->size());
            for (std::size_t i = 0; i < eval_records->size(); ++i) {
                ids[i] = (*eval_records)[i].id;
                texts[i] = (*eval_records)[i].text;
            }
            mm.matrix = predict_proba(model, ids, texts);
        }
        out.push_back(std::move(mm));
    }
    std::map<std::string, int> seen;
    for (member_matrix& mm : out) {
        const int n = ++seen[mm.matrix.model_id];
        if (n > 1) mm.matrix.model_id += "_" + std::to_string(n);
    }
    return out;
}

std::vector<int> golds_for(const prob_matrix& matrix,
                           const std::unordered_map<std::string, int>& gold_by_id) {
    std::vector<int> golds(matrix.rows());
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        auto it = gold_by_id.find(matrix.row_ids[i]);
        if (it == gold_by_id.end()) {
            throw data_error("matrix \"" + matrix.model_id + "\" row id \"" +
                             matrix.row_ids[i] + "\" is not in the eval corpus");
        }
        golds[i] = it->second;
    }
    return golds;
}

void print_counts_summary(std::ostream& out, const class_counts& counts,
                          const std::vector<std::string>& class_names) {
    std::size_t w = 8;
    for (const auto& n : class_names) w = std::max(w, n.size() + 2);
    for (std::size_t k = 0; k < class_names.size(); ++k) {
        out << "C" << k << " " << std::setw(static_cast<int>(w)) << std::left << class_names[k]
            << std::right << std::setw(9) << counts.counts[k] << '\n';
    }
    out << "total" << std::setw(static_cast<int>(w) + 7) << counts.total << '\n';
}

}  // namespace

const dataset_ref* run_config::dataset(const std::string& name) const {
    auto it = datasets.find(name);
    return it == datasets.end() || !it->second.present() ? nullptr : &it->second;
}

const dataset_ref& run_config::require_dataset(const std::string& name) const {
    const dataset_ref* ref = dataset(name);
    if (ref == nullptr) {
        throw config_error("config does not declare a \"" + name + "\" dataset");
    }
    if (!std::filesystem::exists(ref->path)) {
        throw config_error("dataset \"" + name + "\" path does not exist: " + ref->path.string());
    }
    return *ref;
}

run_config load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw config_error("malformed config " + path.string() + ": " + e.what());
    }

    run_config config;
    config.out_dir = doc.value("out_dir", std::string("out"));
    config.seed = doc.value("seed", static_cast<std::uint64_t>(42));

    if (doc.contains("datasets")) {
        for (const auto& [name, spec] : doc["datasets"].items()) {
            dataset_ref ref;
            if (spec.is_string()) {
                ref.path = spec.get<std::string>();
            } else {
                ref.path = spec.value("path", std::string());
                if (spec.contains("schema")) ref.schema = schema_from_json(spec["schema"]);
            }
            config.datasets[name] = std::move(ref);
        }
    }

    if (doc.contains("label_schema")) {
        const json& ls = doc["label_schema"];
        if (ls.contains("class_names")) {
            config.labels.class_names = ls["class_names"].get<std::vector<std::string>>();
        }
        if (ls.contains("generator_to_class")) {
            config.labels.generator_to_class.clear();
            for (const auto& [gen, cls] : ls["generator_to_class"].items()) {
                config.labels.generator_to_class[gen] = cls.get<int>();
            }
        }
        config.labels.validate();
    }

    if (doc.contains("split")) {
        const json& sp = doc["split"];
        if (sp.contains("ratio")) {
            config.val_fraction = sp["ratio"].is_string()
                                      ? parse_split_ratio(sp["ratio"].get<std::string>())
                                      : sp["ratio"].get<double>();
        }
        if (sp.contains("seed")) config.seed = sp["seed"].get<std::uint64_t>();
    }

    if (doc.contains("tokenizer")) {
        const json& tk = doc["tokenizer"];
        const std::string mode = tk.value("mode", "unicode-word");
        if (mode == "character") {
            config.tokenizer.mode = tokenizer_config::split_mode::character;
        } else if (mode == "unicode-word") {
            config.tokenizer.mode = tokenizer_config::split_mode::unicode_word;
        } else {
            throw config_error("unknown tokenizer mode \"" + mode + "\"");
        }
        config.tokenizer.lowercase = tk.value("lowercase", true);
    }

    if (doc.contains("features")) {
        const json& ft = doc["features"];
        if (ft.contains("ngram_orders")) {
            config.features.ngram_orders =
                std::set<int>(ft["ngram_orders"].begin(), ft["ngram_orders"].end());
        }
        config.features.dim = ft.value("dim", config.features.dim);
        config.features.hash_seed = ft.value("hash_seed", config.features.hash_seed);
        const std::string tf = ft.value("tf_scaling", "log1p");
        if (tf == "raw-count") {
            config.features.tf_scaling = feature_config::tf_mode::raw_count;
        } else if (tf == "log1p") {
            config.features.tf_scaling = feature_config::tf_mode::log1p;
        } else {
            throw config_error("unknown tf_scaling \"" + tf + "\"");
        }
        config.features.max_tokens = ft.value("max_tokens", config.features.max_tokens);
        config.features.validate();
    }

    if (doc.contains("train")) {
        const json& tr = doc["train"];
        config.model_name = tr.value("name", config.model_name);
        config.train.epochs = tr.value("epochs", config.train.epochs);
        config.train.learning_rate = tr.value("learning_rate", config.train.learning_rate);
        config.train.batch_size = tr.value("batch_size", config.train.batch_size);
        config.train.l2 = tr.value("l2", config.train.l2);
        const std::string loss = tr.value("loss", "wce");
        if (loss == "ce" || loss == "CE") {
            config.train.loss = loss_kind::ce;
        } else if (loss == "wce" || loss == "WCE") {
            config.train.loss = loss_kind::wce;
        } else {
            throw config_error("unknown loss \"" + loss + "\" (want ce or wce)");
        }
        if (tr.contains("grid")) {
            const json& g = tr["grid"];
            if (g.contains("epochs")) config.grid.epochs = g["epochs"].get<std::vector<int>>();
            if (g.contains("learning_rate")) {
                config.grid.learning_rates = g["learning_rate"].get<std::vector<double>>();
            }
        }
        config.train.validate();
    }

    if (doc.contains("ensemble")) {
        const json& en = doc["ensemble"];
        if (en.contains("members")) {
            for (const auto& m : en["members"]) {
                config.members.emplace_back(m.get<std::string>());
            }
        }
        if (en.contains("selection_metric")) {
            config.metric = selection_metric_from_string(en["selection_metric"].get<std::string>());
        }
    }

    if (doc.contains("stats")) {
        const json& st = doc["stats"];
        config.bucket_width = st.value("bucket_width", config.bucket_width);
        if (st.contains("targets")) {
            config.stats_targets = st["targets"].get<std::vector<std::string>>();
        }
    }

    config.train.seed = config.seed;
    return config;
}

void cmd_merge(const run_config& config, std::ostream& out) {
    ensure_dirs(config);
    const std::vector<text_record> primary =
        load_labeled(config.require_dataset("primary"), config.labels);

    std::vector<text_record> supplement;
    if (const dataset_ref* ref = config.dataset("supplement")) {
        supplement = load_labeled(*ref, config.labels);
    }
    std::vector<text_record> holdout;
    if (const dataset_ref* ref = config.dataset("holdout")) {
        // Holdout only contributes text keys; labels are irrelevant here, so
        // unmapped generators in it must not fail the merge.
        holdout = load_dataset(ref->path, ref->schema);
    }

    const std::vector<text_record> merged = merge_and_dedup(primary, supplement, holdout);
    const class_counts counts = count_classes(merged);
    write_corpus_jsonl(merged_corpus_path(config), merged);

    out << "merged " << primary.size() << " primary + " << supplement.size()
        << " supplement records (holdout " << holdout.size() << ") -> " << merged.size()
        << " records\n";
    print_counts_summary(out, counts, config.labels.class_names);
    out << "wrote " << merged_corpus_path(config).string() << '\n';
}

void cmd_stats(const run_config& config, std::ostream& out) {
    ensure_dirs(config);
    std::vector<std::string> targets = config.stats_targets;
    if (targets.empty()) {
        targets.push_back(std::filesystem::exists(merged_corpus_path(config)) ? "merged"
                                                                              : "primary");
    }
    for (const std::string& target : targets) {
        std::vector<text_record> records;
        if (target == "merged") {
            records = load_merged(config);
        } else {
            const dataset_ref& ref = config.require_dataset(target);
            records = load_dataset(ref.path, ref.schema);
        }
        const std::vector<length_bucket> hist =
            token_length_histogram(records, config.bucket_width, config.tokenizer);

        const std::filesystem::path path =
            config.reports_dir() / ("token_length_" + sanitize_filename(target) + ".csv");
        std::ostringstream csv;
        csv << "bucket_lo,bucket_hi,count\n";
        for (const length_bucket& b : hist) {
            csv << b.lo << ',' << b.hi << ',' << b.count << '\n';
        }
        write_text_file(path, csv.str());
        out << target << ": " << records.size() << " records, " << hist.size()
            << " buckets -> " << path.string() << '\n';
    }
}

void cmd_split(const run_config& config, std::ostream& out) {
    ensure_dirs(config);
    const std::vector<text_record> records = load_merged(config);
    const split_assignment split = stratified_split(records, config.val_fraction, config.seed);
    write_split_csv(split_path(config), records, split);
    out << "split " << records.size() << " records -> " << split.train_ids.size() << " train, "
        << split.val_ids.size() << " val (val fraction " << config.val_fraction << ", seed "
        << config.seed << ")\n";
    out << "wrote " << split_path(config).string() << '\n';
}

namespace {

struct featurized_corpus {
    std::vector<example> train;
    std::vector<example> val;
    class_counts train_counts;
};

featurized_corpus featurize_splits(const run_config& config,
                                   const std::vector<text_record>& records,
                                   const split_assignment& split) {
    std::vector<std::string> texts(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) texts[i] = records[i].text;
    std::vector<feature_vector> vecs =
        kernels::featurize_texts(texts, config.tokenizer, config.features);

    featurized_corpus fc;
    std::vector<text_record> train_records;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const text_record& rec = records[i];
        example ex{std::move(vecs[i]), rec.label};
        if (split.val_ids.count(rec.id) > 0) {
            fc.val.push_back(std::move(ex));
        } else if (split.train_ids.count(rec.id) > 0) {
            fc.train.push_back(std::move(ex));
            train_records.push_back(rec);
        } else {
            throw data_error("record \"" + rec.id +
                             "\" is not in the split assignment; re-run `mgtd split`");
        }
    }
    if (fc.train.empty()) throw data_error("train split is empty");
    fc.train_counts = count_classes(train_records);
    return fc;
}

class_weights weights_for(const train_config& tc, const class_counts& counts) {
    if (tc.loss == loss_kind::wce) return compute_class_weights(counts);
    return class_weights::uniform(counts.num_classes());
}

softmax_model train_one(const run_config& config, const train_config& tc,
                        const featurized_corpus& fc, const std::string& name) {
    model_metadata meta;
    meta.features = config.features;
    meta.tokenizer = config.tokenizer;
    meta.label_schema_digest = config.labels.digest();
    meta.class_names = config.labels.class_names;
    meta.model_id = name;

    const class_weights weights = weights_for(tc, fc.train_counts);

    const std::filesystem::path log_path =
        config.reports_dir() / ("train_metrics_" + sanitize_filename(name) + ".log");
    std::ofstream log(log_path);
    if (!log) throw error("cannot write metrics log: " + log_path.string());
    log << "# epoch mean_loss train_acc val_acc\n";

    train_options options;
    options.val = &fc.val;
    options.metrics_log = &log;
    return train(fc.train, tc, weights, meta, options);
}

}  // namespace

void cmd_train(const run_config& config, std::ostream& out) {
    ensure_dirs(config);
    const std::vector<text_record> records = load_merged(config);
    if (!std::filesystem::exists(split_path(config))) {
        throw config_error("no split assignment at " + split_path(config).string() +
                           "; run `mgtd split` first");
    }
    const split_assignment split = read_split_csv(split_path(config));
    const featurized_corpus fc = featurize_splits(config, records, split);

    std::vector<int> epoch_grid = config.grid.epochs;
    std::vector<double> lr_grid = config.grid.learning_rates;
    const bool grid_mode = !config.grid.empty();
    if (epoch_grid.empty()) epoch_grid.push_back(config.train.epochs);
    if (lr_grid.empty()) lr_grid.push_back(config.train.learning_rate);

    const bool single_cell = epoch_grid.size() == 1 && lr_grid.size() == 1;
    std::vector<comparison_row> rows;
    for (int epochs : epoch_grid) {
        for (double lr : lr_grid) {
            train_config tc = config.train;
            tc.epochs = epochs;
            tc.learning_rate = lr;

            const std::string name =
                single_cell ? config.model_name
                            : config.model_name + "_e" + std::to_string(epochs) + "_lr" +
                                  format_lr(lr);
            const softmax_model model = train_one(config, tc, fc, name);
            const std::filesystem::path model_path =
                config.models_dir() / (sanitize_filename(name) + ".json");
            save_model(model, model_path);

            const double val_acc = fc.val.empty() ? 0.0 : accuracy_on(model, fc.val);
            std::ostringstream cfg;
            cfg << "epochs=" << epochs << " lr=" << format_lr(lr) << " loss="
                << (tc.loss == loss_kind::wce ? "wce" : "ce");
            rows.push_back({name, cfg.str(), val_acc});

            out << name << ": final loss "
                << (model.meta.loss_history.empty() ? 0.0 : model.meta.loss_history.back())
                << ", val accuracy " << std::fixed << std::setprecision(4) << val_acc
                << std::defaultfloat << " -> " << model_path.string() << '\n';
        }
    }

    if (grid_mode) {
        const rendered_table table = comparison_table(rows);
        write_text_file(config.reports_dir() / "train_grid.txt", table.text);
        write_text_file(config.reports_dir() / "train_grid.csv", table.csv);
        out << table.text;
        out << "wrote " << (config.reports_dir() / "train_grid.csv").string() << '\n';
    }
}

void cmd_predict(const run_config& config, std::ostream& out) {
    ensure_dirs(config);

    // Imported matrices do not need the eval corpus; native models do.
    std::vector<text_record> eval_records;
    bool have_eval = false;
    if (const dataset_ref* ref = config.dataset("eval")) {
        eval_records = load_labeled(*ref, config.labels);
        have_eval = true;
    }
    const std::vector<member_matrix> matrices =
        collect_matrices(config, have_eval ? &eval_records : nullptr);

    for (const member_matrix& mm : matrices) {
        const std::filesystem::path path =
            config.matrices_dir() / (sanitize_filename(mm.matrix.model_id) + ".jsonl");
        write_prob_matrix(path, mm.matrix);
        out << mm.matrix.model_id << ": " << mm.matrix.rows() << " rows -> " << path.string()
            << '\n';
    }
}

void cmd_ensemble(const run_config& config, std::ostream& out) {
    ensure_dirs(config);
    const std::vector<text_record> eval_records =
        load_labeled(config.require_dataset("eval"), config.labels);
    std::unordered_map<std::string, int> gold_by_id;
    for (const text_record& rec : eval_records) gold_by_id.emplace(rec.id, rec.label);

    const std::vector<member_matrix> matrices = collect_matrices(config, &eval_records);

    // Per-member confusion matrices drive the per-class selection.
    std::vector<std::pair<std::string, confusion_matrix>> candidates;
    std::unordered_map<std::string, const prob_matrix*> by_id;
    std::vector<eval_report> member_reports;
    for (const member_matrix& mm : matrices) {
        const std::vector<int> preds = decide(mm.matrix);
        const std::vector<int> golds = golds_for(mm.matrix, gold_by_id);
        candidates.emplace_back(mm.matrix.model_id, confusion(preds, golds, kNumClasses));
        member_reports.push_back(evaluate(preds, golds, mm.matrix.model_id));
        by_id[mm.matrix.model_id] = &mm.matrix;
    }

    const ensemble_spec spec = select_members(candidates, config.metric);
    write_ensemble_spec(config.reports_dir() / "ensemble_spec.json", spec);

    double best_single = 0.0;
    for (const eval_report& r : member_reports) best_single = std::max(best_single, r.accuracy);

    std::vector<ensemble_table_row> table_rows;
    table_rows.push_back({"best single model", {}, {}, best_single});

    // Cumulative prefixes of the selected members give the 2..M row groups.
    prob_matrix voted;
    eval_report final_report;
    std::vector<prob_matrix> pool;
    for (std::size_t k = 0; k < spec.members.size(); ++k) {
        pool.push_back(*by_id.at(spec.members[k]));
        voted = soft_vote(pool);
        const std::vector<int> preds = decide(voted);
        const std::vector<int> golds = golds_for(voted, gold_by_id);
        final_report = evaluate(preds, golds, voted.model_id);
        if (k >= 1) {
            ensemble_table_row row;
            row.label = std::to_string(k + 1) + "-model ensemble";
            row.member_ids = std::vector<std::string>(spec.members.begin(),
                                                      spec.members.begin() +
                                                          static_cast<std::ptrdiff_t>(k + 1));
            for (const std::string& m : row.member_ids) row.excels_in[m] = spec.excels_in.at(m);
            row.accuracy = final_report.accuracy;
            table_rows.push_back(std::move(row));
        }
    }

    write_prob_matrix(config.matrices_dir() / "ensemble.jsonl", voted);
    write_text_file(config.reports_dir() / "ensemble_report.txt",
                    report_text(final_report, config.labels.class_names));
    write_text_file(config.reports_dir() / "ensemble_report.csv",
                    report_csv(final_report, config.labels.class_names));
    const rendered_table table = ensemble_table(table_rows);
    write_text_file(config.reports_dir() / "ensemble_table.txt", table.text);
    write_text_file(config.reports_dir() / "ensemble_table.csv", table.csv);

    out << "members (" << spec.members.size() << "):";
    for (const std::string& m : spec.members) out << ' ' << m;
    out << '\n';
    out << table.text;
    out << "ensemble accuracy: " << std::fixed << std::setprecision(4) << final_report.accuracy
        << std::defaultfloat << " over " << final_report.n << " texts\n";
    out << "wrote " << (config.reports_dir() / "ensemble_report.txt").string() << '\n';
}

void cmd_evaluate(const run_config& config, std::ostream& out) {
    ensure_dirs(config);
    const std::vector<text_record> eval_records =
        load_labeled(config.require_dataset("eval"), config.labels);
    std::unordered_map<std::string, int> gold_by_id;
    for (const text_record& rec : eval_records) gold_by_id.emplace(rec.id, rec.label);

    const std::vector<member_matrix> matrices = collect_matrices(config, &eval_records);

    std::vector<comparison_row> rows;
    for (const member_matrix& mm : matrices) {
        const std::vector<int> preds = decide(mm.matrix);
        const std::vector<int> golds = golds_for(mm.matrix, gold_by_id);
        const eval_report report = evaluate(preds, golds, mm.matrix.model_id);

        const std::string base = "eval_" + sanitize_filename(mm.matrix.model_id);
        write_text_file(config.reports_dir() / (base + ".txt"),
                        report_text(report, config.labels.class_names));
        write_text_file(config.reports_dir() / (base + ".csv"),
                        report_csv(report, config.labels.class_names));
        rows.push_back({mm.matrix.model_id, mm.source.filename().string(), report.accuracy});
        out << report_text(report, config.labels.class_names) << '\n';
    }
    if (rows.size() > 1) {
        const rendered_table table = comparison_table(rows);
        write_text_file(config.reports_dir() / "evaluate.txt", table.text);
        write_text_file(config.reports_dir() / "evaluate.csv", table.csv);
        out << table.text;
    }
}

}  // namespace mgtd
