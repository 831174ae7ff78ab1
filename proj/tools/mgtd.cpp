#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mgtd/corpus.hpp"
#include "mgtd/error.hpp"
#include "mgtd/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"mgtd - detects which generator (human or one of five LLMs) produced a text"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "run config file (JSON)")->required();
    std::optional<std::uint64_t> seed;
    app.add_option("--seed", seed, "override the run seed");
    std::optional<std::string> out_dir;
    app.add_option("--out-dir", out_dir, "override the output directory");
    std::optional<std::string> ratio;
    app.add_option("--ratio", ratio, "train:val split ratio, e.g. 8:2");
    std::optional<int> epochs;
    app.add_option("--epochs", epochs, "override train.epochs");
    std::optional<double> learning_rate;
    app.add_option("--learning-rate", learning_rate, "override train.learning_rate");
    std::optional<int> batch_size;
    app.add_option("--batch-size", batch_size, "override train.batch_size");
    std::optional<std::string> loss;
    app.add_option("--loss", loss, "ce or wce");
    std::optional<std::string> model_name;
    app.add_option("--model-name", model_name, "override the trained model's name");
    std::optional<std::int64_t> bucket_width;
    app.add_option("--bucket-width", bucket_width, "histogram bucket width");
    std::optional<std::string> metric;
    app.add_option("--metric", metric, "member selection metric (per-class-recall or per-class-F1)");
    std::vector<std::string> members;
    app.add_option("--member", members, "member source (model or matrix file); repeatable");

    CLI::App* c_merge = app.add_subcommand("merge", "unify primary+supplement, dedup, drop holdout keys");
    CLI::App* c_stats = app.add_subcommand("stats", "token-length histograms");
    CLI::App* c_split = app.add_subcommand("split", "stratified train/val split");
    CLI::App* c_train = app.add_subcommand("train", "train the softmax classifier (optionally over a grid)");
    CLI::App* c_predict = app.add_subcommand("predict", "emit probability matrices for member sources");
    CLI::App* c_ensemble = app.add_subcommand("ensemble", "select members, soft-vote, evaluate");
    CLI::App* c_evaluate = app.add_subcommand("evaluate", "evaluate member sources against the eval set");
    for (CLI::App* sub : {c_merge, c_stats, c_split, c_train, c_predict, c_ensemble, c_evaluate}) {
        sub->fallthrough();
    }

    CLI11_PARSE(app, argc, argv);

    try {
        mgtd::run_config config = mgtd::load_run_config(config_path);
        if (const char* env = std::getenv("MGTD_OUT_ROOT")) config.out_dir = env;
        if (out_dir) config.out_dir = *out_dir;
        if (seed) {
            config.seed = *seed;
            config.train.seed = *seed;
        }
        if (ratio) config.val_fraction = mgtd::parse_split_ratio(*ratio);
        if (epochs) config.train.epochs = *epochs;
        if (learning_rate) config.train.learning_rate = *learning_rate;
        if (batch_size) config.train.batch_size = *batch_size;
        if (loss) {
            if (*loss == "ce" || *loss == "CE") {
                config.train.loss = mgtd::loss_kind::ce;
            } else if (*loss == "wce" || *loss == "WCE") {
                config.train.loss = mgtd::loss_kind::wce;
            } else {
                throw mgtd::config_error("unknown loss \"" + *loss + "\" (want ce or wce)");
            }
        }
        if (model_name) config.model_name = *model_name;
        if (bucket_width) config.bucket_width = *bucket_width;
        if (metric) config.metric = mgtd::selection_metric_from_string(*metric);
        if (!members.empty()) {
            config.members.clear();
            for (const std::string& m : members) config.members.emplace_back(m);
        }
        config.train.validate();

        if (c_merge->parsed()) mgtd::cmd_merge(config, std::cout);
        if (c_stats->parsed()) mgtd::cmd_stats(config, std::cout);
        if (c_split->parsed()) mgtd::cmd_split(config, std::cout);
        if (c_train->parsed()) mgtd::cmd_train(config, std::cout);
        if (c_predict->parsed()) mgtd::cmd_predict(config, std::cout);
        if (c_ensemble->parsed()) mgtd::cmd_ensemble(config, std::cout);
        if (c_evaluate->parsed()) mgtd::cmd_evaluate(config, std::cout);
    } catch (const mgtd::error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
