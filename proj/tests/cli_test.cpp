// Drives the installed mgtd binary (path in MGTD_BIN) end to end.
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include <gtest/gtest.h>

#include "mgtd/corpus.hpp"
#include "mgtd/ensemble.hpp"
#include "test_util.hpp"

using namespace mgtd;
using mgtd::testing::marker_corpus;
using mgtd::testing::read_file;
using mgtd::testing::temp_dir;
using mgtd::testing::write_file;
using mgtd::testing::write_jsonl;

namespace {

mgtd::testing::cli_result run_cli(const temp_dir& dir, const std::string& args) {
    return mgtd::testing::run_cli(dir.path(), args);
}

std::filesystem::path write_fixture(const temp_dir& dir, int per_class, std::uint64_t seed) {
    const auto corpus = marker_corpus(per_class, 6, seed);
    write_jsonl(dir.file("primary.jsonl"), corpus, /*with_generator=*/true);
    auto eval_corpus = marker_corpus(per_class / 2, 6, seed + 500);
    for (auto& rec : eval_corpus) rec.id = "ev_" + rec.id;
    write_jsonl(dir.file("eval.jsonl"), eval_corpus);

    nlohmann::json doc{
        {"out_dir", (dir.path() / "out").string()},
        {"seed", 42},
        {"datasets",
         {{"primary", (dir.path() / "primary.jsonl").string()},
          {"holdout", (dir.path() / "eval.jsonl").string()},
          {"eval", (dir.path() / "eval.jsonl").string()}}},
        {"features", {{"dim", 1 << 14}}},
        {"train", {{"epochs", 3}, {"learning_rate", 0.5}, {"batch_size", 32}}},
        {"stats", {{"bucket_width", 5}, {"targets", {"merged", "eval"}}}},
    };
    const auto path = dir.file("config.json");
    write_file(path, doc.dump(2));
    return path;
}

}  // namespace

TEST(Cli, FullPipelineRunsGreen) {
    temp_dir dir("cli");
    const auto config = write_fixture(dir, 20, 3);
    const std::string base = "--config " + config.string() + " ";

    auto merge = run_cli(dir, "merge " + base);
    ASSERT_EQ(merge.exit_code, 0) << merge.output;
    EXPECT_NE(merge.output.find("total"), std::string::npos);

    auto stats = run_cli(dir, "stats " + base);
    ASSERT_EQ(stats.exit_code, 0) << stats.output;
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "out/reports/token_length_merged.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "out/reports/token_length_eval.csv"));

    auto split = run_cli(dir, "split " + base);
    ASSERT_EQ(split.exit_code, 0) << split.output;

    auto train = run_cli(dir, "train " + base);
    ASSERT_EQ(train.exit_code, 0) << train.output;
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "out/models/softmax.json"));

    const std::string member =
        " --member " + (dir.path() / "out/models/softmax.json").string();
    auto predict = run_cli(dir, "predict " + base + member);
    ASSERT_EQ(predict.exit_code, 0) << predict.output;
    const auto matrix = read_prob_matrix(dir.path() / "out/matrices/softmax.jsonl");
    EXPECT_EQ(matrix.rows(), 60u);

    auto ensemble = run_cli(dir, "ensemble " + base + member);
    ASSERT_EQ(ensemble.exit_code, 0) << ensemble.output;
    EXPECT_NE(ensemble.output.find("ensemble accuracy"), std::string::npos);

    auto evaluate = run_cli(dir, "evaluate " + base + member);
    ASSERT_EQ(evaluate.exit_code, 0) << evaluate.output;
    EXPECT_NE(evaluate.output.find("accuracy"), std::string::npos);
}

TEST(Cli, NonzeroExitAndMessageOnErrors) {
    temp_dir dir("cli");
    const auto config = write_fixture(dir, 4, 5);
    const std::string base = "--config " + config.string() + " ";

    // split before merge: missing artifact
    auto premature = run_cli(dir, "split " + base);
    EXPECT_NE(premature.exit_code, 0);
    EXPECT_NE(premature.output.find("error:"), std::string::npos) << premature.output;

    // unmapped generator
    write_file(dir.file("bad.jsonl"),
               "{\"id\":\"b1\",\"text\":\"some text\",\"model\":\"gpt4\"}\n");
    write_file(dir.file("bad_config.json"), nlohmann::json{
        {"out_dir", (dir.path() / "out2").string()},
        {"datasets", {{"primary", dir.file("bad.jsonl").string()}}}}.dump());
    auto unmapped = run_cli(dir, "merge --config " + dir.file("bad_config.json").string());
    EXPECT_NE(unmapped.exit_code, 0);
    EXPECT_NE(unmapped.output.find("gpt4"), std::string::npos) << unmapped.output;

    // missing config file
    auto noconf = run_cli(dir, "merge --config " + dir.file("nope.json").string());
    EXPECT_NE(noconf.exit_code, 0);

    // unknown subcommand
    auto nocmd = run_cli(dir, "frobnicate --config " + config.string());
    EXPECT_NE(nocmd.exit_code, 0);
}

TEST(Cli, SeedFlagOverridesConfig) {
    temp_dir dir("cli");
    const auto config = write_fixture(dir, 10, 7);
    const std::string base = "--config " + config.string() + " ";
    ASSERT_EQ(run_cli(dir, "merge " + base).exit_code, 0);
    ASSERT_EQ(run_cli(dir, "split " + base).exit_code, 0);
    const auto split_42 = read_file(dir.path() / "out/corpus/split.csv");
    ASSERT_EQ(run_cli(dir, "split " + base + " --seed 43").exit_code, 0);
    const auto split_43 = read_file(dir.path() / "out/corpus/split.csv");
    EXPECT_NE(split_42, split_43);
    ASSERT_EQ(run_cli(dir, "split " + base + " --seed 42").exit_code, 0);
    EXPECT_EQ(read_file(dir.path() / "out/corpus/split.csv"), split_42);
}

TEST(Cli, OutDirEnvAndFlagPrecedence) {
    temp_dir dir("cli");
    const auto config = write_fixture(dir, 6, 9);

    // env var overrides config out_dir
    const auto env_out = dir.path() / "env_out";
    setenv("MGTD_OUT_ROOT", env_out.string().c_str(), 1);
    auto merged = run_cli(dir, "merge --config " + config.string());
    unsetenv("MGTD_OUT_ROOT");
    ASSERT_EQ(merged.exit_code, 0) << merged.output;
    EXPECT_TRUE(std::filesystem::exists(env_out / "corpus/merged.jsonl"));

    // --out-dir beats the env var
    const auto flag_out = dir.path() / "flag_out";
    setenv("MGTD_OUT_ROOT", (dir.path() / "ignored").string().c_str(), 1);
    auto flagged = run_cli(dir, "merge --config " + config.string() + " --out-dir " +
                                    flag_out.string());
    unsetenv("MGTD_OUT_ROOT");
    ASSERT_EQ(flagged.exit_code, 0) << flagged.output;
    EXPECT_TRUE(std::filesystem::exists(flag_out / "corpus/merged.jsonl"));
    EXPECT_FALSE(std::filesystem::exists(dir.path() / "ignored/corpus/merged.jsonl"));
}

TEST(Cli, RatioFlagChangesSplit) {
    temp_dir dir("cli");
    const auto config = write_fixture(dir, 10, 11);
    const std::string base = "--config " + config.string() + " ";
    ASSERT_EQ(run_cli(dir, "merge " + base).exit_code, 0);
    ASSERT_EQ(run_cli(dir, "split " + base + " --ratio 7:3").exit_code, 0);
    const auto split = read_split_csv(dir.path() / "out/corpus/split.csv");
    EXPECT_EQ(split.val_ids.size(), 18u);  // 10/class: llround(0.3*10)=3 -> 3*6
    EXPECT_EQ(split.train_ids.size(), 42u);
}
