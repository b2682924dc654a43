#include "xtail/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "xtail/report.hpp"

namespace xtail {
namespace {

int run_quiet(const std::vector<std::string>& args) {
    ::testing::internal::CaptureStdout();
    ::testing::internal::CaptureStderr();
    const int rc = cli::run(args);
    ::testing::internal::GetCapturedStdout();
    ::testing::internal::GetCapturedStderr();
    return rc;
}

int run_capture_stderr(const std::vector<std::string>& args, std::string* err) {
    ::testing::internal::CaptureStdout();
    ::testing::internal::CaptureStderr();
    const int rc = cli::run(args);
    ::testing::internal::GetCapturedStdout();
    *err = ::testing::internal::GetCapturedStderr();
    return rc;
}

std::vector<std::string> small_run(const std::string& workdir,
                                   std::vector<std::string> tail) {
    std::vector<std::string> args = {
        "--workdir", workdir,
        "--set", "synth.labels=20",
        "--set", "synth.train_docs=150",
        "--set", "synth.test_docs=40",
        "--set", "synth.vocab=400",
        "--set", "svm.epochs=3",
        "--set", "keywords.top_k=5",
        "--set", "encoder.dim=16",
        "--set", "encoder.epochs=1",
        "--set", "encoder.pretrain_epochs=1",
        "--set", "encoder.label_pool=12",
        "--set", "encoder.hard_negatives=3",
        "--set", "theory.dims=16,32",
        "--set", "theory.trials=200",
    };
    args.insert(args.end(), tail.begin(), tail.end());
    return args;
}

TEST(Cli, PipelineEndToEndIsDeterministic) {
    test::TempDir dir("cli");
    const std::string wd = (dir / "run").string();

    ASSERT_EQ(run_quiet(small_run(wd, {"synth"})), 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "run/data/train.jsonl"));
    EXPECT_TRUE(std::filesystem::exists(dir / "run/data/test.jsonl"));
    EXPECT_TRUE(std::filesystem::exists(dir / "run/data/labels.tsv"));

    ASSERT_EQ(run_quiet(small_run(wd, {"train-sparse"})), 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "run/model/sparse.bin"));
    EXPECT_TRUE(std::filesystem::exists(dir / "run/model/sparse_top_weights.tsv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "run/pred/sparse.tsv"));

    ASSERT_EQ(run_quiet(small_run(wd, {"keywords"})), 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "run/model/pseudo_labels.tsv"));

    ASSERT_EQ(run_quiet(small_run(wd, {"train-encoder", "--mode", "kde"})), 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "run/model/encoder_kde.bin"));
    EXPECT_TRUE(std::filesystem::exists(dir / "run/pred/kde.tsv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "run/pred/final.tsv"));

    const std::string pred = (dir / "run/pred/final.tsv").string();
    ASSERT_EQ(run_quiet(small_run(wd, {"eval", "--pred", pred})), 0);
    const auto report_path = dir / "run/report/final.json";
    ASSERT_TRUE(std::filesystem::exists(report_path));
    const nlohmann::ordered_json report = read_report(report_path);
    EXPECT_EQ(report["documents"], 40);
    EXPECT_EQ(report["labels"], 20);
    EXPECT_TRUE(report["micro"].contains("P@1"));
    EXPECT_TRUE(report["micro"].contains("PSP@5"));

    // Retraining and re-evaluating must reproduce every byte.
    const std::string sparse_bytes = test::slurp(dir / "run/model/sparse.bin");
    const std::string report_bytes = test::slurp(report_path);
    ASSERT_EQ(run_quiet(small_run(wd, {"train-sparse"})), 0);
    EXPECT_EQ(test::slurp(dir / "run/model/sparse.bin"), sparse_bytes);
    ASSERT_EQ(run_quiet(small_run(wd, {"eval", "--pred", pred})), 0);
    EXPECT_EQ(test::slurp(report_path), report_bytes);

    // Prediction rows may arrive in any order; alignment is by document id.
    std::vector<std::string> lines;
    {
        std::ifstream in(pred);
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
    }
    ASSERT_GT(lines.size(), 2u);
    std::rotate(lines.begin(), lines.begin() + 7, lines.end());
    const std::string shuffled = (dir / "run/pred/final_shuffled.tsv").string();
    {
        std::ofstream out(shuffled, std::ios::binary);
        for (const std::string& line : lines) out << line << '\n';
    }
    ASSERT_EQ(run_quiet(small_run(
                  wd, {"eval", "--pred", shuffled, "--out",
                       (dir / "run/report/shuffled.json").string()})),
              0);
    EXPECT_EQ(test::slurp(dir / "run/report/shuffled.json"), report_bytes);

    // A baseline identical to the candidate ties on every label, which the
    // sign test rejects for lack of informative pairs.
    std::string err;
    EXPECT_EQ(run_capture_stderr(
                  small_run(wd, {"eval", "--pred", pred, "--baseline", pred}), &err),
              1);
    EXPECT_TRUE(err.starts_with("error: data: sign test needs at least")) << err;

    ASSERT_EQ(run_quiet(small_run(wd, {"theory"})), 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "run/theory/sweep.json"));
    EXPECT_TRUE(std::filesystem::exists(dir / "run/theory/sweep.tsv"));
    const nlohmann::ordered_json sweep = read_report(dir / "run/theory/sweep.json");
    ASSERT_EQ(sweep["jl"].size(), 2u);
    EXPECT_EQ(sweep["jl"][0]["dim"], 16);
    EXPECT_EQ(sweep["jl"][1]["dim"], 32);
    EXPECT_EQ(sweep["pair"].size(), 2u);
    EXPECT_EQ(sweep["union"].size(), 2u);
    EXPECT_EQ(sweep["gap_requirement"].size(), 2u);
    EXPECT_EQ(sweep["trials"], 200);

    ASSERT_EQ(run_quiet(small_run(wd, {"report"})), 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "run/report/summary.json"));
    EXPECT_TRUE(std::filesystem::exists(dir / "run/report/summary.tsv"));
}

TEST(Cli, SeedPrecedenceEnvThenSetThenFlag) {
    test::TempDir dir("cliseed");
    const std::vector<std::string> sizes = {
        "--set", "synth.labels=8",    "--set", "synth.train_docs=40",
        "--set", "synth.test_docs=10", "--set", "synth.vocab=200",
    };
    const auto synth_with = [&](const std::string& wd,
                                std::vector<std::string> extra) {
        std::vector<std::string> args = {"synth", "--workdir", wd};
        args.insert(args.end(), sizes.begin(), sizes.end());
        args.insert(args.end(), extra.begin(), extra.end());
        return run_quiet(args);
    };

    ASSERT_EQ(synth_with((dir / "flag7").string(), {"--seed", "7"}), 0);
    ::setenv("XTAIL_SEED", "1", 1);
    ASSERT_EQ(synth_with((dir / "env_flag7").string(), {"--seed", "7"}), 0);
    ASSERT_EQ(synth_with((dir / "env1").string(), {}), 0);
    ASSERT_EQ(synth_with((dir / "env_set5").string(), {"--set", "seed=5"}), 0);
    ::unsetenv("XTAIL_SEED");
    ASSERT_EQ(synth_with((dir / "flag1").string(), {"--seed", "1"}), 0);
    ASSERT_EQ(synth_with((dir / "set5").string(), {"--set", "seed=5"}), 0);

    const auto train = [&](const std::string& name) {
        return test::slurp(dir / (name + "/data/train.jsonl"));
    };
    // The --seed flag beats the environment.
    EXPECT_EQ(train("env_flag7"), train("flag7"));
    // The environment alone acts as the seed.
    EXPECT_EQ(train("env1"), train("flag1"));
    // A --set assignment beats the environment.
    EXPECT_EQ(train("env_set5"), train("set5"));
    // And different seeds genuinely differ.
    EXPECT_NE(train("flag1"), train("flag7"));
}

TEST(Cli, ErrorsBecomeSingleStderrLinesWithExitOne) {
    test::TempDir dir("clierr");
    std::string err;
    EXPECT_EQ(run_capture_stderr({"--workdir", (dir / "w").string(), "eval", "--pred",
                                  (dir / "nope.tsv").string()},
                                 &err),
              1);
    EXPECT_TRUE(err.starts_with("error: io: ")) << err;
    EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1);

    EXPECT_EQ(run_capture_stderr(
                  {"synth", "--workdir", (dir / "w").string(), "--set", "nope=1"}, &err),
              1);
    EXPECT_EQ(err, "error: config: unknown config key 'nope'\n");

    EXPECT_EQ(run_capture_stderr(
                  {"synth", "--workdir", (dir / "w").string(), "--set", "bare"}, &err),
              1);
    EXPECT_EQ(err, "error: config: --set expects key=value, got 'bare'\n");

    // Missing required options are CLI usage errors with a nonzero status.
    EXPECT_NE(run_quiet({"eval"}), 0);
    EXPECT_NE(run_quiet({}), 0);
    EXPECT_NE(run_quiet({"train-encoder", "--mode", "deep", "--workdir",
                         (dir / "w").string()}),
              0);
}

}  // namespace
}  // namespace xtail
