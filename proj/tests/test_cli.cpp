// End-to-end checks of the command-line pipeline running the real binaries.

#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "mute/codebook.hpp"
#include "mute/confusion.hpp"
#include "mute/dataset.hpp"
#include "mute/mlp.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string stdout_text;
};

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("mute_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    static RunResult run(const std::string& args) {
        RunResult r;
        std::string out_file = (fs::temp_directory_path() / "mute_cli_stdout.txt").string();
        std::string cmd = std::string(MUTE_CLI_PATH) + " " + args + " >" + out_file + " 2>&1";
        int status = std::system(cmd.c_str());
        r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        std::ifstream in(out_file);
        r.stdout_text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
        return r;
    }

    static int run_blobgen(const std::string& args) {
        std::string cmd = std::string(MUTE_BLOBGEN_PATH) + " " + args + " >/dev/null 2>&1";
        int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    static std::string slurp(const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    }

    void make_dataset(const std::string& train, const std::string& test) const {
        ASSERT_EQ(run_blobgen("--classes 3 --dim 4 --per-class 40 --test-per-class 20 --spread 0.06 "
                              "--seed 6 --out " + train + " --test-out " + test),
                  0);
    }

    fs::path dir_;
};

} // namespace

TEST_F(CliTest, GenExactFourFourTwo) {
    auto r = run("gen --classes 4 --bits 4 --k 2 --uniform --exact --seed 1 --out " + path("cb.json"));
    ASSERT_EQ(r.exit_code, 0) << r.stdout_text;
    auto result = nlohmann::json::parse(slurp(path("cb.result.json")));
    EXPECT_DOUBLE_EQ(result["objective"].get<double>(), 16.0);
    auto cb = mute::load_codebook(path("cb.json"));
    EXPECT_EQ(cb.n_bits, 4);
    EXPECT_EQ(cb.provenance, mute::Provenance::optimized_unweighted);
}

TEST_F(CliTest, GenCanExportTheLpModel) {
    auto r = run("gen --classes 2 --bits 2 --k 1 --uniform --out " + path("cb.json") +
                 " --export-lp " + path("model.lp"));
    ASSERT_EQ(r.exit_code, 0) << r.stdout_text;
    auto lp = slurp(path("model.lp"));
    EXPECT_NE(lp.find("Maximize"), std::string::npos);
    EXPECT_NE(lp.find("pop_1: x_1_0 + x_1_1 = 1"), std::string::npos);
    EXPECT_NE(lp.find("Binary"), std::string::npos);
}

TEST_F(CliTest, GenInfeasibleExitsTwo) {
    auto r = run("gen --classes 3 --bits 2 --k 1 --uniform --out " + path("cb.json"));
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_FALSE(fs::exists(path("cb.json")));
}

TEST_F(CliTest, GenTenClassFourHotKeepsMinDistance) {
    // confusion-derived weights, then the 10-bit 4-hot generation
    mute::ConfusionMatrix cm(10);
    for (int i = 0; i < 10; ++i) cm.at(i, i) = 80;
    cm.at(3, 5) = 20;
    cm.at(5, 3) = 15;
    cm.at(1, 7) = 10;
    mute::save_confusion_csv(cm, path("cm.csv"));
    ASSERT_EQ(run("weights --confusion " + path("cm.csv") + " --floor 0.05 --out " + path("w.csv")).exit_code, 0);

    auto r = run("gen --classes 10 --bits 10 --k 4 --weights " + path("w.csv") +
                 " --seed 1 --out " + path("cb.json"));
    ASSERT_EQ(r.exit_code, 0) << r.stdout_text;
    auto cb = mute::load_codebook(path("cb.json"));
    EXPECT_GE(mute::min_pairwise_distance(cb), 4);
    auto result = nlohmann::json::parse(slurp(path("cb.result.json")));
    EXPECT_GE(result["min_distance"].get<int>(), 4);
}

TEST_F(CliTest, GenShuffleOnlyMode) {
    mute::save_weights_csv(mute::confusion_to_weights([] {
                               mute::ConfusionMatrix cm(6);
                               for (int i = 0; i < 6; ++i) cm.at(i, i) = 50;
                               cm.at(0, 1) = 30;
                               cm.at(1, 0) = 30;
                               return cm;
                           }()),
                           path("w.csv"));
    auto r = run("gen --classes 6 --bits 6 --k 2 --weights " + path("w.csv") +
                 " --shuffle-only --seed 2 --out " + path("cb.json"));
    ASSERT_EQ(r.exit_code, 0) << r.stdout_text;
    EXPECT_EQ(mute::load_codebook(path("cb.json")).provenance, mute::Provenance::optimized_weighted);
}

TEST_F(CliTest, BaselineVariants) {
    ASSERT_EQ(run("baseline --hadamard 6 --classes 10 --out " + path("h.json")).exit_code, 0);
    auto h = mute::load_codebook(path("h.json"));
    EXPECT_EQ(h.n_bits, 63);

    ASSERT_EQ(run("baseline --onehot --classes 10 --out " + path("oh.json")).exit_code, 0);
    auto oh = mute::load_codebook(path("oh.json"));
    EXPECT_EQ(oh.codes.size(), 10u);
    EXPECT_EQ(oh.k_hot, 1);

    EXPECT_EQ(run("baseline --hadamard 2 --classes 5 --out " + path("bad.json")).exit_code, 2);
    EXPECT_FALSE(fs::exists(path("bad.json")));

    ASSERT_EQ(run("baseline --random 4 --classes 10 --seed 3 --out " + path("r.json")).exit_code, 0);
    EXPECT_EQ(mute::load_codebook(path("r.json")).provenance, mute::Provenance::random);
}

TEST_F(CliTest, WeightsUniformAndDegenerate) {
    ASSERT_EQ(run("weights --uniform --classes 4 --out " + path("w.csv")).exit_code, 0);
    auto w = mute::load_weights_csv(path("w.csv"));
    EXPECT_EQ(w.size(), 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(w(i, j), i == j ? 0.0 : 1.0);

    mute::ConfusionMatrix diag(3);
    for (int i = 0; i < 3; ++i) diag.at(i, i) = 5;
    mute::save_confusion_csv(diag, path("diag.csv"));
    ASSERT_EQ(run("weights --confusion " + path("diag.csv") + " --floor 0.1 --out " + path("wd.csv")).exit_code, 0);
    auto wd = mute::load_weights_csv(path("wd.csv"));
    EXPECT_DOUBLE_EQ(wd(0, 1), 1.0);

    EXPECT_NE(run("weights --confusion " + path("diag.csv") + " --floor 0 --out " + path("bad.csv")).exit_code, 0);
    EXPECT_FALSE(fs::exists(path("bad.csv")));
}

TEST_F(CliTest, TrainZeroRateKeepsInitialParameters) {
    make_dataset(path("train.csv"), path("test.csv"));
    ASSERT_EQ(run("baseline --onehot --classes 3 --out " + path("cb.json")).exit_code, 0);
    ASSERT_EQ(run("train --data " + path("train.csv") + " --codebook " + path("cb.json") +
                  " --lr 0 --wd 0 --epochs 1 --seed 9 --out " + path("m1.json"))
                  .exit_code,
              0);
    ASSERT_EQ(run("train --data " + path("train.csv") + " --codebook " + path("cb.json") +
                  " --lr 0 --wd 0 --epochs 7 --seed 9 --out " + path("m7.json"))
                  .exit_code,
              0);
    EXPECT_EQ(slurp(path("m1.json")), slurp(path("m7.json")));
}

TEST_F(CliTest, TrainDeterministicAndTraceFooter) {
    make_dataset(path("train.csv"), path("test.csv"));
    ASSERT_EQ(run("baseline --onehot --classes 3 --out " + path("cb.json")).exit_code, 0);
    std::string flags = " --data " + path("train.csv") + " --codebook " + path("cb.json") +
                        " --epochs 40 --batch 32 --seed 4 ";
    ASSERT_EQ(run("train" + flags + "--out " + path("a.json") + " --trace " + path("a.csv")).exit_code, 0);
    ASSERT_EQ(run("train" + flags + "--out " + path("b.json") + " --trace " + path("b.csv")).exit_code, 0);
    EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
    EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
    EXPECT_NE(slurp(path("a.csv")).find("# final_train_accuracy 1"), std::string::npos);
}

TEST_F(CliTest, EvalReportMatchesLibraryAndHasAllTestsets) {
    make_dataset(path("train.csv"), path("test.csv"));
    ASSERT_EQ(run("baseline --onehot --classes 3 --out " + path("cb.json")).exit_code, 0);
    ASSERT_EQ(run("train --data " + path("train.csv") + " --codebook " + path("cb.json") +
                  " --epochs 40 --batch 32 --seed 4 --out " + path("m.json"))
                  .exit_code,
              0);
    auto r = run("eval --model " + path("m.json") + " --data " + path("test.csv") + " --codebook " +
                 path("cb.json") + " --perturb negative --perturb fgsm:eps=0.1 --report " + path("rep.json"));
    ASSERT_EQ(r.exit_code, 0) << r.stdout_text;

    auto rep = nlohmann::json::parse(slurp(path("rep.json")));
    ASSERT_EQ(rep["testsets"].size(), 3u);
    EXPECT_EQ(rep["testsets"][0]["name"], "original");
    EXPECT_EQ(rep["testsets"][2]["name"], "fgsm_eps0.1");

    auto model = mute::load_model(path("m.json"));
    auto test = mute::load_dataset_csv(path("test.csv"));
    auto cb = mute::load_codebook(path("cb.json"));
    double lib_acc = mute::evaluate(model, test, cb).accuracy;
    EXPECT_NEAR(rep["testsets"][0]["accuracy"].get<double>(), lib_acc, 1e-12);

    for (const auto& set : rep["testsets"]) {
        EXPECT_TRUE(fs::exists(set["confusion_csv"].get<std::string>()));
    }
    EXPECT_NE(r.stdout_text.find("original"), std::string::npos);
    EXPECT_NE(r.stdout_text.find("wall time"), std::string::npos);
}

TEST_F(CliTest, EvalDeterministicReports) {
    make_dataset(path("train.csv"), path("test.csv"));
    ASSERT_EQ(run("baseline --onehot --classes 3 --out " + path("cb.json")).exit_code, 0);
    ASSERT_EQ(run("train --data " + path("train.csv") + " --codebook " + path("cb.json") +
                  " --epochs 20 --batch 32 --seed 4 --out " + path("m.json"))
                  .exit_code,
              0);
    std::string eval_cmd = "eval --model " + path("m.json") + " --data " + path("test.csv") +
                           " --codebook " + path("cb.json") +
                           " --perturb sp:p=0.05,seed=11 --perturb fgsm:eps=0.1 --seed 6 --report " +
                           path("rep.json");
    ASSERT_EQ(run(eval_cmd).exit_code, 0);
    auto first = slurp(path("rep.json"));
    ASSERT_EQ(run(eval_cmd).exit_code, 0);
    auto second = slurp(path("rep.json"));
    // reports carry no timing, so an identical invocation is byte-identical
    EXPECT_FALSE(first.empty());
    EXPECT_EQ(first, second);
}

TEST_F(CliTest, PerturbWritesCorruptedCopy) {
    make_dataset(path("train.csv"), path("test.csv"));
    ASSERT_EQ(run("perturb --data " + path("test.csv") + " --spec sp:p=0.5,seed=3 --out " + path("sp1.csv")).exit_code, 0);
    ASSERT_EQ(run("perturb --data " + path("test.csv") + " --spec sp:p=0.5,seed=3 --out " + path("sp2.csv")).exit_code, 0);
    EXPECT_EQ(slurp(path("sp1.csv")), slurp(path("sp2.csv")));
    EXPECT_NE(slurp(path("sp1.csv")), slurp(path("test.csv")));

    EXPECT_EQ(run("perturb --data " + path("test.csv") + " --spec blur:sigma=1 --out " + path("b.csv")).exit_code, 1);
    EXPECT_EQ(run("perturb --data " + path("missing.csv") + " --spec negative --out " + path("n.csv")).exit_code, 3);
}

TEST_F(CliTest, MuteSeedEnvProvidesDefaultSeed) {
    auto env_run = [](const std::string& args) {
        std::string cmd = "MUTE_SEED=42 " + std::string(MUTE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
        int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    };
    ASSERT_EQ(env_run("baseline --random 4 --classes 10 --out " + path("env.json")), 0);
    ASSERT_EQ(run("baseline --random 4 --classes 10 --seed 42 --out " + path("flag.json")).exit_code, 0);
    EXPECT_EQ(slurp(path("env.json")), slurp(path("flag.json")));
}

TEST_F(CliTest, UsageErrorsExitOne) {
    EXPECT_EQ(run("gen --classes 4").exit_code, 1);                       // missing required flags
    EXPECT_EQ(run("nonsense").exit_code, 1);                              // unknown subcommand
    EXPECT_EQ(run("gen --classes 4 --k 2 --out x.json").exit_code, 1);    // neither --weights nor --uniform
}

TEST_F(CliTest, PipelineSmokeUnderSixtySeconds) {
    auto t0 = std::chrono::steady_clock::now();
    make_dataset(path("train.csv"), path("test.csv"));

    // one-hot baseline -> train -> confusion-driven weights -> gen -> train -> eval
    ASSERT_EQ(run("baseline --onehot --classes 3 --out " + path("oh.json")).exit_code, 0);
    ASSERT_EQ(run("train --data " + path("train.csv") + " --codebook " + path("oh.json") +
                  " --epochs 30 --batch 32 --seed 1 --out " + path("oh_model.json"))
                  .exit_code,
              0);
    ASSERT_EQ(run("weights --model " + path("oh_model.json") + " --data " + path("train.csv") +
                  " --out " + path("w.csv"))
                  .exit_code,
              0);
    ASSERT_EQ(run("gen --classes 3 --bits 3 --k 2 --weights " + path("w.csv") + " --seed 1 --out " +
                  path("mute.json"))
                  .exit_code,
              0);
    ASSERT_EQ(run("train --data " + path("train.csv") + " --codebook " + path("mute.json") +
                  " --epochs 30 --batch 32 --seed 1 --out " + path("mute_model.json"))
                  .exit_code,
              0);
    ASSERT_EQ(run("eval --model " + path("mute_model.json") + " --data " + path("test.csv") +
                  " --codebook " + path("mute.json") +
                  " --perturb negative --perturb sp:p=0.05,seed=2 --perturb fgsm:eps=0.1 --report " +
                  path("rep.json"))
                  .exit_code,
              0);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_LT(secs, 60.0);
}
