#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "wzjscc_test_cli";

int run(const std::string& args) {
    const std::string cmd = std::string(WZJSCC_CLI_PATH) + " " + args + " >" + (kDir / "stdout.txt").string() +
                            " 2>" + (kDir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path write_config(const std::string& name, const std::string& run_id, nlohmann::json dataset) {
    const nlohmann::json j{
        {"dataset", std::move(dataset)},
        {"model", {{"variant", "wz"}, {"rho", "1/8"}, {"base_width", 4}}},
        {"train", {{"learning_rate", 1e-3}, {"batch_size", 4}, {"lambda_lpips", 0}, {"max_steps", 3},
                   {"val_snr_grid", {0}}, {"seed", 5}}},
        {"eval_snr_grid_db", {-5, 0, 5}},
        {"eval_repeats", 2},
        {"output_dir", (kDir / "runs").string()},
        {"run_id", run_id}};
    const fs::path path = kDir / name;
    std::ofstream(path) << j.dump(2);
    return path;
}

nlohmann::json synthetic() {
    return {{"name", "synthetic"}, {"synthetic", {{"counts", {{"train", 8}, {"val", 2}, {"test", 4}}}}}};
}

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        fs::remove_all(kDir);
        fs::create_directories(kDir);
    }
};

} // namespace

TEST_F(Cli, HelpAndUsageErrors) {
    EXPECT_EQ(run("--help"), 0);
    EXPECT_EQ(run("no-such-command"), 2);
    EXPECT_EQ(run("train"), 2);
}

TEST_F(Cli, TrainEvalCompare) {
    const fs::path cfg = write_config("ok.json", "ok", synthetic());
    ASSERT_EQ(run("train -c " + cfg.string()), 0) << slurp(kDir / "stderr.txt");
    EXPECT_EQ(run("train -c " + cfg.string()), 2);
    EXPECT_NE(slurp(kDir / "stderr.txt").find("--force"), std::string::npos);
    EXPECT_EQ(run("train -c " + cfg.string() + " --force"), 0);

    ASSERT_EQ(run("eval -c " + cfg.string() + " -o " + (kDir / "e1").string()), 0) << slurp(kDir / "stderr.txt");
    ASSERT_EQ(run("eval -c " + cfg.string() + " -o " + (kDir / "e2").string()), 0);
    for (const char* m : {"psnr", "msssim", "lpips"}) {
        const std::string name = std::string("eval_") + m + ".csv";
        EXPECT_EQ(slurp(kDir / "e1" / name), slurp(kDir / "e2" / name)) << m;
    }
    EXPECT_EQ(run("compare " + (kDir / "e1" / "eval_psnr.csv").string() + " " + (kDir / "e2" / "eval_psnr.csv").string() +
                  " -o " + (kDir / "cmp").string()),
              0);
    EXPECT_TRUE(fs::exists(kDir / "cmp" / "compare_psnr.svg"));

    EXPECT_EQ(run("inspect-checkpoint " + (kDir / "runs" / "ok" / "model.ckpt").string() + " --json"), 0);
    const auto info = nlohmann::json::parse(slurp(kDir / "stdout.txt"));
    EXPECT_EQ(info.at("bandwidth_k").get<int>(), 192);
}

TEST_F(Cli, ExitCodesSeparateFailureKinds) {
    EXPECT_EQ(run("inspect-checkpoint " + (kDir / "absent.ckpt").string()), 3);

    const fs::path bad = kDir / "bad.json";
    std::ofstream(bad) << "{\"model\": {\"rho\": -1}}";
    EXPECT_EQ(run("train -c " + bad.string()), 2);

    const nlohmann::json missing{{"name", "cityscape"}, {"root", (kDir / "nowhere").string()},
                                 {"height", 16}, {"width", 32}};
    const fs::path cfg = write_config("missing.json", "missing", missing);
    EXPECT_EQ(run("train -c " + cfg.string()), 3);

    const fs::path ok = write_config("overflow.json", "overflow", synthetic());
    ASSERT_EQ(run("train -c " + ok.string()), 0);
    auto j = nlohmann::json::parse(slurp(ok));
    j["eval_snr_grid_db"] = {0, -4000};
    std::ofstream(ok) << j.dump();
    EXPECT_EQ(run("eval -c " + ok.string()), 2);
}

TEST_F(Cli, SyntheticExportLoadsAsImageDataset) {
    const fs::path out = kDir / "synth";
    ASSERT_EQ(run("synth-data -o " + out.string() + " --train 2 --val 1 --test 1"), 0) << slurp(kDir / "stderr.txt");
    EXPECT_TRUE(fs::exists(out / "manifest.tsv"));
}
