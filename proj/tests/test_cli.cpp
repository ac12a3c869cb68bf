#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::path(MOT3D_TEST_WORK_DIR) / "cli";

int run(const std::string& args, const std::string& log = "last.log") {
    const std::string cmd = std::string("\"") + MOT3D_CLI_PATH + "\" " + args + " > \"" + (kWork / log).string() + "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        fs::remove_all(kWork);
        fs::create_directories(kWork);
        ASSERT_EQ(run("simulate --seed 3 --out \"" + (kWork / "sim").string() + "\""), 0) << slurp(kWork / "last.log");
    }
};

}  // namespace

TEST_F(Cli, SimulateWritesThreeFiles) {
    for (const char* name : {"detections.jsonl", "labeled_detections.jsonl", "ground_truth.jsonl"}) {
        EXPECT_TRUE(fs::exists(kWork / "sim" / name)) << name;
    }
    EXPECT_EQ(slurp(kWork / "sim" / "detections.jsonl").find("gt_id"), std::string::npos);
    EXPECT_NE(slurp(kWork / "sim" / "labeled_detections.jsonl").find("gt_id"), std::string::npos);
}

TEST_F(Cli, LambdaZeroMatchesBaselineByteForByte) {
    const std::string dets = (kWork / "sim" / "detections.jsonl").string();
    ASSERT_EQ(run("track --detections \"" + dets + "\" --lambda 0 --feat-gate 0.05 --out \"" + (kWork / "l0").string() + "\""), 0);
    ASSERT_EQ(run("track --detections \"" + dets + "\" --baseline --out \"" + (kWork / "base").string() + "\""), 0);
    const std::string a = slurp(kWork / "l0" / "trajectories.jsonl");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(kWork / "base" / "trajectories.jsonl"));
}

TEST_F(Cli, EvalOfGroundTruthAgainstItselfIsPerfect) {
    const std::string gt = (kWork / "sim" / "ground_truth.jsonl").string();
    ASSERT_EQ(run("eval --gt \"" + gt + "\" --pred \"" + gt + "\" --out \"" + (kWork / "eval").string() + "\""), 0);
    const std::string report = slurp(kWork / "eval" / "report.json");
    EXPECT_NE(report.find("\"HOTA\": 1.0"), std::string::npos) << report;
    EXPECT_NE(report.find("\"MOTA\": 1.0"), std::string::npos) << report;
}

TEST_F(Cli, CalibrateGateReadsLabels) {
    const std::string lab = (kWork / "sim" / "labeled_detections.jsonl").string();
    ASSERT_EQ(run("calibrate-gate --labeled \"" + lab + "\" --out \"" + (kWork / "gate").string() + "\""), 0);
    EXPECT_NE(slurp(kWork / "gate" / "feature_gate.json").find("feature_gate"), std::string::npos);
    const std::string unlabeled = (kWork / "sim" / "detections.jsonl").string();
    EXPECT_NE(run("calibrate-gate --labeled \"" + unlabeled + "\""), 0);
}

TEST_F(Cli, UnknownFlagFails) {
    EXPECT_NE(run("track --detections x --frobnicate"), 0);
    EXPECT_NE(run("no-such-command"), 0);
}

TEST_F(Cli, MalformedInputNamesTheLine) {
    const fs::path bad = kWork / "bad.jsonl";
    std::ofstream(bad) << "{\"frame\": 0, \"pos\": [0,0,0], \"feat\": [1,0]}\n{\"frame\": 1, \"pos\": [0,0,0]}\n";
    EXPECT_EQ(run("track --detections \"" + bad.string() + "\"", "bad.log"), 1);
    const std::string msg = slurp(kWork / "bad.log");
    EXPECT_NE(msg.find("mot3d: error:"), std::string::npos) << msg;
    EXPECT_NE(msg.find("bad.jsonl:2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("feat"), std::string::npos) << msg;
}

TEST_F(Cli, StrictModeRejectsUnknownFields) {
    const fs::path extra = kWork / "extra.jsonl";
    std::ofstream(extra) << "{\"frame\": 0, \"id\": 1, \"pos\": [0,0,0], \"conf\": 0.5}\n";
    EXPECT_EQ(run("eval --gt \"" + extra.string() + "\" --pred \"" + extra.string() + "\""), 0);
    EXPECT_NE(run("eval --strict --gt \"" + extra.string() + "\" --pred \"" + extra.string() + "\""), 0);
}

TEST_F(Cli, PrintConfigRoundTrips) {
    ASSERT_EQ(run("print-config", "config.json"), 0);
    const fs::path cfg = kWork / "config.json";
    ASSERT_EQ(run("print-config --strict --config \"" + cfg.string() + "\"", "config2.json"), 0);
    EXPECT_EQ(slurp(cfg), slurp(kWork / "config2.json"));
}

TEST_F(Cli, ExperimentResultsFileIsReproducible) {
    const std::string cfg = std::string(MOT3D_SOURCE_DIR) + "/configs/default_experiment.json";
    for (const char* dir : {"exp1", "exp2"}) {
        ASSERT_EQ(run("experiment --config \"" + cfg + "\" --no-trajectories --out \"" + (kWork / dir).string() + "\""), 0)
            << slurp(kWork / "last.log");
    }
    const std::string a = slurp(kWork / "exp1" / "results.csv");
    EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 61);
    EXPECT_EQ(a, slurp(kWork / "exp2" / "results.csv"));
    EXPECT_FALSE(fs::exists(kWork / "exp1" / "trajectories"));
}
