#include "oracles.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace mot3d;

namespace {

DetectionRecord random_record(std::mt19937_64& gen, std::size_t dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_int_distribution<std::int64_t> frame(0, 1000000);
    std::bernoulli_distribution coin(0.5);
    DetectionRecord r;
    r.frame = frame(gen);
    r.pos = Vec3(n(gen), n(gen), n(gen)) * 1e3;
    if (coin(gen)) {
        std::array<double, 9> c{};
        for (auto& x : c) x = n(gen) * 1e-7;
        r.pos_cov = c;
    }
    r.feat.resize(dim);
    for (auto& x : r.feat) x = n(gen);
    if (coin(gen)) r.bbox = BBox{n(gen), n(gen), 1.0 + std::fabs(n(gen)), 0.5 + std::fabs(n(gen))};
    if (coin(gen)) r.gt_id = frame(gen) - 500000;
    return r;
}

std::string source_path(const std::string& rel) { return std::string(MOT3D_SOURCE_DIR) + "/" + rel; }

}  // namespace

TEST(DetectionsIo, RoundTripIsExact) {
    std::mt19937_64 gen(1);
    std::vector<DetectionRecord> recs;
    for (int k = 0; k < 10000; ++k) recs.push_back(random_record(gen, 8));
    std::stringstream ss;
    write_detections(ss, recs);
    const auto back = parse_detections(ss, "mem", ParseOptions{true});
    ASSERT_EQ(back.size(), recs.size());
    for (std::size_t k = 0; k < recs.size(); ++k) ASSERT_EQ(back[k], recs[k]) << "record " << k;
}

TEST(DetectionsIo, UnknownFieldsStrictVersusLenient) {
    const std::string line = R"({"frame": 0, "pos": [0, 0, 0], "feat": [1, 0], "score": 0.9})";
    std::istringstream strict_in(line);
    EXPECT_THROW(parse_detections(strict_in, "x.jsonl", ParseOptions{true}), ParseError);
    std::vector<std::string> warnings;
    std::istringstream lenient_in(line);
    const auto recs = parse_detections(lenient_in, "x.jsonl", ParseOptions{false, &warnings});
    ASSERT_EQ(recs.size(), 1u);
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_NE(warnings[0].find("score"), std::string::npos);
    EXPECT_NE(warnings[0].find("x.jsonl:1"), std::string::npos);
}

TEST(DetectionsIo, ErrorsNameTheLine) {
    struct Case {
        std::string text;
        std::size_t line;
        std::string needle;
    };
    const std::vector<Case> cases = {
        {"{\"frame\": 0, \"pos\": [0,0,0], \"feat\": [1]}\n{not json}\n", 2, "malformed"},
        {"{\"frame\": 0, \"pos\": [0,0,0], \"feat\": [1]}\n{\"frame\": 1, \"pos\": [0,0], \"feat\": [1]}\n", 2, "pos"},
        {"\n{\"frame\": -1, \"pos\": [0,0,0], \"feat\": [1]}\n", 2, "non-negative"},
        {"{\"frame\": 0, \"pos\": [0,0,0], \"feat\": [1, 2]}\n{\"frame\": 0, \"pos\": [0,0,0], \"feat\": [1]}\n", 2,
         "dimension"},
        {"{\"frame\": 0, \"pos\": [0,0,0], \"feat\": []}\n", 1, "feat"},
        {"{\"frame\": 0.5, \"pos\": [0,0,0], \"feat\": [1]}\n", 1, "integer"},
    };
    for (const auto& c : cases) {
        std::istringstream in(c.text);
        try {
            parse_detections(in, "d.jsonl", ParseOptions{true});
            FAIL() << "expected ParseError for: " << c.text;
        } catch (const ParseError& e) {
            EXPECT_EQ(e.line(), c.line) << e.what();
            EXPECT_NE(std::string(e.what()).find("d.jsonl:" + std::to_string(c.line)), std::string::npos);
            EXPECT_NE(std::string(e.what()).find(c.needle), std::string::npos) << e.what();
        }
    }
}

TEST(DetectionsIo, EmptyInputAndBlankLines) {
    std::istringstream empty("");
    EXPECT_TRUE(parse_detections(empty, "e").empty());
    std::istringstream blanks("\n  \n\r\n");
    EXPECT_TRUE(parse_detections(blanks, "e").empty());
    EXPECT_TRUE(group_frames(std::vector<DetectionRecord>{}, Mat3::Identity()).empty());
}

TEST(DetectionsIo, GroupFramesFillsGapsAndUsesDefaultCovariance) {
    std::vector<DetectionRecord> recs(2);
    recs[0].frame = 3;
    recs[0].feat = {1.0};
    recs[1].frame = 6;
    recs[1].feat = {1.0};
    recs[1].pos_cov = std::array<double, 9>{4, 0, 0, 0, 4, 0, 0, 0, 4};
    const auto frames = group_frames(recs, Mat3::Identity());
    ASSERT_EQ(frames.size(), 4u);
    EXPECT_EQ(frames[0].index, 3);
    EXPECT_EQ(frames[3].index, 6);
    EXPECT_TRUE(frames[1].detections.empty());
    EXPECT_EQ(frames[0].detections[0].position.cov(), Mat3::Identity());
    EXPECT_EQ(frames[3].detections[0].position.cov(), 4.0 * Mat3::Identity());
}

TEST(TrajectoriesIo, RoundTripAndDuplicateRejection) {
    TrajectorySet s;
    s.records = {{0, 1, Vec3(0.1, 0.2, 0.3), std::nullopt}, {0, 2, Vec3(1, 2, 3), BBox{1, 2, 3, 4}},
                 {5, 1, Vec3(-1e-9, 7, 1e9), std::nullopt}};
    std::stringstream ss;
    write_trajectories(ss, s);
    EXPECT_EQ(parse_trajectories(ss, "t").records, s.records);
    std::istringstream dup("{\"frame\":0,\"id\":1,\"pos\":[0,0,0]}\n{\"frame\":0,\"id\":1,\"pos\":[1,0,0]}\n");
    try {
        parse_trajectories(dup, "t.jsonl");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    std::istringstream badbox("{\"frame\":0,\"id\":1,\"pos\":[0,0,0],\"bbox\":[0,0,0,1]}\n");
    EXPECT_THROW(parse_trajectories(badbox, "t"), ParseError);
}

TEST(ConfigIo, SchemaVersionIsRequired) {
    EXPECT_THROW(parse_config(json::object(), "c"), ParseError);
    EXPECT_THROW(parse_config(json{{"schema_version", 2}}, "c"), ParseError);
    EXPECT_NO_THROW(parse_config(json{{"schema_version", 1}}, "c"));
}

TEST(ConfigIo, InvalidValuesAreReported) {
    json j = {{"schema_version", 1}, {"experiment", {{"lambda_grid", {0.0, 1.5}}}}};
    EXPECT_THROW(parse_config(j, "c"), ParseError);
    j = {{"schema_version", 1}, {"experiment", {{"operating_points", {"extreme"}}}}};
    EXPECT_THROW(parse_config(j, "c"), ParseError);
    j = {{"schema_version", 1}, {"tracker", {{"bogus", 1}}}};
    EXPECT_THROW(parse_config(j, "c", ParseOptions{true}), ParseError);
    EXPECT_NO_THROW(parse_config(j, "c"));
}

TEST(ConfigIo, ShippedDefaultConfigEqualsBuiltInDefaults) {
    const Config shipped = read_config(source_path("configs/default_experiment.json"), ParseOptions{true});
    EXPECT_EQ(to_json(shipped), to_json(Config{}));
    const Config all = read_config(source_path("configs/all_presets.json"), ParseOptions{true});
    EXPECT_EQ(all.experiment.operating_points, (std::vector<std::string>{"low", "mid", "high"}));
}

TEST(ConfigIo, JsonRoundTrip) {
    Config c;
    c.experiment.lambda_grid = {0.0, 0.3};
    c.experiment.feat_gate = 0.42;
    c.experiment.scene.seed = 99;
    c.experiment.tracker.feature_cap = 7;
    const Config back = parse_config(to_json(c), "mem", ParseOptions{true});
    EXPECT_EQ(to_json(back), to_json(c));
}

TEST(ResultsCsv, NoSignificanceColumnsWithoutComparisons) {
    ResultTable t;
    CellResult cell;
    cell.key = {"mid", FrameOrder::sequential, 0.0, 0};
    cell.report.hota = 0.5;
    t.cells.push_back(cell);
    AggregateRow row;
    row.operating_point = "mid";
    row.n_ok = 1;
    t.aggregates.push_back(row);
    std::ostringstream out;
    write_results_csv(out, t);
    const std::string s = out.str();
    EXPECT_EQ(s.substr(0, s.find('\n')),
              "operating_point,order,lambda,subset,HOTA,DetRe,DetPr,DetA,AssA,LocA,MOTA,FP,FN,IDSW,status");
    EXPECT_NE(s.find("mid,sequential,0,0,50.00,"), std::string::npos);
    EXPECT_EQ(s.find("HOTA_p"), std::string::npos);
    EXPECT_EQ(s.find("_sig"), std::string::npos);
}

TEST(ResultsCsv, ErrorCellsKeepTheirRow) {
    ResultTable t;
    CellResult cell;
    cell.key = {"mid", FrameOrder::random, 0.5, 3};
    cell.error = "boom, with comma";
    t.cells.push_back(cell);
    std::ostringstream out;
    write_results_csv(out, t);
    EXPECT_NE(out.str().find("mid,random,0.5,3,,,,,,,,,,,\"error: boom, with comma\""), std::string::npos);
}
