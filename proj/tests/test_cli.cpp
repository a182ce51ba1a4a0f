#include <gtest/gtest.h>

#include <filesystem>

#include "coursekit/cli.hpp"
#include "support.hpp"

using namespace coursekit;
using coursekit::testing::data_path;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("coursekit_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
    fs::path path;
};

int run(std::vector<std::string> args) {
    args.insert(args.begin(), "coursekit");
    return cli::run(args);
}

std::map<std::string, std::string> output_hashes(const std::string& manifest) {
    std::map<std::string, std::string> out;
    const auto m = json::parse(read_file(manifest));
    for (const auto& o : m["outputs"])
        out[fs::path(o["path"].get<std::string>()).filename().string()] = o["hash"];
    return out;
}

const std::string kCorpus = data_path("mini_corpus.jsonl");

}  // namespace

TEST(Cli, ExitCodes) {
    TempDir t;
    EXPECT_EQ(run({"--version"}), 0);
    EXPECT_EQ(run({}), 1);
    EXPECT_EQ(run({"analyze"}), 1);
    EXPECT_EQ(run({"analyze", "--corpus", t / "missing.jsonl", "--out", t / "a.json"}), 2);
    write_file(t / "bad.jsonl", "{\"admission_id\": 3}\n");
    EXPECT_EQ(run({"analyze", "--corpus", t / "bad.jsonl", "--out", t / "a.json"}), 1);
    write_file(t / "broken.jsonl", "not json\n");
    EXPECT_EQ(run({"analyze", "--corpus", t / "broken.jsonl", "--out", t / "a.json"}), 1);
    EXPECT_EQ(run({"align", "--corpus", kCorpus, "--method", "magic", "--out", t / "a.jsonl"}), 1);
    EXPECT_EQ(run({"analyze", "--corpus", kCorpus, "--jobs", "0", "--out", t / "a.json"}), 1);
}

TEST(Cli, AnalyzeWritesManifestWithHashes) {
    TempDir t;
    ASSERT_EQ(run({"analyze", "--corpus", kCorpus, "--out", t / "analyze.json"}), 0);
    const auto m = json::parse(read_file(t / "analyze.json.manifest.json"));
    EXPECT_EQ(m["command"], "analyze");
    EXPECT_EQ(m["tool_version"], cli::kVersion);
    ASSERT_EQ(m["outputs"].size(), 1u);
    EXPECT_EQ(m["outputs"][0]["hash"].get<std::string>().size(), 16u);
    EXPECT_FALSE(m["inputs"].empty());
    const auto report = json::parse(read_file(t / "analyze.json"));
    EXPECT_TRUE(report.is_object());
}

TEST(Cli, JobsDoNotChangeOutputs) {
    TempDir t;
    ASSERT_EQ(run({"align", "--corpus", kCorpus, "--method", "rouge-gain", "--jobs", "1", "--out", t / "a1.jsonl"}), 0);
    ASSERT_EQ(run({"align", "--corpus", kCorpus, "--method", "rouge-gain", "--jobs", "4", "--out", t / "a4.jsonl"}), 0);
    EXPECT_EQ(read_file(t / "a1.jsonl"), read_file(t / "a4.jsonl"));
}

TEST(Cli, EsgSidecarFeedsLaterCommands) {
    TempDir t;
    ASSERT_EQ(run({"esg", "--corpus", kCorpus, "--out", t / "esg.jsonl"}), 0);
    ASSERT_EQ(run({"speer", "plan", "--corpus", kCorpus, "--out", t / "plans.jsonl"}), 0);
    ASSERT_EQ(run({"speer", "plan", "--corpus", kCorpus, "--esg", t / "esg.jsonl", "--out", t / "plans2.jsonl"}), 0);
    EXPECT_EQ(read_file(t / "plans.jsonl"), read_file(t / "plans2.jsonl"));
}

TEST(Cli, SelectRejectsShortPools) {
    TempDir t;
    write_file(t / "pools.jsonl",
               R"({"example_id": "e", "candidates": [{"candidate_id": "a", "text": "x", "tag": "PARAPHRASE"}]})"
               "\n");
    EXPECT_EQ(run({"select", "--pools", t / "pools.jsonl", "--task", "faithfulness", "--out", t / "s.jsonl"}), 1);
    EXPECT_EQ(run({"select", "--pools", t / "pools.jsonl", "--task", "nonsense", "--out", t / "s.jsonl"}), 1);
}

TEST(Cli, DemoIsDeterministic) {
    TempDir a, b;
    ASSERT_EQ(run({"demo", "--out", a / "out"}), 0);
    ASSERT_EQ(run({"demo", "--out", b / "out", "--jobs", "3"}), 0);
    const auto ha = output_hashes(a / "out/manifest.json");
    const auto hb = output_hashes(b / "out/manifest.json");
    EXPECT_GE(ha.size(), 20u);
    EXPECT_EQ(ha, hb);
    for (const auto& name : {"oracle_report.json", "analytics.json", "annotation_report.json", "speer_scores.jsonl"})
        EXPECT_TRUE(fs::exists(a.path / "out" / name)) << name;
}
