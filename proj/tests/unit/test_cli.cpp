#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "facepain/cli/commands.hpp"
#include "facepain/layout.hpp"

using namespace facepain;
namespace fs = std::filesystem;

namespace {

struct Cli {
  std::ostringstream out;
  std::ostringstream err;
  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "facepain");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  }
};

struct Scratch {
  fs::path path;
  explicit Scratch(const std::string& name) : path(fs::temp_directory_path() / ("facepain-cli-" + name)) {
    fs::remove_all(path);
  }
  ~Scratch() { fs::remove_all(path); }
};

const char* kSynth = R"({"patients": 2, "sequences_per_patient": 3, "frames_per_sequence": 30,
  "kinds": ["2d", "blendshapes"], "witness_fraction": 0.1, "seed": 4})";

}  // namespace

TEST(Cli, SynthValidateFeaturize) {
  Scratch s("svf");
  fs::create_directories(s.path);
  write_text_file(s.path / "synth.json", kSynth);
  Cli a;
  ASSERT_EQ(a.run({"synth", (s.path / "synth.json").string(), "--out", (s.path / "data").string()}), 0) << a.err.str();
  Cli refuse;
  EXPECT_EQ(refuse.run({"synth", (s.path / "synth.json").string(), "--out", (s.path / "data").string()}), 2);
  EXPECT_NE(refuse.err.str().find("--force"), std::string::npos);
  Cli v;
  EXPECT_EQ(v.run({"validate", (s.path / "data").string()}), 0);
  EXPECT_NE(v.out.str().find("PASS"), std::string::npos);
  Cli f;
  EXPECT_EQ(f.run({"featurize", (s.path / "data").string(), "--kind", "2d", "--out", (s.path / "feat").string()}), 0);
  EXPECT_EQ(std::distance(fs::directory_iterator(s.path / "feat"), fs::directory_iterator{}), 6);
  Cli bad;
  EXPECT_EQ(bad.run({"featurize", (s.path / "data").string(), "--kind", "5d", "--out", (s.path / "x").string()}), 2);
}

TEST(Cli, SeedFlagChangesTree) {
  Scratch s("seed");
  fs::create_directories(s.path);
  write_text_file(s.path / "synth.json", kSynth);
  Cli a;
  Cli b;
  Cli c;
  ASSERT_EQ(a.run({"synth", (s.path / "synth.json").string(), "--out", (s.path / "a").string(), "--seed", "9"}), 0);
  ASSERT_EQ(b.run({"synth", (s.path / "synth.json").string(), "--out", (s.path / "b").string(), "--seed", "9"}), 0);
  ASSERT_EQ(c.run({"synth", (s.path / "synth.json").string(), "--out", (s.path / "c").string()}), 0);
  EXPECT_EQ(read_text_file(s.path / "a" / "labels.csv"), read_text_file(s.path / "b" / "labels.csv"));
  EXPECT_EQ(read_text_file(s.path / "a" / "manifest.json"), read_text_file(s.path / "b" / "manifest.json"));
  EXPECT_NE(read_text_file(s.path / "a" / "manifest.json"), read_text_file(s.path / "c" / "manifest.json"));
}

TEST(Cli, ValidateFailsOnBrokenFile) {
  Scratch s("broken");
  fs::create_directories(s.path);
  write_text_file(s.path / "synth.json", kSynth);
  Cli a;
  ASSERT_EQ(a.run({"synth", (s.path / "synth.json").string(), "--out", (s.path / "data").string()}), 0);
  const auto keys = discover_recordings(s.path / "data");
  write_text_file(recording_dir(s.path / "data", keys[0].id) / video_info_file_name(keys[0]), "[]");
  Cli v;
  EXPECT_EQ(v.run({"validate", (s.path / "data").string()}), 1);
  EXPECT_NE(v.out.str().find("FAIL"), std::string::npos);
}

TEST(Cli, RunAndReport) {
  Scratch s("run");
  fs::create_directories(s.path);
  write_text_file(s.path / "run.json", std::string(R"({"data": {"synth": )") + kSynth + R"(},
    "output": "out",
    "experiment": {"kinds": ["blendshapes"], "methods": ["max", "mil-uniform"], "seed": 2,
                   "mlp": {"epochs": 3}, "mil": {"k": 8}}})");
  Cli r;
  ASSERT_EQ(r.run({"run", (s.path / "run.json").string(), "--out", (s.path / "out").string()}), 0) << r.err.str();
  EXPECT_TRUE(fs::exists(s.path / "out" / "report.json"));
  EXPECT_TRUE(fs::exists(s.path / "out" / "report.txt"));
  EXPECT_TRUE(fs::exists(s.path / "out" / "predictions" / "blendshapes_max.csv"));
  Cli rep;
  EXPECT_EQ(rep.run({"report", (s.path / "out" / "report.json").string()}), 0);
  EXPECT_NE(rep.out.str().find("MIL-Uniform"), std::string::npos);
}

TEST(Cli, MalformedConfigIsUsageError) {
  Scratch s("usage");
  fs::create_directories(s.path);
  write_text_file(s.path / "run.json", R"({"data": {"root": "x", "synth": {}}, "output": "o", "experiment": {}})");
  Cli r;
  EXPECT_EQ(r.run({"run", (s.path / "run.json").string()}), 2);
  Cli none;
  EXPECT_NE(none.run({}), 0);
}

TEST(Cli, BundledConfigsParse) {
  for (const char* name : {"synth-smoke.json", "loso-blendshapes.json", "mil-random-splits.json"}) {
    const fs::path p = fs::path(FACEPAIN_SOURCE_DIR) / "tools" / "configs" / name;
    EXPECT_NO_THROW(cli::run_config_from_json(read_text_file(p))) << name;
  }
  EXPECT_NO_THROW(
      cli::synth_config_from_json(read_text_file(fs::path(FACEPAIN_SOURCE_DIR) / "tools" / "configs" / "synth-data.json")));
}
