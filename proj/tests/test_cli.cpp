#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "cli.hpp"
#include "oracles.hpp"

using namespace navcost;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::map<std::string, std::string> tree_hashes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = file_hash(e.path());
  return out;
}

std::vector<std::string> stanza_argv(const fs::path& manifest) {
  auto j = read_json(manifest);
  if (j.contains("reproducibility")) j = j["reproducibility"];
  return j.at("argv").get<std::vector<std::string>>();
}

// Small drive shared by several tests.
const fs::path& sim_dir() {
  static const fs::path dir = [] {
    const auto d = oracle::scratch("cli_sim");
    const auto r = run({"simulate", "--kind", "crossroad", "--seed", "2", "--frames", "6", "--out", (d / "sim").string()});
    EXPECT_EQ(r.code, 0) << r.err;
    return d / "sim";
  }();
  return dir;
}

}  // namespace

TEST(Cli, SimulateWritesWorldAndFrames) {
  const auto d = oracle::scratch("cli_simulate");
  const auto r = run({"simulate", "--kind", "crossroad", "--seed", "7", "--frames", "50", "--out", (d / "w").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(d / "w" / "world.json"));
  std::size_t frames = 0;
  for (const auto& e : fs::directory_iterator(d / "w" / "frames")) frames += e.path().extension() == ".json";
  EXPECT_EQ(frames, 50u);
  std::size_t lines = 0;
  for (char c : r.out) lines += c == '\n';
  EXPECT_EQ(lines, 51u);
  EXPECT_TRUE(world_from_json(read_json(d / "w" / "world.json")) == build_scenario(ScenarioKind::Crossroad, 7));
}

TEST(Cli, AlignPrintsBruteForceOptimum) {
  const auto d = oracle::scratch("cli_align");
  Rng rng(50);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Vec2> t, rv;
    const auto n = rng.uniform_int(2, 6), m = rng.uniform_int(2, 6);
    for (int k = 0; k < n; ++k) t.push_back({double(rng.uniform_int(0, 9)), double(rng.uniform_int(0, 9))});
    for (int k = 0; k < m; ++k) rv.push_back({double(rng.uniform_int(0, 9)), double(rng.uniform_int(0, 9))});
    RoutePolyline route;
    route.vertices = rv;
    route.segments = {{0, rv.size() - 1, 0.0}};
    write_json(d / "r.json", to_json(route));
    Json traj{{"points", Json::array()}};
    for (auto p : t) traj["points"].push_back(Json::array({p.x, p.y}));
    write_json(d / "t.json", traj);
    const auto r = run({"align", "--route", (d / "r.json").string(), "--traj", (d / "t.json").string(), "--raw-route"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto pos = r.out.find("gamma=");
    ASSERT_NE(pos, std::string::npos);
    EXPECT_EQ(std::stod(r.out.substr(pos + 6)), oracle::dtw_brute(t, rv)) << r.out;
  }
}

TEST(Cli, EvalOnIdenticalDirectories) {
  const auto d = oracle::scratch("cli_eval");
  ASSERT_EQ(run({"dataset", "--sim", sim_dir().string(), "--out", (d / "ds").string(), "--seed", "1"}).code, 0);
  const auto r = run({"eval", "--pred", (d / "ds").string(), "--gt", (d / "ds").string(), "--report",
                      (d / "rep" / "out.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = read_file(d / "rep" / "out.csv");
  EXPECT_NE(csv.find("\naggregate,1,1,0,0\n"), std::string::npos) << csv;
  EXPECT_TRUE(fs::exists(d / "rep" / "out.csv.manifest.json"));
}

TEST(Cli, CostmapPlanAndExternalMasks) {
  const auto d = oracle::scratch("cli_costmap");
  auto r = run({"costmap", "--sim", sim_dir().string(), "--out", (d / "cm").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(d / "cm" / "nll.csv"));
  EXPECT_TRUE(fs::exists(d / "cm" / "frame_0003_heat.pgm"));
  EXPECT_TRUE(fs::exists(d / "cm" / "frame_0003_path.pgm"));
  r = run({"plan", "--costmap", (d / "cm" / "frame_0002.navcost").string(), "--out", (d / "pl").string(), "--horizon", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto path = trajectory_from_json(read_json(d / "pl" / "path.json"));
  ASSERT_GT(path.size(), 10u);
  EXPECT_GE(norm(path.back().position() - path.front().position()), 5.0 - 1e-9);

  ASSERT_EQ(run({"dataset", "--sim", sim_dir().string(), "--out", (d / "ds").string(), "--max-rate", "0"}).code, 0);
  r = run({"costmap", "--sim", sim_dir().string(), "--masks", (d / "ds").string(), "--out", (d / "cm2").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("branch=external"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  auto r = run({"frobnicate"});
  EXPECT_EQ(r.code, 1);
  r = run({"simulate", "--kind", "crossroad", "--frames", "0", "--out", "/tmp/never"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--frames"), std::string::npos) << r.err;
  r = run({"simulate", "--kind", "crossroad", "--out", "/tmp/never", "--bogus", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--bogus"), std::string::npos) << r.err;
  r = run({"simulate", "--kind", "hexagon", "--out", "/tmp/never"});
  EXPECT_EQ(r.code, 1);
  r = run({"dataset", "--sim", "/nonexistent/sim", "--out", "/tmp/never"});
  EXPECT_EQ(r.code, 2) << r.err;
  r = run({"dataset", "--sim", sim_dir().string(), "--out", "/tmp/never", "--max-rate", "0.4"});
  EXPECT_EQ(r.code, 1);
  r = run({"plan", "--costmap", "/nonexistent.navcost", "--out", "/tmp/never"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, ConfigIsValidatedStrictly) {
  const auto d = oracle::scratch("cli_config");
  write_json(d / "bad.json", Json{{"kernel", Json{{"sigma_path", 1.0}, {"sigmapath", 2.0}}}});
  auto r = run({"--config", (d / "bad.json").string(), "simulate", "--kind", "straight", "--out", (d / "o").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("sigmapath"), std::string::npos) << r.err;
  write_json(d / "neg.json", Json{{"kernel", Json{{"sigma_obs", -1.0}}}});
  EXPECT_EQ(run({"--config", (d / "neg.json").string(), "simulate", "--kind", "straight", "--out", (d / "o").string()}).code, 1);
  write_json(d / "ok.json", Json{{"drive", Json{{"instruction_px", 128}}}, {"scan", Json{{"num_beams", 90}}}});
  r = run({"--config", (d / "ok.json").string(), "simulate", "--kind", "straight", "--frames", "3", "--out",
           (d / "o").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  const auto m = read_json(d / "o" / "manifest.json");
  EXPECT_EQ(m["reproducibility"]["params"]["drive"]["instruction_px"], 128);
  EXPECT_EQ(m["reproducibility"]["params"]["scan"]["num_beams"], 90);
  EXPECT_TRUE(m["reproducibility"]["inputs"].contains((d / "ok.json").string()));
}

TEST(Cli, SeedFromEnvironmentIsRecorded) {
  const auto d = oracle::scratch("cli_env_seed");
  ::setenv("NAVCOST_SEED", "5", 1);
  const auto r = run({"simulate", "--kind", "crossroad", "--frames", "2", "--out", (d / "a").string()});
  ::unsetenv("NAVCOST_SEED");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto argv = stanza_argv(d / "a" / "manifest.json");
  ASSERT_GE(argv.size(), 2u);
  EXPECT_EQ(argv[argv.size() - 2], "--seed");
  EXPECT_EQ(argv.back(), "5");
  EXPECT_EQ(read_json(d / "a" / "manifest.json")["seed"], 5);
  ::setenv("NAVCOST_SEED", "five", 1);
  EXPECT_EQ(run({"simulate", "--kind", "crossroad", "--frames", "2", "--out", (d / "b").string()}).code, 1);
  ::unsetenv("NAVCOST_SEED");
}

TEST(Cli, JobsDoNotChangeOutputs) {
  const auto d = oracle::scratch("cli_jobs");
  const auto a = run({"--jobs", "1", "costmap", "--sim", sim_dir().string(), "--out", (d / "a").string(), "--seed", "3",
                      "--offset-level", "moderate"});
  const auto b = run({"--jobs", "3", "costmap", "--sim", sim_dir().string(), "--out", (d / "b").string(), "--seed", "3",
                      "--offset-level", "moderate"});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(a.out, b.out);
  auto ha = tree_hashes(d / "a"), hb = tree_hashes(d / "b");
  ha.erase("manifest.json");
  hb.erase("manifest.json");
  EXPECT_EQ(ha, hb);
}

TEST(Cli, InputsAreNotModified) {
  const auto d = oracle::scratch("cli_inputs");
  const auto before = tree_hashes(sim_dir());
  ASSERT_EQ(run({"dataset", "--sim", sim_dir().string(), "--out", (d / "ds").string()}).code, 0);
  const auto ds_before = tree_hashes(d / "ds");
  ASSERT_EQ(run({"costmap", "--sim", sim_dir().string(), "--out", (d / "cm").string()}).code, 0);
  ASSERT_EQ(run({"eval", "--pred", (d / "ds").string(), "--gt", (d / "ds").string(), "--report", (d / "r.csv").string()}).code, 0);
  ASSERT_EQ(run({"align", "--route", (sim_dir() / "drive_route.json").string(), "--traj",
                 (sim_dir() / "trajectory_px.json").string(), "--out", (d / "al").string()}).code, 0);
  EXPECT_EQ(tree_hashes(sim_dir()), before);
  EXPECT_EQ(tree_hashes(d / "ds"), ds_before);
}

TEST(Cli, StanzaReplayIsBitIdentical) {
  const auto d = oracle::scratch("cli_replay");
  ASSERT_EQ(run({"dataset", "--sim", sim_dir().string(), "--out", (d / "ds").string(), "--max-rate", "0.1", "--seed",
                 "4", "--offset-level", "hard"}).code, 0);
  const auto first = tree_hashes(d / "ds");
  const auto argv = stanza_argv(d / "ds" / "manifest.json");
  fs::remove_all(d / "ds");
  ASSERT_EQ(run(argv).code, 0);
  EXPECT_EQ(tree_hashes(d / "ds"), first);
}
