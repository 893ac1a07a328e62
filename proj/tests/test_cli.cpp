#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "ahrm/cli.hpp"

using namespace ahrm::cli;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "ahrm");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

fs::path temp_dir(const std::string& name) {
  const char* env = std::getenv("AHRM_TEST_TMP");
  fs::path dir =
      (env != nullptr ? fs::path(env) : fs::temp_directory_path() / "ahrm_tests") / "cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

std::vector<std::string> tiny_train(const fs::path& out, const std::string& variant,
                                    const std::string& seeds) {
  return {"train",  "--variant", variant, "--seed", seeds, "--out", out.string(),
          "--set",  "episodes=3", "--set", "ppo.horizon=64", "--set", "ppo.minibatch=32",
          "--set",  "ppo.hidden=[8]"};
}

}  // namespace

TEST(SeedList, Forms) {
  EXPECT_EQ(parse_seed_list("3"), (std::vector<std::uint64_t>{3}));
  EXPECT_EQ(parse_seed_list("0..4"), (std::vector<std::uint64_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(parse_seed_list("1,5..6,9"), (std::vector<std::uint64_t>{1, 5, 6, 9}));
  EXPECT_THROW(parse_seed_list(""), std::invalid_argument);
  EXPECT_THROW(parse_seed_list("4..2"), std::invalid_argument);
  EXPECT_THROW(parse_seed_list("a"), std::invalid_argument);
  EXPECT_THROW(parse_seed_list("-1"), std::invalid_argument);
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run({}), kExitUsage);
  EXPECT_EQ(run({"train", "--bogus"}), kExitUsage);
  EXPECT_EQ(run({"frobnicate"}), kExitUsage);
  EXPECT_EQ(run({"train", "--variant", "nope"}), kExitUsage);
  EXPECT_EQ(run({"train", "--set", "ppo.lrr=1"}), kExitUsage);
  EXPECT_EQ(run({"train", "--seed", "x"}), kExitUsage);
  EXPECT_EQ(run({"eval"}), kExitUsage);
}

TEST(Cli, HelpExitsZero) {
  EXPECT_EQ(run({"--help"}), kExitOk);
  EXPECT_EQ(run({"train", "--help"}), kExitOk);
}

TEST(Cli, TrainEvalCompareRoundTrip) {
  const fs::path out = temp_dir("runs");
  ASSERT_EQ(run(tiny_train(out, "ls", "0..1")), kExitOk);
  ASSERT_EQ(run(tiny_train(out, "ahrm", "0")), kExitOk);
  for (const char* d : {"ls_seed0", "ls_seed1", "ahrm_seed0"}) {
    for (const char* f : {"config.json", "episodes.csv", "priorities.json", "checkpoint.bin"}) {
      EXPECT_TRUE(fs::exists(out / d / f)) << d << "/" << f;
    }
  }
  EXPECT_EQ(read_json(out / "ls_seed1" / "config.json")["episodes"], 3);

  ASSERT_EQ(run({"eval", "--checkpoint", (out / "ls_seed0" / "checkpoint.bin").string()}), kExitOk);
  const auto report = read_json(out / "ls_seed0" / "eval.json");
  EXPECT_EQ(report["n_evals"], 40);

  const fs::path custom = out / "custom_eval.json";
  ASSERT_EQ(run({"eval", "--checkpoint", (out / "ahrm_seed0" / "checkpoint.bin").string(), "--n",
                 "3", "--out", custom.string()}),
            kExitOk);
  EXPECT_EQ(read_json(custom)["n_evals"], 3);

  const fs::path cmp = out / "cmp";
  ASSERT_EQ(run({"compare", (out / "ls_seed0").string(), (out / "ls_seed1").string(),
                 (out / "ahrm_seed0").string(), "--out", cmp.string()}),
            kExitOk);
  EXPECT_TRUE(fs::exists(cmp / "comparison.csv"));
  EXPECT_TRUE(fs::exists(cmp / "learning_curves.svg"));
}

TEST(Cli, RuntimeErrorsExitTwo) {
  const fs::path out = temp_dir("errors");
  EXPECT_EQ(run({"eval", "--checkpoint", (out / "missing.bin").string()}), kExitRuntime);
  std::ofstream(out / "junk.bin") << "garbage";
  std::ofstream(out / "config.json") << "{}";
  EXPECT_EQ(run({"eval", "--checkpoint", (out / "junk.bin").string()}), kExitRuntime);
  EXPECT_EQ(run({"compare", (out / "a").string(), (out / "b").string(), "--out",
                 (out / "cmp").string()}),
            kExitRuntime);
}
