#include "ahrm/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "ahrm/config.hpp"
#include "ahrm/errors.hpp"
#include "ahrm/harness.hpp"

namespace ahrm::cli {

namespace {

// Bad flag values and config documents: reported with usage text, exit 1.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::uint64_t parse_u64(const std::string& text) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw UsageError("'" + text + "' is not a non-negative integer");
  }
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw UsageError("'" + text + "' is out of range");
  }
}

nlohmann::json read_config_doc(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("config " + path + " is not valid JSON: " + e.what());
  }
}

std::string config_key_help() {
  std::ostringstream out;
  out << "\nConfig keys (JSON file, or --set key=value):\n";
  for (const auto& doc : describe_config_keys()) {
    out << "  " << doc.key << " = " << doc.default_value;
    if (!doc.note.empty()) out << "    # " << doc.note;
    out << "\n";
  }
  out << "\nExit codes: 0 success, 1 usage error, 2 runtime failure.\n"
      << "Environment: " << kOutputRootEnv << " sets the default output root.\n";
  return out.str();
}

struct TrainArgs {
  std::string config;
  std::string variant;
  std::string seeds;
  std::string out;
  std::vector<std::string> overrides;
};

struct EvalArgs {
  std::string checkpoint;
  std::string config;
  std::string out;
  int n = 40;
  std::uint64_t seed = 0;
};

struct CompareArgs {
  std::vector<std::string> runs;
  std::string out = "comparison";
};

std::vector<RunConfig> resolve_train(const TrainArgs& args) {
  nlohmann::json doc = args.config.empty() ? nlohmann::json::object() : read_config_doc(args.config);
  if (!doc.is_object()) throw UsageError("config must be a JSON object");
  const bool file_names_output = doc.contains("output_dir");
  try {
    if (doc.empty()) doc = to_json(RunConfig{});
    for (const auto& o : args.overrides) apply_override(doc, o);
    if (!args.variant.empty()) apply_override(doc, "variant=\"" + args.variant + "\"");
    if (!args.out.empty()) {
      doc["output_dir"] = args.out;
    } else if (!file_names_output) {
      if (const char* root = std::getenv(kOutputRootEnv); root && *root) doc["output_dir"] = root;
    }
    std::vector<std::uint64_t> seeds;
    if (args.seeds.empty()) {
      seeds.push_back(run_config_from_json(doc).seed);
    } else {
      seeds = parse_seed_list(args.seeds);
    }
    std::vector<RunConfig> runs;
    for (std::uint64_t s : seeds) {
      doc["seed"] = s;
      runs.push_back(run_config_from_json(doc));
    }
    return runs;
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

int do_train(const TrainArgs& args) {
  const auto runs = resolve_train(args);
  for (const auto& config : runs) {
    std::cerr << "training " << variant_name(config.variant) << " seed " << config.seed << " ("
              << config.episodes << " episodes)\n";
    const auto summary = harness::train(config);
    std::cout << summary.run_dir.string() << "  successes=" << summary.successes << "/"
              << summary.episodes << "  constraint_terminations=" << summary.constraint_terminations
              << "  updates=" << summary.updates << "\n";
  }
  return kExitOk;
}

int do_eval(const EvalArgs& args) {
  if (args.n < 1) throw UsageError("--n must be >= 1");
  const std::filesystem::path checkpoint(args.checkpoint);
  // Without --config, use the config echo stored next to the checkpoint.
  std::filesystem::path config_path = args.config;
  if (config_path.empty() && std::filesystem::exists(checkpoint.parent_path() / "config.json")) {
    config_path = checkpoint.parent_path() / "config.json";
  }
  env::EnvConfig env_config;
  if (!config_path.empty()) {
    try {
      env_config = run_config_from_json(read_config_doc(config_path.string())).env;
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  const auto report = harness::evaluate(checkpoint, env_config, args.n, args.seed);
  const std::filesystem::path out =
      args.out.empty() ? checkpoint.parent_path() / "eval.json" : std::filesystem::path(args.out);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  std::ofstream file(out, std::ios::trunc);
  if (!file) throw std::runtime_error("cannot open " + out.string() + " for writing");
  file << harness::to_json(report).dump(2) << "\n";
  if (!file) throw std::runtime_error("failed writing " + out.string());
  std::cout << out.string() << "  success_rate=" << report.success_rate
            << "  obstacle_touches=" << report.obstacle_touches << "\n";
  return kExitOk;
}

int do_compare(const CompareArgs& args) {
  std::vector<std::filesystem::path> dirs(args.runs.begin(), args.runs.end());
  const auto result = harness::compare(dirs, args.out);
  std::cout << result.table_csv.string() << "\n"
            << result.curves_csv.string() << "\n"
            << result.svg.string() << "\n";
  return kExitOk;
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream parts(text);
  std::string part;
  while (std::getline(parts, part, ',')) {
    if (const auto dots = part.find(".."); dots != std::string::npos) {
      const std::uint64_t lo = parse_u64(part.substr(0, dots));
      const std::uint64_t hi = parse_u64(part.substr(dots + 2));
      if (hi < lo) throw UsageError("seed range '" + part + "' is empty");
      if (hi - lo >= 10000) throw UsageError("seed range '" + part + "' is too large");
      for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    } else {
      seeds.push_back(parse_u64(part));
    }
  }
  if (seeds.empty()) throw UsageError("empty seed list");
  return seeds;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Hierarchical reward mechanisms for a planar pushing task", "ahrm"};
  app.require_subcommand(1);
  app.footer(config_key_help());

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train one run per seed");
  train->add_option("--config", train_args.config, "JSON config file");
  train->add_option("--variant", train_args.variant, "ahrm | mhrm | fhrm | ls");
  train->add_option("--seed", train_args.seeds, "seed, range a..b or comma list");
  train->add_option("--out", train_args.out, "output root");
  train->add_option("--set", train_args.overrides, "override a config key: key=value")
      ->allow_extra_args(false);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint with the deterministic policy");
  eval->add_option("--checkpoint", eval_args.checkpoint, "checkpoint.bin from a run")->required();
  eval->add_option("--n", eval_args.n, "number of evaluation episodes");
  eval->add_option("--seed", eval_args.seed, "evaluation seed");
  eval->add_option("--config", eval_args.config,
                   "config file (default: config.json next to the checkpoint)");
  eval->add_option("--out", eval_args.out, "report path (default: eval.json next to the checkpoint)");

  CompareArgs compare_args;
  auto* cmp = app.add_subcommand("compare", "compare finished runs");
  cmp->add_option("runs", compare_args.runs, "run directories")->required();
  cmp->add_option("--out", compare_args.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*train) return do_train(train_args);
    if (*eval) return do_eval(eval_args);
    if (*cmp) return do_compare(compare_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace ahrm::cli
