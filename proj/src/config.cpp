#include "ahrm/config.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ahrm {

using nlohmann::json;

namespace {

json assignment_to_json(const reward::PriorityAssignment& a) {
  json names = json::array();
  for (int objective : a.order()) names.push_back(env::objective_name(objective));
  return names;
}

reward::PriorityAssignment assignment_from_json(const json& names, const std::string& where) {
  if (!names.is_array()) throw std::invalid_argument(where + " must be an array of objective names");
  std::vector<int> order;
  for (const auto& n : names) {
    if (!n.is_string()) throw std::invalid_argument(where + " must contain objective names");
    order.push_back(env::objective_from_name(n.get<std::string>()));
  }
  if (order.size() != env::kNumObjectives) {
    throw std::invalid_argument(where + " must list all " + std::to_string(env::kNumObjectives) +
                                " objectives");
  }
  try {
    return reward::PriorityAssignment(std::move(order));
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument(where + " must name each objective exactly once");
  }
}

const char* time_form_name(env::TimeRewardForm form) {
  switch (form) {
    case env::TimeRewardForm::kLiteral:
      return "literal";
    case env::TimeRewardForm::kPenalty:
      return "penalty";
    case env::TimeRewardForm::kFasterThanLast:
      break;
  }
  return "faster_than_last";
}

env::TimeRewardForm time_form_from_name(const std::string& name) {
  if (name == "faster_than_last") return env::TimeRewardForm::kFasterThanLast;
  if (name == "literal") return env::TimeRewardForm::kLiteral;
  if (name == "penalty") return env::TimeRewardForm::kPenalty;
  throw std::invalid_argument("env.time_reward must be 'faster_than_last', 'literal' or 'penalty'");
}

const char* obstacle_form_name(env::ObstacleRewardForm form) {
  return form == env::ObstacleRewardForm::kPenaltyOnly ? "penalty_only" : "signed";
}

env::ObstacleRewardForm obstacle_form_from_name(const std::string& name) {
  if (name == "signed") return env::ObstacleRewardForm::kSigned;
  if (name == "penalty_only") return env::ObstacleRewardForm::kPenaltyOnly;
  throw std::invalid_argument("env.obstacle_reward must be 'signed' or 'penalty_only'");
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) {
    // Integer-valued fields must stay integers; float fields accept any number.
    return b.is_number_float() || !a.is_number_float();
  }
  return a.type() == b.type();
}

void check_against(const json& doc, const json& schema, const std::string& path) {
  if (!same_kind(doc, schema)) {
    throw std::invalid_argument("config key '" + path + "' has type " + doc.type_name() +
                                ", expected " + schema.type_name());
  }
  if (doc.is_object()) {
    for (const auto& [key, value] : doc.items()) {
      const std::string child = path.empty() ? key : path + "." + key;
      if (!schema.contains(key)) throw std::invalid_argument("unknown config key '" + child + "'");
      check_against(value, schema.at(key), child);
    }
  } else if (doc.is_array() && !schema.empty()) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      check_against(doc[i], schema.front(), path + "[" + std::to_string(i) + "]");
    }
  }
}

void merge_into(json& base, const json& patch) {
  for (const auto& [key, value] : patch.items()) {
    if (value.is_object() && base.contains(key) && base[key].is_object()) {
      merge_into(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

env::Vec2 vec2_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument(where + " must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

void flatten_keys(const json& node, const std::string& path, std::vector<ConfigKeyDoc>& out) {
  if (node.is_object()) {
    for (const auto& [key, value] : node.items()) {
      flatten_keys(value, path.empty() ? key : path + "." + key, out);
    }
    return;
  }
  out.push_back({path, node.dump(), ""});
}

}  // namespace

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kAhrm: return "ahrm";
    case Variant::kMhrm: return "mhrm";
    case Variant::kFhrm: return "fhrm";
    case Variant::kLs: return "ls";
  }
  return "?";
}

Variant variant_from_name(const std::string& name) {
  for (Variant v : {Variant::kAhrm, Variant::kMhrm, Variant::kFhrm, Variant::kLs}) {
    if (name == variant_name(v)) return v;
  }
  throw std::invalid_argument("unknown variant '" + name + "' (expected ahrm, mhrm, fhrm or ls)");
}

void RunConfig::validate() const {
  if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
  env.validate();
  ppo.validate();
  mechanism.validate();
  if (mhrm_assignments.size() != env::kNumPhases) {
    throw std::invalid_argument("mhrm needs one assignment per phase");
  }
  for (const auto& a : mhrm_assignments) {
    if (a.size() != env::kNumObjectives) throw std::invalid_argument("bad mhrm assignment");
  }
  if (fhrm_assignment.size() != env::kNumObjectives) {
    throw std::invalid_argument("bad fhrm assignment");
  }
}

json to_json(const RunConfig& c) {
  json doc;
  doc["schema_version"] = kConfigSchemaVersion;
  doc["variant"] = variant_name(c.variant);
  doc["seed"] = c.seed;
  doc["episodes"] = c.episodes;
  doc["output_dir"] = c.output_dir;
  doc["discard_constraint_episodes"] = c.discard_constraint_episodes;
  doc["success_credit"] = c.success_credit;

  const auto& e = c.env;
  doc["env"] = {
      {"center", {e.center.x(), e.center.y()}},
      {"target_radius", e.target_radius},
      {"pusher_radius", e.pusher_radius},
      {"obstacle_radius", e.obstacle_radius},
      {"obstacle_ring_radius", e.obstacle_ring_radius},
      {"obstacle_angles_deg", e.obstacle_angles_deg},
      {"phase1_radius", e.phase1_radius},
      {"contact_margin", e.contact_margin},
      {"max_speed", e.max_speed},
      {"dt", e.dt},
      {"max_steps", e.max_steps},
      {"pusher_start", {e.pusher_start.x(), e.pusher_start.y()}},
      {"start_jitter", e.start_jitter},
      {"time_reward", time_form_name(e.time_reward)},
      {"obstacle_reward", obstacle_form_name(e.obstacle_reward)},
  };

  const auto& p = c.ppo;
  doc["ppo"] = {
      {"gamma", p.gamma},
      {"horizon", p.horizon},
      {"entropy_coef", p.entropy_coef},
      {"clip", p.clip},
      {"gae_lambda", p.gae_lambda},
      {"minibatch", p.minibatch},
      {"lr", p.lr},
      {"epochs", p.epochs},
      {"value_coef", p.value_coef},
      {"normalize_advantages", p.normalize_advantages},
      {"optimizer", p.optimizer == ppo::OptimizerKind::kAdam ? "adam" : "sgd"},
      {"adam_beta1", p.adam_beta1},
      {"adam_beta2", p.adam_beta2},
      {"adam_eps", p.adam_eps},
      {"hidden", p.hidden},
      {"init_log_std", p.init_log_std},
  };

  const auto& m = c.mechanism;
  doc["mechanism"] = {
      {"visit_threshold", m.visit_threshold},
      {"window", m.window},
      {"tol", m.tol},
      {"redetermine", m.redetermine},
      {"alpha", m.transition.alpha},
      {"delta", m.transition.delta},
  };

  json mhrm;
  for (std::size_t k = 0; k < c.mhrm_assignments.size(); ++k) {
    mhrm["phase" + std::to_string(k + 1)] = assignment_to_json(c.mhrm_assignments[k]);
  }
  doc["mhrm"] = mhrm;
  doc["fhrm"] = assignment_to_json(c.fhrm_assignment);
  return doc;
}

RunConfig run_config_from_json(const json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
  const json schema = to_json(RunConfig{});
  check_against(doc, schema, "");
  if (doc.contains("schema_version") && doc["schema_version"].get<int>() != kConfigSchemaVersion) {
    throw std::invalid_argument("unsupported config schema_version " +
                                doc["schema_version"].dump());
  }

  json merged = schema;
  merge_into(merged, doc);

  RunConfig c;
  try {
    c.variant = variant_from_name(merged["variant"].get<std::string>());
    c.seed = merged["seed"].get<std::uint64_t>();
    c.episodes = merged["episodes"].get<int>();
    c.output_dir = merged["output_dir"].get<std::string>();
    c.discard_constraint_episodes = merged["discard_constraint_episodes"].get<bool>();
    c.success_credit = merged["success_credit"].get<bool>();

    const json& e = merged["env"];
    c.env.center = vec2_from(e["center"], "env.center");
    c.env.target_radius = e["target_radius"].get<double>();
    c.env.pusher_radius = e["pusher_radius"].get<double>();
    c.env.obstacle_radius = e["obstacle_radius"].get<double>();
    c.env.obstacle_ring_radius = e["obstacle_ring_radius"].get<double>();
    c.env.obstacle_angles_deg = e["obstacle_angles_deg"].get<std::vector<double>>();
    c.env.phase1_radius = e["phase1_radius"].get<double>();
    c.env.contact_margin = e["contact_margin"].get<double>();
    c.env.max_speed = e["max_speed"].get<double>();
    c.env.dt = e["dt"].get<double>();
    c.env.max_steps = e["max_steps"].get<int>();
    c.env.pusher_start = vec2_from(e["pusher_start"], "env.pusher_start");
    c.env.start_jitter = e["start_jitter"].get<double>();
    c.env.time_reward = time_form_from_name(e["time_reward"].get<std::string>());
    c.env.obstacle_reward = obstacle_form_from_name(e["obstacle_reward"].get<std::string>());

    const json& p = merged["ppo"];
    c.ppo.gamma = p["gamma"].get<double>();
    c.ppo.horizon = p["horizon"].get<int>();
    c.ppo.entropy_coef = p["entropy_coef"].get<double>();
    c.ppo.clip = p["clip"].get<double>();
    c.ppo.gae_lambda = p["gae_lambda"].get<double>();
    c.ppo.minibatch = p["minibatch"].get<int>();
    c.ppo.lr = p["lr"].get<double>();
    c.ppo.epochs = p["epochs"].get<int>();
    c.ppo.value_coef = p["value_coef"].get<double>();
    c.ppo.normalize_advantages = p["normalize_advantages"].get<bool>();
    const auto opt = p["optimizer"].get<std::string>();
    if (opt == "sgd") {
      c.ppo.optimizer = ppo::OptimizerKind::kSgd;
    } else if (opt == "adam") {
      c.ppo.optimizer = ppo::OptimizerKind::kAdam;
    } else {
      throw std::invalid_argument("ppo.optimizer must be 'sgd' or 'adam'");
    }
    c.ppo.adam_beta1 = p["adam_beta1"].get<double>();
    c.ppo.adam_beta2 = p["adam_beta2"].get<double>();
    c.ppo.adam_eps = p["adam_eps"].get<double>();
    c.ppo.hidden = p["hidden"].get<std::vector<int>>();
    c.ppo.init_log_std = p["init_log_std"].get<double>();

    const json& m = merged["mechanism"];
    c.mechanism.visit_threshold = m["visit_threshold"].get<int>();
    c.mechanism.window = m["window"].get<int>();
    c.mechanism.tol = m["tol"].get<double>();
    c.mechanism.redetermine = m["redetermine"].get<bool>();
    c.mechanism.transition.alpha = m["alpha"].get<double>();
    c.mechanism.transition.delta = m["delta"].get<double>();

    c.mhrm_assignments.clear();
    for (int k = 1; k <= env::kNumPhases; ++k) {
      const std::string key = "phase" + std::to_string(k);
      c.mhrm_assignments.push_back(assignment_from_json(merged["mhrm"][key], "mhrm." + key));
    }
    c.fhrm_assignment = assignment_from_json(merged["fhrm"], "fhrm");
  } catch (const json::exception& ex) {
    throw std::invalid_argument(std::string("malformed config: ") + ex.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& ex) {
    throw std::invalid_argument("config " + path.string() + " is not valid JSON: " + ex.what());
  }
  return run_config_from_json(doc);
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::invalid_argument("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);

  const json schema = to_json(RunConfig{});
  const json* schema_node = &schema;
  json* node = &doc;
  std::stringstream parts(key);
  std::string part;
  std::vector<std::string> path;
  while (std::getline(parts, part, '.')) path.push_back(part);
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (!schema_node->is_object() || !schema_node->contains(path[i])) {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
    schema_node = &schema_node->at(path[i]);
    if (!node->is_object()) *node = json::object();
    node = &(*node)[path[i]];
  }
  if (schema_node->is_object()) {
    throw std::invalid_argument("config key '" + key + "' is a section, not a value");
  }

  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;  // bare words are strings
  }
  if (!same_kind(value, *schema_node)) {
    throw std::invalid_argument("override for '" + key + "' must be of type " +
                                schema_node->type_name() + ", got " + value.type_name());
  }
  *node = std::move(value);
}

std::vector<ConfigKeyDoc> describe_config_keys() {
  static const std::map<std::string, std::string> notes = {
      {"variant", "ahrm | mhrm | fhrm | ls"},
      {"episodes", "training episodes per run"},
      {"ppo.gamma", "discount factor"},
      {"ppo.horizon", "experience horizon: steps per update"},
      {"ppo.entropy_coef", "entropy loss weight"},
      {"ppo.clip", "clip factor epsilon"},
      {"ppo.gae_lambda", "GAE factor"},
      {"ppo.minibatch", "mini-batch size"},
      {"ppo.lr", "learning rate"},
      {"ppo.epochs", "epochs per update"},
      {"ppo.value_coef", "value loss weight"},
      {"ppo.optimizer", "sgd | adam"},
      {"ppo.hidden", "hidden layer widths"},
      {"env.dt", "sample time in seconds per step"},
      {"env.max_steps", "episode step budget T"},
      {"env.time_reward", "faster_than_last | literal | penalty"},
      {"env.obstacle_reward", "signed (+1 when clear) | penalty_only (0 when clear)"},
      {"mechanism.visit_threshold", "P: phase visits before priorities are determined"},
      {"mechanism.window", "episodes per convergence window and threshold average"},
      {"mechanism.tol", "relative tolerance of the convergence test"},
      {"mechanism.redetermine", "re-sort priorities every P visits instead of freezing"},
      {"mechanism.alpha", "tanh slope of the phase transition"},
      {"mechanism.delta", "half-width of the transition band"},
      {"mhrm.phase1", "configured priority order, highest first"},
      {"fhrm", "fixed priority order for every phase"},
      {"discard_constraint_episodes", "drop gate-terminated episodes from PPO batches"},
      {"success_credit", "value a success as the remaining step budget at full reward"},
  };
  std::vector<ConfigKeyDoc> out;
  flatten_keys(to_json(RunConfig{}), "", out);
  for (auto& doc : out) {
    if (auto it = notes.find(doc.key); it != notes.end()) doc.note = it->second;
  }
  return out;
}

}  // namespace ahrm
