#include "mfq/experiment_config.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include <yaml-cpp/yaml.h>

#include "mfq/error.hpp"
#include "mfq/hashing.hpp"
#include "mfq/questionnaire.hpp"

namespace mfq {

using json = nlohmann::json;

namespace {

template <typename T>
T get(const YAML::Node& parent, const char* field, T fallback) {
  const YAML::Node n = parent[field];
  if (!n) return fallback;
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("line " + std::to_string(n.Mark().line + 1) + ": field '" + field +
                      "' has the wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

ExperimentConfig load_experiment_config(std::string_view source, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(source));
  } catch (const YAML::Exception& e) {
    throw ConfigError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) throw ConfigError("experiment config must be a mapping");

  ExperimentConfig cfg;
  cfg.samples_per_cell = get<int>(root, "samples_per_cell", 50);
  cfg.reask_limit = get<int>(root, "reask_limit", 1);
  cfg.questionnaire_path = resolve(base_dir, get<std::string>(root, "questionnaire", ""));
  if (cfg.questionnaire_path.empty()) cfg.questionnaire_path = bundled_questionnaire_path();
  cfg.output_path = resolve(base_dir, get<std::string>(root, "output", ""));
  if (root["seed"]) cfg.seed = get<std::uint64_t>(root, "seed", 0);
  if (const YAML::Node prompts = root["prompts"])
    cfg.templates.persona = get<std::string>(prompts, "persona", cfg.templates.persona);

  const YAML::Node eps = root["endpoints"];
  if (eps && !eps.IsSequence()) throw ConfigError("'endpoints' must be a list");
  for (const auto& e : eps) {
    EndpointConfig ec;
    auto& ep = ec.endpoint;
    ep.name = get<std::string>(e, "name", "");
    ep.base_url = get<std::string>(e, "base_url", "");
    ep.model_id = get<std::string>(e, "model", ep.name);
    ep.decoding.temperature = get<double>(e, "temperature", ep.decoding.temperature);
    ep.decoding.max_tokens = get<int>(e, "max_tokens", ep.decoding.max_tokens);
    ep.limits.max_concurrent = get<int>(e, "max_concurrent", ep.limits.max_concurrent);
    ep.limits.timeout = std::chrono::milliseconds(get<long>(e, "timeout_ms", ep.limits.timeout.count()));
    ep.limits.max_retries = get<int>(e, "max_retries", ep.limits.max_retries);
    if (const YAML::Node b = e["backoff_ms"]) {
      ep.limits.backoff.clear();
      for (const auto& v : b) ep.limits.backoff.emplace_back(v.as<long>());
    }
    ep.api_key_env = get<std::string>(e, "api_key_env", "");
    if (const YAML::Node s = e["stub"]) {
      StubScript script;
      script.name = get<std::string>(s, "script", script.name);
      script.value = get<int>(s, "value", script.value);
      script.spread = get<int>(s, "spread", script.spread);
      ec.stub = script;
      if (!e["backoff_ms"]) ep.limits.backoff.clear();
    }
    cfg.endpoints.push_back(std::move(ec));
  }

  const YAML::Node personas = root["personas"];
  if (personas && !personas.IsSequence()) throw ConfigError("'personas' must be a list");
  for (const auto& p : personas) {
    Persona persona;
    persona.id = get<std::string>(p, "id", "");
    const auto ideology = get<std::string>(p, "ideology", "");
    if (!ideology.empty() && ideology != "none") {
      persona.ideology = parse_ideology(ideology);
      if (!persona.ideology)
        throw ConfigError("persona '" + persona.id + "': ideology must be conservative|moderate|liberal|none");
    }
    if (p["system_text"]) persona.system_text = get<std::string>(p, "system_text", "");
    cfg.personas.push_back(std::move(persona));
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_experiment_config_file(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return load_experiment_config(text, path.parent_path());
}

void validate(const ExperimentConfig& cfg) {
  std::vector<std::string> errors;
  if (cfg.endpoints.empty()) errors.push_back("no endpoints configured");
  if (cfg.personas.empty()) errors.push_back("no personas configured");
  if (cfg.samples_per_cell < 1) errors.push_back("samples_per_cell must be >= 1");
  if (cfg.reask_limit < 0) errors.push_back("reask_limit must be >= 0");
  if (cfg.output_path.empty()) errors.push_back("output path is not set");

  std::set<std::string> names;
  for (const auto& ec : cfg.endpoints) {
    const auto& ep = ec.endpoint;
    const std::string who = "endpoint '" + ep.name + "'";
    if (ep.name.empty()) errors.push_back("endpoint with empty name");
    if (!names.insert(ep.name).second) errors.push_back(who + " declared twice");
    if (!ec.stub && ep.base_url.empty()) errors.push_back(who + ": base_url is required");
    if (ep.decoding.temperature < 0) errors.push_back(who + ": temperature must be >= 0");
    if (ep.decoding.max_tokens < 1) errors.push_back(who + ": max_tokens must be >= 1");
    if (ep.limits.max_concurrent < 1) errors.push_back(who + ": max_concurrent must be >= 1");
    if (ep.limits.max_retries < 0) errors.push_back(who + ": max_retries must be >= 0");
    if (ep.limits.timeout.count() <= 0) errors.push_back(who + ": timeout_ms must be > 0");
    if (ec.stub) {
      const auto& known = stub_script_names();
      if (std::find(known.begin(), known.end(), ec.stub->name) == known.end())
        errors.push_back(who + ": unknown stub script '" + ec.stub->name + "'");
      if (ec.stub->name == "constant" && (ec.stub->value < 0 || ec.stub->value > kScaleMax))
        errors.push_back(who + ": stub value must be 0..5");
    }
  }
  std::set<std::string> ids;
  for (const auto& p : cfg.personas) {
    if (p.id.empty()) errors.push_back("persona with empty id");
    if (p.id.find('/') != std::string::npos) errors.push_back("persona id '" + p.id + "' contains '/'");
    if (!ids.insert(p.id).second) errors.push_back("persona '" + p.id + "' declared twice");
  }
  if (!errors.empty()) {
    std::string msg;
    for (const auto& e : errors) msg += (msg.empty() ? "" : "; ") + e;
    throw ConfigError(msg);
  }
}

json describe(const ExperimentConfig& cfg) {
  json eps = json::array();
  for (const auto& ec : cfg.endpoints) {
    const auto& ep = ec.endpoint;
    json e = {{"name", ep.name},
              {"model", ep.model_id},
              {"temperature", ep.decoding.temperature},
              {"max_tokens", ep.decoding.max_tokens},
              {"max_retries", ep.limits.max_retries}};
    if (ec.stub)
      e["stub"] = {{"script", ec.stub->name}, {"value", ec.stub->value}, {"spread", ec.stub->spread}};
    else
      e["base_url"] = ep.base_url;
    eps.push_back(std::move(e));
  }
  json personas = json::array();
  for (const auto& p : cfg.personas) {
    json j = {{"id", p.id}};
    if (p.ideology) j["ideology"] = std::string(to_string(*p.ideology));
    if (p.system_text) j["system_text"] = *p.system_text;
    personas.push_back(std::move(j));
  }
  json out = {{"endpoints", std::move(eps)},
              {"personas", std::move(personas)},
              {"samples_per_cell", cfg.samples_per_cell},
              {"reask_limit", cfg.reask_limit},
              {"persona_template", cfg.templates.persona}};
  out["seed"] = cfg.seed ? json(*cfg.seed) : json(nullptr);
  return out;
}

std::string config_hash(const ExperimentConfig& cfg, std::string_view questionnaire_text) {
  // samples_per_cell stays out so a finished run can be extended in place.
  auto d = describe(cfg);
  d.erase("samples_per_cell");
  const std::uint64_t h = fnv1a64(questionnaire_text, fnv1a64(d.dump()));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

StubFleet::StubFleet(ExperimentConfig& cfg) {
  for (auto& ec : cfg.endpoints) {
    if (!ec.stub) continue;
    StubScript script = *ec.stub;
    script.seed = hash_combine(cfg.seed.value_or(0), fnv1a64(ec.endpoint.name));
    auto server = std::make_unique<StubServer>(make_stub_policy(script),
                                               ec.endpoint.limits.max_concurrent + 4);
    ec.endpoint.base_url = server->base_url();
    servers_.push_back(std::move(server));
  }
}

}  // namespace mfq
