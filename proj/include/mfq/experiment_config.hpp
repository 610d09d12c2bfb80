#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mfq/model_client.hpp"
#include "mfq/persona.hpp"
#include "mfq/stub_scripts.hpp"
#include "mfq/stub_server.hpp"

namespace mfq {

struct EndpointConfig {
  ModelEndpoint endpoint;
  /// Served in-process instead of contacting base_url.
  std::optional<StubScript> stub;
};

struct ExperimentConfig {
  std::vector<EndpointConfig> endpoints;
  std::vector<Persona> personas;
  int samples_per_cell = 50;
  std::filesystem::path questionnaire_path;
  int reask_limit = 1;
  std::filesystem::path output_path;
  std::optional<std::uint64_t> seed;
  PromptTemplates templates;
};

/// Relative paths in the document resolve against `base_dir`.
ExperimentConfig load_experiment_config(std::string_view source, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config_file(const std::filesystem::path& path);

/// Throws ConfigError listing every violation.
void validate(const ExperimentConfig& config);

/// Canonical description used for the store header and its hash. Excludes the output
/// path and the ephemeral URLs of stub endpoints.
nlohmann::json describe(const ExperimentConfig& config);
std::string config_hash(const ExperimentConfig& config, std::string_view questionnaire_text);

/// Running stub servers for every stub endpoint of a config.
class StubFleet {
 public:
  /// Starts servers and points the matching endpoints' base_url at them.
  explicit StubFleet(ExperimentConfig& config);
  std::size_t size() const noexcept { return servers_.size(); }
  const std::vector<std::unique_ptr<StubServer>>& servers() const noexcept { return servers_; }

 private:
  std::vector<std::unique_ptr<StubServer>> servers_;
};

}  // namespace mfq
