#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mfq/experiment_config.hpp"
#include "mfq/model_client.hpp"
#include "mfq/persona.hpp"
#include "mfq/population.hpp"
#include "mfq/questionnaire.hpp"
#include "mfq/record_store.hpp"

namespace mfq {

struct SampleContext {
  Cell cell;
  int sample_index = 0;
  int reask_limit = 1;
  /// When set, every request carries a seed derived from it and the item position.
  std::optional<std::uint64_t> seed;
  PromptTemplates templates;
};

struct SampleResult {
  SurveySample sample;
  std::vector<AnswerRecord> records;  // canonical item order
  bool client_failure = false;
};

/// Per-request seed: a pure function of the run seed and the request's position.
std::uint64_t request_seed(std::uint64_t run_seed, const Cell& cell, int sample_index,
                           std::string_view item_id, int reask);

/// Surveys every item once (plus re-asks for unparseable replies). Items run
/// concurrently up to the endpoint's max_concurrent. After a client error the items
/// not yet requested are recorded as skipped and the sample is Partial.
SampleResult run_survey_sample(ChatClient& client, const Persona& persona, const Questionnaire& q,
                               const SampleContext& ctx);

struct CellSummary {
  Cell cell;
  int expected = 0;
  int complete = 0;
  int partial = 0;
  int resumed = 0;  // already in the store before this run
};

struct RunSummary {
  std::vector<CellSummary> cells;
  std::size_t surveys = 0;          // committed samples in the store
  std::size_t complete_surveys = 0;
  std::size_t answer_records = 0;   // written by this run
  std::size_t exchanges = 0;        // written by this run
  std::size_t client_failures = 0;  // samples of this run left Partial by client errors
  bool stopped = false;
};

struct RunOptions {
  /// Checked between samples; returning true ends the run cleanly.
  std::function<bool()> stop_requested;
  std::ostream* log = nullptr;
};

/// Runs every (endpoint, persona) cell up to samples_per_cell. Resumes an existing
/// store: committed samples are skipped. Endpoints with a `stub` script must already
/// have a base_url (see StubFleet).
RunSummary run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Per-cell progress of a store against the config embedded in its header.
RunSummary store_status(const std::filesystem::path& store);

}  // namespace mfq
