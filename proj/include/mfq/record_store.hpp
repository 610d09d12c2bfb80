#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfq/model_client.hpp"
#include "mfq/population.hpp"
#include "mfq/questionnaire.hpp"
#include "mfq/response_parsing.hpp"

namespace mfq {

// Store layout: JSON lines. The first line is the header; each sample is a run of
// `answer` lines (canonical item order) closed by one `sample` commit line.
inline constexpr int kStoreSchemaVersion = 1;

struct StoreHeader {
  int schema_version = kStoreSchemaVersion;
  std::string config_hash;
  nlohmann::json config;
  std::string questionnaire;  // verbatim questionnaire document the run used
};

enum class FailureKind { Unparseable, Ambiguous, ClientError, Skipped };

std::string_view to_string(FailureKind k);

struct AnswerFailure {
  FailureKind kind = FailureKind::Unparseable;
  std::vector<int> candidates;  // Ambiguous only
  std::string detail;
};

/// Final outcome for one (cell, sample, item), with every attempt that led to it.
struct AnswerRecord {
  Cell cell;
  int sample_index = 0;
  std::string item_id;
  std::vector<CompletionExchange> exchanges;
  std::optional<ParsedAnswer> parsed;
  std::optional<AnswerFailure> failure;
  int reasks_used = 0;
};

struct SampleCommit {
  Cell cell;
  int sample_index = 0;
  std::vector<std::string> missing;
};

nlohmann::json to_json(const StoreHeader& h);
nlohmann::json to_json(const AnswerRecord& r);
nlohmann::json to_json(const SampleCommit& c);
AnswerRecord answer_from_json(const nlohmann::json& j);

struct StoreContents {
  std::optional<StoreHeader> header;
  std::vector<AnswerRecord> answers;  // committed samples only
  std::vector<SampleCommit> commits;  // in file order
  std::vector<std::string> warnings;
  std::uintmax_t committed_bytes = 0;  // offset just past the last commit line (or header)
};

/// Tolerates corrupt or truncated lines: they are skipped and reported in `warnings`.
StoreContents read_store(const std::filesystem::path& path);

/// Serialized, append-only writer. Opening an existing store checks its config hash
/// and drops any uncommitted tail left by an interrupted run.
class StoreWriter {
 public:
  StoreWriter(const std::filesystem::path& path, const StoreHeader& header);

  /// Appends a sample's records and its commit line in one flushed write.
  void append_sample(const std::vector<AnswerRecord>& records, const SampleCommit& commit);

  /// Commits recovered from the file at open time.
  const std::vector<SampleCommit>& existing() const noexcept { return existing_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::mutex mutex_;
  std::vector<SampleCommit> existing_;
  std::vector<std::string> warnings_;
};

/// Populations in order of first appearance, samples sorted by index.
std::vector<Population> build_populations(const StoreContents& contents);
std::vector<Population> load_populations(const std::filesystem::path& path,
                                         std::vector<std::string>* warnings = nullptr);

/// Questionnaire embedded in the store header.
Questionnaire store_questionnaire(const StoreContents& contents);

}  // namespace mfq
