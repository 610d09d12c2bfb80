#include "mfq/record_store.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "mfq/error.hpp"

namespace mfq {

using json = nlohmann::json;

namespace {

json exchange_json(const CompletionExchange& ex) {
  json j = {{"attempt", ex.attempt},
            {"endpoint", ex.endpoint_name},
            {"system", ex.system_text},
            {"user", ex.user_text},
            {"raw", ex.raw_response},
            {"latency_ms", static_cast<double>(ex.latency.count()) / 1000.0},
            {"timestamp", ex.timestamp}};
  if (ex.error) j["error"] = *ex.error;
  if (ex.seed) j["seed"] = *ex.seed;
  return j;
}

CompletionExchange exchange_from(const json& j) {
  CompletionExchange ex;
  ex.attempt = j.at("attempt").get<int>();
  ex.endpoint_name = j.value("endpoint", "");
  ex.system_text = j.at("system").get<std::string>();
  ex.user_text = j.at("user").get<std::string>();
  ex.raw_response = j.at("raw").get<std::string>();
  ex.latency = std::chrono::microseconds(
      static_cast<std::int64_t>(j.value("latency_ms", 0.0) * 1000.0 + 0.5));
  ex.timestamp = j.value("timestamp", "");
  if (j.contains("error")) ex.error = j["error"].get<std::string>();
  if (j.contains("seed")) ex.seed = j["seed"].get<std::uint64_t>();
  return ex;
}

std::optional<ParseStrategy> strategy_from(const std::string& s) {
  for (auto st : {ParseStrategy::BracketDigit, ParseStrategy::BareDigit, ParseStrategy::LabelPhrase})
    if (to_string(st) == s) return st;
  return std::nullopt;
}

std::optional<FailureKind> failure_from(const std::string& s) {
  for (auto k : {FailureKind::Unparseable, FailureKind::Ambiguous, FailureKind::ClientError,
                 FailureKind::Skipped})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

Cell cell_of(const json& j) { return {j.at("endpoint").get<std::string>(), j.at("persona").get<std::string>()}; }

}  // namespace

std::string_view to_string(FailureKind k) {
  switch (k) {
    case FailureKind::Unparseable: return "unparseable";
    case FailureKind::Ambiguous: return "ambiguous";
    case FailureKind::ClientError: return "client_error";
    case FailureKind::Skipped: return "skipped";
  }
  return "?";
}

json to_json(const StoreHeader& h) {
  return {{"type", "header"},
          {"schema_version", h.schema_version},
          {"config_hash", h.config_hash},
          {"config", h.config},
          {"questionnaire", h.questionnaire}};
}

json to_json(const AnswerRecord& r) {
  json j = {{"type", "answer"},
            {"endpoint", r.cell.endpoint},
            {"persona", r.cell.persona},
            {"sample", r.sample_index},
            {"item", r.item_id},
            {"reasks_used", r.reasks_used}};
  if (r.parsed) {
    j["parsed"] = {{"score", r.parsed->score},
                   {"strategy", to_string(r.parsed->strategy)},
                   {"span", r.parsed->matched_span},
                   {"offset", r.parsed->offset}};
  } else if (r.failure) {
    json f = {{"kind", to_string(r.failure->kind)}};
    if (!r.failure->candidates.empty()) f["candidates"] = r.failure->candidates;
    if (!r.failure->detail.empty()) f["detail"] = r.failure->detail;
    j["failure"] = std::move(f);
  }
  json exs = json::array();
  for (const auto& ex : r.exchanges) exs.push_back(exchange_json(ex));
  j["exchanges"] = std::move(exs);
  return j;
}

json to_json(const SampleCommit& c) {
  return {{"type", "sample"},
          {"endpoint", c.cell.endpoint},
          {"persona", c.cell.persona},
          {"sample", c.sample_index},
          {"complete", c.missing.empty()},
          {"missing", c.missing}};
}

AnswerRecord answer_from_json(const json& j) {
  AnswerRecord r;
  r.cell = cell_of(j);
  r.sample_index = j.at("sample").get<int>();
  r.item_id = j.at("item").get<std::string>();
  r.reasks_used = j.value("reasks_used", 0);
  if (j.contains("parsed")) {
    const auto& p = j["parsed"];
    ParsedAnswer a;
    a.score = p.at("score").get<int>();
    if (a.score < 0 || a.score > kScaleMax) throw json::other_error::create(501, "score out of range", &p);
    const auto st = strategy_from(p.at("strategy").get<std::string>());
    if (!st) throw json::other_error::create(501, "unknown strategy", &p);
    a.strategy = *st;
    a.matched_span = p.value("span", "");
    a.offset = p.value("offset", std::size_t{0});
    r.parsed = std::move(a);
  } else if (j.contains("failure")) {
    const auto& f = j["failure"];
    AnswerFailure fail;
    const auto kind = failure_from(f.at("kind").get<std::string>());
    if (!kind) throw json::other_error::create(501, "unknown failure kind", &f);
    fail.kind = *kind;
    if (f.contains("candidates")) fail.candidates = f["candidates"].get<std::vector<int>>();
    fail.detail = f.value("detail", "");
    r.failure = std::move(fail);
  }
  for (const auto& ex : j.at("exchanges")) r.exchanges.push_back(exchange_from(ex));
  return r;
}

StoreContents read_store(const std::filesystem::path& path) {
  StoreContents out;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open store '" + path.string() + "'");

  std::map<std::pair<Cell, int>, std::vector<AnswerRecord>> pending;
  std::string line;
  std::uintmax_t offset = 0;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const bool terminated = !in.eof();
    const std::uintmax_t next = offset + line.size() + (terminated ? 1 : 0);
    const std::string where = "line " + std::to_string(line_no);
    if (!terminated) {
      if (!line.empty()) out.warnings.push_back(where + ": truncated final record skipped");
      break;
    }
    offset = next;
    if (line.empty()) continue;

    const auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("type")) {
      out.warnings.push_back(where + ": corrupt record skipped");
      continue;
    }
    try {
      const auto type = j["type"].get<std::string>();
      if (type == "header") {
        if (out.header) {
          out.warnings.push_back(where + ": duplicate header skipped");
          continue;
        }
        StoreHeader h;
        h.schema_version = j.at("schema_version").get<int>();
        h.config_hash = j.at("config_hash").get<std::string>();
        h.config = j.at("config");
        h.questionnaire = j.at("questionnaire").get<std::string>();
        out.header = std::move(h);
        out.committed_bytes = offset;
      } else if (type == "answer") {
        auto r = answer_from_json(j);
        pending[{r.cell, r.sample_index}].push_back(std::move(r));
      } else if (type == "sample") {
        SampleCommit c;
        c.cell = cell_of(j);
        c.sample_index = j.at("sample").get<int>();
        c.missing = j.at("missing").get<std::vector<std::string>>();
        auto it = pending.find({c.cell, c.sample_index});
        if (it != pending.end()) {
          for (auto& r : it->second) out.answers.push_back(std::move(r));
          pending.erase(it);
        }
        out.commits.push_back(std::move(c));
        out.committed_bytes = offset;
      } else {
        out.warnings.push_back(where + ": unknown record type '" + type + "' skipped");
      }
    } catch (const json::exception& e) {
      out.warnings.push_back(where + ": malformed record skipped (" + e.what() + ")");
    }
  }
  for (const auto& [key, records] : pending)
    out.warnings.push_back("uncommitted records for " + key.first.label() + " sample " +
                           std::to_string(key.second) + " skipped (" +
                           std::to_string(records.size()) + " records)");
  return out;
}

StoreWriter::StoreWriter(const std::filesystem::path& path, const StoreHeader& header) : path_(path) {
  std::error_code ec;
  const bool exists = std::filesystem::exists(path, ec) && std::filesystem::file_size(path, ec) > 0;
  if (exists) {
    auto contents = read_store(path);
    if (!contents.header) throw IoError("'" + path.string() + "' is not a survey store (no header)");
    if (contents.header->schema_version != header.schema_version)
      throw ConfigError("store schema version " + std::to_string(contents.header->schema_version) +
                        " does not match " + std::to_string(header.schema_version));
    if (contents.header->config_hash != header.config_hash)
      throw ConfigError("store '" + path.string() + "' was written by a different config (hash " +
                        contents.header->config_hash + ", current " + header.config_hash + ")");
    warnings_ = std::move(contents.warnings);
    existing_ = std::move(contents.commits);
    if (std::filesystem::file_size(path) > contents.committed_bytes) {
      std::filesystem::resize_file(path, contents.committed_bytes, ec);
      if (ec) throw IoError("cannot repair store tail: " + ec.message());
      warnings_.push_back("dropped uncommitted tail after byte " + std::to_string(contents.committed_bytes));
    }
    out_.open(path, std::ios::binary | std::ios::app);
    if (!out_) throw IoError("cannot open store '" + path.string() + "' for append");
  } else {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError("cannot create store '" + path.string() + "'");
    out_ << to_json(header).dump() << '\n';
    out_.flush();
    if (!out_) throw IoError("cannot write store header to '" + path.string() + "'");
  }
}

void StoreWriter::append_sample(const std::vector<AnswerRecord>& records, const SampleCommit& commit) {
  std::string block;
  for (const auto& r : records) block += to_json(r).dump() + '\n';
  block += to_json(commit).dump() + '\n';
  std::lock_guard lock(mutex_);
  out_.write(block.data(), static_cast<std::streamsize>(block.size()));
  out_.flush();
  if (!out_) throw IoError("write to store '" + path_.string() + "' failed");
}

std::vector<Population> build_populations(const StoreContents& contents) {
  std::vector<Population> pops;
  std::map<Cell, std::size_t> index;
  std::map<std::pair<Cell, int>, SurveySample*> samples;
  for (const auto& c : contents.commits) {
    auto [it, fresh] = index.try_emplace(c.cell, pops.size());
    if (fresh) pops.push_back(Population{c.cell, {}});
    SurveySample s;
    s.cell = c.cell;
    s.sample_index = c.sample_index;
    s.missing = c.missing;
    pops[it->second].samples.push_back(std::move(s));
  }
  for (auto& p : pops) {
    std::sort(p.samples.begin(), p.samples.end(),
              [](const auto& a, const auto& b) { return a.sample_index < b.sample_index; });
    for (auto& s : p.samples) samples[{s.cell, s.sample_index}] = &s;
  }
  for (const auto& r : contents.answers) {
    if (!r.parsed) continue;
    const auto it = samples.find({r.cell, r.sample_index});
    if (it != samples.end()) it->second->answers[r.item_id] = r.parsed->score;
  }
  return pops;
}

std::vector<Population> load_populations(const std::filesystem::path& path,
                                         std::vector<std::string>* warnings) {
  auto contents = read_store(path);
  if (warnings) warnings->insert(warnings->end(), contents.warnings.begin(), contents.warnings.end());
  return build_populations(contents);
}

Questionnaire store_questionnaire(const StoreContents& contents) {
  if (!contents.header) throw IoError("store has no header");
  return load_questionnaire(contents.header->questionnaire);
}

}  // namespace mfq
