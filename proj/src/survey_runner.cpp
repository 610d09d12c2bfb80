#include "mfq/survey_runner.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <ostream>
#include <set>
#include <thread>

#include "mfq/error.hpp"
#include "mfq/hashing.hpp"
#include "mfq/response_parsing.hpp"

namespace mfq {

std::uint64_t request_seed(std::uint64_t run_seed, const Cell& cell, int sample_index,
                           std::string_view item_id, int reask) {
  std::uint64_t h = hash_combine(run_seed, fnv1a64(cell.endpoint));
  h = hash_combine(h, fnv1a64(cell.persona));
  h = hash_combine(h, static_cast<std::uint64_t>(sample_index));
  h = hash_combine(h, fnv1a64(item_id));
  h = hash_combine(h, static_cast<std::uint64_t>(reask));
  // Keep it representable as a signed 64-bit JSON integer for picky servers.
  return h >> 1;
}

SampleResult run_survey_sample(ChatClient& client, const Persona& persona, const Questionnaire& q,
                               const SampleContext& ctx) {
  const auto& items = q.items();
  const std::string system_text = render_system_prompt(persona, ctx.templates);

  SampleResult result;
  result.records.resize(items.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};

  auto work = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      const auto& item = items[i];
      const auto& scale = q.scale(item.part);
      AnswerRecord& rec = result.records[i];
      rec.cell = ctx.cell;
      rec.sample_index = ctx.sample_index;
      rec.item_id = item.id;
      if (failed.load()) {
        rec.failure = AnswerFailure{FailureKind::Skipped, {}, "endpoint failed earlier in this sample"};
        continue;
      }
      const std::string user_text = render_question_prompt(item, scale);
      for (int reask = 0;; ++reask) {
        CompletionRequest req{system_text, user_text, std::nullopt};
        if (ctx.seed) req.seed = request_seed(*ctx.seed, ctx.cell, ctx.sample_index, item.id, reask);
        rec.reasks_used = reask;
        CompletionExchange ex;
        try {
          ex = client.complete(req, [&](const CompletionExchange& e) { rec.exchanges.push_back(e); });
        } catch (const ClientError& e) {
          rec.failure = AnswerFailure{FailureKind::ClientError, {}, e.what()};
          failed = true;
          break;
        }
        const ParseResult parsed = parse_likert(ex.raw_response, scale);
        if (const auto* a = std::get_if<ParsedAnswer>(&parsed)) {
          rec.parsed = *a;
          break;
        }
        if (reask < ctx.reask_limit) continue;
        if (const auto* amb = std::get_if<Ambiguous>(&parsed))
          rec.failure = AnswerFailure{FailureKind::Ambiguous, amb->candidates, {}};
        else
          rec.failure = AnswerFailure{FailureKind::Unparseable, {}, {}};
        break;
      }
    }
  };

  const int workers =
      std::clamp(client.endpoint().limits.max_concurrent, 1, static_cast<int>(items.size()));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  result.sample.cell = ctx.cell;
  result.sample.sample_index = ctx.sample_index;
  for (const auto& rec : result.records) {
    if (rec.parsed)
      result.sample.answers[rec.item_id] = rec.parsed->score;
    else
      result.sample.missing.push_back(rec.item_id);
  }
  result.client_failure = failed.load();
  return result;
}

RunSummary run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  validate(config);
  for (const auto& ec : config.endpoints)
    if (ec.endpoint.base_url.empty())
      throw ConfigError("endpoint '" + ec.endpoint.name + "' has no base_url (stub not started?)");

  std::string qtext;
  try {
    qtext = read_text_file(config.questionnaire_path);
  } catch (const IoError& e) {
    throw ConfigError(std::string("questionnaire: ") + e.what());
  }
  const Questionnaire q = load_questionnaire(qtext);

  StoreHeader header;
  header.config_hash = config_hash(config, qtext);
  header.config = describe(config);
  header.questionnaire = qtext;
  StoreWriter writer(config.output_path, header);
  if (options.log)
    for (const auto& w : writer.warnings()) *options.log << "warning: " << w << '\n';

  std::map<Cell, std::pair<int, int>> done;  // cell -> (complete, partial)
  std::set<std::pair<Cell, int>> committed;
  for (const auto& c : writer.existing()) {
    committed.insert({c.cell, c.sample_index});
    auto& d = done[c.cell];
    (c.missing.empty() ? d.first : d.second)++;
  }

  RunSummary summary;
  for (const auto& ec : config.endpoints) {
    ChatClient client(ec.endpoint);
    for (const auto& persona : config.personas) {
      CellSummary cs;
      cs.cell = {ec.endpoint.name, persona.id};
      cs.expected = config.samples_per_cell;
      cs.complete = done[cs.cell].first;
      cs.partial = done[cs.cell].second;
      cs.resumed = cs.complete + cs.partial;
      for (int s = 0; s < config.samples_per_cell && !summary.stopped; ++s) {
        if (committed.count({cs.cell, s})) continue;
        if (options.stop_requested && options.stop_requested()) {
          summary.stopped = true;
          break;
        }
        SampleContext ctx{cs.cell, s, config.reask_limit, config.seed, config.templates};
        auto result = run_survey_sample(client, persona, q, ctx);
        writer.append_sample(result.records, SampleCommit{cs.cell, s, result.sample.missing});
        summary.answer_records += result.records.size();
        for (const auto& r : result.records) summary.exchanges += r.exchanges.size();
        (result.sample.complete() ? cs.complete : cs.partial)++;
        if (result.client_failure) ++summary.client_failures;
      }
      if (options.log)
        *options.log << cs.cell.label() << ": " << cs.complete << " complete, " << cs.partial
                     << " partial of " << cs.expected << '\n';
      summary.surveys += static_cast<std::size_t>(cs.complete + cs.partial);
      summary.complete_surveys += static_cast<std::size_t>(cs.complete);
      summary.cells.push_back(std::move(cs));
      if (summary.stopped) break;
    }
    if (summary.stopped) break;
  }
  return summary;
}

RunSummary store_status(const std::filesystem::path& store) {
  const auto contents = read_store(store);
  if (!contents.header) throw IoError("'" + store.string() + "' is not a survey store");
  const auto& cfg = contents.header->config;
  const int expected = cfg.value("samples_per_cell", 0);

  std::map<Cell, CellSummary> by_cell;
  std::vector<Cell> order;
  try {
    for (const auto& e : cfg.at("endpoints"))
      for (const auto& p : cfg.at("personas")) {
        Cell c{e.at("name").get<std::string>(), p.at("id").get<std::string>()};
        by_cell[c] = CellSummary{c, expected, 0, 0, 0};
        order.push_back(c);
      }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("store header config is malformed: ") + e.what());
  }
  RunSummary summary;
  for (const auto& c : contents.commits) {
    auto [it, fresh] = by_cell.try_emplace(c.cell, CellSummary{c.cell, 0, 0, 0, 0});
    if (fresh) order.push_back(c.cell);
    (c.missing.empty() ? it->second.complete : it->second.partial)++;
    it->second.resumed++;
  }
  for (const auto& c : order) {
    const auto& cs = by_cell[c];
    summary.surveys += static_cast<std::size_t>(cs.complete + cs.partial);
    summary.complete_surveys += static_cast<std::size_t>(cs.complete);
    summary.cells.push_back(cs);
  }
  summary.answer_records = contents.answers.size();
  for (const auto& r : contents.answers) summary.exchanges += r.exchanges.size();
  return summary;
}

}  // namespace mfq
